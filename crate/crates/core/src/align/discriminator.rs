//! The adversarial discriminator: a feed-forward net with two hidden
//! layers, leaky-ReLU activations and a logistic output, trained with
//! plain SGD from hand-derived gradients.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const LEAKY_SLOPE: f64 = 0.2;

/// Numerically stable logistic function.
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

fn leaky(a: f64) -> f64 {
    if a > 0.0 {
        a
    } else {
        LEAKY_SLOPE * a
    }
}

fn leaky_grad(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Feed-forward discriminator with layer sizes `[d, hidden, hidden, 1]`.
/// Outputs the probability that its input is a mapped source vector.
#[derive(Debug, Clone)]
pub struct Discriminator {
    /// Per layer: in_features x out_features.
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    input_dropout: f64,
}

/// Activations retained by a forward pass for backpropagation.
pub struct ForwardCache {
    /// Input after dropout scaling (the layer-0 input).
    input: Array2<f64>,
    /// Dropout keep-mask scaled by 1/(1-p); empty when dropout was off.
    dropout_scale: Option<Array2<f64>>,
    /// Pre-activations per layer.
    pre: Vec<Array2<f64>>,
    /// Post-activations per hidden layer.
    hidden: Vec<Array2<f64>>,
}

impl ForwardCache {
    /// Final-layer logits, one per input row.
    pub fn logits(&self) -> Array1<f64> {
        let last = self.pre.last().expect("at least one layer");
        last.index_axis(Axis(1), 0).to_owned()
    }

    pub fn probabilities(&self) -> Array1<f64> {
        self.logits().mapv(sigmoid)
    }
}

/// Gradients for every discriminator parameter plus the loss gradient
/// with respect to the (pre-dropout) input batch.
pub struct DiscriminatorGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub input: Array2<f64>,
}

impl Discriminator {
    /// Fresh discriminator with the given input dimension and hidden
    /// width, initialized like a torch Linear stack: U(-1/sqrt(fan_in), ..).
    pub fn new(dim: usize, hidden: usize, input_dropout: f64, rng: &mut ChaCha8Rng) -> Self {
        let sizes = [dim, hidden, hidden, 1];
        let mut weights = Vec::with_capacity(3);
        let mut biases = Vec::with_capacity(3);
        for k in 0..3 {
            let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..bound));
            let b = Array1::from_shape_fn(fan_out, |_| rng.gen_range(-bound..bound));
            weights.push(w);
            biases.push(b);
        }
        Discriminator {
            weights,
            biases,
            input_dropout,
        }
    }

    /// Build directly from explicit layers; used by tests that need a
    /// hand-crafted response surface.
    pub fn from_layers(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        input_dropout: f64,
    ) -> Self {
        assert_eq!(weights.len(), biases.len());
        Discriminator {
            weights,
            biases,
            input_dropout,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    /// Forward pass. `rng` enables inverted input dropout (training mode);
    /// `None` runs deterministically (evaluation mode).
    pub fn forward(&self, input: ArrayView2<'_, f64>, rng: Option<&mut ChaCha8Rng>) -> ForwardCache {
        let (x0, dropout_scale) = match rng {
            Some(rng) if self.input_dropout > 0.0 => {
                let keep = 1.0 - self.input_dropout;
                let scale = Array2::from_shape_fn(input.raw_dim(), |_| {
                    if rng.gen::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                (&input * &scale, Some(scale))
            }
            _ => (input.to_owned(), None),
        };

        let layers = self.weights.len();
        let mut pre = Vec::with_capacity(layers);
        let mut hidden = Vec::with_capacity(layers - 1);
        let mut current = x0.clone();
        for k in 0..layers {
            let z = current.dot(&self.weights[k]) + &self.biases[k];
            pre.push(z.clone());
            if k + 1 < layers {
                let h = z.mapv(leaky);
                hidden.push(h.clone());
                current = h;
            }
        }
        ForwardCache {
            input: x0,
            dropout_scale,
            pre,
            hidden,
        }
    }

    /// Probabilities in evaluation mode (no dropout).
    pub fn probabilities(&self, input: ArrayView2<'_, f64>) -> Array1<f64> {
        self.forward(input, None).probabilities()
    }

    /// Backpropagate per-row logit gradients through the cached pass.
    pub fn backward(&self, cache: &ForwardCache, logit_grad: &Array1<f64>) -> DiscriminatorGrads {
        let layers = self.weights.len();
        let n = cache.input.nrows();
        let mut delta = Array2::zeros((n, 1));
        delta
            .index_axis_mut(Axis(1), 0)
            .assign(logit_grad);

        let mut d_weights: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); layers];
        let mut d_biases: Vec<Array1<f64>> = vec![Array1::zeros(0); layers];
        for k in (0..layers).rev() {
            let below: ArrayView2<'_, f64> = if k == 0 {
                cache.input.view()
            } else {
                cache.hidden[k - 1].view()
            };
            d_weights[k] = below.t().dot(&delta);
            d_biases[k] = delta.sum_axis(Axis(0));
            if k > 0 {
                let back = delta.dot(&self.weights[k].t());
                delta = &back * &cache.pre[k - 1].mapv(leaky_grad);
            } else {
                delta = delta.dot(&self.weights[0].t());
            }
        }

        // Undo the dropout scaling so the gradient refers to the raw input.
        let input = match &cache.dropout_scale {
            Some(scale) => &delta * scale,
            None => delta,
        };
        DiscriminatorGrads {
            weights: d_weights,
            biases: d_biases,
            input,
        }
    }

    pub fn sgd_step(&mut self, grads: &DiscriminatorGrads, lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            w.scaled_add(-lr, g);
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            b.scaled_add(-lr, g);
        }
    }

    /// Fraction of a balanced probe the discriminator classifies
    /// correctly: mapped rows should score above 0.5, target rows at or
    /// below it.
    pub fn accuracy(&self, mapped: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> f64 {
        let pm = self.probabilities(mapped);
        let pt = self.probabilities(target);
        let correct = pm.iter().filter(|&&p| p > 0.5).count()
            + pt.iter().filter(|&&p| p <= 0.5).count();
        correct as f64 / (pm.len() + pt.len()) as f64
    }
}
