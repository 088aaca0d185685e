//! Logistic regression over averaged embedding features, trained with
//! Adam on binary cross entropy.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::{clamp_prob, ModelError, TrainConfig};
use crate::align::sigmoid;
use crate::corpus::Label;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn new(dim: usize) -> Self {
        LogisticModel {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn probability(&self, x: ArrayView1<'_, f64>) -> f64 {
        let w = ArrayView1::from(&self.weights);
        sigmoid(w.dot(&x) + self.bias)
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> (Label, f64) {
        let p = self.probability(x);
        let label = if p >= 0.5 {
            Label::Positive
        } else {
            Label::Negative
        };
        (label, p)
    }

    /// Mean BCE over a feature matrix.
    pub fn mean_loss(&self, features: ArrayView2<'_, f64>, labels: &[Label]) -> f64 {
        let mut total = 0.0;
        for (row, label) in features.rows().into_iter().zip(labels) {
            let p = clamp_prob(self.probability(row));
            let y = if label.is_positive() { 1.0 } else { 0.0 };
            total += -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
        }
        total / labels.len() as f64
    }

    /// Analytic BCE gradients for a batch: mean over rows of
    /// `(p - y) x` for the weights and `(p - y)` for the bias.
    pub fn gradients(
        &self,
        features: ArrayView2<'_, f64>,
        labels: &[Label],
    ) -> (Array1<f64>, f64) {
        let n = labels.len() as f64;
        let mut gw = Array1::zeros(self.dim());
        let mut gb = 0.0;
        for (row, label) in features.rows().into_iter().zip(labels) {
            let p = self.probability(row);
            let y = if label.is_positive() { 1.0 } else { 0.0 };
            let delta = (p - y) / n;
            gw.scaled_add(delta, &row);
            gb += delta;
        }
        (gw, gb)
    }

    /// Fixed-epoch Adam training with seeded shuffling. Deterministic for
    /// a fixed config; errors on a single-class training set.
    pub fn train(
        features: &Array2<f64>,
        labels: &[Label],
        config: &TrainConfig,
    ) -> Result<(Self, Vec<f64>), ModelError> {
        if features.nrows() != labels.len() {
            return Err(ModelError::LengthMismatch(features.nrows(), labels.len()));
        }
        if labels.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let positives = labels.iter().filter(|l| l.is_positive()).count();
        if positives == 0 || positives == labels.len() {
            return Err(ModelError::SingleClass);
        }

        let dim = features.ncols();
        let mut model = LogisticModel::new(dim);
        let mut adam = Adam::new(
            config.learning_rate,
            config.beta1,
            config.beta2,
            config.epsilon,
            &[dim, 1],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..labels.len()).collect();
        let mut curve = Vec::with_capacity(config.epochs);

        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(config.batch_size) {
                let batch_x = features.select(ndarray::Axis(0), chunk);
                let batch_y: Vec<Label> = chunk.iter().map(|&i| labels[i]).collect();
                let loss = model.mean_loss(batch_x.view(), &batch_y);
                if !loss.is_finite() {
                    return Err(ModelError::NonFiniteLoss { epoch });
                }
                epoch_loss += loss * chunk.len() as f64;
                let (gw, gb) = model.gradients(batch_x.view(), &batch_y);
                let mut bias = [model.bias];
                adam.step(
                    &mut [&mut model.weights, &mut bias],
                    &[gw.as_slice().expect("contiguous"), &[gb]],
                );
                model.bias = bias[0];
            }
            curve.push(epoch_loss / labels.len() as f64);
        }
        Ok((model, curve))
    }
}

/// Plain linear regression trained with Adam on MSE; the regression-task
/// counterpart of the logistic baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn new(dim: usize) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> f64 {
        ArrayView1::from(&self.weights).dot(&x) + self.bias
    }

    pub fn mean_loss(&self, features: ArrayView2<'_, f64>, targets: &[f64]) -> f64 {
        let mut total = 0.0;
        for (row, &y) in features.rows().into_iter().zip(targets) {
            let e = self.predict(row) - y;
            total += e * e;
        }
        total / targets.len() as f64
    }

    pub fn train(
        features: &Array2<f64>,
        targets: &[f64],
        config: &TrainConfig,
    ) -> Result<(Self, Vec<f64>), ModelError> {
        if features.nrows() != targets.len() {
            return Err(ModelError::LengthMismatch(features.nrows(), targets.len()));
        }
        if targets.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let dim = features.ncols();
        let mut model = LinearModel::new(dim);
        let mut adam = Adam::new(
            config.learning_rate,
            config.beta1,
            config.beta2,
            config.epsilon,
            &[dim, 1],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..targets.len()).collect();
        let mut curve = Vec::with_capacity(config.epochs);

        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(config.batch_size) {
                let batch_x = features.select(ndarray::Axis(0), chunk);
                let batch_y: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
                let loss = model.mean_loss(batch_x.view(), &batch_y);
                if !loss.is_finite() {
                    return Err(ModelError::NonFiniteLoss { epoch });
                }
                epoch_loss += loss * chunk.len() as f64;

                let n = batch_y.len() as f64;
                let mut gw = Array1::zeros(dim);
                let mut gb = 0.0;
                for (row, &y) in batch_x.rows().into_iter().zip(&batch_y) {
                    let delta = 2.0 * (model.predict(row) - y) / n;
                    gw.scaled_add(delta, &row);
                    gb += delta;
                }
                let mut bias = [model.bias];
                adam.step(
                    &mut [&mut model.weights, &mut bias],
                    &[gw.as_slice().expect("contiguous"), &[gb]],
                );
                model.bias = bias[0];
            }
            curve.push(epoch_loss / targets.len() as f64);
        }
        Ok((model, curve))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn separable() -> (Array2<f64>, Vec<Label>) {
        let x = array![
            [2.0, 1.5],
            [1.8, 2.2],
            [2.5, 2.0],
            [1.2, 1.9],
            [-2.0, -1.5],
            [-1.8, -2.2],
            [-2.5, -2.0],
            [-1.2, -1.9],
        ];
        let y = vec![
            Label::Positive,
            Label::Positive,
            Label::Positive,
            Label::Positive,
            Label::Negative,
            Label::Negative,
            Label::Negative,
            Label::Negative,
        ];
        (x, y)
    }

    #[test]
    fn separable_set_reaches_full_training_accuracy() {
        let (x, y) = separable();
        let config = TrainConfig {
            epochs: 200,
            learning_rate: 5e-2,
            ..TrainConfig::default()
        };
        let (model, curve) = LogisticModel::train(&x, &y, &config).unwrap();
        let correct = x
            .rows()
            .into_iter()
            .zip(&y)
            .filter(|(row, label)| model.predict(*row).0 == **label)
            .count();
        assert_eq!(correct, y.len());
        assert!(curve.last().unwrap() < &curve[0]);
        assert!(curve.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let (x, y) = separable();
        let mut model = LogisticModel::new(2);
        model.weights = vec![0.3, -0.2];
        model.bias = 0.1;
        let (gw, gb) = model.gradients(x.view(), &y);

        let h = 1e-4;
        for i in 0..2 {
            let orig = model.weights[i];
            model.weights[i] = orig + h;
            let up = model.mean_loss(x.view(), &y);
            model.weights[i] = orig - h;
            let down = model.mean_loss(x.view(), &y);
            model.weights[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - gw[i]).abs() / fd.abs().max(gw[i].abs()).max(1e-12);
            assert!(rel < 1e-6, "weight {i}: fd {fd} vs analytic {}", gw[i]);
        }
        let orig = model.bias;
        model.bias = orig + h;
        let up = model.mean_loss(x.view(), &y);
        model.bias = orig - h;
        let down = model.mean_loss(x.view(), &y);
        model.bias = orig;
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - gb).abs() / fd.abs().max(gb.abs()).max(1e-12);
        assert!(rel < 1e-6, "bias: fd {fd} vs analytic {gb}");
    }

    #[test]
    fn mirrored_data_gives_mirrored_decisions() {
        let (x, y) = separable();
        let config = TrainConfig {
            epochs: 150,
            learning_rate: 5e-2,
            ..TrainConfig::default()
        };
        let (model, _) = LogisticModel::train(&x, &y, &config).unwrap();

        let neg_x = x.mapv(|v| -v);
        let flipped: Vec<Label> = y
            .iter()
            .map(|l| {
                if l.is_positive() {
                    Label::Negative
                } else {
                    Label::Positive
                }
            })
            .collect();
        let (mirror, _) = LogisticModel::train(&neg_x, &flipped, &config).unwrap();
        // Negating features and flipping labels trains the same boundary:
        // predictions on mirrored points must agree with the original.
        for (row, label) in x.rows().into_iter().zip(&y) {
            let p = model.predict(row).0;
            let q = mirror.predict(row.mapv(|v| -v).view()).0;
            let q_flipped = if q == Label::Positive {
                Label::Negative
            } else {
                Label::Positive
            };
            assert_eq!(p, q_flipped, "label {label:?}");
        }
    }

    #[test]
    fn single_class_training_set_is_rejected() {
        let x = array![[1.0, 0.0], [0.5, 0.5]];
        let y = vec![Label::Positive, Label::Positive];
        assert!(matches!(
            LogisticModel::train(&x, &y, &TrainConfig::default()),
            Err(ModelError::SingleClass)
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = separable();
        let config = TrainConfig {
            epochs: 30,
            seed: 9,
            ..TrainConfig::default()
        };
        let (a, _) = LogisticModel::train(&x, &y, &config).unwrap();
        let (b, _) = LogisticModel::train(&x, &y, &config).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.bias, b.bias);
    }

    #[test]
    fn linear_model_fits_a_plane() {
        // y = 2 x0 - x1 + 0.5
        let x = array![
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [1.0, 1.0],
            [0.5, 0.25],
            [-1.0, 0.5]
        ];
        let y: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| 2.0 * r[0] - r[1] + 0.5)
            .collect();
        let config = TrainConfig {
            epochs: 3000,
            learning_rate: 1e-2,
            loss: crate::models::LossKind::Mse,
            ..TrainConfig::default()
        };
        let (model, curve) = LinearModel::train(&x, &y, &config).unwrap();
        assert!(curve.last().unwrap() < &1e-4, "final loss {}", curve.last().unwrap());
        assert!((model.weights[0] - 2.0).abs() < 0.05);
        assert!((model.weights[1] + 1.0).abs() < 0.05);
        assert!((model.bias - 0.5).abs() < 0.05);
    }
}
