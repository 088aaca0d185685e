//! The text CNN: one or two embedding channels, 1-D convolutions at
//! window widths 3/4/5, ReLU and max-over-positions pooling, a tanh
//! hidden layer, and a softmax or linear head. Channel 1's word vectors
//! are copied into the model and trained; channel 2's inputs stay frozen
//! in their vector space.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::vectorize::VectorSpace;
use super::{clamp_prob, LossKind, ModelError, TrainConfig};
use crate::corpus::{Label, UserDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Two logits through softmax, binary cross entropy.
    Classification,
    /// One linear output, mean squared error.
    Regression,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CnnConfig {
    pub widths: Vec<usize>,
    pub filters_per_width: usize,
    pub fc_hidden: usize,
    pub head: HeadKind,
    /// Token grid length; shorter documents are zero-padded, longer ones
    /// keep their earliest tokens.
    pub t_max: usize,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            widths: vec![3, 4, 5],
            filters_per_width: 64,
            fc_hidden: 100,
            head: HeadKind::Classification,
            t_max: 1000,
            seed: 0,
        }
    }
}

/// One training or evaluation example: a document and its target (0/1
/// for classification, the trait score for regression).
#[derive(Debug, Clone, Copy)]
pub struct DocExample<'a> {
    pub doc: &'a UserDocument,
    pub target: f64,
}

/// Gradients for every trainable tensor, in the model's parameter order.
/// There is deliberately no entry for channel-2 embeddings: they are not
/// parameters.
#[derive(Debug)]
pub struct CnnGradients {
    pub embed: Array2<f64>,
    pub conv_w: Vec<Array2<f64>>,
    pub conv_b: Vec<Array1<f64>>,
    pub fc_w: Array2<f64>,
    pub fc_b: Array1<f64>,
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

impl CnnGradients {
    fn zeros_like(model: &CnnModel) -> Self {
        CnnGradients {
            embed: Array2::zeros(model.embed.raw_dim()),
            conv_w: model.conv_w.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            conv_b: model.conv_b.iter().map(|b| Array1::zeros(b.len())).collect(),
            fc_w: Array2::zeros(model.fc_w.raw_dim()),
            fc_b: Array1::zeros(model.fc_b.len()),
            head_w: Array2::zeros(model.head_w.raw_dim()),
            head_b: Array1::zeros(model.head_b.len()),
        }
    }

    /// Named tensors, matching [`CnnModel::tensor_names`].
    pub fn named(&self) -> Vec<(String, &[f64])> {
        let mut out = vec![("embed".to_string(), self.embed.as_slice().expect("contiguous"))];
        for (i, w) in self.conv_w.iter().enumerate() {
            out.push((format!("conv_w[{i}]"), w.as_slice().expect("contiguous")));
        }
        for (i, b) in self.conv_b.iter().enumerate() {
            out.push((format!("conv_b[{i}]"), b.as_slice().expect("contiguous")));
        }
        out.push(("fc_w".into(), self.fc_w.as_slice().expect("contiguous")));
        out.push(("fc_b".into(), self.fc_b.as_slice().expect("contiguous")));
        out.push(("head_w".into(), self.head_w.as_slice().expect("contiguous")));
        out.push(("head_b".into(), self.head_b.as_slice().expect("contiguous")));
        out
    }
}

/// Where a channel-1 grid row comes from.
#[derive(Debug, Clone)]
enum Ch1Source {
    /// Trainable row of the model's embedding copy.
    Model(usize),
    /// In-space word not seen during vocabulary construction; frozen.
    Frozen(Array1<f64>),
    /// Out of vocabulary; zero vector.
    Pad,
}

/// Token resolution of one document against the model's vocabulary and
/// spaces. Invariant across training, so it is computed once per
/// document and reused every epoch.
struct ResolvedDoc {
    len: usize,
    ch1: Vec<Ch1Source>,
    /// Materialized static-channel grid (frozen by definition).
    ch2: Option<Array2<f64>>,
}

/// Winning pooled position of one filter.
#[derive(Debug, Clone, Copy)]
enum PoolWin {
    Content { pos: usize, pre: f64 },
    /// An all-zero padding window won; its score is just the bias.
    ZeroWindow { pre: f64 },
}

impl PoolWin {
    fn pre(&self) -> f64 {
        match *self {
            PoolWin::Content { pre, .. } => pre,
            PoolWin::ZeroWindow { pre } => pre,
        }
    }
}

struct ForwardCache {
    len: usize,
    grids: Vec<Array2<f64>>,
    pools: Vec<Vec<PoolWin>>,
    pooled: Array1<f64>,
    hidden: Array1<f64>,
    output: Array1<f64>,
}

#[derive(Debug)]
pub struct CnnModel {
    config: CnnConfig,
    dim: usize,
    dynamic_space: Arc<VectorSpace>,
    static_space: Option<Arc<VectorSpace>>,
    vocab: Vec<(String, String)>,
    vocab_index: HashMap<(String, String), usize>,
    embed: Array2<f64>,
    conv_w: Vec<Array2<f64>>,
    conv_b: Vec<Array1<f64>>,
    fc_w: Array2<f64>,
    fc_b: Array1<f64>,
    head_w: Array2<f64>,
    head_b: Array1<f64>,
}

impl CnnModel {
    /// Build the model: copy channel-1 vectors for every embeddable token
    /// type in the training documents, and initialize the layers from the
    /// config seed.
    pub fn new(
        config: CnnConfig,
        dynamic_space: Arc<VectorSpace>,
        static_space: Option<Arc<VectorSpace>>,
        training_docs: &[&UserDocument],
    ) -> Result<Self, ModelError> {
        let max_width = config.widths.iter().copied().max().unwrap_or(0);
        if config.t_max < max_width.max(5) {
            return Err(ModelError::TMaxTooSmall(config.t_max));
        }
        if let Some(s) = &static_space {
            if s.dim() != dynamic_space.dim() {
                return Err(ModelError::SpaceDimMismatch);
            }
        }
        let dim = dynamic_space.dim();

        let mut vocab: Vec<(String, String)> = Vec::new();
        let mut vocab_index: HashMap<(String, String), usize> = HashMap::new();
        let mut rows: Vec<f64> = Vec::new();
        for doc in training_docs {
            for token in &doc.tokens {
                let key = (doc.language.clone(), token.clone());
                if vocab_index.contains_key(&key) {
                    continue;
                }
                if let Some(v) = dynamic_space.lookup(&doc.language, token) {
                    vocab_index.insert(key.clone(), vocab.len());
                    vocab.push(key);
                    rows.extend(v.iter());
                }
            }
        }
        let embed = Array2::from_shape_vec((vocab.len(), dim), rows)
            .expect("rows built consistently");

        let channels = if static_space.is_some() { 2 } else { 1 };
        let filters = config.filters_per_width;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut xavier = |fan_in: usize, fan_out: usize, shape: (usize, usize)| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Array2::from_shape_fn(shape, |_| rng.gen_range(-bound..bound))
        };

        let mut conv_w = Vec::new();
        let mut conv_b = Vec::new();
        for _c in 0..channels {
            for &w in &config.widths {
                conv_w.push(xavier(w * dim, filters, (w * dim, filters)));
                conv_b.push(Array1::zeros(filters));
            }
        }
        let feat = channels * config.widths.len() * filters;
        let fc_w = xavier(feat, config.fc_hidden, (feat, config.fc_hidden));
        let fc_b = Array1::zeros(config.fc_hidden);
        let out = match config.head {
            HeadKind::Classification => 2,
            HeadKind::Regression => 1,
        };
        let head_w = xavier(config.fc_hidden, out, (config.fc_hidden, out));
        let head_b = Array1::zeros(out);

        Ok(CnnModel {
            config,
            dim,
            dynamic_space,
            static_space,
            vocab,
            vocab_index,
            embed,
            conv_w,
            conv_b,
            fc_w,
            fc_b,
            head_w,
            head_b,
        })
    }

    pub fn config(&self) -> &CnnConfig {
        &self.config
    }

    pub fn channels(&self) -> usize {
        if self.static_space.is_some() {
            2
        } else {
            1
        }
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    /// Names of all trainable tensors. Only channel-1 embeddings appear;
    /// channel-2 inputs are not parameters.
    pub fn tensor_names(&self) -> Vec<String> {
        self.grad_template().named().into_iter().map(|(n, _)| n).collect()
    }

    fn grad_template(&self) -> CnnGradients {
        CnnGradients::zeros_like(self)
    }

    fn bank_index(&self, channel: usize, width_index: usize) -> usize {
        channel * self.config.widths.len() + width_index
    }

    fn resolve(&self, doc: &UserDocument) -> ResolvedDoc {
        let len = doc.tokens.len().min(self.config.t_max);
        let mut key = (doc.language.clone(), String::new());
        let ch1 = doc.tokens[..len]
            .iter()
            .map(|token| {
                key.1.clear();
                key.1.push_str(token);
                if let Some(&row) = self.vocab_index.get(&key) {
                    Ch1Source::Model(row)
                } else if let Some(v) = self.dynamic_space.lookup(&doc.language, token) {
                    Ch1Source::Frozen(v.to_owned())
                } else {
                    Ch1Source::Pad
                }
            })
            .collect();
        let ch2 = self.static_space.as_ref().map(|space| {
            let mut grid = Array2::zeros((len, self.dim));
            for (i, token) in doc.tokens[..len].iter().enumerate() {
                if let Some(v) = space.lookup(&doc.language, token) {
                    grid.row_mut(i).assign(&v);
                }
            }
            grid
        });
        ResolvedDoc { len, ch1, ch2 }
    }

    /// Channel grids for one resolved document; channel 1 is rebuilt each
    /// pass because its rows are parameters, channel 2 is cloned from the
    /// frozen cache.
    fn build_grids(&self, resolved: &ResolvedDoc) -> Vec<Array2<f64>> {
        let len = resolved.len;
        let mut grids = Vec::with_capacity(self.channels());
        let mut ch1 = Array2::zeros((len, self.dim));
        for (i, src) in resolved.ch1.iter().enumerate() {
            match src {
                Ch1Source::Model(row) => ch1.row_mut(i).assign(&self.embed.row(*row)),
                Ch1Source::Frozen(v) => ch1.row_mut(i).assign(v),
                Ch1Source::Pad => {}
            }
        }
        grids.push(ch1);
        if let Some(ch2) = &resolved.ch2 {
            grids.push(ch2.clone());
        }
        grids
    }

    /// Windows at positions >= len are entirely padding and all share the
    /// bias-only score, so the scan covers content positions plus one
    /// representative zero window (which wins only on a strict maximum,
    /// exactly as a full first-argmax scan over t_max would decide).
    fn convolve(
        &self,
        grid: &Array2<f64>,
        bank: usize,
        width: usize,
    ) -> (Vec<PoolWin>, Vec<f64>) {
        let len = grid.nrows();
        let filters = self.config.filters_per_width;
        let positions_total = self.config.t_max - width + 1;
        let p_content = len.min(positions_total);
        let has_zero_window = len < positions_total;

        let mut window = Array1::zeros(width * self.dim);
        let weights = &self.conv_w[bank];
        let biases = &self.conv_b[bank];

        let mut wins: Vec<PoolWin> = (0..filters)
            .map(|f| PoolWin::ZeroWindow { pre: biases[f] })
            .collect();
        let mut initialized = vec![has_zero_window; filters];

        for p in 0..p_content {
            for k in 0..width {
                let row = p + k;
                let dst = &mut window.as_slice_mut().expect("contiguous")[k * self.dim..(k + 1) * self.dim];
                if row < len {
                    dst.copy_from_slice(grid.row(row).to_slice().expect("contiguous"));
                } else {
                    dst.fill(0.0);
                }
            }
            let scores = window.dot(weights) + biases;
            for f in 0..filters {
                let pre = scores[f];
                let better = if !initialized[f] {
                    true
                } else {
                    match wins[f] {
                        // Content positions precede zero windows in scan
                        // order, so they win ties against the zero window
                        // but not against earlier content positions.
                        PoolWin::Content { pre: best, .. } => pre > best,
                        PoolWin::ZeroWindow { pre: best } => pre >= best,
                    }
                };
                if better {
                    wins[f] = PoolWin::Content { pos: p, pre };
                    initialized[f] = true;
                }
            }
        }

        let pooled: Vec<f64> = wins.iter().map(|w| w.pre().max(0.0)).collect();
        (wins, pooled)
    }

    fn forward(&self, doc: &UserDocument) -> ForwardCache {
        let len = doc.tokens.len().min(self.config.t_max);
        let ch1_sources = self.channel1_sources(doc, len);
        let grids = self.build_grids(doc, &ch1_sources);

        let filters = self.config.filters_per_width;
        let feat = self.channels() * self.config.widths.len() * filters;
        let mut pooled = Array1::zeros(feat);
        let mut pools = Vec::with_capacity(self.channels() * self.config.widths.len());
        for c in 0..self.channels() {
            for (wi, &w) in self.config.widths.iter().enumerate() {
                let bank = self.bank_index(c, wi);
                let (wins, values) = self.convolve(&grids[c], bank, w);
                let offset = bank * filters;
                for (f, v) in values.iter().enumerate() {
                    pooled[offset + f] = *v;
                }
                pools.push(wins);
            }
        }

        let hidden = (pooled.dot(&self.fc_w) + &self.fc_b).mapv(f64::tanh);
        let output = hidden.dot(&self.head_w) + &self.head_b;
        ForwardCache {
            len,
            ch1_sources,
            grids,
            pools,
            pooled,
            hidden,
            output,
        }
    }

    fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps = logits.mapv(|v| (v - max).exp());
        let sum = exps.sum();
        exps / sum
    }

    /// Probability of the positive class (classification head).
    pub fn predict_probability(&self, doc: &UserDocument) -> f64 {
        let cache = self.forward(doc);
        Self::softmax(cache.output.view())[1]
    }

    pub fn predict_label(&self, doc: &UserDocument) -> (Label, f64) {
        let p = self.predict_probability(doc);
        let label = if p >= 0.5 {
            Label::Positive
        } else {
            Label::Negative
        };
        (label, p)
    }

    /// Raw output (regression head).
    pub fn predict_score(&self, doc: &UserDocument) -> f64 {
        self.forward(doc).output[0]
    }

    fn example_loss(&self, cache: &ForwardCache, target: f64) -> f64 {
        match self.config.head {
            HeadKind::Classification => {
                let p = clamp_prob(Self::softmax(cache.output.view())[1]);
                -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
            }
            HeadKind::Regression => {
                let e = cache.output[0] - target;
                e * e
            }
        }
    }

    /// Mean loss over a batch.
    pub fn batch_loss(&self, batch: &[DocExample<'_>]) -> f64 {
        let total: f64 = batch
            .iter()
            .map(|ex| self.example_loss(&self.forward(ex.doc), ex.target))
            .sum();
        total / batch.len() as f64
    }

    /// Exact analytic gradients of the mean batch loss for every
    /// trainable parameter.
    pub fn gradients(&self, batch: &[DocExample<'_>]) -> Result<CnnGradients, ModelError> {
        self.loss_and_gradients(batch).map(|(_, g)| g)
    }

    /// Mean batch loss and its gradients from one shared forward pass per
    /// example.
    pub fn loss_and_gradients(
        &self,
        batch: &[DocExample<'_>],
    ) -> Result<(f64, CnnGradients), ModelError> {
        let mut grads = self.grad_template();
        let scale = 1.0 / batch.len() as f64;
        let mut total_loss = 0.0;
        for ex in batch {
            let cache = self.forward(ex.doc);
            total_loss += self.example_loss(&cache, ex.target);
            let delta_out: Array1<f64> = match self.config.head {
                HeadKind::Classification => {
                    let p = Self::softmax(cache.output.view());
                    let mut d = p.clone();
                    let y = ex.target;
                    // d(-ln p_y)/dlogits = softmax - onehot(y)
                    d[1] -= y;
                    d[0] -= 1.0 - y;
                    d * scale
                }
                HeadKind::Regression => {
                    Array1::from_vec(vec![2.0 * (cache.output[0] - ex.target) * scale])
                }
            };
            self.backward(&cache, &delta_out, &mut grads);
        }
        for (name, slice) in grads.named() {
            if slice.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFiniteGradient(name));
            }
        }
        Ok((total_loss * scale, grads))
    }

    fn backward(&self, cache: &ForwardCache, delta_out: &Array1<f64>, grads: &mut CnnGradients) {
        // Head layer.
        for h in 0..self.config.fc_hidden {
            for o in 0..delta_out.len() {
                grads.head_w[[h, o]] += cache.hidden[h] * delta_out[o];
            }
        }
        for o in 0..delta_out.len() {
            grads.head_b[o] += delta_out[o];
        }
        let delta_hidden_lin = self.head_w.dot(delta_out);
        let delta_hidden: Array1<f64> = (0..self.config.fc_hidden)
            .map(|h| delta_hidden_lin[h] * (1.0 - cache.hidden[h] * cache.hidden[h]))
            .collect();

        // Fully connected layer.
        for (i, &pv) in cache.pooled.iter().enumerate() {
            if pv != 0.0 {
                for h in 0..self.config.fc_hidden {
                    grads.fc_w[[i, h]] += pv * delta_hidden[h];
                }
            }
        }
        grads.fc_b += &delta_hidden;
        let delta_pooled = self.fc_w.dot(&delta_hidden);

        // Unpool into the winning windows.
        let filters = self.config.filters_per_width;
        for c in 0..self.channels() {
            let dynamic = c == 0;
            for (wi, &w) in self.config.widths.iter().enumerate() {
                let bank = self.bank_index(c, wi);
                let wins = &cache.pools[bank];
                let grid = &cache.grids[c];
                for f in 0..filters {
                    let win = wins[f];
                    if win.pre() <= 0.0 {
                        continue; // ReLU gate closed
                    }
                    let d = delta_pooled[bank * filters + f];
                    if d == 0.0 {
                        continue;
                    }
                    grads.conv_b[bank][f] += d;
                    let pos = match win {
                        PoolWin::ZeroWindow { .. } => continue, // zero window: no weight/input grad
                        PoolWin::Content { pos, .. } => pos,
                    };
                    for k in 0..w {
                        let row = pos + k;
                        if row >= cache.len {
                            continue; // padding rows carry no content
                        }
                        let grid_row = grid.row(row);
                        for j in 0..self.dim {
                            grads.conv_w[bank][[k * self.dim + j, f]] += grid_row[j] * d;
                        }
                        if dynamic {
                            if let Ch1Source::Model(embed_row) = cache.ch1_sources[row] {
                                for j in 0..self.dim {
                                    grads.embed[[embed_row, j]] +=
                                        self.conv_w[bank][[k * self.dim + j, f]] * d;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn param_lens(&self) -> Vec<usize> {
        let mut lens = vec![self.embed.len()];
        lens.extend(self.conv_w.iter().map(|w| w.len()));
        lens.extend(self.conv_b.iter().map(|b| b.len()));
        lens.push(self.fc_w.len());
        lens.push(self.fc_b.len());
        lens.push(self.head_w.len());
        lens.push(self.head_b.len());
        lens
    }

    fn apply_adam(&mut self, adam: &mut Adam, grads: &CnnGradients) {
        let mut params: Vec<&mut [f64]> = Vec::new();
        params.push(self.embed.as_slice_mut().expect("contiguous"));
        for w in &mut self.conv_w {
            params.push(w.as_slice_mut().expect("contiguous"));
        }
        for b in &mut self.conv_b {
            params.push(b.as_slice_mut().expect("contiguous"));
        }
        params.push(self.fc_w.as_slice_mut().expect("contiguous"));
        params.push(self.fc_b.as_slice_mut().expect("contiguous"));
        params.push(self.head_w.as_slice_mut().expect("contiguous"));
        params.push(self.head_b.as_slice_mut().expect("contiguous"));

        let mut gslices: Vec<&[f64]> = Vec::new();
        gslices.push(grads.embed.as_slice().expect("contiguous"));
        for w in &grads.conv_w {
            gslices.push(w.as_slice().expect("contiguous"));
        }
        for b in &grads.conv_b {
            gslices.push(b.as_slice().expect("contiguous"));
        }
        gslices.push(grads.fc_w.as_slice().expect("contiguous"));
        gslices.push(grads.fc_b.as_slice().expect("contiguous"));
        gslices.push(grads.head_w.as_slice().expect("contiguous"));
        gslices.push(grads.head_b.as_slice().expect("contiguous"));

        adam.step(&mut params, &gslices);
    }

    /// Fixed-epoch Adam training; returns the per-epoch mean loss curve.
    pub fn train(
        &mut self,
        examples: &[DocExample<'_>],
        config: &TrainConfig,
    ) -> Result<Vec<f64>, ModelError> {
        if examples.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let expected = match self.config.head {
            HeadKind::Classification => LossKind::Bce,
            HeadKind::Regression => LossKind::Mse,
        };
        if config.loss != expected {
            return Err(ModelError::CheckpointMismatch(format!(
                "head {:?} requires {:?} loss",
                self.config.head, expected
            )));
        }

        let mut adam = Adam::new(
            config.learning_rate,
            config.beta1,
            config.beta2,
            config.epsilon,
            &self.param_lens(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut curve = Vec::with_capacity(config.epochs);

        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(config.batch_size) {
                let batch: Vec<DocExample<'_>> = chunk.iter().map(|&i| examples[i]).collect();
                let (loss, grads) = self.loss_and_gradients(&batch)?;
                if !loss.is_finite() {
                    return Err(ModelError::NonFiniteLoss { epoch });
                }
                epoch_loss += loss * batch.len() as f64;
                self.apply_adam(&mut adam, &grads);
            }
            curve.push(epoch_loss / examples.len() as f64);
        }
        Ok(curve)
    }

    /// Serialize architecture metadata, vocabulary, and every parameter
    /// tensor as flat float arrays. Reload is bit-exact.
    pub fn save(&self, path: impl AsRef<Path>, fold: Option<usize>) -> Result<(), ModelError> {
        let mut tensors = Vec::new();
        let mut push = |name: &str, shape: Vec<usize>, data: Vec<f64>| {
            tensors.push(NamedTensor {
                name: name.to_string(),
                shape,
                data,
            });
        };
        push(
            "embed",
            vec![self.embed.nrows(), self.embed.ncols()],
            self.embed.iter().copied().collect(),
        );
        for (i, w) in self.conv_w.iter().enumerate() {
            push(
                &format!("conv_w[{i}]"),
                vec![w.nrows(), w.ncols()],
                w.iter().copied().collect(),
            );
        }
        for (i, b) in self.conv_b.iter().enumerate() {
            push(&format!("conv_b[{i}]"), vec![b.len()], b.to_vec());
        }
        push(
            "fc_w",
            vec![self.fc_w.nrows(), self.fc_w.ncols()],
            self.fc_w.iter().copied().collect(),
        );
        push("fc_b", vec![self.fc_b.len()], self.fc_b.to_vec());
        push(
            "head_w",
            vec![self.head_w.nrows(), self.head_w.ncols()],
            self.head_w.iter().copied().collect(),
        );
        push("head_b", vec![self.head_b.len()], self.head_b.to_vec());

        let file = CheckpointFile {
            architecture: self.config.clone(),
            dim: self.dim,
            channels: self.channels(),
            fold,
            vocab: self.vocab.clone(),
            tensors,
        };
        let out = File::create(path.as_ref())?;
        serde_json::to_writer(BufWriter::new(out), &file)?;
        Ok(())
    }

    /// Rebuild a model from a checkpoint plus the vector spaces it was
    /// trained against.
    pub fn load(
        path: impl AsRef<Path>,
        dynamic_space: Arc<VectorSpace>,
        static_space: Option<Arc<VectorSpace>>,
    ) -> Result<Self, ModelError> {
        let input = File::open(path.as_ref())?;
        let file: CheckpointFile = serde_json::from_reader(BufReader::new(input))?;
        let expected_channels = if static_space.is_some() { 2 } else { 1 };
        if file.channels != expected_channels {
            return Err(ModelError::CheckpointMismatch(format!(
                "checkpoint has {} channels, spaces give {}",
                file.channels, expected_channels
            )));
        }
        if dynamic_space.dim() != file.dim {
            return Err(ModelError::CheckpointMismatch(format!(
                "checkpoint dim {} vs space dim {}",
                file.dim,
                dynamic_space.dim()
            )));
        }

        let mut model = CnnModel::new(file.architecture, dynamic_space, static_space, &[])?;
        model.vocab = file.vocab;
        model.vocab_index = model
            .vocab
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();

        let mut by_name: HashMap<String, NamedTensor> = file
            .tensors
            .into_iter()
            .map(|t| (t.name.clone(), t))
            .collect();
        let mut take2 = |name: &str| -> Result<Array2<f64>, ModelError> {
            let t = by_name
                .remove(name)
                .ok_or_else(|| ModelError::CheckpointMismatch(format!("missing tensor {name}")))?;
            if t.shape.len() != 2 {
                return Err(ModelError::CheckpointMismatch(format!("{name} is not 2-D")));
            }
            Array2::from_shape_vec((t.shape[0], t.shape[1]), t.data)
                .map_err(|e| ModelError::CheckpointMismatch(format!("{name}: {e}")))
        };
        model.embed = take2("embed")?;
        let banks = model.conv_w.len();
        let mut conv_w = Vec::with_capacity(banks);
        for i in 0..banks {
            conv_w.push(take2(&format!("conv_w[{i}]"))?);
        }
        model.conv_w = conv_w;
        model.fc_w = take2("fc_w")?;
        model.head_w = take2("head_w")?;
        let mut take1 = |name: &str| -> Result<Array1<f64>, ModelError> {
            let t = by_name
                .remove(name)
                .ok_or_else(|| ModelError::CheckpointMismatch(format!("missing tensor {name}")))?;
            Ok(Array1::from_vec(t.data))
        };
        let mut conv_b = Vec::with_capacity(banks);
        for i in 0..banks {
            conv_b.push(take1(&format!("conv_b[{i}]"))?);
        }
        model.conv_b = conv_b;
        model.fc_b = take1("fc_b")?;
        model.head_b = take1("head_b")?;
        if model.embed.nrows() != model.vocab.len() || model.embed.ncols() != model.dim {
            return Err(ModelError::CheckpointMismatch(
                "embedding tensor does not match vocabulary".into(),
            ));
        }
        Ok(model)
    }

    /// All parameters as named flat slices (read-only), checkpoint order.
    pub fn named_parameters(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = vec![("embed".to_string(), self.embed.iter().copied().collect())];
        for (i, w) in self.conv_w.iter().enumerate() {
            out.push((format!("conv_w[{i}]"), w.iter().copied().collect()));
        }
        for (i, b) in self.conv_b.iter().enumerate() {
            out.push((format!("conv_b[{i}]"), b.to_vec()));
        }
        out.push(("fc_w".into(), self.fc_w.iter().copied().collect()));
        out.push(("fc_b".into(), self.fc_b.to_vec()));
        out.push(("head_w".into(), self.head_w.iter().copied().collect()));
        out.push(("head_b".into(), self.head_b.to_vec()));
        out
    }

    #[cfg(test)]
    pub(crate) fn set_parameter(&mut self, name: &str, index: usize, value: f64) {
        let slice: &mut [f64] = match name {
            "embed" => self.embed.as_slice_mut().unwrap(),
            "fc_w" => self.fc_w.as_slice_mut().unwrap(),
            "fc_b" => self.fc_b.as_slice_mut().unwrap(),
            "head_w" => self.head_w.as_slice_mut().unwrap(),
            "head_b" => self.head_b.as_slice_mut().unwrap(),
            other => {
                if let Some(rest) = other.strip_prefix("conv_w[") {
                    let i: usize = rest.trim_end_matches(']').parse().unwrap();
                    self.conv_w[i].as_slice_mut().unwrap()
                } else if let Some(rest) = other.strip_prefix("conv_b[") {
                    let i: usize = rest.trim_end_matches(']').parse().unwrap();
                    self.conv_b[i].as_slice_mut().unwrap()
                } else {
                    panic!("unknown parameter {other}");
                }
            }
        };
        slice[index] = value;
    }
}

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    architecture: CnnConfig,
    dim: usize,
    channels: usize,
    fold: Option<usize>,
    vocab: Vec<(String, String)>,
    tensors: Vec<NamedTensor>,
}
