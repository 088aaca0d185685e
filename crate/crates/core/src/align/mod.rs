//! Orthogonal mappings between embedding spaces: the closed-form
//! Procrustes solution, iterative orthogonality maintenance, adversarial
//! training of semantic and per-trait maps, and dictionary induction for
//! validation.

mod discriminator;
mod gan;

pub use discriminator::{sigmoid, Discriminator};
pub use gan::{
    adversarial_train, adversarial_train_matrices, discriminator_loss, loss_from_probabilities,
    mapping_loss, train_global_trait, train_trait_map, AdversarialOutcome, EpochStats,
    TrainHistory,
};

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TraitId;
use crate::embeddings::{cosine, EmbeddingTable, SimilarityMetric, SpaceTag};

/// Orthogonality drift allowed for maps produced by iterative training.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-3;
/// Tolerance for closed-form Procrustes solutions.
pub const PROCRUSTES_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("matrix is {rows}x{cols}, expected square of dim {dim}")]
    BadShape { rows: usize, cols: usize, dim: usize },
    #[error("map is not orthogonal: ||M'M - I||_F = {0:.3e}")]
    NotOrthogonal(f64),
    #[error("row counts differ: {0} source vs {1} target")]
    RowMismatch(usize, usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("orthogonalization diverged (error {from:.3e} -> {to:.3e}); reduce the update step")]
    Divergence { from: f64, to: f64 },
    #[error(
        "non-finite loss at epoch {epoch}, iteration {iteration} \
         (disc {disc_loss}, map {map_loss}, ||W||_F {map_norm:.3e})"
    )]
    NonFinite {
        epoch: usize,
        iteration: usize,
        disc_loss: f64,
        map_loss: f64,
        map_norm: f64,
    },
    #[error("trait {trait_name}: only {found} usable lexicon words, need {need}")]
    LexiconTooSmall {
        trait_name: String,
        found: usize,
        need: usize,
    },
    #[error("invalid adversarial config: {0}")]
    BadConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("map file parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Embedding(#[from] crate::embeddings::EmbeddingError),
}

/// How a map was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapProvenance {
    Procrustes,
    Adversarial,
    AdversarialRefined,
    Identity,
}

/// A d-by-d rotation with the orthogonality invariant checked on
/// construction and after load.
#[derive(Debug, Clone)]
pub struct OrthogonalMap {
    dim: usize,
    matrix: Array2<f64>,
    provenance: MapProvenance,
    source_language: Option<String>,
    target_language: Option<String>,
    trait_id: Option<TraitId>,
}

/// `||M'M - I||_F` for a square matrix.
pub fn orthogonality_error(m: ArrayView2<'_, f64>) -> f64 {
    let d = m.ncols();
    let mut gram = m.t().dot(&m);
    for i in 0..d {
        gram[[i, i]] -= 1.0;
    }
    gram.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl OrthogonalMap {
    pub fn new(matrix: Array2<f64>, provenance: MapProvenance) -> Result<Self, AlignError> {
        Self::with_tolerance(matrix, provenance, ORTHOGONALITY_TOLERANCE)
    }

    pub fn with_tolerance(
        matrix: Array2<f64>,
        provenance: MapProvenance,
        tolerance: f64,
    ) -> Result<Self, AlignError> {
        let dim = matrix.ncols();
        if matrix.nrows() != dim {
            return Err(AlignError::BadShape {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                dim,
            });
        }
        let err = orthogonality_error(matrix.view());
        if !err.is_finite() || err > tolerance {
            return Err(AlignError::NotOrthogonal(err));
        }
        Ok(OrthogonalMap {
            dim,
            matrix,
            provenance,
            source_language: None,
            target_language: None,
            trait_id: None,
        })
    }

    pub fn identity(dim: usize) -> Self {
        OrthogonalMap {
            dim,
            matrix: Array2::eye(dim),
            provenance: MapProvenance::Identity,
            source_language: None,
            target_language: None,
            trait_id: None,
        }
    }

    pub fn with_languages(
        mut self,
        source: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        self.source_language = Some(source.into());
        self.target_language = Some(target.into());
        self
    }

    pub fn with_trait(mut self, t: TraitId) -> Self {
        self.trait_id = Some(t);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn provenance(&self) -> MapProvenance {
        self.provenance
    }

    pub fn source_language(&self) -> Option<&str> {
        self.source_language.as_deref()
    }

    pub fn target_language(&self) -> Option<&str> {
        self.target_language.as_deref()
    }

    pub fn trait_id(&self) -> Option<TraitId> {
        self.trait_id
    }

    pub fn orthogonality_error(&self) -> f64 {
        orthogonality_error(self.matrix.view())
    }

    /// Map every row: returns `rows * M'` so that row i becomes `M x_i`.
    pub fn apply(&self, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>, AlignError> {
        if rows.ncols() != self.dim {
            return Err(AlignError::DimMismatch(rows.ncols(), self.dim));
        }
        Ok(rows.dot(&self.matrix.t()))
    }

    pub fn apply_vec(&self, v: ArrayView1<'_, f64>) -> Result<Array1<f64>, AlignError> {
        if v.len() != self.dim {
            return Err(AlignError::DimMismatch(v.len(), self.dim));
        }
        Ok(self.matrix.dot(&v))
    }

    /// Map a whole table into a new space.
    pub fn apply_to_table(
        &self,
        table: &EmbeddingTable,
        space: SpaceTag,
    ) -> Result<EmbeddingTable, AlignError> {
        let mapped = self.apply(table.matrix())?;
        Ok(table.with_matrix(space, mapped)?)
    }

    /// Composition `self . first`: apply `first`, then `self`.
    pub fn after(&self, first: &OrthogonalMap) -> Result<OrthogonalMap, AlignError> {
        if self.dim != first.dim {
            return Err(AlignError::DimMismatch(self.dim, first.dim));
        }
        let matrix = self.matrix.dot(&first.matrix);
        OrthogonalMap::new(matrix, self.provenance)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AlignError> {
        let file = MapFile {
            dim: self.dim,
            provenance: self.provenance,
            source_language: self.source_language.clone(),
            target_language: self.target_language.clone(),
            trait_id: self.trait_id,
            data: self.matrix.iter().copied().collect(),
        };
        let out = File::create(path.as_ref())?;
        serde_json::to_writer(BufWriter::new(out), &file)?;
        Ok(())
    }

    /// Load and re-validate the orthogonality invariant.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, AlignError> {
        let input = File::open(path.as_ref())?;
        let file: MapFile = serde_json::from_reader(BufReader::new(input))?;
        let matrix = Array2::from_shape_vec((file.dim, file.dim), file.data)
            .map_err(|_| AlignError::BadShape {
                rows: 0,
                cols: 0,
                dim: file.dim,
            })?;
        let mut map = OrthogonalMap::new(matrix, file.provenance)?;
        map.source_language = file.source_language;
        map.target_language = file.target_language;
        map.trait_id = file.trait_id;
        Ok(map)
    }
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    dim: usize,
    provenance: MapProvenance,
    source_language: Option<String>,
    target_language: Option<String>,
    trait_id: Option<TraitId>,
    data: Vec<f64>,
}

/// Outcome of the closed-form Procrustes solve; `unique` is false when the
/// cross-covariance was rank-deficient and other minimizers exist.
#[derive(Debug)]
pub struct ProcrustesOutcome {
    pub map: OrthogonalMap,
    pub unique: bool,
}

/// Solve `min ||M x_i - y_i||^2` over orthogonal `M` for paired rows of
/// `x` and `y` via the SVD of the cross-covariance.
pub fn procrustes(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
) -> Result<ProcrustesOutcome, AlignError> {
    if x.nrows() != y.nrows() {
        return Err(AlignError::RowMismatch(x.nrows(), y.nrows()));
    }
    if x.ncols() != y.ncols() {
        return Err(AlignError::DimMismatch(x.ncols(), y.ncols()));
    }
    if x.nrows() == 0 {
        return Err(AlignError::Empty("procrustes needs at least one pair"));
    }
    let d = x.ncols();
    // Cross-covariance C = sum_i y_i x_i' = Y' X.
    let cross = y.t().dot(&x);
    let m = DMatrix::from_fn(d, d, |r, c| cross[[r, c]]);
    let svd = m.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V'");
    let w = u * v_t;

    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let tol = sigma_max * d as f64 * f64::EPSILON;
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > tol.max(f64::MIN_POSITIVE))
        .count();
    let unique = rank == d;
    if !unique {
        log::warn!(
            "procrustes cross-covariance is rank {rank} of {d}; solution is not unique"
        );
    }

    let matrix = Array2::from_shape_fn((d, d), |(r, c)| w[(r, c)]);
    let map = OrthogonalMap::with_tolerance(matrix, MapProvenance::Procrustes, PROCRUSTES_TOLERANCE)?;
    Ok(ProcrustesOutcome { map, unique })
}

/// One step of the iterative orthogonality repair
/// `M <- (1 + beta) M - beta (M M') M`. Returns the error before and
/// after; diverging updates are an error.
pub fn orthogonalize(m: &mut Array2<f64>, beta: f64) -> Result<(f64, f64), AlignError> {
    let before = orthogonality_error(m.view());
    let mmt = m.dot(&m.t());
    let correction = mmt.dot(m);
    m.zip_mut_with(&correction, |w, c| *w = (1.0 + beta) * *w - beta * c);
    let after = orthogonality_error(m.view());
    if !after.is_finite() || after > before + 1e-12 {
        return Err(AlignError::Divergence {
            from: before,
            to: after,
        });
    }
    Ok((before, after))
}

/// Keep a trained map inside the orthogonality invariant: one update with
/// the configured beta, then, only if the error still exceeds half the
/// tolerance, further updates at beta = 0.49 (where the same rule becomes
/// a near-quadratic Newton-Schulz polar step). Returns the final error.
pub fn maintain_orthogonality(
    m: &mut Array2<f64>,
    beta: f64,
    tolerance: f64,
) -> Result<f64, AlignError> {
    let (_, mut err) = orthogonalize(m, beta)?;
    let target = tolerance / 2.0;
    let mut applications = 0usize;
    while err > target {
        if applications >= 60 {
            return Err(AlignError::Divergence {
                from: err,
                to: err,
            });
        }
        let (_, after) = orthogonalize(m, 0.49)?;
        err = after;
        applications += 1;
    }
    Ok(err)
}

/// Haar-ish random orthogonal matrix: QR of a Gaussian matrix with the
/// sign of R's diagonal folded into Q.
pub fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Array2::from_shape_fn((dim, dim), |(r_, c)| q[(r_, c)])
}

/// Validation settings for dictionary induction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub metric: SimilarityMetric,
    /// Keep only mutual nearest neighbors.
    pub mutual: bool,
    /// Cap on rows considered per side (file order, i.e. frequency order
    /// for standard `.vec` files).
    pub dictionary_cap: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            metric: SimilarityMetric::Cosine,
            mutual: true,
            dictionary_cap: 2000,
        }
    }
}

/// Adversarial training hyperparameters. `default()` is the paper-scale
/// setting; [`AdversarialConfig::desk`] is the fast configuration used by
/// tests and fixtures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdversarialConfig {
    pub epochs: usize,
    pub iterations_per_epoch: usize,
    pub batch_size: usize,
    pub disc_steps_per_map_step: usize,
    pub disc_lr: f64,
    pub map_lr: f64,
    /// Both learning rates are multiplied by this after every epoch.
    pub lr_decay: f64,
    /// Orthogonalization strength beta, in (0, 0.5).
    pub ortho_beta: f64,
    pub label_smoothing: f64,
    pub input_dropout: f64,
    pub discriminator_hidden: usize,
    pub seed: u64,
    pub init: MapInit,
    pub validation: ValidationConfig,
    /// Minimum usable lexicon words per side for trait-map training.
    pub min_lexicon_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapInit {
    Identity,
    RandomOrthogonal,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        AdversarialConfig {
            epochs: 5,
            iterations_per_epoch: 100_000,
            batch_size: 32,
            disc_steps_per_map_step: 1,
            disc_lr: 0.1,
            map_lr: 0.1,
            lr_decay: 0.95,
            ortho_beta: 0.01,
            label_smoothing: 0.0,
            input_dropout: 0.1,
            discriminator_hidden: 2048,
            seed: 0,
            init: MapInit::Identity,
            validation: ValidationConfig::default(),
            min_lexicon_size: 50,
        }
    }
}

impl AdversarialConfig {
    /// Paper-scale preset: 5 epochs of 100k iterations, hidden width 2048.
    pub fn paper() -> Self {
        AdversarialConfig::default()
    }

    /// Desk-scale preset: 5 epochs of 2000 iterations with a narrow
    /// discriminator, sized for small planted fixtures.
    pub fn desk() -> Self {
        AdversarialConfig {
            iterations_per_epoch: 2000,
            discriminator_hidden: 256,
            ..AdversarialConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        let bad = |m: String| Err(AlignError::BadConfig(m));
        if self.epochs == 0
            || self.iterations_per_epoch == 0
            || self.batch_size == 0
            || self.disc_steps_per_map_step == 0
            || self.discriminator_hidden == 0
        {
            return bad("counts must be positive".into());
        }
        if !(self.ortho_beta > 0.0 && self.ortho_beta < 0.5) {
            return bad(format!("ortho_beta {} outside (0, 0.5)", self.ortho_beta));
        }
        if !(0.0..0.5).contains(&self.label_smoothing) {
            return bad(format!("label_smoothing {} outside [0, 0.5)", self.label_smoothing));
        }
        if !(0.0..1.0).contains(&self.input_dropout) {
            return bad(format!("input_dropout {} outside [0, 1)", self.input_dropout));
        }
        if self.disc_lr <= 0.0 || self.map_lr <= 0.0 || self.lr_decay <= 0.0 {
            return bad("learning rates must be positive".into());
        }
        Ok(())
    }
}

/// Per-source-language set of five trait maps plus their training
/// histories.
#[derive(Debug, Clone)]
pub struct TraitAlignment {
    pub source_language: String,
    pub target_language: String,
    pub maps: crate::corpus::PerTrait<OrthogonalMap>,
    pub histories: crate::corpus::PerTrait<TrainHistory>,
}

/// Induce a source-to-target dictionary by nearest-neighbor matching.
/// Rows with zero norm never pair. Returns (source_row, target_row)
/// pairs sorted by source row.
pub fn induce_dictionary(
    mapped_source: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    metric: SimilarityMetric,
    mutual: bool,
) -> Vec<(usize, usize)> {
    let n = mapped_source.nrows();
    let m = target.nrows();
    if n == 0 || m == 0 {
        return Vec::new();
    }

    let normalize = |rows: ArrayView2<'_, f64>| -> Array2<f64> {
        let mut out = rows.to_owned();
        for mut r in out.rows_mut() {
            let norm = r.dot(&r).sqrt();
            if norm > 0.0 {
                r.mapv_inplace(|v| v / norm);
            }
        }
        out
    };
    let a = normalize(mapped_source);
    let b = normalize(target);
    let sims = a.dot(&b.t()); // n x m cosine matrix

    let zero_src: Vec<bool> = (0..n)
        .map(|i| mapped_source.row(i).iter().all(|&v| v == 0.0))
        .collect();
    let zero_tgt: Vec<bool> = (0..m)
        .map(|j| target.row(j).iter().all(|&v| v == 0.0))
        .collect();

    let scores: Array2<f64> = match metric {
        SimilarityMetric::Cosine => sims.clone(),
        SimilarityMetric::Csls { k } => {
            let k = k.max(1);
            let mean_top = |mut v: Vec<f64>, k: usize| -> f64 {
                v.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
                let k = k.min(v.len()).max(1);
                v.iter().take(k).sum::<f64>() / k as f64
            };
            let r_src: Vec<f64> = (0..n)
                .map(|i| mean_top(sims.row(i).to_vec(), k))
                .collect();
            let r_tgt: Vec<f64> = (0..m)
                .map(|j| mean_top(sims.column(j).to_vec(), k))
                .collect();
            Array2::from_shape_fn((n, m), |(i, j)| 2.0 * sims[[i, j]] - r_src[i] - r_tgt[j])
        }
    };

    let argmax_row = |i: usize| -> usize {
        let row = scores.row(i);
        let mut best = 0usize;
        for j in 1..m {
            if row[j] > row[best] {
                best = j;
            }
        }
        best
    };
    let argmax_col = |j: usize| -> usize {
        let col = scores.column(j);
        let mut best = 0usize;
        for i in 1..n {
            if col[i] > col[best] {
                best = i;
            }
        }
        best
    };

    let mut pairs = Vec::new();
    for i in 0..n {
        if zero_src[i] {
            continue;
        }
        let j = argmax_row(i);
        if zero_tgt[j] {
            continue;
        }
        if !mutual || argmax_col(j) == i {
            pairs.push((i, j));
        }
    }
    if mutual && pairs.is_empty() {
        // Degenerate geometry; fall back to forward-only matching.
        for i in 0..n {
            if !zero_src[i] {
                let j = argmax_row(i);
                if !zero_tgt[j] {
                    pairs.push((i, j));
                }
            }
        }
    }
    pairs
}

/// Mean cosine over an induced dictionary: the unsupervised validation
/// criterion used for model selection.
pub fn validation_score(
    map_matrix: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    cfg: &ValidationConfig,
) -> f64 {
    let n = x.nrows().min(cfg.dictionary_cap);
    let m = y.nrows().min(cfg.dictionary_cap);
    if n == 0 || m == 0 {
        return -1.0;
    }
    let xs = x.slice(ndarray::s![..n, ..]);
    let ys = y.slice(ndarray::s![..m, ..]);
    let mapped = xs.dot(&map_matrix.t());
    let pairs = induce_dictionary(mapped.view(), ys, cfg.metric, cfg.mutual);
    if pairs.is_empty() {
        return -1.0;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for &(i, j) in &pairs {
        if let Some(c) = cosine(mapped.row(i), ys.row(j)) {
            total += c;
            count += 1;
        }
    }
    if count == 0 {
        -1.0
    } else {
        total / count as f64
    }
}

/// Re-solve the map in closed form on an induced or provided dictionary.
pub fn refine_with_procrustes(
    map: &OrthogonalMap,
    x_table: &EmbeddingTable,
    y_table: &EmbeddingTable,
    dictionary: &[(usize, usize)],
) -> Result<OrthogonalMap, AlignError> {
    if dictionary.is_empty() {
        return Err(AlignError::Empty("refinement dictionary"));
    }
    let d = x_table.dim();
    if d != y_table.dim() {
        return Err(AlignError::DimMismatch(d, y_table.dim()));
    }
    let mut xp = Array2::zeros((dictionary.len(), d));
    let mut yp = Array2::zeros((dictionary.len(), d));
    for (row, &(i, j)) in dictionary.iter().enumerate() {
        xp.row_mut(row).assign(&x_table.row(i));
        yp.row_mut(row).assign(&y_table.row(j));
    }
    let outcome = procrustes(xp.view(), yp.view())?;
    let provenance = match map.provenance() {
        MapProvenance::Adversarial | MapProvenance::AdversarialRefined => {
            MapProvenance::AdversarialRefined
        }
        _ => MapProvenance::Procrustes,
    };
    let mut refined = OrthogonalMap::with_tolerance(
        outcome.map.matrix.clone(),
        provenance,
        PROCRUSTES_TOLERANCE,
    )?;
    refined.source_language = map.source_language.clone();
    refined.target_language = map.target_language.clone();
    refined.trait_id = map.trait_id;
    Ok(refined)
}

/// Adversarial training followed by `refine_rounds` rounds of dictionary
/// induction + Procrustes: the default recipe for the semantic map.
pub fn align_semantic(
    source: &EmbeddingTable,
    target: &EmbeddingTable,
    config: &AdversarialConfig,
    refine_rounds: usize,
) -> Result<(OrthogonalMap, TrainHistory), AlignError> {
    let outcome = adversarial_train(source, target, config)?;
    let mut best = outcome.map;
    let mut best_score = outcome.history.best_score;
    let history = outcome.history;
    for _ in 0..refine_rounds {
        let cap = config.validation.dictionary_cap;
        let n = source.len().min(cap);
        let m = target.len().min(cap);
        let xs = source.matrix().slice(ndarray::s![..n, ..]).to_owned();
        let ys = target.matrix().slice(ndarray::s![..m, ..]).to_owned();
        let mapped = best.apply(xs.view())?;
        let pairs = induce_dictionary(
            mapped.view(),
            ys.view(),
            config.validation.metric,
            config.validation.mutual,
        );
        if pairs.is_empty() {
            break;
        }
        let refined = refine_with_procrustes(&best, source, target, &pairs)?;
        let score = validation_score(
            refined.matrix(),
            source.matrix(),
            target.matrix(),
            &config.validation,
        );
        if score > best_score {
            best_score = score;
            best = refined
                .with_languages(source.language(), target.language());
        } else {
            break;
        }
    }
    Ok((best, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn procrustes_identity_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_matrix(20, 6, &mut rng);
        let outcome = procrustes(x.view(), x.view()).unwrap();
        let eye = Array2::<f64>::eye(6);
        let diff: f64 = (&outcome.map.matrix - &eye).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(diff < 1e-10, "||M - I||_F = {diff}");
        assert!(outcome.unique);
    }

    #[test]
    fn procrustes_recovers_planted_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rotation = random_orthogonal(10, &mut rng);
        let x = random_matrix(50, 10, &mut rng);
        let y = x.dot(&rotation.t());
        let outcome = procrustes(x.view(), y.view()).unwrap();
        let diff: f64 = (&outcome.map.matrix - &rotation)
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-8, "||M - R||_F = {diff}");
    }

    #[test]
    fn procrustes_noisy_objective_matches_numeric_minimizer() {
        // Oracle: for d=2 the orthogonal group is {rotation(theta),
        // reflection(theta)}; scan theta finely on both branches and
        // compare the best objective value with the closed form's.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rotation = random_orthogonal(2, &mut rng);
        let x = random_matrix(30, 2, &mut rng);
        let mut y = x.dot(&rotation.t());
        for v in y.iter_mut() {
            *v += rng.gen_range(-0.05..0.05);
        }

        let objective = |m: &Array2<f64>| -> f64 {
            let mapped = x.dot(&m.t());
            (&mapped - &y).iter().map(|v| v * v).sum()
        };

        let mut oracle_best = f64::INFINITY;
        let steps = 400_000;
        for s in 0..steps {
            let theta = 2.0 * std::f64::consts::PI * s as f64 / steps as f64;
            let (sin, cos) = theta.sin_cos();
            let rot = array![[cos, -sin], [sin, cos]];
            let refl = array![[cos, sin], [sin, -cos]];
            oracle_best = oracle_best.min(objective(&rot)).min(objective(&refl));
        }

        let outcome = procrustes(x.view(), y.view()).unwrap();
        let closed = objective(&outcome.map.matrix.clone());
        assert!(
            closed <= oracle_best + 1e-6,
            "closed form {closed} vs oracle {oracle_best}"
        );
        // The fine scan should get close to the optimum too.
        assert!((closed - oracle_best).abs() < 1e-6);
    }

    #[test]
    fn procrustes_rank_deficient_flags_non_unique() {
        // All mass on one direction: cross-covariance has rank 1.
        let x = array![[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        let y = x.clone();
        let outcome = procrustes(x.view(), y.view()).unwrap();
        assert!(!outcome.unique);
    }

    #[test]
    fn procrustes_shape_errors() {
        let x = array![[1.0, 0.0]];
        let y = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            procrustes(x.view(), y.view()),
            Err(AlignError::RowMismatch(1, 2))
        ));
    }

    #[test]
    fn orthogonalize_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random_orthogonal(5, &mut rng);
        let mut m = q.clone();
        orthogonalize(&mut m, 0.01).unwrap();
        let diff: f64 = (&m - &q).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(diff < 1e-12, "moved an orthogonal matrix by {diff}");
    }

    #[test]
    fn orthogonalize_scaled_identity_matches_scalar_oracle() {
        // Oracle: for M = c*I the update reduces to the scalar iteration
        // c <- c (1 + beta (1 - c^2)); iterate it independently and compare.
        let d = 4;
        let beta = 0.01;
        let mut m = Array2::<f64>::eye(d) * 1.01;
        let mut c = 1.01f64;
        for _ in 0..50 {
            orthogonalize(&mut m, beta).unwrap();
            c = c * (1.0 + beta * (1.0 - c * c));
        }
        for i in 0..d {
            for j in 0..d {
                let expect = if i == j { c } else { 0.0 };
                assert_abs_diff_eq!(m[[i, j]], expect, epsilon = 1e-12);
            }
        }
        // 50 applications shrink the error but do not eliminate it; keep
        // iterating to reach 1e-6.
        let after_50 = orthogonality_error(m.view());
        let initial = orthogonality_error((Array2::<f64>::eye(d) * 1.01).view());
        assert!(after_50 < initial);
        for _ in 0..600 {
            orthogonalize(&mut m, beta).unwrap();
        }
        assert!(orthogonality_error(m.view()) < 1e-6);
    }

    #[test]
    fn orthogonalize_monotone_on_random_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_orthogonal(6, &mut rng);
        let noise = random_matrix(6, 6, &mut rng) * 0.05;
        let mut m = &q + &noise;
        let mut last = orthogonality_error(m.view());
        for _ in 0..20 {
            let (before, after) = orthogonalize(&mut m, 0.05).unwrap();
            assert_abs_diff_eq!(before, last, epsilon = 1e-12);
            assert!(after <= before + 1e-12);
            last = after;
        }
    }

    #[test]
    fn apply_preserves_norms_and_cosines() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = random_orthogonal(8, &mut rng);
        let map = OrthogonalMap::new(q, MapProvenance::Procrustes).unwrap();
        let x = random_matrix(10, 8, &mut rng);
        let mapped = map.apply(x.view()).unwrap();
        for (a, b) in x.rows().into_iter().zip(mapped.rows()) {
            let na = a.dot(&a).sqrt();
            let nb = b.dot(&b).sqrt();
            assert!((na - nb).abs() < 1e-6);
        }
        for i in 0..10 {
            for j in (i + 1)..10 {
                let orig = cosine(x.row(i), x.row(j)).unwrap();
                let rot = cosine(mapped.row(i), mapped.row(j)).unwrap();
                assert!((orig - rot).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn identity_map_is_noop() {
        let map = OrthogonalMap::identity(3);
        let x = array![[1.0, 2.0, 3.0]];
        let y = map.apply(x.view()).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn composition_equals_multiplied_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = OrthogonalMap::new(random_orthogonal(5, &mut rng), MapProvenance::Procrustes)
            .unwrap();
        let b = OrthogonalMap::new(random_orthogonal(5, &mut rng), MapProvenance::Procrustes)
            .unwrap();
        let x = random_matrix(12, 5, &mut rng);
        let two_step = a.apply(b.apply(x.view()).unwrap().view()).unwrap();
        let composed = a.after(&b).unwrap();
        let one_step = composed.apply(x.view()).unwrap();
        for (p, q) in two_step.iter().zip(one_step.iter()) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn map_dim_mismatch_errors() {
        let map = OrthogonalMap::identity(3);
        let x = array![[1.0, 2.0]];
        assert!(matches!(
            map.apply(x.view()),
            Err(AlignError::DimMismatch(2, 3))
        ));
    }

    #[test]
    fn non_orthogonal_matrix_rejected() {
        let m = array![[1.0, 0.5], [0.0, 1.0]];
        assert!(matches!(
            OrthogonalMap::new(m, MapProvenance::Procrustes),
            Err(AlignError::NotOrthogonal(_))
        ));
    }

    #[test]
    fn map_save_load_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let map = OrthogonalMap::new(random_orthogonal(7, &mut rng), MapProvenance::Adversarial)
            .unwrap()
            .with_languages("xx", "en")
            .with_trait(TraitId::Agr);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.json");
        map.save(&path).unwrap();
        let back = OrthogonalMap::load(&path).unwrap();
        assert_eq!(back.dim(), 7);
        assert_eq!(back.provenance(), MapProvenance::Adversarial);
        assert_eq!(back.source_language(), Some("xx"));
        assert_eq!(back.trait_id(), Some(TraitId::Agr));
        for (a, b) in map.matrix().iter().zip(back.matrix().iter()) {
            assert_eq!(a, b, "round trip must be bit-exact");
        }
    }

    #[test]
    fn induced_dictionary_identifies_planted_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_matrix(30, 6, &mut rng);
        // Target = same rows, shuffled is unnecessary; identity pairing.
        let pairs = induce_dictionary(x.view(), x.view(), SimilarityMetric::Cosine, true);
        assert_eq!(pairs.len(), 30);
        for (i, j) in pairs {
            assert_eq!(i, j);
        }
    }

    #[test]
    fn csls_dictionary_matches_planted_pairs_too() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random_matrix(25, 5, &mut rng);
        let pairs = induce_dictionary(x.view(), x.view(), SimilarityMetric::csls(5), true);
        assert_eq!(pairs.len(), 25);
        for (i, j) in pairs {
            assert_eq!(i, j);
        }
    }

    #[test]
    fn refine_recovers_rotation_from_dictionary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rotation = random_orthogonal(6, &mut rng);
        let x = random_matrix(40, 6, &mut rng);
        let y = x.dot(&rotation.t());
        let words: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
        let xt = EmbeddingTable::from_matrix("xx", SpaceTag::Mono, words.clone(), x).unwrap();
        let yt = EmbeddingTable::from_matrix("en", SpaceTag::Mono, words, y).unwrap();
        let dict: Vec<(usize, usize)> = (0..40).map(|i| (i, i)).collect();
        let start = OrthogonalMap::identity(6);
        let refined = refine_with_procrustes(&start, &xt, &yt, &dict).unwrap();
        let diff: f64 = (&refined.matrix - &rotation)
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-8);
    }

    #[test]
    fn refine_empty_dictionary_errors() {
        let xt = EmbeddingTable::from_matrix(
            "xx",
            SpaceTag::Mono,
            vec!["a".into()],
            array![[1.0, 0.0]],
        )
        .unwrap();
        let start = OrthogonalMap::identity(2);
        assert!(matches!(
            refine_with_procrustes(&start, &xt, &xt, &[]),
            Err(AlignError::Empty(_))
        ));
    }

    #[test]
    fn refine_never_lowers_dictionary_mean_cosine() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rotation = random_orthogonal(5, &mut rng);
        let x = random_matrix(30, 5, &mut rng);
        let mut y = x.dot(&rotation.t());
        for v in y.iter_mut() {
            *v += rng.gen_range(-0.02..0.02);
        }
        let words: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
        let xt = EmbeddingTable::from_matrix("xx", SpaceTag::Mono, words.clone(), x.clone())
            .unwrap();
        let yt =
            EmbeddingTable::from_matrix("en", SpaceTag::Mono, words, y.clone()).unwrap();
        let dict: Vec<(usize, usize)> = (0..30).map(|i| (i, i)).collect();

        let start = OrthogonalMap::identity(5);
        let before = crate::embeddings::mean_cosine(
            start.apply(x.view()).unwrap().view(),
            y.view(),
            &dict,
        )
        .unwrap();
        let refined = refine_with_procrustes(&start, &xt, &yt, &dict).unwrap();
        let after = crate::embeddings::mean_cosine(
            refined.apply(x.view()).unwrap().view(),
            y.view(),
            &dict,
        )
        .unwrap();
        assert!(
            after >= before - 1e-12,
            "refinement lowered mean cosine: {before} -> {after}"
        );
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for d in [2, 5, 16] {
            let q = random_orthogonal(d, &mut rng);
            assert!(orthogonality_error(q.view()) < 1e-12);
        }
    }
}
