//! 2-D projections of embedding sets: exact PCA (top two principal
//! components) and exact-gradient t-SNE, plus the language-separation
//! statistic used to compare spaces.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("input dimension {0} is below the 2 output dimensions")]
    DimTooSmall(usize),
    #[error("{0} points but {1} group labels")]
    GroupMismatch(usize, usize),
    #[error("invalid t-SNE config: {0}")]
    BadConfig(String),
}

/// Exact-gradient t-SNE settings. Defaults follow common practice; they
/// are recorded in output metadata rather than claimed as canonical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            seed: 0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
        }
    }
}

/// Project onto the top two principal components. Deterministic: each
/// component's largest-magnitude entry is made positive.
pub fn pca_2d(points: ArrayView2<'_, f64>) -> Result<Array2<f64>, ProjectError> {
    let n = points.nrows();
    let d = points.ncols();
    if n < 2 {
        return Err(ProjectError::TooFewPoints { need: 2, got: n });
    }
    if d < 2 {
        return Err(ProjectError::DimTooSmall(d));
    }

    let mean = points.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &points - &mean.broadcast((n, d)).expect("broadcast");
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);

    let sym = DMatrix::from_fn(d, d, |r, c| cov[[r, c]]);
    let eigen = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .expect("finite eigenvalues")
    });

    let mut components = Array2::zeros((d, 2));
    for (out_col, &src_col) in order.iter().take(2).enumerate() {
        let col = eigen.eigenvectors.column(src_col);
        // Sign convention for reproducibility.
        let mut max_idx = 0;
        for i in 1..d {
            if col[i].abs() > col[max_idx].abs() {
                max_idx = i;
            }
        }
        let sign = if col[max_idx] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            components[[i, out_col]] = sign * col[i];
        }
    }
    Ok(centered.dot(&components))
}

fn squared_distances(points: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = points.nrows();
    let norms: Vec<f64> = points.rows().into_iter().map(|r| r.dot(&r)).collect();
    let gram = points.dot(&points.t());
    Array2::from_shape_fn((n, n), |(i, j)| {
        (norms[i] + norms[j] - 2.0 * gram[[i, j]]).max(0.0)
    })
}

/// Binary search the Gaussian precision that hits the target entropy.
fn conditional_probabilities(dist_row: &[f64], i: usize, target_entropy: f64) -> Vec<f64> {
    let n = dist_row.len();
    let mut beta = 1.0;
    let mut beta_min = f64::NEG_INFINITY;
    let mut beta_max = f64::INFINITY;
    let mut probs = vec![0.0; n];

    for _ in 0..50 {
        let mut sum = 0.0;
        for (j, &d) in dist_row.iter().enumerate() {
            probs[j] = if j == i { 0.0 } else { (-beta * d).exp() };
            sum += probs[j];
        }
        if sum <= 0.0 {
            // All mass collapsed; soften.
            beta /= 2.0;
            continue;
        }
        let mut entropy = 0.0;
        for p in probs.iter_mut() {
            *p /= sum;
            if *p > 1e-300 {
                entropy -= *p * p.ln();
            }
        }
        let diff = entropy - target_entropy;
        if diff.abs() < 1e-7 {
            break;
        }
        if diff > 0.0 {
            beta_min = beta;
            beta = if beta_max.is_finite() {
                (beta + beta_max) / 2.0
            } else {
                beta * 2.0
            };
        } else {
            beta_max = beta;
            beta = if beta_min.is_finite() {
                (beta + beta_min) / 2.0
            } else {
                beta / 2.0
            };
        }
    }
    probs
}

/// Exact O(n^2) t-SNE to two dimensions, deterministic for a fixed seed.
pub fn tsne_2d(points: ArrayView2<'_, f64>, config: &TsneConfig) -> Result<Array2<f64>, ProjectError> {
    let n = points.nrows();
    if n < 4 {
        return Err(ProjectError::TooFewPoints { need: 4, got: n });
    }
    if config.perplexity <= 1.0 || config.iterations == 0 || config.learning_rate <= 0.0 {
        return Err(ProjectError::BadConfig(
            "perplexity > 1, iterations > 0, learning_rate > 0 required".into(),
        ));
    }
    // The entropy target is unreachable when perplexity approaches n.
    let perplexity = config.perplexity.min((n as f64 - 1.0) / 3.0).max(2.0);
    if perplexity < config.perplexity {
        log::warn!(
            "perplexity clamped from {} to {perplexity} for {n} points",
            config.perplexity
        );
    }

    let distances = squared_distances(points);
    let target_entropy = perplexity.ln();
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        let row: Vec<f64> = distances.row(i).to_vec();
        let cond = conditional_probabilities(&row, i, target_entropy);
        for j in 0..n {
            p[[i, j]] = cond[j];
        }
    }
    // Symmetrize and normalize.
    let mut p_sym = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p_sym[[i, j]] = ((p[[i, j]] + p[[j, i]]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid stddev");
    let mut y = Array2::from_shape_fn((n, 2), |_| normal.sample(&mut rng));
    let mut velocity: Array2<f64> = Array2::zeros((n, 2));

    for iteration in 0..config.iterations {
        let exaggeration = if iteration < config.exaggeration_iterations {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iteration < config.exaggeration_iterations {
            0.5
        } else {
            0.8
        };

        // Student-t affinities in the embedding.
        let mut q_num: Array2<f64> = Array2::zeros((n, n));
        let mut q_sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[[i, 0]] - y[[j, 0]];
                let dy = y[[i, 1]] - y[[j, 1]];
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                q_num[[i, j]] = w;
                q_num[[j, i]] = w;
                q_sum += 2.0 * w;
            }
        }

        let mut grad: Array2<f64> = Array2::zeros((n, 2));
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = q_num[[i, j]];
                let q = (w / q_sum).max(1e-12);
                let coeff = 4.0 * (exaggeration * p_sym[[i, j]] - q) * w;
                grad[[i, 0]] += coeff * (y[[i, 0]] - y[[j, 0]]);
                grad[[i, 1]] += coeff * (y[[i, 1]] - y[[j, 1]]);
            }
        }

        velocity.zip_mut_with(&grad, |v, g| *v = momentum * *v - config.learning_rate * g);
        y += &velocity;

        // Re-center to keep the solution identifiable.
        let center = y.mean_axis(Axis(0)).expect("n > 0");
        for mut row in y.rows_mut() {
            row[0] -= center[0];
            row[1] -= center[1];
        }
    }
    Ok(y)
}

/// Mean inter-group centroid distance normalized by the mean distance of
/// points to their own group centroid. Smaller means the groups overlap
/// more.
pub fn separation_ratio(
    points: ArrayView2<'_, f64>,
    groups: &[usize],
) -> Result<f64, ProjectError> {
    let n = points.nrows();
    if groups.len() != n {
        return Err(ProjectError::GroupMismatch(n, groups.len()));
    }
    if n == 0 {
        return Err(ProjectError::TooFewPoints { need: 1, got: 0 });
    }
    let d = points.ncols();
    let group_count = groups.iter().copied().max().expect("nonempty") + 1;

    let mut centroids = Array2::zeros((group_count, d));
    let mut counts = vec![0usize; group_count];
    for (row, &g) in points.rows().into_iter().zip(groups) {
        let mut c = centroids.row_mut(g);
        c += &row;
        counts[g] += 1;
    }
    for g in 0..group_count {
        if counts[g] == 0 {
            continue;
        }
        let mut c = centroids.row_mut(g);
        c /= counts[g] as f64;
    }

    let mut inter = 0.0;
    let mut pairs = 0usize;
    for a in 0..group_count {
        for b in (a + 1)..group_count {
            if counts[a] == 0 || counts[b] == 0 {
                continue;
            }
            let diff: Array1<f64> = &centroids.row(a) - &centroids.row(b);
            inter += diff.dot(&diff).sqrt();
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(ProjectError::TooFewPoints { need: 2, got: 1 });
    }
    let inter_mean = inter / pairs as f64;

    let mut intra = 0.0;
    for (row, &g) in points.rows().into_iter().zip(groups) {
        let diff: Array1<f64> = &row - &centroids.row(g);
        intra += diff.dot(&diff).sqrt();
    }
    let intra_mean = (intra / n as f64).max(1e-12);
    Ok(inter_mean / intra_mean)
}
