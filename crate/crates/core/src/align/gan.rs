//! Adversarial training of orthogonal maps: a discriminator learns to
//! tell mapped source vectors from target vectors while the map is
//! trained to fool it, alternating one-vs-one with SGD, orthogonality
//! repair after every map step, and per-epoch validation by induced
//! dictionary mean cosine.

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::discriminator::Discriminator;
use super::{
    maintain_orthogonality, orthogonality_error, random_orthogonal, validation_score,
    AdversarialConfig, AlignError, MapInit, MapProvenance, OrthogonalMap, TraitAlignment,
    ORTHOGONALITY_TOLERANCE,
};
use crate::corpus::PerTrait;
use crate::embeddings::EmbeddingTable;
use crate::lexicon::TraitLexicon;

const PROB_CLAMP: f64 = 1e-9;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn bce_to_target(p: f64, target: f64) -> f64 {
    let p = clamp_prob(p);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// Sum of per-side mean BCE terms: the shared shape of the discriminator
/// and mapping objectives. `mapped_target` / `target_target` are the
/// labels assigned to mapped-source and target probabilities.
pub fn loss_from_probabilities(
    probs_mapped: &[f64],
    probs_target: &[f64],
    mapped_target: f64,
    target_target: f64,
) -> f64 {
    let side = |probs: &[f64], target: f64| -> f64 {
        probs.iter().map(|&p| bce_to_target(p, target)).sum::<f64>() / probs.len() as f64
    };
    side(probs_mapped, mapped_target) + side(probs_target, target_target)
}

/// Discriminator objective: label mapped source vectors 1 and target
/// vectors 0 (smoothed to 1-s and s).
pub fn discriminator_loss(
    disc: &Discriminator,
    map: &OrthogonalMap,
    source_batch: ArrayView2<'_, f64>,
    target_batch: ArrayView2<'_, f64>,
    label_smoothing: f64,
) -> Result<f64, AlignError> {
    if source_batch.nrows() == 0 || target_batch.nrows() == 0 {
        return Err(AlignError::Empty("loss batch"));
    }
    let mapped = map.apply(source_batch)?;
    let pm = disc.probabilities(mapped.view());
    let pt = disc.probabilities(target_batch);
    Ok(loss_from_probabilities(
        pm.as_slice().expect("contiguous"),
        pt.as_slice().expect("contiguous"),
        1.0 - label_smoothing,
        label_smoothing,
    ))
}

/// Mapping objective: the discriminator loss with flipped labels.
pub fn mapping_loss(
    disc: &Discriminator,
    map: &OrthogonalMap,
    source_batch: ArrayView2<'_, f64>,
    target_batch: ArrayView2<'_, f64>,
    label_smoothing: f64,
) -> Result<f64, AlignError> {
    if source_batch.nrows() == 0 || target_batch.nrows() == 0 {
        return Err(AlignError::Empty("loss batch"));
    }
    let mapped = map.apply(source_batch)?;
    let pm = disc.probabilities(mapped.view());
    let pt = disc.probabilities(target_batch);
    Ok(loss_from_probabilities(
        pm.as_slice().expect("contiguous"),
        pt.as_slice().expect("contiguous"),
        label_smoothing,
        1.0 - label_smoothing,
    ))
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub mean_disc_loss: f64,
    pub mean_map_loss: f64,
    pub validation_score: f64,
    pub orth_error: f64,
    pub disc_lr: f64,
    pub map_lr: f64,
}

/// Full record of one adversarial run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Validation score of the initial map, before any update.
    pub initial_score: f64,
    pub epochs: Vec<EpochStats>,
    /// Largest `||W'W - I||_F` observed after any map update.
    pub max_orth_error: f64,
    /// Epoch whose map was selected; `None` keeps the initial map.
    pub selected_epoch: Option<usize>,
    pub best_score: f64,
}

/// Everything a training run produces. `map` is the validation-selected
/// map; `final_map` and `discriminator` are the end-of-training state
/// used for convergence probes.
pub struct AdversarialOutcome {
    pub map: OrthogonalMap,
    pub final_map: OrthogonalMap,
    pub discriminator: Discriminator,
    pub history: TrainHistory,
}

fn sample_rows(data: ArrayView2<'_, f64>, batch: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = data.nrows();
    let idx: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..n)).collect();
    data.select(Axis(0), &idx)
}

/// Train an orthogonal map from the rows of `x` to the distribution of
/// the rows of `y`. Deterministic for a fixed config.
pub fn adversarial_train_matrices(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    config: &AdversarialConfig,
) -> Result<AdversarialOutcome, AlignError> {
    config.validate()?;
    if x.ncols() != y.ncols() {
        return Err(AlignError::DimMismatch(x.ncols(), y.ncols()));
    }
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(AlignError::Empty("training table"));
    }
    let d = x.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut w = match config.init {
        MapInit::Identity => Array2::eye(d),
        MapInit::RandomOrthogonal => random_orthogonal(d, &mut rng),
    };
    let mut disc = Discriminator::new(d, config.discriminator_hidden, config.input_dropout, &mut rng);

    let initial_score = validation_score(w.view(), x, y, &config.validation);
    let mut best_matrix = w.clone();
    let mut best_score = initial_score;
    let mut selected_epoch: Option<usize> = None;

    let mut disc_lr = config.disc_lr;
    let mut map_lr = config.map_lr;
    let smooth = config.label_smoothing;
    let bs = config.batch_size;
    let mut max_orth_error: f64 = orthogonality_error(w.view());
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut disc_loss_sum = 0.0;
        let mut map_loss_sum = 0.0;

        for iteration in 0..config.iterations_per_epoch {
            // Discriminator step(s): minimize Eq-3-style loss.
            let mut last_disc_loss = 0.0;
            for _ in 0..config.disc_steps_per_map_step {
                let xb = sample_rows(x, bs, &mut rng);
                let yb = sample_rows(y, bs, &mut rng);
                let mapped = xb.dot(&w.t());
                let input = concatenate(Axis(0), &[mapped.view(), yb.view()])
                    .expect("batch shapes agree");
                let cache = disc.forward(input.view(), Some(&mut rng));
                let probs = cache.probabilities();

                let n = bs as f64;
                let mut loss = 0.0;
                let mut logit_grad = Array1::zeros(2 * bs);
                for i in 0..2 * bs {
                    let target = if i < bs { 1.0 - smooth } else { smooth };
                    loss += bce_to_target(probs[i], target) / n;
                    logit_grad[i] = (probs[i] - target) / n;
                }
                last_disc_loss = loss;
                let grads = disc.backward(&cache, &logit_grad);
                disc.sgd_step(&grads, disc_lr);
            }

            // Map step: minimize the flipped-label loss through a frozen
            // discriminator (evaluation mode, no dropout).
            let xb = sample_rows(x, bs, &mut rng);
            let yb = sample_rows(y, bs, &mut rng);
            let mapped = xb.dot(&w.t());
            let cache = disc.forward(mapped.view(), None);
            let pm = cache.probabilities();
            let pt = disc.probabilities(yb.view());
            let map_loss = loss_from_probabilities(
                pm.as_slice().expect("contiguous"),
                pt.as_slice().expect("contiguous"),
                smooth,
                1.0 - smooth,
            );

            let n = bs as f64;
            let logit_grad = Array1::from_iter(pm.iter().map(|&p| (p - smooth) / n));
            let grads = disc.backward(&cache, &logit_grad);
            // z_i = W x_i  =>  dL/dW = sum_i g_i x_i'.
            let map_grad = grads.input.t().dot(&xb);
            w.scaled_add(-map_lr, &map_grad);
            let after = maintain_orthogonality(&mut w, config.ortho_beta, ORTHOGONALITY_TOLERANCE)?;
            max_orth_error = max_orth_error.max(after);

            disc_loss_sum += last_disc_loss;
            map_loss_sum += map_loss;
            if !last_disc_loss.is_finite() || !map_loss.is_finite() {
                return Err(AlignError::NonFinite {
                    epoch,
                    iteration,
                    disc_loss: last_disc_loss,
                    map_loss,
                    map_norm: w.iter().map(|v| v * v).sum::<f64>().sqrt(),
                });
            }
        }

        let score = validation_score(w.view(), x, y, &config.validation);
        epochs.push(EpochStats {
            mean_disc_loss: disc_loss_sum / config.iterations_per_epoch as f64,
            mean_map_loss: map_loss_sum / config.iterations_per_epoch as f64,
            validation_score: score,
            orth_error: orthogonality_error(w.view()),
            disc_lr,
            map_lr,
        });
        if score > best_score {
            best_score = score;
            best_matrix = w.clone();
            selected_epoch = Some(epoch);
        }
        disc_lr *= config.lr_decay;
        map_lr *= config.lr_decay;
    }

    let map = OrthogonalMap::new(best_matrix, MapProvenance::Adversarial)?;
    let final_map = OrthogonalMap::new(w, MapProvenance::Adversarial)?;
    Ok(AdversarialOutcome {
        map,
        final_map,
        discriminator: disc,
        history: TrainHistory {
            initial_score,
            epochs,
            max_orth_error,
            selected_epoch,
            best_score,
        },
    })
}

/// Table-level wrapper around [`adversarial_train_matrices`] carrying
/// language metadata onto the returned map.
pub fn adversarial_train(
    source: &EmbeddingTable,
    target: &EmbeddingTable,
    config: &AdversarialConfig,
) -> Result<AdversarialOutcome, AlignError> {
    let mut outcome = adversarial_train_matrices(source.matrix(), target.matrix(), config)?;
    outcome.map = outcome
        .map
        .with_languages(source.language(), target.language());
    outcome.final_map = outcome
        .final_map
        .with_languages(source.language(), target.language());
    Ok(outcome)
}

fn lexicon_matrix(
    lexicon: &TraitLexicon,
    table: &EmbeddingTable,
) -> (Array2<f64>, Vec<String>) {
    let present: Vec<&str> = lexicon
        .ranked_words
        .iter()
        .map(|(w, _)| w.as_str())
        .filter(|w| table.contains(w))
        .collect();
    let mut matrix = Array2::zeros((present.len(), table.dim()));
    for (row, word) in present.iter().enumerate() {
        matrix
            .row_mut(row)
            .assign(&table.vector(word).expect("filtered to present words"));
    }
    (matrix, present.into_iter().map(String::from).collect())
}

/// Train one trait's map from a source lexicon's multilingual vectors to
/// the target lexicon's.
pub fn train_trait_map(
    multi_source: &EmbeddingTable,
    multi_target: &EmbeddingTable,
    lexicon_source: &TraitLexicon,
    lexicon_target: &TraitLexicon,
    config: &AdversarialConfig,
) -> Result<AdversarialOutcome, AlignError> {
    let trait_id = lexicon_source.trait_id;
    let (x, _) = lexicon_matrix(lexicon_source, multi_source);
    let (y, _) = lexicon_matrix(lexicon_target, multi_target);
    for (side, rows) in [("source", x.nrows()), ("target", y.nrows())] {
        if rows < config.min_lexicon_size {
            let _ = side;
            return Err(AlignError::LexiconTooSmall {
                trait_name: trait_id.name().to_string(),
                found: rows,
                need: config.min_lexicon_size,
            });
        }
    }
    let mut outcome = adversarial_train_matrices(x.view(), y.view(), config)?;
    outcome.map = outcome
        .map
        .with_languages(multi_source.language(), multi_target.language())
        .with_trait(trait_id);
    outcome.final_map = outcome
        .final_map
        .with_languages(multi_source.language(), multi_target.language())
        .with_trait(trait_id);
    Ok(outcome)
}

/// Train all five trait maps for one source language. Each trait gets its
/// own derived seed so runs are reproducible yet decorrelated.
pub fn train_global_trait(
    multi_source: &EmbeddingTable,
    multi_target: &EmbeddingTable,
    lexicons_source: &PerTrait<TraitLexicon>,
    lexicons_target: &PerTrait<TraitLexicon>,
    config: &AdversarialConfig,
) -> Result<TraitAlignment, AlignError> {
    let mut maps: Vec<OrthogonalMap> = Vec::with_capacity(5);
    let mut histories: Vec<TrainHistory> = Vec::with_capacity(5);
    for t in crate::corpus::TraitId::ALL {
        let mut trait_config = config.clone();
        trait_config.seed = config.seed.wrapping_add(t.index() as u64);
        let outcome = train_trait_map(
            multi_source,
            multi_target,
            &lexicons_source[t],
            &lexicons_target[t],
            &trait_config,
        )?;
        maps.push(outcome.map);
        histories.push(outcome.history);
    }
    let maps: [OrthogonalMap; 5] = maps.try_into().expect("five traits");
    let histories: [TrainHistory; 5] = histories.try_into().expect("five traits");
    Ok(TraitAlignment {
        source_language: multi_source.language().to_string(),
        target_language: multi_target.language().to_string(),
        maps: PerTrait(maps),
        histories: PerTrait(histories),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn constant_output_disc(dim: usize, logit: f64) -> Discriminator {
        // Zero weights push every pre-activation to the bias path; set the
        // final bias to produce the requested logit.
        Discriminator::from_layers(
            vec![
                Array2::zeros((dim, 4)),
                Array2::zeros((4, 4)),
                Array2::zeros((4, 1)),
            ],
            vec![
                Array1::zeros(4),
                Array1::zeros(4),
                Array1::from_vec(vec![logit]),
            ],
            0.0,
        )
    }

    #[test]
    fn uninformative_discriminator_gives_two_ln_two() {
        let disc = constant_output_disc(3, 0.0);
        let map = OrthogonalMap::identity(3);
        let x = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let y = array![[0.0, 0.0, 1.0]];
        let ld = discriminator_loss(&disc, &map, x.view(), y.view(), 0.0).unwrap();
        let lw = mapping_loss(&disc, &map, x.view(), y.view(), 0.0).unwrap();
        let two_ln_two = 2.0 * std::f64::consts::LN_2;
        assert_abs_diff_eq!(ld, two_ln_two, epsilon = 1e-12);
        assert_abs_diff_eq!(lw, two_ln_two, epsilon = 1e-12);
    }

    #[test]
    fn perfectly_separating_discriminator_hits_clamp_floor() {
        // One input coordinate decides the class; huge weights saturate the
        // sigmoid so the loss reduces to the clamp bound.
        let disc = Discriminator::from_layers(
            vec![
                array![[1000.0], [0.0]],
                array![[1.0]],
                array![[1000.0]],
            ],
            vec![Array1::zeros(1), Array1::zeros(1), Array1::zeros(1)],
            0.0,
        );
        let map = OrthogonalMap::identity(2);
        let x = array![[1.0, 0.0]]; // logit ~ +1e6 -> p ~ 1
        let y = array![[-1.0, 0.0]]; // logit ~ -2e5 (leaky) -> p ~ 0
        let loss = discriminator_loss(&disc, &map, x.view(), y.view(), 0.0).unwrap();
        let floor = 2.0 * -(1.0 - PROB_CLAMP_TEST).ln();
        assert!(loss >= 0.0);
        assert!(
            (loss - floor).abs() < 1e-12,
            "loss {loss} should sit at the clamp floor {floor}"
        );
    }

    const PROB_CLAMP_TEST: f64 = 1e-9;

    #[test]
    fn losses_match_independent_formula_on_random_batch() {
        // Independent oracle: evaluate Eq-3/Eq-4 shape directly from the
        // discriminator's probabilities with separate code.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let disc = Discriminator::new(4, 8, 0.0, &mut rng);
        let map = OrthogonalMap::new(random_orthogonal(4, &mut rng), MapProvenance::Procrustes)
            .unwrap();
        let x = Array2::from_shape_fn((5, 4), |_| rng.gen_range(-1.0..1.0));
        let y = Array2::from_shape_fn((3, 4), |_| rng.gen_range(-1.0..1.0));

        let mapped = map.apply(x.view()).unwrap();
        let pm = disc.probabilities(mapped.view());
        let pt = disc.probabilities(y.view());
        let mut expect_d = 0.0;
        for p in pm.iter() {
            expect_d += -(p.ln()) / pm.len() as f64;
        }
        for p in pt.iter() {
            expect_d += -((1.0 - p).ln()) / pt.len() as f64;
        }
        let mut expect_w = 0.0;
        for p in pm.iter() {
            expect_w += -((1.0 - p).ln()) / pm.len() as f64;
        }
        for p in pt.iter() {
            expect_w += -(p.ln()) / pt.len() as f64;
        }

        let ld = discriminator_loss(&disc, &map, x.view(), y.view(), 0.0).unwrap();
        let lw = mapping_loss(&disc, &map, x.view(), y.view(), 0.0).unwrap();
        assert_abs_diff_eq!(ld, expect_d, epsilon = 1e-12);
        assert_abs_diff_eq!(lw, expect_w, epsilon = 1e-12);
    }

    #[test]
    fn constant_probability_sum_bound() {
        // At constant discriminator output p both losses equal
        // -ln p - ln(1-p), so their sum is minimized at p = 0.5 with 4 ln 2.
        let four_ln_two = 4.0 * std::f64::consts::LN_2;
        for p in [0.3f64, 0.5, 0.7] {
            let logit = (p / (1.0 - p)).ln();
            let disc = constant_output_disc(2, logit);
            let map = OrthogonalMap::identity(2);
            let x = array![[1.0, 0.0]];
            let y = array![[0.0, 1.0]];
            let ld = discriminator_loss(&disc, &map, x.view(), y.view(), 0.0).unwrap();
            let lw = mapping_loss(&disc, &map, x.view(), y.view(), 0.0).unwrap();
            let expected = -(p.ln()) - (1.0 - p).ln();
            assert_abs_diff_eq!(ld, expected, epsilon = 1e-9);
            assert_abs_diff_eq!(lw, expected, epsilon = 1e-9);
            assert!(ld + lw >= four_ln_two - 1e-9);
            if (p - 0.5).abs() < 1e-12 {
                assert_abs_diff_eq!(ld + lw, four_ln_two, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn hand_set_probabilities_match_hand_computation() {
        // p = 0.8 on the mapped side, q = 0.6 on the target side:
        // L_W = -ln(0.2) - ln(0.6).
        let got = loss_from_probabilities(&[0.8], &[0.6], 0.0, 1.0);
        let expect = -(0.2f64.ln()) - 0.6f64.ln();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
        assert_abs_diff_eq!(got, 2.1203, epsilon = 1e-4);
    }

    #[test]
    fn label_smoothing_shifts_targets() {
        let disc = constant_output_disc(2, 0.0);
        let map = OrthogonalMap::identity(2);
        let x = array![[1.0, 0.0]];
        let y = array![[0.0, 1.0]];
        let s = 0.2;
        let ld = discriminator_loss(&disc, &map, x.view(), y.view(), s).unwrap();
        // At p = 0.5 the smoothed BCE is still -ln(0.5) per side.
        assert_abs_diff_eq!(ld, 2.0 * std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let disc = constant_output_disc(2, 0.0);
        let map = OrthogonalMap::identity(2);
        let x = Array2::<f64>::zeros((0, 2));
        let y = array![[0.0, 1.0]];
        assert!(matches!(
            discriminator_loss(&disc, &map, x.view(), y.view(), 0.0),
            Err(AlignError::Empty(_))
        ));
    }

    use super::super::random_orthogonal;

    #[test]
    fn identical_tables_never_regress_below_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = Array2::from_shape_fn((200, 8), |_| rng.gen_range(-1.0..1.0));
        let config = AdversarialConfig {
            epochs: 2,
            iterations_per_epoch: 50,
            discriminator_hidden: 32,
            seed: 5,
            ..AdversarialConfig::desk()
        };
        let outcome = adversarial_train_matrices(x.view(), x.view(), &config).unwrap();
        assert!(
            outcome.history.best_score >= outcome.history.initial_score,
            "selection regressed: {} < {}",
            outcome.history.best_score,
            outcome.history.initial_score
        );
        // Identity pairing on identical tables scores 1.0 and cannot be
        // beaten, so the initial map must be kept.
        assert_abs_diff_eq!(outcome.history.initial_score, 1.0, epsilon = 1e-9);
        assert!(outcome.history.selected_epoch.is_none());
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let x = Array2::from_shape_fn((100, 6), |_| rng.gen_range(-1.0..1.0));
        let rotation = random_orthogonal(6, &mut rng);
        let y = x.dot(&rotation.t());
        let config = AdversarialConfig {
            epochs: 1,
            iterations_per_epoch: 40,
            discriminator_hidden: 16,
            seed: 9,
            ..AdversarialConfig::desk()
        };
        let a = adversarial_train_matrices(x.view(), y.view(), &config).unwrap();
        let b = adversarial_train_matrices(x.view(), y.view(), &config).unwrap();
        for (p, q) in a.final_map.matrix().iter().zip(b.final_map.matrix().iter()) {
            assert_eq!(p, q, "same seed must be bit-identical");
        }
    }

    #[test]
    fn orthogonality_tracked_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let x = Array2::from_shape_fn((150, 6), |_| rng.gen_range(-1.0..1.0));
        let rotation = random_orthogonal(6, &mut rng);
        let y = x.dot(&rotation.t());
        let config = AdversarialConfig {
            epochs: 1,
            iterations_per_epoch: 200,
            discriminator_hidden: 32,
            seed: 3,
            ..AdversarialConfig::desk()
        };
        let outcome = adversarial_train_matrices(x.view(), y.view(), &config).unwrap();
        assert!(outcome.history.max_orth_error <= 1e-3);
    }
}
