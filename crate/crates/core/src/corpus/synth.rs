//! Synthetic corpus and embedding generator with planted ground truth:
//! a known orthogonal rotation between language spaces, designated trait
//! words, and labels recoverable by the median split. Real personality
//! corpora are not redistributable, so tests run against this.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Corpus, CorpusError, Label, PerTrait, Provenance, TraitId, UserDocument};
use crate::align::random_orthogonal;
use crate::embeddings::{EmbeddingTable, SpaceTag};

/// Parameters of the planted-structure generator.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    /// Language codes; the first is the target (high-resource) language.
    pub languages: Vec<String>,
    /// User count per language, parallel to `languages`.
    pub users_per_language: Vec<usize>,
    pub vocab_size: usize,
    pub dim: usize,
    pub seed: u64,
    /// Gaussian noise added to rotated vectors of non-target languages.
    pub noise_sigma: f64,
    /// Extra probability that a positive user's trait slot emits a trait
    /// word. Zero makes positive and negative users indistinguishable.
    pub trait_signal_strength: f64,
    /// Planted words per trait.
    pub trait_word_count: usize,
    pub tokens_per_user: usize,
    /// Baseline probability that a trait slot emits a trait word.
    pub base_trait_rate: f64,
    /// When set, every language oversamples its own designated word
    /// blocks instead of one shared set. Word vectors still correspond
    /// across languages exactly through the planted rotation; only which
    /// words carry each trait differs, mirroring how different languages
    /// express a trait with semantically different words.
    pub language_specific_trait_words: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            languages: vec!["en".into(), "xx".into()],
            users_per_language: vec![40, 40],
            vocab_size: 500,
            dim: 16,
            seed: 0,
            noise_sigma: 0.0,
            trait_signal_strength: 0.5,
            trait_word_count: 25,
            tokens_per_user: 150,
            base_trait_rate: 0.15,
            language_specific_trait_words: false,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<(), CorpusError> {
        let err = |m: String| Err(CorpusError::SynthSpec(m));
        if self.languages.is_empty() {
            return err("at least one language required".into());
        }
        if self.languages.len() != self.users_per_language.len() {
            return err(format!(
                "{} languages but {} user counts",
                self.languages.len(),
                self.users_per_language.len()
            ));
        }
        if self.users_per_language.iter().any(|&n| n < 2) {
            return err("every language needs at least 2 users".into());
        }
        if self.vocab_size < 10 * self.trait_word_count {
            return err(format!(
                "vocab_size {} < 10 * trait_word_count {}",
                self.vocab_size, self.trait_word_count
            ));
        }
        if self.vocab_size < 2 * self.trait_block_count() * self.trait_word_count {
            return err(format!(
                "vocab_size {} leaves no background words for {} trait blocks of {}",
                self.vocab_size,
                self.trait_block_count(),
                self.trait_word_count
            ));
        }
        if self.dim == 0 || self.tokens_per_user == 0 || self.trait_word_count == 0 {
            return err("dim, tokens_per_user and trait_word_count must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.trait_signal_strength)
            || !(0.0..=1.0).contains(&self.base_trait_rate)
            || self.base_trait_rate + self.trait_signal_strength > 1.0
        {
            return err("rates must lie in [0,1] with base + signal <= 1".into());
        }
        if self.noise_sigma < 0.0 {
            return err("noise_sigma must be non-negative".into());
        }
        Ok(())
    }

    /// Distinct (language, trait) word blocks in the vocabulary.
    fn trait_block_count(&self) -> usize {
        if self.language_specific_trait_words {
            5 * self.languages.len()
        } else {
            5
        }
    }
}

/// What the generator planted, for use as a test oracle.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Per non-target language: the rotation R with table(lang) = R * table(target).
    pub rotations: HashMap<String, Array2<f64>>,
    /// language -> planted trait words (identical across languages unless
    /// the spec asked for language-specific blocks).
    pub trait_words: HashMap<String, PerTrait<Vec<String>>>,
    /// language -> user_id -> planted labels.
    pub planted_labels: HashMap<String, HashMap<String, PerTrait<Label>>>,
}

impl GroundTruth {
    pub fn trait_words_for(&self, language: &str) -> &PerTrait<Vec<String>> {
        &self.trait_words[language]
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// One corpus per language, ordered as in the spec.
    pub corpora: Vec<Corpus>,
    /// One monolingual table per language, ordered as in the spec.
    pub tables: Vec<EmbeddingTable>,
    pub truth: GroundTruth,
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize, normal: &Normal<f64>) -> Array1<f64> {
    Array1::from_iter((0..dim).map(|_| normal.sample(rng)))
}

fn unit(v: Array1<f64>) -> Array1<f64> {
    let n = v.dot(&v).sqrt();
    if n == 0.0 {
        v
    } else {
        v / n
    }
}

/// Generate corpora, embedding tables, and the planted ground truth.
pub fn generate_synthetic_corpus(spec: &SynthSpec) -> Result<SyntheticData, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("valid stddev");
    let d = spec.dim;

    // Vocabulary: disjoint trait-word blocks (one set shared by every
    // language, or one set per language), the rest background.
    let block_languages: Vec<usize> = if spec.language_specific_trait_words {
        (0..spec.languages.len()).collect()
    } else {
        vec![0]
    };
    let mut blocks: HashMap<(usize, TraitId), Vec<String>> = HashMap::new();
    let mut vocab: Vec<String> = Vec::with_capacity(spec.vocab_size);
    for &li in &block_languages {
        for t in TraitId::ALL {
            let words: Vec<String> = (0..spec.trait_word_count)
                .map(|j| {
                    if spec.language_specific_trait_words {
                        format!("{}_{}_{:03}", t.name().to_lowercase(), spec.languages[li], j)
                    } else {
                        format!("{}_{:03}", t.name().to_lowercase(), j)
                    }
                })
                .collect();
            vocab.extend(words.iter().cloned());
            blocks.insert((li, t), words);
        }
    }
    let trait_word_total = vocab.len();
    let background_count = spec.vocab_size - trait_word_total;
    let background: Vec<String> = (0..background_count).map(|j| format!("bg_{j:04}")).collect();
    vocab.extend(background.iter().cloned());

    // Base geometry: a global offset breaks central symmetry so the planted
    // rotation is the unique distribution-preserving orthogonal map; every
    // (language, trait) block gets its own cluster center.
    let offset = unit(gaussian_vec(&mut rng, d, &normal)) * 0.8;
    let block_centers: Vec<Array1<f64>> = (0..block_languages.len() * 5)
        .map(|_| unit(gaussian_vec(&mut rng, d, &normal)) * 1.6)
        .collect();
    let bg_cluster_count = 8usize;
    let bg_centers: Vec<Array1<f64>> = (0..bg_cluster_count)
        .map(|_| unit(gaussian_vec(&mut rng, d, &normal)) * 1.6)
        .collect();

    let word_spread = 0.5 / (d as f64).sqrt();
    let mut base = Array2::zeros((spec.vocab_size, d));
    for (row, _) in vocab.iter().enumerate() {
        let center = if row < trait_word_total {
            &block_centers[row / spec.trait_word_count]
        } else {
            let j = rng.gen_range(0..bg_cluster_count);
            &bg_centers[j]
        };
        let v = unit(&offset + center + &(gaussian_vec(&mut rng, d, &normal) * word_spread));
        base.row_mut(row).assign(&v);
    }

    // Tables: target language gets the base, every other language a
    // rotated (optionally noised) copy with the same word strings.
    let mut tables = Vec::with_capacity(spec.languages.len());
    let mut rotations = HashMap::new();
    for (li, lang) in spec.languages.iter().enumerate() {
        let matrix = if li == 0 {
            base.clone()
        } else {
            let rotation = random_orthogonal(d, &mut rng);
            let mut m = base.dot(&rotation.t());
            if spec.noise_sigma > 0.0 {
                for v in m.iter_mut() {
                    *v += spec.noise_sigma * normal.sample(&mut rng);
                }
            }
            rotations.insert(lang.clone(), rotation);
            m
        };
        let table = EmbeddingTable::from_matrix(lang.clone(), SpaceTag::Mono, vocab.clone(), matrix)
            .expect("generated vocabulary is unique and finite");
        tables.push(table);
    }

    // Users: balanced planted labels per trait, recoverable by the median
    // split, then token streams whose trait-word rates encode the labels.
    let mut corpora = Vec::with_capacity(spec.languages.len());
    let mut planted_labels: HashMap<String, HashMap<String, PerTrait<Label>>> = HashMap::new();
    let mut trait_words_by_language: HashMap<String, PerTrait<Vec<String>>> = HashMap::new();
    for (li, lang) in spec.languages.iter().enumerate() {
        let block_for_lang = if spec.language_specific_trait_words { li } else { 0 };
        trait_words_by_language.insert(
            lang.clone(),
            PerTrait::from_fn(|t| blocks[&(block_for_lang, t)].clone()),
        );
        let n_users = spec.users_per_language[li];
        let mut labels_by_trait: Vec<Vec<Label>> = Vec::with_capacity(5);
        for _ in TraitId::ALL {
            let n_pos = n_users.div_ceil(2);
            let mut order: Vec<usize> = (0..n_users).collect();
            order.shuffle(&mut rng);
            let mut labels = vec![Label::Negative; n_users];
            for &u in order.iter().take(n_pos) {
                labels[u] = Label::Positive;
            }
            labels_by_trait.push(labels);
        }

        let mut corpus = Corpus::new(lang.clone(), Provenance::Synthetic);
        let mut lang_truth = HashMap::new();
        for u in 0..n_users {
            let planted = PerTrait::from_fn(|t| labels_by_trait[t.index()][u]);
            let scores = PerTrait::from_fn(|t| {
                let margin = rng.gen_range(0.05..0.45);
                match planted[t] {
                    Label::Positive => 0.5 + margin,
                    Label::Negative => 0.5 - margin,
                }
            });
            let mut tokens = Vec::with_capacity(spec.tokens_per_user);
            for _ in 0..spec.tokens_per_user {
                let slot = TraitId::ALL[rng.gen_range(0..5)];
                let rate = spec.base_trait_rate
                    + if planted[slot].is_positive() {
                        spec.trait_signal_strength
                    } else {
                        0.0
                    };
                let word = if rng.gen::<f64>() < rate {
                    blocks[&(block_for_lang, slot)][rng.gen_range(0..spec.trait_word_count)]
                        .clone()
                } else {
                    background[rng.gen_range(0..background_count)].clone()
                };
                tokens.push(word);
            }
            let user_id = format!("{lang}_u{u:03}");
            lang_truth.insert(user_id.clone(), planted);
            corpus.users.push(UserDocument {
                user_id,
                language: lang.clone(),
                tokens,
                scores,
                labels: None,
            });
        }
        planted_labels.insert(lang.clone(), lang_truth);
        corpora.push(corpus);
    }

    Ok(SyntheticData {
        corpora,
        tables,
        truth: GroundTruth {
            rotations,
            trait_words: trait_words_by_language,
            planted_labels,
        },
    })
}
