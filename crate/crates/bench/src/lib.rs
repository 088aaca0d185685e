//! Shared fixture builders for the kernel benchmarks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use globaltrait_core::corpus::{PerTrait, UserDocument};
use globaltrait_core::embeddings::{EmbeddingTable, SpaceTag};

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

pub fn random_table(language: &str, words: usize, dim: usize, seed: u64) -> EmbeddingTable {
    let matrix = random_matrix(words, dim, seed);
    let vocab: Vec<String> = (0..words).map(|i| format!("w{i}")).collect();
    let (table, _) = EmbeddingTable::from_matrix(language, SpaceTag::Mono, vocab, matrix)
        .expect("valid table")
        .normalize();
    table
}

pub fn random_doc(language: &str, tokens: usize, vocab: usize, seed: u64) -> UserDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    UserDocument {
        user_id: format!("bench_{seed}"),
        language: language.to_string(),
        tokens: (0..tokens)
            .map(|_| format!("w{}", rng.gen_range(0..vocab)))
            .collect(),
        scores: PerTrait::from_fn(|_| 0.5),
        labels: None,
    }
}
