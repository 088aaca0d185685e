//! Cross-lingual Big Five personality toolkit.
//!
//! The crate covers the full pipeline: loading fastText-style `.vec`
//! embedding tables, ingesting personality-labeled tweet corpora,
//! extracting per-trait word lexicons with tf-idf, learning orthogonal
//! alignments between embedding spaces (Procrustes and adversarial),
//! training logistic-regression and two-channel CNN classifiers, and
//! running the cross-validation experiment grid.

pub mod align;
pub mod corpus;
pub mod embeddings;
pub mod eval;
pub mod lexicon;
pub mod models;
pub mod project;

pub use align::{AdversarialConfig, OrthogonalMap, TraitAlignment};
pub use corpus::{Corpus, FoldPlan, TraitId, UserDocument};
pub use embeddings::{EmbeddingTable, SimilarityMetric, SpaceTag};
pub use eval::ExperimentReport;
pub use lexicon::{TfIdfModel, TraitLexicon};
