//! Feature spaces for the classifiers: per-language embedding tables
//! mapped into a common space, and averaged-embedding features.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array1, ArrayView1};

use super::ModelError;
use crate::align::OrthogonalMap;
use crate::corpus::{TraitId, UserDocument};
use crate::embeddings::{EmbeddingTable, SpaceTag};

/// Which map chain produced a vector space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorMode {
    Mono,
    Multi,
    GlobalTrait,
}

/// A set of per-language tables that all live in one common space, ready
/// for direct lookup.
#[derive(Debug)]
pub struct VectorSpace {
    dim: usize,
    mode: VectorMode,
    trait_id: Option<TraitId>,
    tables: HashMap<String, Arc<EmbeddingTable>>,
}

impl VectorSpace {
    /// Monolingual space: a single language's table, unmapped.
    pub fn mono(table: Arc<EmbeddingTable>) -> Self {
        let mut tables = HashMap::new();
        let dim = table.dim();
        tables.insert(table.language().to_string(), table);
        VectorSpace {
            dim,
            mode: VectorMode::Mono,
            trait_id: None,
            tables,
        }
    }

    /// Multilingual space: the target table as-is, every source table
    /// mapped by its semantic map.
    pub fn multi(
        target: Arc<EmbeddingTable>,
        sources: &[(Arc<EmbeddingTable>, &OrthogonalMap)],
    ) -> Result<Self, ModelError> {
        let dim = target.dim();
        let mut tables = HashMap::new();
        tables.insert(target.language().to_string(), target);
        for (table, map) in sources {
            let mapped = map.apply_to_table(table, SpaceTag::Multi)?;
            tables.insert(table.language().to_string(), Arc::new(mapped));
        }
        Ok(VectorSpace {
            dim,
            mode: VectorMode::Multi,
            trait_id: None,
            tables,
        })
    }

    /// Trait-aligned space: the target stays fixed, each source table is
    /// mapped by `trait_map . semantic_map`.
    pub fn global_trait(
        target: Arc<EmbeddingTable>,
        sources: &[(Arc<EmbeddingTable>, &OrthogonalMap, &OrthogonalMap)],
        trait_id: TraitId,
    ) -> Result<Self, ModelError> {
        let dim = target.dim();
        let mut tables = HashMap::new();
        tables.insert(target.language().to_string(), target);
        for (table, semantic, trait_map) in sources {
            let chain = trait_map.after(semantic)?;
            let mapped = chain.apply_to_table(table, SpaceTag::Trait(trait_id))?;
            tables.insert(table.language().to_string(), Arc::new(mapped));
        }
        Ok(VectorSpace {
            dim,
            mode: VectorMode::GlobalTrait,
            trait_id: Some(trait_id),
            tables,
        })
    }

    /// Build from already-mapped tables keyed by language.
    pub fn from_tables(
        mode: VectorMode,
        trait_id: Option<TraitId>,
        tables: HashMap<String, Arc<EmbeddingTable>>,
    ) -> Result<Self, ModelError> {
        let dim = tables
            .values()
            .next()
            .ok_or(ModelError::EmptySpace)?
            .dim();
        if tables.values().any(|t| t.dim() != dim) {
            return Err(ModelError::SpaceDimMismatch);
        }
        Ok(VectorSpace {
            dim,
            mode,
            trait_id,
            tables,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> VectorMode {
        self.mode
    }

    pub fn trait_id(&self) -> Option<TraitId> {
        self.trait_id
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(|s| s.as_str())
    }

    pub fn lookup(&self, language: &str, word: &str) -> Option<ArrayView1<'_, f64>> {
        self.tables.get(language).and_then(|t| t.vector(word))
    }
}

/// Averaged-embedding featurizer over one vector space.
#[derive(Debug)]
pub struct FeatureVectorizer {
    space: Arc<VectorSpace>,
}

impl FeatureVectorizer {
    pub fn new(space: Arc<VectorSpace>) -> Self {
        FeatureVectorizer { space }
    }

    pub fn space(&self) -> &VectorSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Mean of the embeddings of in-vocabulary tokens. A document with no
    /// embeddable token yields the zero vector and a raised flag.
    pub fn vectorize_average(&self, doc: &UserDocument) -> (Array1<f64>, bool) {
        let mut sum = Array1::zeros(self.space.dim());
        let mut found = 0usize;
        for token in &doc.tokens {
            if let Some(v) = self.space.lookup(&doc.language, token) {
                sum += &v;
                found += 1;
            }
        }
        if found == 0 {
            log::warn!(
                "user {}: no embeddable tokens, features are the zero vector",
                doc.user_id
            );
            (sum, true)
        } else {
            (sum / found as f64, false)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{random_orthogonal, MapProvenance};
    use crate::corpus::PerTrait;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn doc(language: &str, tokens: &[&str]) -> UserDocument {
        UserDocument {
            user_id: "u".into(),
            language: language.into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            scores: PerTrait::from_fn(|_| 0.5),
            labels: None,
        }
    }

    fn table(language: &str, entries: &[(&str, Vec<f64>)], dim: usize) -> Arc<EmbeddingTable> {
        Arc::new(
            EmbeddingTable::new(
                language,
                SpaceTag::Mono,
                dim,
                entries
                    .iter()
                    .map(|(w, v)| (w.to_string(), v.clone()))
                    .collect(),
            )
            .unwrap(),
        )
    }

    #[test]
    fn average_of_two_known_tokens() {
        let t = table("en", &[("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])], 2);
        let vz = FeatureVectorizer::new(Arc::new(VectorSpace::mono(t)));
        let (v, flagged) = vz.vectorize_average(&doc("en", &["a", "b"]));
        assert!(!flagged);
        assert_eq!(v.to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn oov_tokens_are_excluded_from_the_mean() {
        let t = table("en", &[("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])], 2);
        let vz = FeatureVectorizer::new(Arc::new(VectorSpace::mono(t)));
        let (v, flagged) = vz.vectorize_average(&doc("en", &["a", "mystery", "b"]));
        assert!(!flagged);
        assert_eq!(v.to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn all_oov_document_is_flagged_zero() {
        let t = table("en", &[("a", vec![1.0, 0.0])], 2);
        let vz = FeatureVectorizer::new(Arc::new(VectorSpace::mono(t)));
        let (v, flagged) = vz.vectorize_average(&doc("en", &["x", "y"]));
        assert!(flagged);
        assert_eq!(v.to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn map_then_average_equals_average_then_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let dim = 6;
        let entries: Vec<(String, Vec<f64>)> = (0..10)
            .map(|i| {
                (
                    format!("w{i}"),
                    (0..dim).map(|j| ((i * dim + j) as f64).sin()).collect(),
                )
            })
            .collect();
        let src = Arc::new(
            EmbeddingTable::new("xx", SpaceTag::Mono, dim, entries.clone()).unwrap(),
        );
        let tgt = Arc::new(EmbeddingTable::new("en", SpaceTag::Mono, dim, vec![]).unwrap());
        let semantic =
            OrthogonalMap::new(random_orthogonal(dim, &mut rng), MapProvenance::Procrustes)
                .unwrap();
        let trait_map =
            OrthogonalMap::new(random_orthogonal(dim, &mut rng), MapProvenance::Adversarial)
                .unwrap();

        let space = VectorSpace::global_trait(
            tgt,
            &[(src.clone(), &semantic, &trait_map)],
            TraitId::Cons,
        )
        .unwrap();
        let vz = FeatureVectorizer::new(Arc::new(space));
        let d = doc("xx", &["w1", "w4", "w7"]);
        let (mapped_avg, _) = vz.vectorize_average(&d);

        // Oracle route: average raw vectors, then apply both maps to the mean.
        let raw = FeatureVectorizer::new(Arc::new(VectorSpace::mono(src)));
        let (avg, _) = raw.vectorize_average(&d);
        let expect = trait_map
            .apply_vec(semantic.apply_vec(avg.view()).unwrap().view())
            .unwrap();
        for (a, b) in mapped_avg.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn target_language_is_identity_in_mapped_spaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let tgt = table("en", &[("home", vec![0.3, -0.2, 0.9])], 3);
        let src = table("xx", &[("casa", vec![1.0, 0.0, 0.0])], 3);
        let semantic = OrthogonalMap::new(random_orthogonal(3, &mut rng), MapProvenance::Procrustes)
            .unwrap();
        let space = VectorSpace::multi(tgt.clone(), &[(src, &semantic)]).unwrap();
        let v = space.lookup("en", "home").unwrap();
        assert_eq!(v.to_vec(), vec![0.3, -0.2, 0.9]);
        assert!(space.lookup("xx", "casa").is_some());
    }
}
