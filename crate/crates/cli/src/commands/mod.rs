//! The pipeline commands. Each one loads what it needs, verifies input
//! digests against the provenance store, writes its outputs, and records
//! fresh digests.

mod align;
mod globaltrait_cmd;
mod lexicon_cmd;
mod project_cmd;
mod synth;
mod train_eval;

pub use align::cmd_align;
pub use globaltrait_cmd::cmd_globaltrait;
pub use lexicon_cmd::cmd_lexicon;
pub use project_cmd::{cmd_project, ProjectArgs};
pub use synth::cmd_synth;
pub use train_eval::cmd_train_eval;

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};

use globaltrait_core::corpus::{load_corpus, median_split, Corpus, TraitId};
use globaltrait_core::embeddings::{EmbeddingTable, SpaceTag};
use globaltrait_core::lexicon::TraitLexicon;

use crate::config::PipelineConfig;
use crate::provenance::ProvenanceStore;

pub struct CommandContext {
    pub config: PipelineConfig,
    pub seed: u64,
    pub force: bool,
}

impl CommandContext {
    pub fn store(&self) -> Result<ProvenanceStore> {
        std::fs::create_dir_all(&self.config.paths.output_dir)?;
        ProvenanceStore::open(&self.config.paths.output_dir)
    }

    pub fn out(&self, sub: &str) -> Result<PathBuf> {
        let dir = self.config.paths.output_dir.join(sub);
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    pub fn semantic_map_path(&self, language: &str) -> PathBuf {
        self.config
            .paths
            .output_dir
            .join("maps")
            .join(format!("semantic_{language}.json"))
    }

    pub fn trait_map_path(&self, language: &str, t: TraitId) -> PathBuf {
        self.config
            .paths
            .output_dir
            .join("maps")
            .join(format!("trait_{language}_{t}.json"))
    }

    pub fn lexicon_path(&self, language: &str, t: TraitId) -> PathBuf {
        self.config
            .paths
            .output_dir
            .join("lexicons")
            .join(format!("{language}_{t}.json"))
    }

    /// Load a language's `.vec` table, normalized if configured.
    pub fn load_table(&self, language: &str) -> Result<EmbeddingTable> {
        let path = self.config.embedding_path(language)?;
        let table = EmbeddingTable::load_vec(
            language,
            SpaceTag::Mono,
            path,
            self.config.corpus.embedding_limit,
        )
        .with_context(|| format!("loading embeddings for {language} from {}", path.display()))?;
        if self.config.corpus.normalize {
            let (normalized, report) = table.normalize();
            if !report.zero_rows.is_empty() {
                log::warn!(
                    "{language}: {} zero vectors left unnormalized",
                    report.zero_rows.len()
                );
            }
            Ok(normalized)
        } else {
            Ok(table)
        }
    }

    /// Load and median-split a language's corpus.
    pub fn load_labeled_corpus(&self, language: &str) -> Result<Corpus> {
        let path = self.config.corpus_path(language)?;
        let format = self.config.corpus.parsed_format()?;
        let corpus = load_corpus(path, format)
            .with_context(|| format!("loading corpus for {language} from {}", path.display()))?;
        median_split(&corpus)
            .with_context(|| format!("median-splitting the {language} corpus"))
    }

    pub fn load_lexicon(
        &self,
        store: &ProvenanceStore,
        language: &str,
        t: TraitId,
    ) -> Result<TraitLexicon> {
        let path = self.lexicon_path(language, t);
        if !path.exists() {
            anyhow::bail!(
                "missing lexicon {}; run `globaltrait lexicon` first",
                path.display()
            );
        }
        store.verify(&path, self.force)?;
        TraitLexicon::load(&path).with_context(|| format!("loading {}", path.display()))
    }

    pub fn load_semantic_map(
        &self,
        store: &ProvenanceStore,
        language: &str,
    ) -> Result<globaltrait_core::align::OrthogonalMap> {
        let path = self.semantic_map_path(language);
        if !path.exists() {
            anyhow::bail!(
                "missing semantic map {}; run `globaltrait align` first",
                path.display()
            );
        }
        store.verify(&path, self.force)?;
        globaltrait_core::align::OrthogonalMap::load(&path)
            .with_context(|| format!("loading {}", path.display()))
    }

    pub fn load_trait_map(
        &self,
        store: &ProvenanceStore,
        language: &str,
        t: TraitId,
    ) -> Result<globaltrait_core::align::OrthogonalMap> {
        let path = self.trait_map_path(language, t);
        if !path.exists() {
            anyhow::bail!(
                "missing trait map {}; run `globaltrait globaltrait` first",
                path.display()
            );
        }
        store.verify(&path, self.force)?;
        globaltrait_core::align::OrthogonalMap::load(&path)
            .with_context(|| format!("loading {}", path.display()))
    }

    /// Per-language seed derivation keeps runs reproducible while giving
    /// each language an independent stream.
    pub fn language_seed(&self, language: &str) -> u64 {
        let mut seed = self.seed;
        for b in language.bytes() {
            seed = seed.wrapping_mul(0x100_0000_01b3).wrapping_add(b as u64);
        }
        seed
    }

    /// Source tables mapped into the multilingual space, target included
    /// as-is.
    pub fn build_multi_table(
        &self,
        store: &ProvenanceStore,
        language: &str,
    ) -> Result<EmbeddingTable> {
        let table = self.load_table(language)?;
        if language == self.config.languages.target {
            return Ok(table.with_matrix(SpaceTag::Multi, table.matrix().to_owned())?);
        }
        let map = self.load_semantic_map(store, language)?;
        Ok(map.apply_to_table(&table, SpaceTag::Multi)?)
    }
}

/// A (word, language, vector) collection for projection export.
pub struct LabeledVectors {
    pub words: Vec<String>,
    pub languages: Vec<String>,
    pub matrix: ndarray::Array2<f64>,
}

pub fn collect_lexicon_vectors(
    lexicons: &[(String, TraitLexicon)],
    tables: &std::collections::HashMap<String, Arc<EmbeddingTable>>,
    per_language: usize,
) -> LabeledVectors {
    let mut words = Vec::new();
    let mut languages = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut dim = 0;
    for (language, lexicon) in lexicons {
        let table = &tables[language];
        dim = table.dim();
        for word in lexicon.words().take(per_language) {
            if let Some(v) = table.vector(word) {
                words.push(word.to_string());
                languages.push(language.clone());
                rows.extend(v.iter());
            }
        }
    }
    let matrix = ndarray::Array2::from_shape_vec((words.len(), dim), rows)
        .expect("rows built consistently");
    LabeledVectors {
        words,
        languages,
        matrix,
    }
}
