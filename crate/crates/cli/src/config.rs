//! The pipeline configuration file: one TOML document shared by every
//! command, with presets for desk-scale and paper-scale budgets.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use globaltrait_core::align::{AdversarialConfig, MapInit, ValidationConfig};
use globaltrait_core::corpus::CorpusFormat;
use globaltrait_core::embeddings::SimilarityMetric;
use globaltrait_core::eval::{ModelKind, TaskKind};
use globaltrait_core::lexicon::ScoreMode;
use globaltrait_core::models::{CnnConfig, HeadKind, LossKind, TrainConfig};
use globaltrait_core::project::TsneConfig;

/// Scale preset selected with `--preset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Small budgets for fixtures and tests.
    Desk,
    /// The full-scale configuration.
    Paper,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub languages: Languages,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub alignment: AlignmentSection,
    #[serde(default)]
    pub lexicon: LexiconSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub cnn: CnnSection,
    #[serde(default)]
    pub projection: ProjectionSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub output_dir: PathBuf,
    /// `.vec` file per language code.
    #[serde(default)]
    pub embeddings: BTreeMap<String, PathBuf>,
    /// Line-delimited JSON manifest per language code.
    #[serde(default)]
    pub corpora: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Languages {
    pub target: String,
    pub sources: Vec<String>,
}

impl Languages {
    pub fn all(&self) -> Vec<String> {
        let mut out = vec![self.target.clone()];
        out.extend(self.sources.iter().cloned());
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    /// "pan2015-like" (raw tweets) or "pretokenized".
    pub format: String,
    /// Unit-normalize embeddings before any training.
    pub normalize: bool,
    /// Cap words loaded per `.vec` file.
    pub embedding_limit: Option<usize>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            format: "pan2015-like".into(),
            normalize: true,
            embedding_limit: None,
        }
    }
}

impl CorpusSection {
    pub fn parsed_format(&self) -> Result<CorpusFormat> {
        match self.format.as_str() {
            "pan2015-like" => Ok(CorpusFormat::Pan2015Like),
            "pretokenized" => Ok(CorpusFormat::Pretokenized),
            other => bail!("unknown corpus format {other:?} (pan2015-like | pretokenized)"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignmentSection {
    pub epochs: usize,
    pub iterations_per_epoch: usize,
    pub batch_size: usize,
    pub disc_steps_per_map_step: usize,
    pub disc_lr: f64,
    pub map_lr: f64,
    pub lr_decay: f64,
    pub ortho_beta: f64,
    pub label_smoothing: f64,
    pub input_dropout: f64,
    pub discriminator_hidden: usize,
    /// "identity" or "random_orthogonal".
    pub init: String,
    /// "cosine" or "csls".
    pub validation_metric: String,
    pub csls_k: usize,
    pub dictionary_cap: usize,
    pub mutual_nn: bool,
    /// Procrustes refinement rounds after adversarial training of the
    /// semantic map.
    pub refine_rounds: usize,
    /// Apply refinement to trait maps as well.
    pub refine_trait_maps: bool,
    pub min_lexicon_size: usize,
}

impl Default for AlignmentSection {
    fn default() -> Self {
        let base = AdversarialConfig::default();
        AlignmentSection {
            epochs: base.epochs,
            iterations_per_epoch: base.iterations_per_epoch,
            batch_size: base.batch_size,
            disc_steps_per_map_step: base.disc_steps_per_map_step,
            disc_lr: base.disc_lr,
            map_lr: base.map_lr,
            lr_decay: base.lr_decay,
            ortho_beta: base.ortho_beta,
            label_smoothing: base.label_smoothing,
            input_dropout: base.input_dropout,
            discriminator_hidden: base.discriminator_hidden,
            init: "identity".into(),
            validation_metric: "cosine".into(),
            csls_k: 10,
            dictionary_cap: base.validation.dictionary_cap,
            mutual_nn: base.validation.mutual,
            refine_rounds: 1,
            refine_trait_maps: false,
            min_lexicon_size: base.min_lexicon_size,
        }
    }
}

impl AlignmentSection {
    pub fn to_adversarial_config(&self, seed: u64) -> Result<AdversarialConfig> {
        let init = match self.init.as_str() {
            "identity" => MapInit::Identity,
            "random_orthogonal" => MapInit::RandomOrthogonal,
            other => bail!("unknown map init {other:?}"),
        };
        let metric = match self.validation_metric.as_str() {
            "cosine" => SimilarityMetric::Cosine,
            "csls" => SimilarityMetric::csls(self.csls_k),
            other => bail!("unknown validation metric {other:?}"),
        };
        Ok(AdversarialConfig {
            epochs: self.epochs,
            iterations_per_epoch: self.iterations_per_epoch,
            batch_size: self.batch_size,
            disc_steps_per_map_step: self.disc_steps_per_map_step,
            disc_lr: self.disc_lr,
            map_lr: self.map_lr,
            lr_decay: self.lr_decay,
            ortho_beta: self.ortho_beta,
            label_smoothing: self.label_smoothing,
            input_dropout: self.input_dropout,
            discriminator_hidden: self.discriminator_hidden,
            seed,
            init,
            validation: ValidationConfig {
                metric,
                mutual: self.mutual_nn,
                dictionary_cap: self.dictionary_cap,
            },
            min_lexicon_size: self.min_lexicon_size,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LexiconSection {
    /// Words per trait lexicon used for alignment training.
    pub size: usize,
    /// Words per language in projection exports.
    pub visualization_count: usize,
    pub min_df: usize,
    /// "contrastive" or "positive_only".
    pub mode: String,
}

impl Default for LexiconSection {
    fn default() -> Self {
        LexiconSection {
            size: 3000,
            visualization_count: 750,
            min_df: 2,
            mode: "contrastive".into(),
        }
    }
}

impl LexiconSection {
    pub fn parsed_mode(&self) -> Result<ScoreMode> {
        match self.mode.as_str() {
            "contrastive" => Ok(ScoreMode::Contrastive),
            "positive_only" => Ok(ScoreMode::PositiveOnly),
            other => bail!("unknown lexicon mode {other:?}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub models: Vec<String>,
    /// "classification" or "regression".
    pub task: String,
    pub k: usize,
    pub include_target_rows: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            models: ModelKind::ALL.iter().map(|m| m.name().to_string()).collect(),
            task: "classification".into(),
            k: 5,
            include_target_rows: true,
        }
    }
}

impl GridSection {
    pub fn parsed_models(&self) -> Result<Vec<ModelKind>> {
        self.models
            .iter()
            .map(|name| {
                name.parse::<ModelKind>()
                    .map_err(|e| anyhow::anyhow!(e.to_string()))
            })
            .collect()
    }

    pub fn parsed_task(&self) -> Result<TaskKind> {
        match self.task.as_str() {
            "classification" => Ok(TaskKind::Classification),
            "regression" => Ok(TaskKind::Regression),
            other => bail!("unknown task {other:?}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let base = TrainConfig::default();
        TrainSection {
            epochs: base.epochs,
            batch_size: base.batch_size,
            learning_rate: base.learning_rate,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            loss: LossKind::Bce,
            seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CnnSection {
    pub filters_per_width: usize,
    pub fc_hidden: usize,
    pub t_max: usize,
}

impl Default for CnnSection {
    fn default() -> Self {
        let base = CnnConfig::default();
        CnnSection {
            filters_per_width: base.filters_per_width,
            fc_hidden: base.fc_hidden,
            t_max: base.t_max,
        }
    }
}

impl CnnSection {
    pub fn to_cnn_config(&self, seed: u64) -> CnnConfig {
        CnnConfig {
            filters_per_width: self.filters_per_width,
            fc_hidden: self.fc_hidden,
            t_max: self.t_max,
            head: HeadKind::Classification,
            seed,
            ..CnnConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionSection {
    pub tsne_perplexity: f64,
    pub tsne_iterations: usize,
    pub tsne_learning_rate: f64,
}

impl Default for ProjectionSection {
    fn default() -> Self {
        let base = TsneConfig::default();
        ProjectionSection {
            tsne_perplexity: base.perplexity,
            tsne_iterations: base.iterations,
            tsne_learning_rate: base.learning_rate,
        }
    }
}

impl ProjectionSection {
    pub fn to_tsne_config(&self, seed: u64) -> TsneConfig {
        TsneConfig {
            perplexity: self.tsne_perplexity,
            iterations: self.tsne_iterations,
            learning_rate: self.tsne_learning_rate,
            seed,
            ..TsneConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub users_per_language: Vec<usize>,
    pub vocab_size: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    pub trait_signal_strength: f64,
    pub trait_word_count: usize,
    pub tokens_per_user: usize,
    pub base_trait_rate: f64,
    pub language_specific_trait_words: bool,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            users_per_language: vec![40, 40],
            vocab_size: 500,
            dim: 16,
            noise_sigma: 0.0,
            trait_signal_strength: 0.5,
            trait_word_count: 25,
            tokens_per_user: 150,
            base_trait_rate: 0.15,
            language_specific_trait_words: false,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: PipelineConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.languages.sources.contains(&self.languages.target) {
            bail!(
                "target language {:?} also appears in sources",
                self.languages.target
            );
        }
        let mut seen = std::collections::HashSet::new();
        for lang in self.languages.all() {
            if !seen.insert(lang.clone()) {
                bail!("language {lang:?} listed twice");
            }
        }
        Ok(())
    }

    /// Apply a scale preset on top of the file's values.
    pub fn apply_preset(&mut self, preset: Preset) {
        match preset {
            Preset::Desk => {
                let desk = AdversarialConfig::desk();
                self.alignment.epochs = desk.epochs;
                self.alignment.iterations_per_epoch = desk.iterations_per_epoch;
                self.alignment.discriminator_hidden = desk.discriminator_hidden;
                self.train.epochs = 40;
                self.cnn.filters_per_width = 16;
                self.cnn.fc_hidden = 32;
                self.cnn.t_max = 256;
            }
            Preset::Paper => {
                let paper = AdversarialConfig::paper();
                self.alignment.epochs = paper.epochs;
                self.alignment.iterations_per_epoch = paper.iterations_per_epoch;
                self.alignment.discriminator_hidden = paper.discriminator_hidden;
                self.train.epochs = 100;
                self.cnn.filters_per_width = 64;
                self.cnn.fc_hidden = 100;
                self.cnn.t_max = 1000;
            }
        }
    }

    /// Write the fully resolved configuration next to the outputs so every
    /// run is reconstructible.
    pub fn write_snapshot(&self, command: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.paths.output_dir)?;
        let path = self
            .paths
            .output_dir
            .join(format!("resolved_config_{command}.toml"));
        let text = toml::to_string_pretty(self).context("serializing resolved config")?;
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn embedding_path(&self, language: &str) -> Result<&PathBuf> {
        self.paths.embeddings.get(language).ok_or_else(|| {
            anyhow::anyhow!("no [paths.embeddings] entry for language {language:?}")
        })
    }

    pub fn corpus_path(&self, language: &str) -> Result<&PathBuf> {
        self.paths
            .corpora
            .get(language)
            .ok_or_else(|| anyhow::anyhow!("no [paths.corpora] entry for language {language:?}"))
    }
}
