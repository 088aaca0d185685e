//! The experiment grid: per (language, model, trait), stratified k-fold
//! training and evaluation, with English training data folded into every
//! multilingual run.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{f1_score, rmse, EvalError};
use crate::align::OrthogonalMap;
use crate::corpus::{Corpus, Label, PerTrait, TraitId, UserDocument};
use crate::embeddings::EmbeddingTable;
use crate::models::{
    CnnConfig, CnnModel, DocExample, FeatureVectorizer, LinearModel, LogisticModel, LossKind,
    TrainConfig, VectorMode, VectorSpace,
};

/// The five model configurations of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    LgrMono,
    LgrMulti,
    LgrGlobalTrait,
    CnnMono,
    CnnGlobalTrait,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::LgrMono,
        ModelKind::LgrMulti,
        ModelKind::LgrGlobalTrait,
        ModelKind::CnnMono,
        ModelKind::CnnGlobalTrait,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LgrMono => "Lgr-mono",
            ModelKind::LgrMulti => "Lgr-multi",
            ModelKind::LgrGlobalTrait => "Lgr-GlobalTrait",
            ModelKind::CnnMono => "CNN-mono",
            ModelKind::CnnGlobalTrait => "CNN-GlobalTrait",
        }
    }

    pub fn is_cnn(self) -> bool {
        matches!(self, ModelKind::CnnMono | ModelKind::CnnGlobalTrait)
    }

    /// Multilingual models train on the source language plus the full
    /// English corpus.
    pub fn uses_target_augmentation(self) -> bool {
        !matches!(self, ModelKind::LgrMono | ModelKind::CnnMono)
    }

    pub fn vector_mode(self) -> VectorMode {
        match self {
            ModelKind::LgrMono | ModelKind::CnnMono => VectorMode::Mono,
            ModelKind::LgrMulti => VectorMode::Multi,
            ModelKind::LgrGlobalTrait | ModelKind::CnnGlobalTrait => VectorMode::GlobalTrait,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| EvalError::UnknownModel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    Regression,
}

/// Everything the driver consumes; built from files by the CLI or
/// directly by tests.
pub struct ExperimentArtifacts {
    pub target_language: String,
    /// Labeled corpora per language, including the target.
    pub corpora: HashMap<String, Corpus>,
    pub mono_tables: HashMap<String, Arc<EmbeddingTable>>,
    /// Semantic maps per source language.
    pub semantic_maps: HashMap<String, OrthogonalMap>,
    /// Trait maps per source language.
    pub trait_maps: HashMap<String, PerTrait<OrthogonalMap>>,
}

impl ExperimentArtifacts {
    fn corpus(&self, language: &str) -> Result<&Corpus, EvalError> {
        let corpus = self
            .corpora
            .get(language)
            .ok_or_else(|| EvalError::MissingArtifact {
                what: format!("corpus for {language}"),
                hint: "listed under [paths.corpora] in the config".into(),
            })?;
        if !corpus.is_labeled() {
            return Err(EvalError::Unlabeled(language.to_string()));
        }
        Ok(corpus)
    }

    fn mono_table(&self, language: &str) -> Result<Arc<EmbeddingTable>, EvalError> {
        self.mono_tables
            .get(language)
            .cloned()
            .ok_or_else(|| EvalError::MissingArtifact {
                what: format!("embedding table for {language}"),
                hint: "listed under [paths.embeddings] in the config".into(),
            })
    }

    fn semantic_map(&self, language: &str) -> Result<&OrthogonalMap, EvalError> {
        self.semantic_maps
            .get(language)
            .ok_or_else(|| EvalError::MissingArtifact {
                what: format!("semantic map for {language}"),
                hint: "produced by `globaltrait align`".into(),
            })
    }

    fn trait_map(&self, language: &str, t: TraitId) -> Result<&OrthogonalMap, EvalError> {
        Ok(&self
            .trait_maps
            .get(language)
            .ok_or_else(|| EvalError::MissingArtifact {
                what: format!("trait maps for {language}"),
                hint: "produced by `globaltrait globaltrait`".into(),
            })?[t])
    }

    fn mono_space(&self, language: &str) -> Result<Arc<VectorSpace>, EvalError> {
        Ok(Arc::new(VectorSpace::mono(self.mono_table(language)?)))
    }

    fn multi_space(&self, language: &str) -> Result<Arc<VectorSpace>, EvalError> {
        let target = self.mono_table(&self.target_language)?;
        let source = self.mono_table(language)?;
        let map = self.semantic_map(language)?;
        Ok(Arc::new(VectorSpace::multi(target, &[(source, map)])?))
    }

    fn trait_space(&self, language: &str, t: TraitId) -> Result<Arc<VectorSpace>, EvalError> {
        let target = self.mono_table(&self.target_language)?;
        let source = self.mono_table(language)?;
        let semantic = self.semantic_map(language)?;
        let trait_map = self.trait_map(language, t)?;
        Ok(Arc::new(VectorSpace::global_trait(
            target,
            &[(source, semantic, trait_map)],
            t,
        )?))
    }
}

/// Grid settings: which cells to run and with what budgets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    /// Source languages to evaluate.
    pub languages: Vec<String>,
    pub models: Vec<ModelKind>,
    pub task: TaskKind,
    pub k: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub cnn: CnnConfig,
    /// Also evaluate the target language with the mono models.
    pub include_target_rows: bool,
}

/// Per-(language, model) results: one metric value per trait, the raw
/// per-fold values, and the across-trait average.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub language: String,
    pub model: ModelKind,
    pub task: TaskKind,
    /// Metric description, recorded for honest comparison.
    pub metric: String,
    pub per_trait: PerTrait<f64>,
    pub folds: PerTrait<Vec<f64>>,
    pub average: f64,
    pub k: usize,
    pub seed: u64,
    pub config_digest: String,
}

fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut seed = base;
    for &p in parts {
        seed = seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(p)
            .rotate_left(17);
    }
    seed
}

fn config_digest(grid: &GridConfig) -> String {
    let bytes = serde_json::to_vec(grid).expect("grid config serializes");
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn feature_matrix(vectorizer: &FeatureVectorizer, docs: &[&UserDocument]) -> Array2<f64> {
    let mut out = Array2::zeros((docs.len(), vectorizer.dim()));
    for (i, doc) in docs.iter().enumerate() {
        let (v, _) = vectorizer.vectorize_average(doc);
        out.row_mut(i).assign(&v);
    }
    out
}

fn classification_targets(docs: &[&UserDocument], t: TraitId) -> Vec<Label> {
    docs.iter()
        .map(|d| d.label(t).expect("corpus is labeled"))
        .collect()
}

struct FoldOutcome {
    value: f64,
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    model: ModelKind,
    task: TaskKind,
    space: &Arc<VectorSpace>,
    static_space: Option<&Arc<VectorSpace>>,
    train_docs: &[&UserDocument],
    val_docs: &[&UserDocument],
    t: TraitId,
    train_config: &TrainConfig,
    cnn_config: &CnnConfig,
) -> Result<FoldOutcome, EvalError> {
    let value = match (model.is_cnn(), task) {
        (false, TaskKind::Classification) => {
            let vectorizer = FeatureVectorizer::new(space.clone());
            let x = feature_matrix(&vectorizer, train_docs);
            let y = classification_targets(train_docs, t);
            let (trained, _) = LogisticModel::train(&x, &y, train_config)?;
            let predictions: Vec<Label> = val_docs
                .iter()
                .map(|d| {
                    let (v, _) = vectorizer.vectorize_average(d);
                    trained.predict(v.view()).0
                })
                .collect();
            f1_score(&predictions, &classification_targets(val_docs, t))?
        }
        (false, TaskKind::Regression) => {
            let vectorizer = FeatureVectorizer::new(space.clone());
            let x = feature_matrix(&vectorizer, train_docs);
            let y: Vec<f64> = train_docs.iter().map(|d| d.scores[t]).collect();
            let mut config = train_config.clone();
            config.loss = LossKind::Mse;
            let (trained, _) = LinearModel::train(&x, &y, &config)?;
            let predictions: Vec<f64> = val_docs
                .iter()
                .map(|d| {
                    let (v, _) = vectorizer.vectorize_average(d);
                    trained.predict(v.view())
                })
                .collect();
            let truth: Vec<f64> = val_docs.iter().map(|d| d.scores[t]).collect();
            rmse(&predictions, &truth)?
        }
        (true, _) => {
            let mut arch = cnn_config.clone();
            arch.head = match task {
                TaskKind::Classification => crate::models::HeadKind::Classification,
                TaskKind::Regression => crate::models::HeadKind::Regression,
            };
            arch.seed = train_config.seed;
            let mut cnn = CnnModel::new(arch, space.clone(), static_space.cloned(), train_docs)?;
            let examples: Vec<DocExample<'_>> = train_docs
                .iter()
                .map(|d| DocExample {
                    doc: d,
                    target: match task {
                        TaskKind::Classification => {
                            if d.label(t).expect("labeled").is_positive() {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        TaskKind::Regression => d.scores[t],
                    },
                })
                .collect();
            let mut config = train_config.clone();
            config.loss = match task {
                TaskKind::Classification => LossKind::Bce,
                TaskKind::Regression => LossKind::Mse,
            };
            cnn.train(&examples, &config)?;
            match task {
                TaskKind::Classification => {
                    let predictions: Vec<Label> = val_docs
                        .iter()
                        .map(|d| cnn.predict_label(d).0)
                        .collect();
                    f1_score(&predictions, &classification_targets(val_docs, t))?
                }
                TaskKind::Regression => {
                    let predictions: Vec<f64> =
                        val_docs.iter().map(|d| cnn.predict_score(d)).collect();
                    let truth: Vec<f64> = val_docs.iter().map(|d| d.scores[t]).collect();
                    rmse(&predictions, &truth)?
                }
            }
        }
    };
    Ok(FoldOutcome { value })
}

/// Run the whole grid. Every (language, model, trait) cell is trained on
/// k stratified folds and averaged; `-multi`/`-GlobalTrait` cells add the
/// full target-language corpus to each fold's training set.
pub fn run_experiment(
    artifacts: &ExperimentArtifacts,
    grid: &GridConfig,
) -> Result<Vec<ExperimentReport>, EvalError> {
    let digest = config_digest(grid);
    let mut reports = Vec::new();

    let mut rows: Vec<(String, ModelKind)> = Vec::new();
    if grid.include_target_rows {
        for model in &grid.models {
            if !model.uses_target_augmentation() {
                rows.push((artifacts.target_language.clone(), *model));
            }
        }
    }
    for language in &grid.languages {
        if language == &artifacts.target_language {
            continue;
        }
        for model in &grid.models {
            rows.push((language.clone(), *model));
        }
    }

    for (language, model) in rows {
        let corpus = artifacts.corpus(&language)?;
        let target_corpus = if model.uses_target_augmentation() {
            Some(artifacts.corpus(&artifacts.target_language)?)
        } else {
            None
        };

        let mut per_trait = PerTrait::from_fn(|_| 0.0f64);
        let mut folds = PerTrait::from_fn(|_| Vec::with_capacity(grid.k));
        for t in TraitId::ALL {
            // Spaces depend on the model mode and, for GlobalTrait, the trait.
            let (space, static_space): (Arc<VectorSpace>, Option<Arc<VectorSpace>>) =
                match model.vector_mode() {
                    VectorMode::Mono => (artifacts.mono_space(&language)?, None),
                    VectorMode::Multi => (artifacts.multi_space(&language)?, None),
                    VectorMode::GlobalTrait => {
                        if model.is_cnn() {
                            // Dynamic channel: multilingual; static channel:
                            // trait-aligned.
                            (
                                artifacts.multi_space(&language)?,
                                Some(artifacts.trait_space(&language, t)?),
                            )
                        } else {
                            (artifacts.trait_space(&language, t)?, None)
                        }
                    }
                };

            let plan = crate::corpus::stratified_kfold(corpus, t, grid.k, grid.seed)?;
            for fold in 0..grid.k {
                let (mut train_docs, val_docs) = plan.split(corpus, fold);
                if let Some(tc) = target_corpus {
                    train_docs.extend(tc.users.iter());
                }
                let mut train_config = grid.train.clone();
                train_config.seed = derive_seed(
                    grid.seed,
                    &[
                        t.index() as u64,
                        fold as u64,
                        model as u64,
                        language.len() as u64,
                    ],
                );
                let outcome = run_fold(
                    model,
                    grid.task,
                    &space,
                    static_space.as_ref(),
                    &train_docs,
                    &val_docs,
                    t,
                    &train_config,
                    &grid.cnn,
                )?;
                folds[t].push(outcome.value);
            }
            per_trait[t] = folds[t].iter().sum::<f64>() / folds[t].len() as f64;
        }

        let average = TraitId::ALL
            .iter()
            .map(|&t| per_trait[t])
            .sum::<f64>()
            / 5.0;
        let metric = match grid.task {
            TaskKind::Classification => "positive-class F1, mean over folds".to_string(),
            TaskKind::Regression => "RMSE, mean over folds".to_string(),
        };
        reports.push(ExperimentReport {
            language,
            model,
            task: grid.task,
            metric,
            per_trait,
            folds,
            average,
            k: grid.k,
            seed: grid.seed,
            config_digest: digest.clone(),
        });
    }
    Ok(reports)
}

/// Render reports as an aligned text table: one block per language, one
/// row per model, trait columns plus the across-trait average.
pub fn render_table(reports: &[ExperimentReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<6}{:<18}{:>8}{:>8}{:>8}{:>8}{:>8}{:>10}\n",
        "Lang", "Model", "Extr", "Agr", "Cons", "Emot", "Openn", "Average"
    ));
    let mut last_language: Option<&str> = None;
    for report in reports {
        let fmt_value = |v: f64| -> String {
            match report.task {
                TaskKind::Classification => format!("{:.1}", v * 100.0),
                TaskKind::Regression => format!("{v:.3}"),
            }
        };
        let lang = if last_language == Some(report.language.as_str()) {
            String::new()
        } else {
            report.language.clone()
        };
        last_language = Some(report.language.as_str());
        out.push_str(&format!(
            "{:<6}{:<18}{:>8}{:>8}{:>8}{:>8}{:>8}{:>10}\n",
            lang,
            report.model.name(),
            fmt_value(report.per_trait[TraitId::Extr]),
            fmt_value(report.per_trait[TraitId::Agr]),
            fmt_value(report.per_trait[TraitId::Cons]),
            fmt_value(report.per_trait[TraitId::Emot]),
            fmt_value(report.per_trait[TraitId::Openn]),
            fmt_value(report.average),
        ));
    }
    out
}
