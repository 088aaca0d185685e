//! The experiment grid: train and evaluate every configured
//! (language, model, trait) cell under stratified cross-validation.

use std::collections::HashMap;
use std::fs;
use std::sync::Arc;

use anyhow::{Context, Result};

use globaltrait_core::corpus::{PerTrait, TraitId};
use globaltrait_core::eval::{render_table, run_experiment, ExperimentArtifacts, GridConfig};
use globaltrait_core::models::VectorMode;

use super::CommandContext;

pub fn cmd_train_eval(ctx: &CommandContext) -> Result<()> {
    let models = ctx.config.grid.parsed_models()?;
    let task = ctx.config.grid.parsed_task()?;
    let store = ctx.store()?;

    let needs_semantic = models.iter().any(|m| m.vector_mode() != VectorMode::Mono);
    let needs_trait = models
        .iter()
        .any(|m| m.vector_mode() == VectorMode::GlobalTrait);

    let mut corpora = HashMap::new();
    let mut mono_tables = HashMap::new();
    for language in ctx.config.languages.all() {
        corpora.insert(language.clone(), ctx.load_labeled_corpus(&language)?);
        mono_tables.insert(language.clone(), Arc::new(ctx.load_table(&language)?));
    }

    let mut semantic_maps = HashMap::new();
    let mut trait_maps = HashMap::new();
    for language in &ctx.config.languages.sources {
        if needs_semantic {
            semantic_maps.insert(language.clone(), ctx.load_semantic_map(&store, language)?);
        }
        if needs_trait {
            let mut resolved = Vec::with_capacity(5);
            for t in TraitId::ALL {
                resolved.push(ctx.load_trait_map(&store, language, t)?);
            }
            let arr: [globaltrait_core::align::OrthogonalMap; 5] =
                resolved.try_into().expect("five traits");
            trait_maps.insert(language.clone(), PerTrait(arr));
        }
    }

    let artifacts = ExperimentArtifacts {
        target_language: ctx.config.languages.target.clone(),
        corpora,
        mono_tables,
        semantic_maps,
        trait_maps,
    };
    let grid = GridConfig {
        languages: ctx.config.languages.sources.clone(),
        models,
        task,
        k: ctx.config.grid.k,
        seed: ctx.seed,
        train: ctx.config.train.to_train_config(ctx.seed),
        cnn: ctx.config.cnn.to_cnn_config(ctx.seed),
        include_target_rows: ctx.config.grid.include_target_rows,
    };

    log::info!(
        "running grid: {} models x {} source language(s), k = {}",
        grid.models.len(),
        grid.languages.len(),
        grid.k
    );
    let reports = run_experiment(&artifacts, &grid).context("running the experiment grid")?;

    let reports_dir = ctx.out("reports")?;
    let task_name = match task {
        globaltrait_core::eval::TaskKind::Classification => "classification",
        globaltrait_core::eval::TaskKind::Regression => "regression",
    };
    let json_path = reports_dir.join(format!("report_{task_name}.json"));
    fs::write(&json_path, serde_json::to_string_pretty(&reports)?)?;

    let table = render_table(&reports);
    let table_path = reports_dir.join(format!("table_{task_name}.txt"));
    fs::write(&table_path, &table)?;

    println!("{table}");
    println!("wrote {} and {}", json_path.display(), table_path.display());
    Ok(())
}
