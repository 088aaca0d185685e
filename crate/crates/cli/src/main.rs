//! Command-line pipeline: synthetic fixtures, semantic alignment, trait
//! lexicons, per-trait maps, the experiment grid, and projection export.

mod commands;
mod config;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    cmd_align, cmd_globaltrait, cmd_lexicon, cmd_project, cmd_synth, cmd_train_eval,
    CommandContext, ProjectArgs,
};
use config::{PipelineConfig, Preset};

#[derive(Parser)]
#[command(
    name = "globaltrait",
    about = "Trait-aligned multilingual embeddings and cross-lingual personality models",
    version
)]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, default_value = "globaltrait.toml")]
    config: PathBuf,
    /// Override the pipeline seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Scale preset overriding the config's training budgets.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Proceed despite stale or modified pipeline inputs.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic fixture: corpora, embeddings, ground truth.
    Synth,
    /// Train one semantic map per source language.
    Align,
    /// Extract the five trait lexicons per language.
    Lexicon,
    /// Train the five trait maps per source language.
    Globaltrait,
    /// Run the cross-validated experiment grid and render tables.
    TrainEval,
    /// Export 2-D projections of trait words.
    Project {
        /// Vector space: "multi" or "trait:<TraitId>".
        #[arg(long, default_value = "multi")]
        space: String,
        /// Trait whose lexicons select the words (implied by a trait space).
        #[arg(long = "trait")]
        trait_name: Option<String>,
        /// Projection method: "pca" or "tsne".
        #[arg(long, default_value = "pca")]
        method: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Align => "align",
            Command::Lexicon => "lexicon",
            Command::Globaltrait => "globaltrait",
            Command::TrainEval => "train-eval",
            Command::Project { .. } => "project",
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = PipelineConfig::load(&cli.config)?;
    if let Some(preset) = cli.preset {
        config.apply_preset(preset);
    }
    let seed = cli.seed.unwrap_or(config.seed);
    let ctx = CommandContext {
        config,
        seed,
        force: cli.force,
    };
    ctx.config.write_snapshot(cli.command.name())?;

    match &cli.command {
        Command::Synth => cmd_synth(&ctx),
        Command::Align => cmd_align(&ctx),
        Command::Lexicon => cmd_lexicon(&ctx),
        Command::Globaltrait => cmd_globaltrait(&ctx),
        Command::TrainEval => cmd_train_eval(&ctx),
        Command::Project {
            space,
            trait_name,
            method,
        } => cmd_project(
            &ctx,
            &ProjectArgs {
                space: space.clone(),
                trait_name: trait_name.clone(),
                method: method.clone(),
            },
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let chain: Vec<String> = err.chain().map(|c| c.to_string()).collect();
            let payload = serde_json::json!({
                "error": chain.first().cloned().unwrap_or_default(),
                "chain": chain,
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
