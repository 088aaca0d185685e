//! Semantic alignment: one adversarial+refined map per source language.

use anyhow::{Context, Result};

use globaltrait_core::align::align_semantic;

use super::CommandContext;

pub fn cmd_align(ctx: &CommandContext) -> Result<()> {
    let target_language = ctx.config.languages.target.clone();
    let target = ctx.load_table(&target_language)?;
    let mut store = ctx.store()?;
    ctx.out("maps")?;

    for language in &ctx.config.languages.sources {
        let source = ctx.load_table(language)?;
        let gan = ctx
            .config
            .alignment
            .to_adversarial_config(ctx.language_seed(language))?;
        log::info!(
            "aligning {language} -> {target_language}: {} epochs x {} iterations",
            gan.epochs,
            gan.iterations_per_epoch
        );
        let (map, history) = align_semantic(
            &source,
            &target,
            &gan,
            ctx.config.alignment.refine_rounds,
        )
        .with_context(|| format!("adversarial alignment for {language}"))?;

        let final_score = globaltrait_core::align::validation_score(
            map.matrix(),
            source.matrix(),
            target.matrix(),
            &gan.validation,
        );
        for (epoch, stats) in history.epochs.iter().enumerate() {
            log::info!(
                "{language} epoch {epoch}: disc {:.4} map {:.4} val {:.4}",
                stats.mean_disc_loss,
                stats.mean_map_loss,
                stats.validation_score
            );
        }
        println!(
            "{language}: validation mean cosine {:.4} (initial {:.4}, max orth error {:.2e})",
            final_score, history.initial_score, history.max_orth_error
        );

        let path = ctx.semantic_map_path(language);
        map.save(&path)
            .with_context(|| format!("saving {}", path.display()))?;
        store.record(
            "align",
            &path,
            &[
                ctx.config.embedding_path(language)?,
                ctx.config.embedding_path(&target_language)?,
            ],
        )?;
        println!("wrote {}", path.display());
    }
    store.save()?;
    Ok(())
}
