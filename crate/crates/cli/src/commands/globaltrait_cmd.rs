//! Per-trait alignment: five trait maps per source language, trained on
//! the lexicon words' multilingual embeddings.

use anyhow::{Context, Result};
use ndarray::Array2;

use globaltrait_core::align::{
    induce_dictionary, refine_with_procrustes, train_trait_map, validation_score,
};
use globaltrait_core::corpus::TraitId;
use globaltrait_core::embeddings::{EmbeddingTable, SpaceTag};
use globaltrait_core::lexicon::TraitLexicon;

use super::CommandContext;

fn lexicon_subtable(
    lexicon: &TraitLexicon,
    table: &EmbeddingTable,
    space: SpaceTag,
) -> Result<EmbeddingTable> {
    let words: Vec<String> = lexicon
        .words()
        .filter(|w| table.contains(w))
        .map(String::from)
        .collect();
    let mut matrix = Array2::zeros((words.len(), table.dim()));
    for (i, w) in words.iter().enumerate() {
        matrix
            .row_mut(i)
            .assign(&table.vector(w).expect("filtered to present words"));
    }
    Ok(EmbeddingTable::from_matrix(
        table.language(),
        space,
        words,
        matrix,
    )?)
}

pub fn cmd_globaltrait(ctx: &CommandContext) -> Result<()> {
    let target_language = ctx.config.languages.target.clone();
    let mut store = ctx.store()?;
    ctx.out("maps")?;

    let multi_target = ctx.build_multi_table(&store, &target_language)?;

    for language in &ctx.config.languages.sources {
        let multi_source = ctx.build_multi_table(&store, language)?;
        let semantic_path = ctx.semantic_map_path(language);

        for t in TraitId::ALL {
            let lex_source = ctx.load_lexicon(&store, language, t)?;
            let lex_target = ctx.load_lexicon(&store, &target_language, t)?;
            let gan = ctx
                .config
                .alignment
                .to_adversarial_config(ctx.language_seed(language).wrapping_add(t.index() as u64))?;

            let outcome =
                train_trait_map(&multi_source, &multi_target, &lex_source, &lex_target, &gan)
                    .with_context(|| format!("training {t} map for {language}"))?;
            let mut map = outcome.map;
            let mut score = outcome.history.best_score;

            if ctx.config.alignment.refine_trait_maps {
                let src = lexicon_subtable(&lex_source, &multi_source, SpaceTag::Trait(t))?;
                let tgt = lexicon_subtable(&lex_target, &multi_target, SpaceTag::Multi)?;
                let mapped = map.apply(src.matrix())?;
                let pairs = induce_dictionary(
                    mapped.view(),
                    tgt.matrix(),
                    gan.validation.metric,
                    gan.validation.mutual,
                );
                if !pairs.is_empty() {
                    let refined = refine_with_procrustes(&map, &src, &tgt, &pairs)?;
                    let refined_score = validation_score(
                        refined.matrix(),
                        src.matrix(),
                        tgt.matrix(),
                        &gan.validation,
                    );
                    if refined_score > score {
                        log::info!(
                            "{language}/{t}: refinement improved validation {score:.4} -> {refined_score:.4}"
                        );
                        map = refined;
                        score = refined_score;
                    }
                }
            }

            map = map.with_trait(t);
            let path = ctx.trait_map_path(language, t);
            map.save(&path)
                .with_context(|| format!("saving {}", path.display()))?;
            // Invariant gate: reload validates orthogonality.
            globaltrait_core::align::OrthogonalMap::load(&path)?;
            store.record(
                "globaltrait",
                &path,
                &[
                    &semantic_path,
                    &ctx.lexicon_path(language, t),
                    &ctx.lexicon_path(&target_language, t),
                ],
            )?;
            println!(
                "{language}/{t}: validation mean cosine {score:.4} -> {}",
                path.display()
            );
        }
    }
    store.save()?;
    Ok(())
}
