//! Trait lexicon extraction: five ranked word lists per language.

use anyhow::{Context, Result};

use globaltrait_core::corpus::TraitId;
use globaltrait_core::lexicon::extract_trait_words;

use super::CommandContext;

pub fn cmd_lexicon(ctx: &CommandContext) -> Result<()> {
    let mode = ctx.config.lexicon.parsed_mode()?;
    let n = ctx.config.lexicon.size;
    let min_df = ctx.config.lexicon.min_df;
    let mut store = ctx.store()?;
    ctx.out("lexicons")?;

    for language in ctx.config.languages.all() {
        let corpus = ctx.load_labeled_corpus(&language)?;
        // Word membership is identical in the mono and multilingual tables
        // (maps are rotations of the same vocabulary), so the mono table
        // serves as the embeddability filter.
        let table = ctx.load_table(&language)?;
        for t in TraitId::ALL {
            let lexicon = extract_trait_words(&corpus, t, &table, n, min_df, mode)
                .with_context(|| format!("extracting {t} lexicon for {language}"))?;
            let path = ctx.lexicon_path(&language, t);
            lexicon
                .save(&path)
                .with_context(|| format!("saving {}", path.display()))?;
            store.record(
                "lexicon",
                &path,
                &[
                    ctx.config.corpus_path(&language)?,
                    ctx.config.embedding_path(&language)?,
                ],
            )?;
            log::info!("{language}/{t}: {} words", lexicon.len());
        }
        println!("{language}: wrote 5 lexicons (n = {n})");
    }
    store.save()?;
    Ok(())
}
