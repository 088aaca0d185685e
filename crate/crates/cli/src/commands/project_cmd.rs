//! 2-D projection export: the top trait words of every language, mapped
//! into the requested space and flattened with PCA or t-SNE.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::sync::Arc;

use anyhow::{bail, Result};

use globaltrait_core::corpus::TraitId;
use globaltrait_core::embeddings::SpaceTag;
use globaltrait_core::project::{pca_2d, separation_ratio, tsne_2d};

use super::{collect_lexicon_vectors, CommandContext};

#[derive(Debug, Clone)]
pub struct ProjectArgs {
    /// "multi" or "trait:<TraitId>".
    pub space: String,
    /// Trait whose lexicon selects the words; implied by a trait space.
    pub trait_name: Option<String>,
    /// "pca" or "tsne".
    pub method: String,
}

enum SpaceChoice {
    Multi,
    Trait(TraitId),
}

pub fn cmd_project(ctx: &CommandContext, args: &ProjectArgs) -> Result<()> {
    let space = match args.space.as_str() {
        "multi" => SpaceChoice::Multi,
        other => match other.strip_prefix("trait:") {
            Some(name) => SpaceChoice::Trait(name.parse().map_err(|e| anyhow::anyhow!("{e}"))?),
            None => bail!("unknown space {other:?} (multi | trait:<TraitId>)"),
        },
    };
    let trait_id: TraitId = match (&space, &args.trait_name) {
        (SpaceChoice::Trait(t), Some(name)) => {
            let named: TraitId = name.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
            if named != *t {
                bail!("--trait {named} conflicts with --space trait:{t}");
            }
            *t
        }
        (SpaceChoice::Trait(t), None) => *t,
        (SpaceChoice::Multi, Some(name)) => name.parse().map_err(|e| anyhow::anyhow!("{e}"))?,
        (SpaceChoice::Multi, None) => {
            bail!("--trait is required with --space multi (it selects the word lists)")
        }
    };

    let store = ctx.store()?;
    let target_language = ctx.config.languages.target.clone();

    // Tables in the requested space, keyed by language.
    let mut tables = HashMap::new();
    for language in ctx.config.languages.all() {
        let multi = ctx.build_multi_table(&store, &language)?;
        let table = match &space {
            SpaceChoice::Multi => multi,
            SpaceChoice::Trait(t) => {
                if language == target_language {
                    multi.with_matrix(SpaceTag::Trait(*t), multi.matrix().to_owned())?
                } else {
                    let map = ctx.load_trait_map(&store, &language, *t)?;
                    map.apply_to_table(&multi, SpaceTag::Trait(*t))?
                }
            }
        };
        tables.insert(language.clone(), Arc::new(table));
    }

    let mut lexicons = Vec::new();
    for language in ctx.config.languages.all() {
        lexicons.push((
            language.clone(),
            ctx.load_lexicon(&store, &language, trait_id)?,
        ));
    }
    let labeled = collect_lexicon_vectors(
        &lexicons,
        &tables,
        ctx.config.lexicon.visualization_count,
    );
    if labeled.words.is_empty() {
        bail!("no lexicon words with vectors; run `globaltrait lexicon` first");
    }
    log::info!("projecting {} points", labeled.words.len());

    let coords = match args.method.as_str() {
        "pca" => pca_2d(labeled.matrix.view())?,
        "tsne" => {
            let config = ctx.config.projection.to_tsne_config(ctx.seed);
            tsne_2d(labeled.matrix.view(), &config)?
        }
        other => bail!("unknown method {other:?} (pca | tsne)"),
    };

    // Language separation in the projected plane.
    let language_order: Vec<String> = ctx.config.languages.all();
    let groups: Vec<usize> = labeled
        .languages
        .iter()
        .map(|l| {
            language_order
                .iter()
                .position(|x| x == l)
                .expect("language is configured")
        })
        .collect();
    let ratio = separation_ratio(coords.view(), &groups)?;

    let dir = ctx.out("projections")?;
    let space_slug = args.space.replace(':', "_");
    let csv_path = dir.join(format!("{space_slug}_{}_{trait_id}.csv", args.method));
    let file = File::create(&csv_path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "word,language,x,y")?;
    for (i, (word, language)) in labeled.words.iter().zip(&labeled.languages).enumerate() {
        writeln!(w, "{word},{language},{},{}", coords[[i, 0]], coords[[i, 1]])?;
    }
    w.flush()?;

    let meta_path = dir.join(format!("{space_slug}_{}_{trait_id}.meta.json", args.method));
    let meta = serde_json::json!({
        "space": args.space,
        "trait": trait_id.name(),
        "method": args.method,
        "points": labeled.words.len(),
        "seed": ctx.seed,
        "tsne": ctx.config.projection.to_tsne_config(ctx.seed),
        "language_separation_ratio": ratio,
    });
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;

    println!(
        "{}: {} points, language separation ratio {ratio:.4}",
        csv_path.display(),
        labeled.words.len()
    );
    Ok(())
}
