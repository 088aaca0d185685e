//! Fixture generator: synthetic corpora, embedding tables, and the
//! ground-truth sidecar.

use std::fs::{self, File};
use std::io::{BufWriter, Write};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use globaltrait_core::corpus::{generate_synthetic_corpus, SynthSpec, TraitId};

use super::CommandContext;

#[derive(Serialize)]
struct GroundTruthFile {
    rotations: std::collections::BTreeMap<String, Vec<Vec<f64>>>,
    /// language -> trait -> planted words.
    trait_words:
        std::collections::BTreeMap<String, std::collections::BTreeMap<String, Vec<String>>>,
    planted_labels:
        std::collections::BTreeMap<String, std::collections::BTreeMap<String, serde_json::Value>>,
}

pub fn cmd_synth(ctx: &CommandContext) -> Result<()> {
    let spec = SynthSpec {
        languages: ctx.config.languages.all(),
        users_per_language: ctx.config.synth.users_per_language.clone(),
        vocab_size: ctx.config.synth.vocab_size,
        dim: ctx.config.synth.dim,
        seed: ctx.seed,
        noise_sigma: ctx.config.synth.noise_sigma,
        trait_signal_strength: ctx.config.synth.trait_signal_strength,
        trait_word_count: ctx.config.synth.trait_word_count,
        tokens_per_user: ctx.config.synth.tokens_per_user,
        base_trait_rate: ctx.config.synth.base_trait_rate,
        language_specific_trait_words: ctx.config.synth.language_specific_trait_words,
    };
    let data = generate_synthetic_corpus(&spec).context("generating synthetic corpus")?;

    let dir = ctx.out("fixtures")?;
    let mut store = ctx.store()?;

    for (corpus, table) in data.corpora.iter().zip(&data.tables) {
        let language = &corpus.language;
        let vec_path = dir.join(format!("{language}.vec"));
        table.save_vec(&vec_path)?;
        store.record("synth", &vec_path, &[])?;

        let manifest_path = dir.join(format!("{language}.jsonl"));
        let file = File::create(&manifest_path)?;
        let mut w = BufWriter::new(file);
        for user in &corpus.users {
            let record = json!({
                "user_id": user.user_id,
                "language": user.language,
                "scores": user.scores,
                "tokens": [user.tokens],
            });
            writeln!(w, "{record}")?;
        }
        w.flush()?;
        store.record("synth", &manifest_path, &[])?;
        log::info!(
            "{language}: {} users, vocabulary {}",
            corpus.len(),
            table.len()
        );
    }

    let truth = GroundTruthFile {
        rotations: data
            .truth
            .rotations
            .iter()
            .map(|(lang, m)| {
                let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
                (lang.clone(), rows)
            })
            .collect(),
        trait_words: data
            .truth
            .trait_words
            .iter()
            .map(|(lang, per_trait)| {
                let by_trait: std::collections::BTreeMap<String, Vec<String>> = TraitId::ALL
                    .into_iter()
                    .map(|t| (t.name().to_string(), per_trait[t].clone()))
                    .collect();
                (lang.clone(), by_trait)
            })
            .collect(),
        planted_labels: data
            .truth
            .planted_labels
            .iter()
            .map(|(lang, users)| {
                let users: std::collections::BTreeMap<String, serde_json::Value> = users
                    .iter()
                    .map(|(user, labels)| {
                        (user.clone(), serde_json::to_value(labels).expect("labels"))
                    })
                    .collect();
                (lang.clone(), users)
            })
            .collect(),
    };
    let truth_path = dir.join("ground_truth.json");
    fs::write(&truth_path, serde_json::to_string_pretty(&truth)?)?;
    store.record("synth", &truth_path, &[])?;
    store.save()?;

    println!(
        "wrote fixtures for {} language(s) under {}",
        data.corpora.len(),
        dir.display()
    );
    println!("point [paths.embeddings] at the .vec files and [paths.corpora] at the .jsonl manifests (corpus.format = \"pretokenized\")");
    Ok(())
}
