//! tf-idf term weighting over user documents and per-trait extraction of
//! the words most positively associated with each trait.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Label, TraitId};
use crate::embeddings::EmbeddingTable;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("no documents to fit")]
    NoDocuments,
    #[error("all documents are empty")]
    AllDocumentsEmpty,
    #[error("corpus has no labels; run median_split first")]
    Unlabeled,
    #[error("no positive users for trait {0}")]
    NoPositiveUsers(String),
    #[error("n must be at least 1")]
    ZeroN,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("lexicon file parse error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Fitted tf-idf statistics: a term index over words seen in at least
/// `min_df` documents, with smoothed idf `ln((1+N)/(1+df)) + 1`.
#[derive(Debug, Clone)]
pub struct TfIdfModel {
    vocabulary: HashMap<String, usize>,
    terms: Vec<String>,
    idf: Vec<f64>,
    doc_count: usize,
    min_df: usize,
}

impl TfIdfModel {
    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn min_df(&self) -> usize {
        self.min_df
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.term_index(term).map(|i| self.idf[i])
    }

    /// Sparse tf-idf weights of one document: `(term index, weight)` with
    /// tf = count/|d|. Unknown terms are skipped; an empty document maps
    /// to an empty vector.
    pub fn transform(&self, tokens: &[String]) -> Vec<(usize, f64)> {
        if tokens.is_empty() {
            return Vec::new();
        }
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for token in tokens {
            if let Some(i) = self.term_index(token) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let len = tokens.len() as f64;
        let mut out: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(i, c)| (i, (c as f64 / len) * self.idf[i]))
            .collect();
        out.sort_by_key(|&(i, _)| i);
        out
    }
}

/// Fit tf-idf over token lists. Terms appearing in fewer than `min_df`
/// documents are dropped from the vocabulary.
pub fn fit_tfidf(documents: &[Vec<String>], min_df: usize) -> Result<TfIdfModel, LexiconError> {
    if documents.is_empty() {
        return Err(LexiconError::NoDocuments);
    }
    if documents.iter().all(|d| d.is_empty()) {
        return Err(LexiconError::AllDocumentsEmpty);
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in documents {
        let mut seen: std::collections::HashSet<&str> = std::collections::HashSet::new();
        for token in doc {
            if seen.insert(token) {
                *df.entry(token).or_insert(0) += 1;
            }
        }
    }
    let n = documents.len();
    let mut terms: Vec<&str> = df
        .iter()
        .filter(|(_, &count)| count >= min_df)
        .map(|(&t, _)| t)
        .collect();
    terms.sort_unstable();

    let mut vocabulary = HashMap::with_capacity(terms.len());
    let mut idf = Vec::with_capacity(terms.len());
    for (i, &t) in terms.iter().enumerate() {
        vocabulary.insert(t.to_string(), i);
        idf.push(((1 + n) as f64 / (1 + df[t]) as f64).ln() + 1.0);
    }
    Ok(TfIdfModel {
        vocabulary,
        terms: terms.into_iter().map(String::from).collect(),
        idf,
        doc_count: n,
        min_df,
    })
}

/// How terms are scored against a trait.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Positive-class mean tf-idf minus negative-class mean.
    Contrastive,
    /// Positive-class mean tf-idf alone.
    PositiveOnly,
}

impl Default for ScoreMode {
    fn default() -> Self {
        ScoreMode::Contrastive
    }
}

/// The top-n words for one trait in one language, weights non-increasing,
/// every word guaranteed to have a vector in the multilingual table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraitLexicon {
    #[serde(rename = "trait")]
    pub trait_id: TraitId,
    pub language: String,
    #[serde(rename = "words")]
    pub ranked_words: Vec<(String, f64)>,
}

impl TraitLexicon {
    pub fn len(&self) -> usize {
        self.ranked_words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked_words.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.ranked_words.iter().map(|(w, _)| w.as_str())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LexiconError> {
        let out = File::create(path.as_ref())?;
        serde_json::to_writer_pretty(BufWriter::new(out), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let input = File::open(path.as_ref())?;
        Ok(serde_json::from_reader(BufReader::new(input))?)
    }
}

/// Extract the top-n trait words: fit tf-idf on the whole corpus, score
/// each term by class-mean contrast (or positive mean), drop terms with
/// no embedding, rank descending with lexicographic tie-break.
pub fn extract_trait_words(
    corpus: &Corpus,
    trait_id: TraitId,
    table: &EmbeddingTable,
    n: usize,
    min_df: usize,
    mode: ScoreMode,
) -> Result<TraitLexicon, LexiconError> {
    if n == 0 {
        return Err(LexiconError::ZeroN);
    }
    if !corpus.is_labeled() {
        return Err(LexiconError::Unlabeled);
    }
    let positives = corpus.users_with_label(trait_id, Label::Positive);
    if positives.is_empty() {
        return Err(LexiconError::NoPositiveUsers(trait_id.name().to_string()));
    }
    let negatives = corpus.users_with_label(trait_id, Label::Negative);

    let documents: Vec<Vec<String>> = corpus.users.iter().map(|u| u.tokens.clone()).collect();
    let model = fit_tfidf(&documents, min_df)?;

    let class_mean = |users: &[&crate::corpus::UserDocument]| -> Vec<f64> {
        let mut sums = vec![0.0f64; model.vocabulary_size()];
        for user in users {
            for (i, w) in model.transform(&user.tokens) {
                sums[i] += w;
            }
        }
        if !users.is_empty() {
            let count = users.len() as f64;
            for s in sums.iter_mut() {
                *s /= count;
            }
        }
        sums
    };

    let pos_mean = class_mean(&positives);
    let scores: Vec<f64> = match mode {
        ScoreMode::Contrastive => {
            let neg_mean = class_mean(&negatives);
            pos_mean
                .iter()
                .zip(&neg_mean)
                .map(|(p, q)| p - q)
                .collect()
        }
        ScoreMode::PositiveOnly => pos_mean,
    };

    let mut ranked: Vec<(usize, f64)> = (0..model.vocabulary_size())
        .filter(|&i| table.contains(model.term(i)))
        .map(|i| (i, scores[i]))
        .collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite scores")
            .then_with(|| model.term(a.0).cmp(model.term(b.0)))
    });

    if ranked.len() < n {
        log::warn!(
            "trait {}: only {} embeddable terms available, requested {}",
            trait_id,
            ranked.len(),
            n
        );
    }
    let ranked_words = ranked
        .into_iter()
        .take(n)
        .map(|(i, s)| (model.term(i).to_string(), s))
        .collect();
    Ok(TraitLexicon {
        trait_id,
        language: corpus.language.clone(),
        ranked_words,
    })
}
