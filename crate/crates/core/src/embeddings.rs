//! Word embedding tables: fastText-style `.vec` I/O, normalization, and
//! the similarity queries used for alignment validation.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TraitId;

/// Which space a table's vectors live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceTag {
    /// Raw monolingual vectors.
    Mono,
    /// Semantically aligned into the target-language space.
    Multi,
    /// Aligned by one trait's mapping on top of the multilingual space.
    Trait(TraitId),
}

impl fmt::Display for SpaceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceTag::Mono => write!(f, "mono"),
            SpaceTag::Multi => write!(f, "multi"),
            SpaceTag::Trait(t) => write!(f, "trait:{t}"),
        }
    }
}

/// Similarity used by neighbor queries: plain cosine or the
/// hubness-corrected CSLS criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SimilarityMetric {
    Cosine,
    /// Cross-domain similarity local scaling with the given neighborhood size.
    Csls { k: usize },
}

impl SimilarityMetric {
    pub fn csls(k: usize) -> Self {
        assert!(k >= 1, "csls neighborhood size must be >= 1");
        SimilarityMetric::Csls { k }
    }
}

impl Default for SimilarityMetric {
    fn default() -> Self {
        SimilarityMetric::Cosine
    }
}

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("malformed .vec header: {0}")]
    Header(String),
    #[error(".vec line {line}: expected {expected} fields, found {found}")]
    Row {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error(".vec line {line}: non-finite component for word {word:?}")]
    NonFinite { line: usize, word: String },
    #[error("vector for {word:?} has {found} components, table dimension is {expected}")]
    DimMismatch {
        word: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate word {0:?} in table construction")]
    Duplicate(String),
    #[error("zero-norm vector involved in cosine for row {0}")]
    ZeroNorm(usize),
    #[error("table is empty")]
    EmptyTable,
    #[error("k = {k} exceeds vocabulary size {vocab}")]
    KTooLarge { k: usize, vocab: usize },
    #[error("query vector is not finite")]
    NonFiniteQuery,
    #[error("pair list is empty")]
    EmptyPairs,
    #[error("pair index ({0}, {1}) out of range")]
    PairOutOfRange(usize, usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A vocabulary of words with one `dim`-length vector per word, for one
/// language and one space. Immutable after construction.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    language: String,
    space: SpaceTag,
    dim: usize,
    words: Vec<String>,
    matrix: Array2<f64>,
    index: HashMap<String, usize>,
    duplicates_dropped: usize,
}

impl EmbeddingTable {
    /// Build a table from (word, vector) entries. Words must be unique and
    /// vectors finite with exactly `dim` components.
    pub fn new(
        language: impl Into<String>,
        space: SpaceTag,
        dim: usize,
        entries: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, EmbeddingError> {
        let mut words = Vec::with_capacity(entries.len());
        let mut matrix = Array2::zeros((entries.len(), dim));
        let mut index = HashMap::with_capacity(entries.len());
        for (row, (word, vec)) in entries.into_iter().enumerate() {
            if vec.len() != dim {
                return Err(EmbeddingError::DimMismatch {
                    word,
                    expected: dim,
                    found: vec.len(),
                });
            }
            if vec.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::NonFinite {
                    line: row + 2,
                    word,
                });
            }
            if index.contains_key(&word) {
                return Err(EmbeddingError::Duplicate(word));
            }
            for (col, v) in vec.iter().enumerate() {
                matrix[[row, col]] = *v;
            }
            index.insert(word.clone(), row);
            words.push(word);
        }
        Ok(EmbeddingTable {
            language: language.into(),
            space,
            dim,
            words,
            matrix,
            index,
            duplicates_dropped: 0,
        })
    }

    /// Build a table directly from a word list and a row-major matrix.
    pub fn from_matrix(
        language: impl Into<String>,
        space: SpaceTag,
        words: Vec<String>,
        matrix: Array2<f64>,
    ) -> Result<Self, EmbeddingError> {
        let dim = matrix.ncols();
        if matrix.nrows() != words.len() {
            return Err(EmbeddingError::Header(format!(
                "{} words but {} matrix rows",
                words.len(),
                matrix.nrows()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite {
                line: 0,
                word: String::new(),
            });
        }
        let mut index = HashMap::with_capacity(words.len());
        for (row, word) in words.iter().enumerate() {
            if index.insert(word.clone(), row).is_some() {
                return Err(EmbeddingError::Duplicate(word.clone()));
            }
        }
        Ok(EmbeddingTable {
            language: language.into(),
            space,
            dim,
            words,
            matrix,
            index,
            duplicates_dropped: 0,
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn space(&self) -> SpaceTag {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    /// Number of duplicate rows dropped while loading from a `.vec` file.
    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn row_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn vector(&self, word: &str) -> Option<ArrayView1<'_, f64>> {
        self.row_of(word).map(|r| self.matrix.row(r))
    }

    pub fn row(&self, row: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(row)
    }

    /// Replace this table's vectors, keeping vocabulary and language.
    /// Used to move a table into another space (e.g. after applying a map).
    pub fn with_matrix(&self, space: SpaceTag, matrix: Array2<f64>) -> Result<Self, EmbeddingError> {
        Self::from_matrix(self.language.clone(), space, self.words.clone(), matrix)
    }

    /// Load a text `.vec` file: a `<count> <dim>` header line, then one
    /// line per word. Duplicate words keep the first occurrence; the number
    /// dropped is tallied on the table.
    pub fn load_vec(
        language: impl Into<String>,
        space: SpaceTag,
        path: impl AsRef<Path>,
        limit: Option<usize>,
    ) -> Result<Self, EmbeddingError> {
        let file = File::open(path.as_ref())?;
        let mut reader = BufReader::new(file);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let mut parts = header.split_whitespace();
        let count: usize = parts
            .next()
            .ok_or_else(|| EmbeddingError::Header("empty header line".into()))?
            .parse()
            .map_err(|_| EmbeddingError::Header(header.trim().to_string()))?;
        let dim: usize = parts
            .next()
            .ok_or_else(|| EmbeddingError::Header(header.trim().to_string()))?
            .parse()
            .map_err(|_| EmbeddingError::Header(header.trim().to_string()))?;
        if parts.next().is_some() {
            return Err(EmbeddingError::Header(header.trim().to_string()));
        }

        let keep = limit.map_or(count, |l| l.min(count));
        let mut words = Vec::with_capacity(keep);
        let mut rows: Vec<f64> = Vec::with_capacity(keep * dim);
        let mut index = HashMap::with_capacity(keep);
        let mut duplicates = 0usize;

        for (lineno, line) in reader.lines().enumerate() {
            if words.len() >= keep {
                break;
            }
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let line_number = lineno + 2; // header is line 1
            let mut fields = line.split_whitespace();
            let word = fields
                .next()
                .expect("non-empty line has at least one field")
                .to_string();
            let values: Vec<&str> = fields.collect();
            if values.len() != dim {
                return Err(EmbeddingError::Row {
                    line: line_number,
                    expected: dim + 1,
                    found: values.len() + 1,
                });
            }
            if index.contains_key(&word) {
                duplicates += 1;
                continue;
            }
            let mut parsed = Vec::with_capacity(dim);
            for v in values {
                let x: f64 = v.parse().map_err(|_| EmbeddingError::NonFinite {
                    line: line_number,
                    word: word.clone(),
                })?;
                if !x.is_finite() {
                    return Err(EmbeddingError::NonFinite {
                        line: line_number,
                        word: word.clone(),
                    });
                }
                parsed.push(x);
            }
            index.insert(word.clone(), words.len());
            words.push(word);
            rows.extend_from_slice(&parsed);
        }

        if duplicates > 0 {
            log::warn!("dropped {duplicates} duplicate word(s) while loading .vec file");
        }
        let matrix = Array2::from_shape_vec((words.len(), dim), rows)
            .expect("row count and dim are consistent by construction");
        Ok(EmbeddingTable {
            language: language.into(),
            space,
            dim,
            words,
            matrix,
            index,
            duplicates_dropped: duplicates,
        })
    }

    /// Write the table in the text `.vec` format. Reloading gives back the
    /// same words with components within 1e-6.
    pub fn save_vec(&self, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        let file = File::create(path.as_ref())?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (word, row) in self.words.iter().zip(self.matrix.rows()) {
            write!(w, "{word}")?;
            for v in row.iter() {
                write!(w, " {v:.6}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Scale every nonzero vector to unit L2 norm. Zero vectors are kept
    /// as-is and reported by row index.
    pub fn normalize(&self) -> (EmbeddingTable, NormalizeReport) {
        let mut matrix = self.matrix.clone();
        let mut zero_rows = Vec::new();
        for (i, mut row) in matrix.rows_mut().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if norm == 0.0 {
                zero_rows.push(i);
            } else {
                row.mapv_inplace(|v| v / norm);
            }
        }
        let table = EmbeddingTable {
            language: self.language.clone(),
            space: self.space,
            dim: self.dim,
            words: self.words.clone(),
            matrix,
            index: self.index.clone(),
            duplicates_dropped: self.duplicates_dropped,
        };
        (table, NormalizeReport { zero_rows })
    }

    /// Rank the whole vocabulary against `query` and return the best `k`
    /// (word, score) pairs, ties broken by ascending row index.
    pub fn nearest_neighbors(
        &self,
        query: ArrayView1<'_, f64>,
        k: usize,
        metric: SimilarityMetric,
    ) -> Result<Vec<(String, f64)>, EmbeddingError> {
        if self.is_empty() {
            return Err(EmbeddingError::EmptyTable);
        }
        if k > self.len() {
            return Err(EmbeddingError::KTooLarge {
                k,
                vocab: self.len(),
            });
        }
        if query.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFiniteQuery);
        }

        let cosines: Vec<f64> = (0..self.len())
            .map(|i| cosine(query, self.matrix.row(i)).unwrap_or(0.0))
            .collect();
        let scores: Vec<f64> = match metric {
            SimilarityMetric::Cosine => cosines,
            SimilarityMetric::Csls { k: nk } => {
                let nk = nk.min(self.len().saturating_sub(1)).max(1);
                // Hubness penalty of each candidate: mean cosine to its nk
                // nearest other rows. Query-side penalty: mean of its nk best
                // cosines against the table.
                let r_query = {
                    let mut c = cosines.clone();
                    c.sort_by(|a, b| b.partial_cmp(a).expect("finite cosines"));
                    c.iter().take(nk).sum::<f64>() / nk as f64
                };
                let mut out = Vec::with_capacity(self.len());
                for i in 0..self.len() {
                    let row_i = self.matrix.row(i);
                    let mut sims: Vec<f64> = (0..self.len())
                        .filter(|&j| j != i)
                        .map(|j| cosine(row_i, self.matrix.row(j)).unwrap_or(0.0))
                        .collect();
                    sims.sort_by(|a, b| b.partial_cmp(a).expect("finite cosines"));
                    let r_i = sims.iter().take(nk).sum::<f64>() / nk as f64;
                    out.push(2.0 * cosines[i] - r_i - r_query);
                }
                out
            }
        };

        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .expect("finite scores")
                .then(a.cmp(&b))
        });
        Ok(order
            .into_iter()
            .take(k)
            .map(|i| (self.words[i].clone(), scores[i]))
            .collect())
    }
}

/// Row indices whose vectors were zero and therefore left unnormalized.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalizeReport {
    pub zero_rows: Vec<usize>,
}

/// Cosine similarity; `None` when either vector has zero norm.
pub fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Option<f64> {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some(a.dot(&b) / (na * nb))
    }
}

/// Arithmetic mean of cosine similarity over index pairs into two row
/// matrices. Zero-norm members are an error rather than a silent NaN.
pub fn mean_cosine(
    mapped_source: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    pairs: &[(usize, usize)],
) -> Result<f64, EmbeddingError> {
    if pairs.is_empty() {
        return Err(EmbeddingError::EmptyPairs);
    }
    let mut total = 0.0;
    for &(si, ti) in pairs {
        if si >= mapped_source.nrows() || ti >= target.nrows() {
            return Err(EmbeddingError::PairOutOfRange(si, ti));
        }
        let c = cosine(mapped_source.row(si), target.row(ti))
            .ok_or(EmbeddingError::ZeroNorm(si.max(ti)))?;
        total += c;
    }
    Ok(total / pairs.len() as f64)
}

/// Mean-center helper used by the projection module; exposed here so
/// callers can share one definition.
pub fn centroid(matrix: ArrayView2<'_, f64>) -> Array1<f64> {
    let n = matrix.nrows().max(1) as f64;
    matrix.sum_axis(ndarray::Axis(0)) / n
}
