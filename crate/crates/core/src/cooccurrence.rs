//! The recency-weighted sparse symmetric co-occurrence matrix.
//!
//! Every unordered pair of in-vocabulary keywords appearing together in a
//! paper gets that paper's recency weight added to its cell. A paper's whole
//! keyword set is one symmetric context: each pair counts once per paper.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::corpus::{PaperRecord, Vocabulary};

#[derive(Debug, Error)]
pub enum CooccurrenceError {
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed co-occurrence line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("unknown term in co-occurrence file: {0}")]
    UnknownTerm(String),
}

/// Recency weight of a paper: 1 before 2000, then growing linearly
/// (`year - 2000 + 1`).
pub fn recency_weight(year: i32) -> f64 {
    if year < 2000 {
        1.0
    } else {
        (year - 2000 + 1) as f64
    }
}

/// A stable term <-> id mapping shared by the matrix and the embedding model.
/// Ids are assigned in lexicographic term order, so the index is a pure
/// function of the term set.
#[derive(Debug, Clone, PartialEq)]
pub struct TermIndex {
    terms: Vec<String>,
    by_name: HashMap<String, u32>,
}

impl TermIndex {
    pub fn from_vocabulary(vocab: &Vocabulary) -> Self {
        let mut terms: Vec<String> = vocab.terms().map(str::to_string).collect();
        terms.sort();
        Self::from_sorted(terms)
    }

    pub fn from_terms<I: IntoIterator<Item = String>>(terms: I) -> Self {
        let mut terms: Vec<String> = terms.into_iter().collect();
        terms.sort();
        terms.dedup();
        Self::from_sorted(terms)
    }

    fn from_sorted(terms: Vec<String>) -> Self {
        let by_name = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        TermIndex { terms, by_name }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.by_name.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// Sparse symmetric matrix of recency-weighted co-occurrence counts, keyed by
/// unordered term pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceMatrix {
    index: TermIndex,
    /// Keys are (low id, high id); weights are always positive.
    entries: HashMap<(u32, u32), f64>,
}

impl CooccurrenceMatrix {
    pub fn index(&self) -> &TermIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Weight for a pair, queried through either orientation.
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let ia = self.index.id(a)?;
        let ib = self.index.id(b)?;
        self.get_ids(ia, ib)
    }

    pub fn get_ids(&self, a: u32, b: u32) -> Option<f64> {
        if a == b {
            return None;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        self.entries.get(&key).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &w)| (i, j, w))
    }

    /// Entries sorted by (term_i, term_j) with term_i < term_j
    /// lexicographically — the `cooccur.tsv` row order. Ids are assigned in
    /// lexicographic order, so id order is term order.
    pub fn sorted_entries(&self) -> Vec<(u32, u32, f64)> {
        let mut rows: Vec<(u32, u32, f64)> = self.iter().collect();
        rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        rows
    }

    /// Adds another partial matrix into this one. Merging partials in
    /// ascending partition index reproduces sequential accumulation exactly
    /// for integral recency weights; callers must keep that order for
    /// bit-identical results.
    pub fn merge(&mut self, other: &CooccurrenceMatrix) {
        debug_assert_eq!(self.index, other.index);
        for (&key, &w) in &other.entries {
            *self.entries.entry(key).or_insert(0.0) += w;
        }
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<(), CooccurrenceError> {
        for (i, j, weight) in self.sorted_entries() {
            writeln!(w, "{}\t{}\t{}", self.index.term(i), self.index.term(j), weight)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R, index: TermIndex) -> Result<Self, CooccurrenceError> {
        let mut entries = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (a, b, w) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(w)) => (a, b, w),
                _ => {
                    return Err(CooccurrenceError::MalformedLine {
                        line: idx + 1,
                        reason: "expected 3 tab-separated fields".to_string(),
                    })
                }
            };
            let ia = index
                .id(a)
                .ok_or_else(|| CooccurrenceError::UnknownTerm(a.to_string()))?;
            let ib = index
                .id(b)
                .ok_or_else(|| CooccurrenceError::UnknownTerm(b.to_string()))?;
            let w: f64 = w.parse().map_err(|e| CooccurrenceError::MalformedLine {
                line: idx + 1,
                reason: format!("bad weight: {e}"),
            })?;
            let key = if ia < ib { (ia, ib) } else { (ib, ia) };
            entries.insert(key, w);
        }
        Ok(CooccurrenceMatrix { index, entries })
    }
}

/// Accumulates the matrix over a corpus: for each paper, every unordered pair
/// of its deduplicated in-vocabulary keywords receives the paper's recency
/// weight. Out-of-vocabulary keywords are ignored; self-pairs never counted.
pub fn build_matrix(
    records: &[PaperRecord],
    vocab: &Vocabulary,
) -> Result<CooccurrenceMatrix, CooccurrenceError> {
    if vocab.is_empty() {
        return Err(CooccurrenceError::EmptyVocabulary);
    }
    let index = TermIndex::from_vocabulary(vocab);
    let mut entries: HashMap<(u32, u32), f64> = HashMap::new();
    for record in records {
        let weight = recency_weight(record.year);
        let mut ids: Vec<u32> = record
            .keywords
            .iter()
            .filter_map(|kw| index.id(kw))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        for (pos, &i) in ids.iter().enumerate() {
            for &j in &ids[pos + 1..] {
                *entries.entry((i, j)).or_insert(0.0) += weight;
            }
        }
    }
    Ok(CooccurrenceMatrix { index, entries })
}
