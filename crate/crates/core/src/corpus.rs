//! Paper-metadata ingestion, keyword normalization and the frequency-filtered
//! vocabulary.
//!
//! Records arrive as JSON lines (`papers.jsonl`), one object per paper with an
//! `id`, a `keywords` list, an optional `journal_keywords` list that is merged
//! in, and a publication `year`. Keywords are normalized (lowercased,
//! separator runs collapsed to a single underscore) and deduplicated per
//! record before anything downstream sees them.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("keyword is empty after normalization: {0:?}")]
    EmptyKeyword(String),
    #[error("min_count must be >= 1, got {0}")]
    InvalidMinCount(usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed vocabulary line {line}: {reason}")]
    MalformedVocabLine { line: usize, reason: String },
}

/// One scholarly paper's metadata: the unit everything downstream consumes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaperRecord {
    pub id: String,
    /// Normalized, deduplicated keywords (author and journal merged).
    pub keywords: Vec<String>,
    pub year: i32,
}

pub const YEAR_MIN: i32 = 1900;
pub const YEAR_MAX: i32 = 2100;

/// Default occurrence threshold below which a keyword is dropped.
pub const DEFAULT_MIN_COUNT: usize = 5;

fn is_separator(c: char) -> bool {
    c.is_whitespace() || c == '-' || c == '_'
}

/// Normalizes a raw keyword: lowercase, every run of spaces/dashes (and
/// existing underscores, so the operation is idempotent) becomes a single
/// underscore, leading and trailing separators stripped.
pub fn normalize_keyword(raw: &str) -> Result<String, CorpusError> {
    let mut out = String::with_capacity(raw.len());
    let mut pending_sep = false;
    for c in raw.chars() {
        if is_separator(c) {
            pending_sep = !out.is_empty();
        } else {
            if pending_sep {
                out.push('_');
                pending_sep = false;
            }
            for lc in c.to_lowercase() {
                out.push(lc);
            }
        }
    }
    if out.is_empty() {
        return Err(CorpusError::EmptyKeyword(raw.to_string()));
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct RawPaper {
    id: String,
    keywords: Vec<String>,
    #[serde(default)]
    journal_keywords: Vec<String>,
    year: i32,
}

/// A per-line ingestion failure; the stream keeps going.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestLineError {
    /// 1-based line number in the input stream.
    pub line: usize,
    pub reason: String,
}

/// Result of ingesting a record stream: surviving records plus diagnostics
/// for everything that was skipped.
#[derive(Debug, Default)]
pub struct IngestResult {
    pub records: Vec<PaperRecord>,
    /// Records dropped because no keyword survived normalization.
    pub dropped_empty: usize,
    pub line_errors: Vec<IngestLineError>,
}

/// Reads `papers.jsonl` records, normalizing and deduplicating keywords per
/// record. Malformed lines and records failing validation are reported in the
/// result rather than aborting the stream.
pub fn ingest_papers<R: BufRead>(reader: R) -> Result<IngestResult, CorpusError> {
    let mut result = IngestResult::default();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPaper = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                result.line_errors.push(IngestLineError {
                    line: lineno,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if raw.id.is_empty() {
            result.line_errors.push(IngestLineError {
                line: lineno,
                reason: "empty paper id".to_string(),
            });
            continue;
        }
        if raw.year < YEAR_MIN || raw.year > YEAR_MAX {
            result.line_errors.push(IngestLineError {
                line: lineno,
                reason: format!("year {} outside [{YEAR_MIN}, {YEAR_MAX}]", raw.year),
            });
            continue;
        }
        let mut keywords = Vec::new();
        for kw in raw.keywords.iter().chain(raw.journal_keywords.iter()) {
            if let Ok(norm) = normalize_keyword(kw) {
                if !keywords.contains(&norm) {
                    keywords.push(norm);
                }
            }
        }
        if keywords.is_empty() {
            result.dropped_empty += 1;
            continue;
        }
        result.records.push(PaperRecord {
            id: raw.id,
            keywords,
            year: raw.year,
        });
    }
    Ok(result)
}

/// The frequency-filtered keyword vocabulary. A term's count is the number of
/// records it appears in (keywords are deduplicated per record first).
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    entries: HashMap<String, usize>,
    min_count: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn contains(&self, term: &str) -> bool {
        self.entries.contains_key(term)
    }

    pub fn count(&self, term: &str) -> Option<usize> {
        self.entries.get(term).copied()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Entries sorted by descending count, ties lexicographic ascending —
    /// the `vocab.tsv` row order.
    pub fn sorted_entries(&self) -> Vec<(String, usize)> {
        let mut rows: Vec<(String, usize)> = self
            .entries
            .iter()
            .map(|(t, c)| (t.clone(), *c))
            .collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        rows
    }

    /// Builds a vocabulary directly from terms and counts. Counts below the
    /// threshold are rejected nowhere: the caller vouches for them (used by
    /// the TSV loader).
    pub fn from_entries(entries: HashMap<String, usize>, min_count: usize) -> Self {
        Vocabulary { entries, min_count }
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<(), CorpusError> {
        for (term, count) in self.sorted_entries() {
            writeln!(w, "{term}\t{count}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R, min_count: usize) -> Result<Self, CorpusError> {
        let mut entries = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (term, count) =
                line.split_once('\t')
                    .ok_or_else(|| CorpusError::MalformedVocabLine {
                        line: idx + 1,
                        reason: "missing tab".to_string(),
                    })?;
            let count: usize =
                count
                    .parse()
                    .map_err(|e| CorpusError::MalformedVocabLine {
                        line: idx + 1,
                        reason: format!("bad count: {e}"),
                    })?;
            entries.insert(term.to_string(), count);
        }
        Ok(Vocabulary { entries, min_count })
    }
}

/// Counts term occurrences across records and keeps the terms appearing at
/// least `min_count` times.
pub fn build_vocabulary(
    records: &[PaperRecord],
    min_count: usize,
) -> Result<Vocabulary, CorpusError> {
    if min_count < 1 {
        return Err(CorpusError::InvalidMinCount(min_count));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for record in records {
        for kw in &record.keywords {
            *counts.entry(kw.clone()).or_insert(0) += 1;
        }
    }
    counts.retain(|_, c| *c >= min_count);
    Ok(Vocabulary {
        entries: counts,
        min_count,
    })
}
