//! The ranking stage: match a dataset's title and description to vocabulary
//! keywords, then score every mapped algorithm term by its summed cosine
//! similarity to the matched keywords.

use thiserror::Error;

use crate::corpus::normalize_keyword;
use crate::embedding::{cosine, EmbeddingError, VectorStore};
use crate::kb_builder::KnowledgeBase;

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("title and description are both empty")]
    EmptyQuery,
    #[error("no keywords matched")]
    NoKeywordsMatched,
    #[error("no algorithm term has a vocabulary mapping")]
    NoMappedAlgorithms,
    #[error("embedding error: {0}")]
    Embedding(#[from] EmbeddingError),
}

/// Vocabulary terms matched for a query, with their provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchedKeywords {
    /// Matched vocabulary terms, deduplicated, first-occurrence order.
    pub terms: Vec<String>,
    /// True when nothing intersected the problem list and matching fell back
    /// to the full vocabulary.
    pub fallback_used: bool,
}

/// One ranked recommendation.
#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub algorithm: String,
    pub score: f64,
}

/// The ranked algorithm list for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationList {
    pub title: String,
    pub description: String,
    pub matched: MatchedKeywords,
    /// Sorted by descending score, ties lexicographic ascending.
    pub recommendations: Vec<Recommendation>,
}

/// Splits free text into normalized tokens. Characters other than
/// alphanumerics, dashes and underscores separate tokens; each token then
/// goes through keyword normalization.
fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '_'))
        .filter_map(|t| normalize_keyword(t).ok())
        .collect()
}

/// Extracts candidate terms: all unigrams plus adjacent-token bigrams
/// (underscore-joined) from the title and the description, deduplicated with
/// first-occurrence order preserved.
pub fn extract_terms(title: &str, description: &str) -> Result<Vec<String>, RecommendError> {
    let mut candidates = Vec::new();
    let mut push = |term: String| {
        if !candidates.contains(&term) {
            candidates.push(term);
        }
    };
    for text in [title, description] {
        let tokens = tokenize(text);
        for token in &tokens {
            push(token.clone());
        }
        for pair in tokens.windows(2) {
            push(format!("{}_{}", pair[0], pair[1]));
        }
    }
    if candidates.is_empty() {
        return Err(RecommendError::EmptyQuery);
    }
    Ok(candidates)
}

/// Matches candidates first against the problem terms' vocabulary forms, then
/// (only if that yields nothing) against the full embedding vocabulary.
pub fn match_keywords(
    candidates: &[String],
    kb: &KnowledgeBase,
    vectors: &VectorStore,
) -> Result<MatchedKeywords, RecommendError> {
    let problem_terms = kb.problem_vocab_terms();
    let via_problems: Vec<String> = candidates
        .iter()
        .filter(|c| problem_terms.contains(&c.as_str()))
        .cloned()
        .collect();
    if !via_problems.is_empty() {
        return Ok(MatchedKeywords {
            terms: via_problems,
            fallback_used: false,
        });
    }
    let via_vocabulary: Vec<String> = candidates
        .iter()
        .filter(|c| vectors.contains(c))
        .cloned()
        .collect();
    if via_vocabulary.is_empty() {
        return Err(RecommendError::NoKeywordsMatched);
    }
    Ok(MatchedKeywords {
        terms: via_vocabulary,
        fallback_used: true,
    })
}

/// Scores every mapped algorithm term: the sum over matched keywords of the
/// cosine similarity between the algorithm's vector and the keyword's vector.
/// Unmapped algorithm terms are skipped.
pub fn score_algorithms(
    matched: &MatchedKeywords,
    vectors: &VectorStore,
    kb: &KnowledgeBase,
) -> Result<Vec<Recommendation>, RecommendError> {
    let mut scored = Vec::new();
    let mut any_mapped = false;
    for entry in &kb.algorithms {
        let Some(vocab_term) = entry.vocab_term.as_deref() else {
            continue;
        };
        let Some(algo_vec) = vectors.get(vocab_term) else {
            continue;
        };
        any_mapped = true;
        let mut score = 0.0;
        for keyword in &matched.terms {
            let Some(kw_vec) = vectors.get(keyword) else {
                continue;
            };
            score += cosine(algo_vec, kw_vec)?;
        }
        scored.push(Recommendation {
            algorithm: entry.term.clone(),
            score,
        });
    }
    if !any_mapped {
        return Err(RecommendError::NoMappedAlgorithms);
    }
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("finite scores")
            .then_with(|| a.algorithm.cmp(&b.algorithm))
    });
    Ok(scored)
}

pub const DEFAULT_TOP_K: usize = 10;

/// The full query path: extract terms, match keywords, score algorithms,
/// truncate to `top_k`.
pub fn recommend(
    title: &str,
    description: &str,
    vectors: &VectorStore,
    kb: &KnowledgeBase,
    top_k: usize,
) -> Result<RecommendationList, RecommendError> {
    let candidates = extract_terms(title, description)?;
    let matched = match_keywords(&candidates, kb, vectors)?;
    let mut recommendations = score_algorithms(&matched, vectors, kb)?;
    recommendations.truncate(top_k);
    Ok(RecommendationList {
        title: title.to_string(),
        description: description.to_string(),
        matched,
        recommendations,
    })
}
