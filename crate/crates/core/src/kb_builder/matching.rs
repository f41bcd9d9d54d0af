//! Fuzzy matching of knowledge-base terms onto the embedding vocabulary.

use super::KbError;

/// Levenshtein edit distance over characters.
fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut current = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        current[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(ca != cb);
            current[j + 1] = substitution.min(prev[j + 1] + 1).min(current[j] + 1);
        }
        std::mem::swap(&mut prev, &mut current);
    }
    prev[b.len()]
}

/// Edit distance scaled by the longer string's length, in [0, 1].
pub fn normalized_levenshtein(a: &str, b: &str) -> Result<f64, KbError> {
    if a.is_empty() || b.is_empty() {
        return Err(KbError::EmptyMatchTerm);
    }
    let max_len = a.chars().count().max(b.chars().count());
    Ok(edit_distance(a, b) as f64 / max_len as f64)
}

/// Default acceptance threshold for a fuzzy vocabulary match.
pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.35;

/// Finds the vocabulary term with minimal normalized distance to `term`,
/// provided the distance stays within `threshold`. Ties break toward the
/// lexicographically smaller vocabulary term.
pub fn match_term(
    term: &str,
    sorted_vocab: &[String],
    threshold: f64,
) -> Result<Option<(String, f64)>, KbError> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, candidate) in sorted_vocab.iter().enumerate() {
        let d = normalized_levenshtein(term, candidate)?;
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((idx, d));
            if d == 0.0 {
                break;
            }
        }
    }
    Ok(best.and_then(|(idx, d)| {
        (d <= threshold).then(|| (sorted_vocab[idx].clone(), d))
    }))
}

/// Maps each knowledge-base term to its closest vocabulary term or `None`.
pub fn match_to_vocabulary(
    terms: &[String],
    vocabulary: &[String],
    threshold: f64,
) -> Result<Vec<Option<String>>, KbError> {
    let mut sorted_vocab = vocabulary.to_vec();
    sorted_vocab.sort();
    terms
        .iter()
        .map(|t| Ok(match_term(t, &sorted_vocab, threshold)?.map(|(v, _)| v)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_strings_zero() {
        assert_eq!(normalized_levenshtein("svm", "svm").unwrap(), 0.0);
    }

    #[test]
    fn plural_variation_small() {
        let d = normalized_levenshtein("random_forest", "random_forests").unwrap();
        assert!((d - 1.0 / 14.0).abs() < 1e-12);
        assert!(d <= DEFAULT_MATCH_THRESHOLD);
    }

    #[test]
    fn kitten_sitting() {
        let d = normalized_levenshtein("kitten", "sitting").unwrap();
        assert!((d - 3.0 / 7.0).abs() < 1e-12);
        assert!(d > DEFAULT_MATCH_THRESHOLD);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(normalized_levenshtein("", "x").is_err());
        assert!(normalized_levenshtein("x", "").is_err());
    }

    #[test]
    fn symmetric_and_bounded() {
        let pairs = [
            ("alpha", "beta"),
            ("k_means", "kmeans"),
            ("a", "abcdefgh"),
            ("same", "same"),
        ];
        for (a, b) in pairs {
            let ab = normalized_levenshtein(a, b).unwrap();
            let ba = normalized_levenshtein(b, a).unwrap();
            assert_eq!(ab, ba);
            assert!((0.0..=1.0).contains(&ab));
            assert_eq!(ab == 0.0, a == b);
        }
    }

    #[test]
    fn match_prefers_minimal_then_lexicographic() {
        let vocab = vec![
            "random_forests".to_string(),
            "random_fores".to_string(),
            "zandom_forest".to_string(),
        ];
        // "random_fores" and "random_forests"/"zandom_forest" distances:
        // 1/13 vs 1/14 vs 1/13; minimal is random_forests.
        let m = match_term("random_forest", &{
            let mut v = vocab.clone();
            v.sort();
            v
        }, 0.35)
        .unwrap()
        .unwrap();
        assert_eq!(m.0, "random_forests");
        // Exact tie: two candidates at the same distance pick the smaller.
        let tied = vec!["ab".to_string(), "ad".to_string()];
        let m = match_term("ac", &tied, 1.0).unwrap().unwrap();
        assert_eq!(m.0, "ab");
    }

    #[test]
    fn unmatched_beyond_threshold() {
        let vocab = vec!["completely_unrelated".to_string()];
        assert!(match_term("qda", &vocab, 0.35).unwrap().is_none());
        let mapped = match_to_vocabulary(
            &["qda".to_string(), "completely_unrelated".to_string()],
            &vocab,
            0.35,
        )
        .unwrap();
        assert_eq!(mapped[0], None);
        assert_eq!(mapped[1].as_deref(), Some("completely_unrelated"));
    }
}
