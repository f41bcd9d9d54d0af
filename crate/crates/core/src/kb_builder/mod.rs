//! Expands seed lists into the scored "algorithm" and "problem" term sets:
//! seed generation, feature extraction, classifier training, candidate
//! generation, top-k selection, review overrides and fuzzy vocabulary
//! matching.

pub mod classifier;
pub mod matching;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::normalize_keyword;
use crate::term_graph::{node_features, CentralityCache, TermGraph};

pub use classifier::{
    train_classifier, Label, LabeledExample, TermClassifier, DEFAULT_DEPTH,
    DEFAULT_LEARNING_RATE, DEFAULT_ROUNDS,
};
pub use matching::{
    match_term, match_to_vocabulary, normalized_levenshtein, DEFAULT_MATCH_THRESHOLD,
};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("no seeds found for class {0}")]
    EmptySeedClass(&'static str),
    #[error("seed title not present in graph: {0}")]
    MissingSeedTitle(String),
    #[error("title seeded as both algorithm and problem: {0}")]
    OverlappingSeeds(String),
    #[error("invalid seed title: {0}")]
    InvalidSeedTitle(String),
    #[error("no training examples")]
    NoTrainingExamples,
    #[error("no examples labeled {0}")]
    MissingLabelClass(&'static str),
    #[error("feature length mismatch: expected {expected}, got {got}")]
    FeatureLengthMismatch { expected: usize, got: usize },
    #[error("need {needed} negative pages but only {available} non-seed pages exist")]
    InsufficientNegatives { needed: usize, available: usize },
    #[error("override references both classes for term: {0}")]
    ConflictingOverride(String),
    #[error("term would appear in both classes after review: {0}")]
    OverlapAfterReview(String),
    #[error("matching requires non-empty terms")]
    EmptyMatchTerm,
    #[error("graph error: {0}")]
    Graph(#[from] crate::term_graph::GraphError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed {what} line {line}: {reason}")]
    MalformedLine {
        what: &'static str,
        line: usize,
        reason: String,
    },
}

/// Configured seed sources: category names for algorithms, extra algorithm
/// titles, and the problem titles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedConfig {
    #[serde(default = "default_algorithm_categories")]
    pub algorithm_categories: Vec<String>,
    #[serde(default)]
    pub algorithm_extra_titles: Vec<String>,
    #[serde(default)]
    pub problem_titles: Vec<String>,
}

fn default_algorithm_categories() -> Vec<String> {
    vec![
        "classification algorithms".to_string(),
        "cluster analysis algorithms".to_string(),
        "regression models".to_string(),
    ]
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig {
            algorithm_categories: default_algorithm_categories(),
            algorithm_extra_titles: Vec::new(),
            problem_titles: Vec::new(),
        }
    }
}

impl SeedConfig {
    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}

/// Resolved seed node ids plus any warnings raised while resolving them.
#[derive(Debug, Clone)]
pub struct Seeds {
    pub algorithms: Vec<usize>,
    pub problems: Vec<usize>,
    pub warnings: Vec<String>,
}

impl Seeds {
    pub fn all(&self) -> Vec<usize> {
        let mut v = self.algorithms.clone();
        v.extend(&self.problems);
        v
    }
}

/// Resolves the seed configuration against the graph: algorithm seeds are
/// pages in any configured category plus the extra titles; problem seeds are
/// the configured problem titles. Stub pages are allowed with a warning;
/// absent titles are errors.
pub fn generate_seeds(graph: &TermGraph, config: &SeedConfig) -> Result<Seeds, KbError> {
    let categories: HashSet<String> = config
        .algorithm_categories
        .iter()
        .map(|c| normalize_keyword(c).map_err(|_| KbError::InvalidSeedTitle(c.clone())))
        .collect::<Result<_, _>>()?;
    let mut warnings = Vec::new();
    let mut algorithms = BTreeSet::new();
    for (id, node) in graph.nodes().iter().enumerate() {
        if node.categories.iter().any(|c| categories.contains(c)) {
            algorithms.insert(id);
        }
    }
    let mut resolve = |title: &str| -> Result<usize, KbError> {
        let normalized =
            normalize_keyword(title).map_err(|_| KbError::InvalidSeedTitle(title.to_string()))?;
        let id = graph
            .node_id(&normalized)
            .ok_or_else(|| KbError::MissingSeedTitle(normalized.clone()))?;
        if graph.node(id).is_stub {
            warnings.push(format!("seed title {normalized} is a stub page"));
        }
        Ok(id)
    };
    for title in &config.algorithm_extra_titles {
        algorithms.insert(resolve(title)?);
    }
    let mut problems = BTreeSet::new();
    for title in &config.problem_titles {
        problems.insert(resolve(title)?);
    }
    if let Some(&id) = algorithms.intersection(&problems).next() {
        return Err(KbError::OverlappingSeeds(graph.node(id).title.clone()));
    }
    if algorithms.is_empty() {
        return Err(KbError::EmptySeedClass("algorithm"));
    }
    if problems.is_empty() {
        return Err(KbError::EmptySeedClass("problem"));
    }
    Ok(Seeds {
        algorithms: algorithms.into_iter().collect(),
        problems: problems.into_iter().collect(),
        warnings,
    })
}

pub const DEFAULT_BOW_CAP: usize = 5000;

/// Page-text tokens: lowercase alphanumeric runs.
fn tokenize_text(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// The bag-of-words token list over the seed pages: tokens appearing in at
/// least two seed pages, ranked by document frequency (ties lexicographic),
/// truncated to `cap`.
#[derive(Debug, Clone, PartialEq)]
pub struct BowVocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl BowVocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Token-count vector for a page text, aligned with `tokens()`.
    pub fn counts(&self, text: &str) -> Vec<f64> {
        let mut counts = vec![0.0; self.tokens.len()];
        for token in tokenize_text(text) {
            if let Some(&idx) = self.index.get(&token) {
                counts[idx] += 1.0;
            }
        }
        counts
    }
}

pub fn build_bow_vocabulary(graph: &TermGraph, seeds: &Seeds, cap: usize) -> BowVocabulary {
    let mut document_frequency: BTreeMap<String, usize> = BTreeMap::new();
    for &id in &seeds.all() {
        let unique: BTreeSet<String> = tokenize_text(&graph.node(id).text).into_iter().collect();
        for token in unique {
            *document_frequency.entry(token).or_insert(0) += 1;
        }
    }
    let mut qualifying: Vec<(String, usize)> = document_frequency
        .into_iter()
        .filter(|(_, df)| *df >= 2)
        .collect();
    qualifying.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    qualifying.truncate(cap);
    let tokens: Vec<String> = qualifying.into_iter().map(|(t, _)| t).collect();
    let index = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    BowVocabulary { tokens, index }
}

/// Feature vector of one page: 13 network features followed by bag-of-words
/// counts.
pub fn page_features(
    graph: &TermGraph,
    cache: &CentralityCache,
    node: usize,
    seeds: &Seeds,
    bow: &BowVocabulary,
) -> Result<Vec<f64>, KbError> {
    let net = node_features(graph, cache, node, &seeds.algorithms, &seeds.problems)?;
    let mut features = net.to_vec();
    features.extend(bow.counts(&graph.node(node).text));
    Ok(features)
}

pub const DEFAULT_NEGATIVE_RATIO: usize = 5;

/// Builds the labeled training set: every seed as a positive example plus
/// `negative_ratio` times as many uniformly sampled non-seed pages labeled
/// "other". Sampling is without replacement and fully determined by `seed`.
pub fn build_training_set(
    graph: &TermGraph,
    cache: &CentralityCache,
    seeds: &Seeds,
    bow: &BowVocabulary,
    negative_ratio: usize,
    seed: u64,
) -> Result<Vec<LabeledExample>, KbError> {
    let seed_ids: HashSet<usize> = seeds.all().into_iter().collect();
    let needed = negative_ratio * seed_ids.len();
    let mut non_seeds: Vec<usize> = (0..graph.node_count())
        .filter(|id| !seed_ids.contains(id))
        .collect();
    if non_seeds.len() < needed {
        return Err(KbError::InsufficientNegatives {
            needed,
            available: non_seeds.len(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (sampled, _) = non_seeds.partial_shuffle(&mut rng, needed);
    let mut negatives: Vec<usize> = sampled.to_vec();
    negatives.sort_unstable();

    let mut examples = Vec::new();
    let mut push = |id: usize, label: Label| -> Result<(), KbError> {
        examples.push(LabeledExample {
            term: graph.node(id).title.clone(),
            features: page_features(graph, cache, id, seeds, bow)?,
            label,
        });
        Ok(())
    };
    for &id in &seeds.algorithms {
        push(id, Label::Algorithm)?;
    }
    for &id in &seeds.problems {
        push(id, Label::Problem)?;
    }
    for id in negatives {
        push(id, Label::Other)?;
    }
    Ok(examples)
}

/// Title substrings that make a page a candidate.
pub fn default_title_patterns() -> Vec<String> {
    ["recognition", "analysis", "detection", "system"]
        .map(str::to_string)
        .to_vec()
}

/// Text terms that make a page a candidate: the corpus search-term list.
pub fn default_content_terms() -> Vec<String> {
    [
        "machine learning",
        "data mining",
        "regression",
        "supervised learning",
        "unsupervised learning",
        "decision trees",
        "boosting",
        "random forest",
        "neural networks",
        "ANN",
        "deep learning",
        "recurrent neural network",
        "RNN",
        "convolutional neural network",
        "CNN",
        "relevance vector machine",
        "RVM",
        "support vector machine",
        "SVM",
        "k-means",
        "DBSCAN",
        "mean-shift",
        "bayesian networks",
        "feature engineering",
    ]
    .map(str::to_string)
    .to_vec()
}

pub const CANDIDATE_HOP_LIMIT: usize = 3;

/// Rule 1: pages whose normalized title contains any pattern.
pub fn candidates_by_title(graph: &TermGraph, patterns: &[String]) -> BTreeSet<usize> {
    let normalized: Vec<String> = patterns
        .iter()
        .filter_map(|p| normalize_keyword(p).ok())
        .collect();
    graph
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, node)| normalized.iter().any(|p| node.title.contains(p.as_str())))
        .map(|(id, _)| id)
        .collect()
}

/// Rule 2: pages at most `hops` directed out-link hops from any seed.
pub fn candidates_by_hops(graph: &TermGraph, seeds: &Seeds, hops: usize) -> BTreeSet<usize> {
    let mut dist: Vec<Option<usize>> = vec![None; graph.node_count()];
    let mut queue = VecDeque::new();
    for id in seeds.all() {
        dist[id] = Some(0);
        queue.push_back(id);
    }
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        if du == hops {
            continue;
        }
        for &v in graph.out_neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist.iter()
        .enumerate()
        .filter_map(|(id, d)| matches!(d, Some(d) if *d >= 1).then_some(id))
        .collect()
}

/// Rule 3: pages whose text contains any content term (case-insensitive).
pub fn candidates_by_content(graph: &TermGraph, terms: &[String]) -> BTreeSet<usize> {
    let lowered: Vec<String> = terms.iter().map(|t| t.to_lowercase()).collect();
    graph
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, node)| {
            let text = node.text.to_lowercase();
            lowered.iter().any(|t| text.contains(t.as_str()))
        })
        .map(|(id, _)| id)
        .collect()
}

/// Union of the three candidate rules, minus the seeds themselves.
pub fn generate_candidates(
    graph: &TermGraph,
    seeds: &Seeds,
    title_patterns: &[String],
    content_terms: &[String],
) -> BTreeSet<usize> {
    let mut candidates = candidates_by_title(graph, title_patterns);
    candidates.extend(candidates_by_hops(graph, seeds, CANDIDATE_HOP_LIMIT));
    candidates.extend(candidates_by_content(graph, content_terms));
    for id in seeds.all() {
        candidates.remove(&id);
    }
    candidates
}

/// Scored term lists per class, each sorted by descending score with
/// lexicographic tie-breaks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selections {
    pub algorithms: Vec<(String, f64)>,
    pub problems: Vec<(String, f64)>,
}

fn sort_scored(rows: &mut [(String, f64)]) {
    rows.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite scores")
            .then_with(|| a.0.cmp(&b.0))
    });
}

pub const DEFAULT_SELECTION_K: usize = 2000;

/// Scores every candidate with the classifier and keeps the top `k` per
/// class. A candidate is eligible only for its higher-probability class
/// (algorithm wins exact ties).
pub fn rank_and_select(
    classifier: &TermClassifier,
    graph: &TermGraph,
    cache: &CentralityCache,
    candidates: &BTreeSet<usize>,
    seeds: &Seeds,
    bow: &BowVocabulary,
    k: usize,
) -> Result<Selections, KbError> {
    let mut selections = Selections::default();
    for &id in candidates {
        let features = page_features(graph, cache, id, seeds, bow)?;
        let probs = classifier.predict_proba(&features)?;
        let title = graph.node(id).title.clone();
        if probs[Label::Algorithm.index()] >= probs[Label::Problem.index()] {
            selections
                .algorithms
                .push((title, probs[Label::Algorithm.index()]));
        } else {
            selections
                .problems
                .push((title, probs[Label::Problem.index()]));
        }
    }
    sort_scored(&mut selections.algorithms);
    sort_scored(&mut selections.problems);
    selections.algorithms.truncate(k);
    selections.problems.truncate(k);
    Ok(selections)
}

/// One manual-review row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverrideRow {
    pub term: String,
    pub add: bool,
    pub class: OverrideClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverrideClass {
    Algorithm,
    Problem,
}

/// Parses `review_overrides.tsv`: `term<TAB>add|remove<TAB>algorithm|problem`.
pub fn read_overrides<R: BufRead>(reader: R) -> Result<Vec<OverrideRow>, KbError> {
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        let malformed = |reason: String| KbError::MalformedLine {
            what: "override",
            line: idx + 1,
            reason,
        };
        if parts.len() != 3 {
            return Err(malformed("expected 3 tab-separated fields".to_string()));
        }
        let add = match parts[1] {
            "add" => true,
            "remove" => false,
            other => return Err(malformed(format!("unknown action {other:?}"))),
        };
        let class = match parts[2] {
            "algorithm" => OverrideClass::Algorithm,
            "problem" => OverrideClass::Problem,
            other => return Err(malformed(format!("unknown class {other:?}"))),
        };
        rows.push(OverrideRow {
            term: parts[0].to_string(),
            add,
            class,
        });
    }
    Ok(rows)
}

/// Applies review overrides: removes delete terms, adds insert terms with
/// score 1.0. A term referenced with both classes, or ending up in both
/// classes, is an error.
pub fn apply_review(
    selections: &Selections,
    overrides: &[OverrideRow],
) -> Result<Selections, KbError> {
    let mut term_class: BTreeMap<&str, OverrideClass> = BTreeMap::new();
    for row in overrides {
        match term_class.get(row.term.as_str()) {
            Some(&c) if c != row.class => {
                return Err(KbError::ConflictingOverride(row.term.clone()))
            }
            _ => {
                term_class.insert(&row.term, row.class);
            }
        }
    }
    let mut result = selections.clone();
    for row in overrides {
        let rows = match row.class {
            OverrideClass::Algorithm => &mut result.algorithms,
            OverrideClass::Problem => &mut result.problems,
        };
        if row.add {
            if !rows.iter().any(|(t, _)| *t == row.term) {
                rows.push((row.term.clone(), 1.0));
            }
        } else {
            rows.retain(|(t, _)| *t != row.term);
        }
    }
    let algorithm_terms: HashSet<&str> =
        result.algorithms.iter().map(|(t, _)| t.as_str()).collect();
    if let Some((t, _)) = result
        .problems
        .iter()
        .find(|(t, _)| algorithm_terms.contains(t.as_str()))
    {
        return Err(KbError::OverlapAfterReview(t.clone()));
    }
    sort_scored(&mut result.algorithms);
    sort_scored(&mut result.problems);
    Ok(result)
}

/// One knowledge-base term: its classifier score and the embedding-vocabulary
/// term it matched, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct KbEntry {
    pub term: String,
    pub score: f64,
    pub vocab_term: Option<String>,
}

/// The final scored algorithm and problem term lists, mapped onto the
/// embedding vocabulary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    pub algorithms: Vec<KbEntry>,
    pub problems: Vec<KbEntry>,
}

impl KnowledgeBase {
    /// Vocabulary forms of the mapped problem terms, deduplicated, in list
    /// order.
    pub fn problem_vocab_terms(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.problems
            .iter()
            .filter_map(|e| e.vocab_term.as_deref())
            .filter(|v| seen.insert(*v))
            .collect()
    }

    pub fn write_tsv<W: Write>(entries: &[KbEntry], mut w: W) -> Result<(), KbError> {
        for entry in entries {
            writeln!(
                w,
                "{}\t{}\t{}",
                entry.term,
                entry.score,
                entry.vocab_term.as_deref().unwrap_or("-")
            )?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Vec<KbEntry>, KbError> {
        let mut entries = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 {
                return Err(KbError::MalformedLine {
                    what: "knowledge base",
                    line: idx + 1,
                    reason: "expected 3 tab-separated fields".to_string(),
                });
            }
            let score: f64 = parts[1].parse().map_err(|e| KbError::MalformedLine {
                what: "knowledge base",
                line: idx + 1,
                reason: format!("bad score: {e}"),
            })?;
            entries.push(KbEntry {
                term: parts[0].to_string(),
                score,
                vocab_term: (parts[2] != "-").then(|| parts[2].to_string()),
            });
        }
        Ok(entries)
    }
}

/// Attaches vocabulary matches to reviewed selections, producing the final
/// knowledge base.
pub fn attach_vocabulary(
    selections: &Selections,
    vocabulary: &[String],
    threshold: f64,
) -> Result<KnowledgeBase, KbError> {
    let build = |rows: &[(String, f64)]| -> Result<Vec<KbEntry>, KbError> {
        let terms: Vec<String> = rows.iter().map(|(t, _)| t.clone()).collect();
        let matches = match_to_vocabulary(&terms, vocabulary, threshold)?;
        Ok(rows
            .iter()
            .zip(matches)
            .map(|((term, score), vocab_term)| KbEntry {
                term: term.clone(),
                score: *score,
                vocab_term,
            })
            .collect())
    };
    Ok(KnowledgeBase {
        algorithms: build(&selections.algorithms)?,
        problems: build(&selections.problems)?,
    })
}

/// Tunables for the full knowledge-base build.
#[derive(Debug, Clone)]
pub struct KbBuildParams {
    pub bow_cap: usize,
    pub negative_ratio: usize,
    pub rounds: usize,
    pub depth: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub selection_k: usize,
    pub match_threshold: f64,
    pub title_patterns: Vec<String>,
    pub content_terms: Vec<String>,
}

impl Default for KbBuildParams {
    fn default() -> Self {
        KbBuildParams {
            bow_cap: DEFAULT_BOW_CAP,
            negative_ratio: DEFAULT_NEGATIVE_RATIO,
            rounds: DEFAULT_ROUNDS,
            depth: DEFAULT_DEPTH,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: 0,
            selection_k: DEFAULT_SELECTION_K,
            match_threshold: DEFAULT_MATCH_THRESHOLD,
            title_patterns: default_title_patterns(),
            content_terms: default_content_terms(),
        }
    }
}

/// Runs the whole expansion pipeline: seeds, features, classifier,
/// candidates, selection, seed union (seeds carry score 1.0), review and
/// vocabulary matching.
pub fn build_knowledge_base(
    graph: &TermGraph,
    seed_config: &SeedConfig,
    overrides: &[OverrideRow],
    vocabulary: &[String],
    params: &KbBuildParams,
) -> Result<(KnowledgeBase, Vec<String>), KbError> {
    let seeds = generate_seeds(graph, seed_config)?;
    let cache = CentralityCache::compute(graph)?;
    let bow = build_bow_vocabulary(graph, &seeds, params.bow_cap);
    let examples = build_training_set(
        graph,
        &cache,
        &seeds,
        &bow,
        params.negative_ratio,
        params.seed,
    )?;
    let classifier = train_classifier(
        &examples,
        params.rounds,
        params.depth,
        params.learning_rate,
        params.seed,
    )?;
    let candidates =
        generate_candidates(graph, &seeds, &params.title_patterns, &params.content_terms);
    let mut selections = rank_and_select(
        &classifier,
        graph,
        &cache,
        &candidates,
        &seeds,
        &bow,
        params.selection_k,
    )?;
    for &id in &seeds.algorithms {
        selections
            .algorithms
            .push((graph.node(id).title.clone(), 1.0));
    }
    for &id in &seeds.problems {
        selections
            .problems
            .push((graph.node(id).title.clone(), 1.0));
    }
    sort_scored(&mut selections.algorithms);
    sort_scored(&mut selections.problems);
    let reviewed = apply_review(&selections, overrides)?;
    let kb = attach_vocabulary(&reviewed, vocabulary, params.match_threshold)?;
    Ok((kb, seeds.warnings))
}
