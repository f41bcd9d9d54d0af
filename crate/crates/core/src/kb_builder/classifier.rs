//! The three-class term classifier: softmax-coupled gradient-boosted
//! regression trees, one tree per class per round.

use super::KbError;

/// Term classes, in the fixed order (algorithm, problem, other).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Algorithm,
    Problem,
    Other,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Algorithm, Label::Problem, Label::Other];

    pub fn index(self) -> usize {
        match self {
            Label::Algorithm => 0,
            Label::Problem => 1,
            Label::Other => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Algorithm => "algorithm",
            Label::Problem => "problem",
            Label::Other => "other",
        }
    }
}

/// One training row: a term, its feature vector (network features followed by
/// bag-of-words counts) and its class.
#[derive(Debug, Clone)]
pub struct LabeledExample {
    pub term: String,
    pub features: Vec<f64>,
    pub label: Label,
}

#[derive(Debug, Clone)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A depth-limited regression tree fit to per-example gradients.
#[derive(Debug, Clone)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn is_stump(&self) -> bool {
        self.nodes.len() <= 3
    }
}

/// L2 regularization on leaf weights.
const LAMBDA: f64 = 1.0;
const MIN_GAIN: f64 = 1e-12;

struct TreeBuilder<'a> {
    features: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    max_depth: usize,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    fn leaf_value(&self, rows: &[usize]) -> f64 {
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        -g / (h + LAMBDA)
    }

    fn build(&mut self, mut rows: Vec<usize>, depth: usize) -> usize {
        if depth < self.max_depth {
            if let Some((feature, threshold)) = self.best_split(&rows) {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .drain(..)
                    .partition(|&r| self.features[r][feature] <= threshold);
                let at = self.nodes.len();
                self.nodes.push(Node::Leaf { value: 0.0 }); // placeholder
                let left = self.build(left_rows, depth + 1);
                let right = self.build(right_rows, depth + 1);
                self.nodes[at] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                return at;
            }
        }
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(&rows),
        });
        at
    }

    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64)> {
        if rows.len() < 2 {
            return None;
        }
        let total_g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let total_h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        let parent_score = total_g * total_g / (total_h + LAMBDA);
        let n_features = self.features[rows[0]].len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = rows.to_vec();
        for feature in 0..n_features {
            order.sort_by(|&a, &b| {
                self.features[a][feature]
                    .partial_cmp(&self.features[b][feature])
                    .expect("finite feature values")
            });
            let mut left_g = 0.0;
            let mut left_h = 0.0;
            for w in 0..order.len() - 1 {
                let row = order[w];
                left_g += self.grad[row];
                left_h += self.hess[row];
                let here = self.features[row][feature];
                let next = self.features[order[w + 1]][feature];
                if here == next {
                    continue;
                }
                let right_g = total_g - left_g;
                let right_h = total_h - left_h;
                let gain = left_g * left_g / (left_h + LAMBDA)
                    + right_g * right_g / (right_h + LAMBDA)
                    - parent_score;
                if gain > MIN_GAIN && best.map_or(true, |(bg, _, _)| gain > bg) {
                    best = Some((gain, feature, (here + next) / 2.0));
                }
            }
        }
        best.map(|(_, feature, threshold)| (feature, threshold))
    }
}

fn fit_tree(
    features: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    max_depth: usize,
) -> RegressionTree {
    let mut builder = TreeBuilder {
        features,
        grad,
        hess,
        max_depth,
        nodes: Vec::new(),
    };
    let rows: Vec<usize> = (0..features.len()).collect();
    builder.build(rows, 0);
    RegressionTree {
        nodes: builder.nodes,
    }
}

fn softmax(scores: [f64; 3]) -> [f64; 3] {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp = scores.map(|s| (s - max).exp());
    let sum: f64 = exp.iter().sum();
    exp.map(|e| e / sum)
}

pub const DEFAULT_ROUNDS: usize = 50;
pub const DEFAULT_DEPTH: usize = 3;
pub const DEFAULT_LEARNING_RATE: f64 = 0.1;

/// Boosted ensemble per class. `predict_proba` returns a softmax
/// distribution over (algorithm, problem, other).
#[derive(Debug, Clone)]
pub struct TermClassifier {
    rounds: Vec<[RegressionTree; 3]>,
    learning_rate: f64,
    n_features: usize,
    seed: u64,
    /// Training-set multiclass log-loss after each boosting round.
    pub training_log_loss: Vec<f64>,
}

impl TermClassifier {
    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rounds(&self) -> &[[RegressionTree; 3]] {
        &self.rounds
    }

    pub fn scores(&self, features: &[f64]) -> Result<[f64; 3], KbError> {
        if features.len() != self.n_features {
            return Err(KbError::FeatureLengthMismatch {
                expected: self.n_features,
                got: features.len(),
            });
        }
        let mut scores = [0.0; 3];
        for round in &self.rounds {
            for (k, tree) in round.iter().enumerate() {
                scores[k] += self.learning_rate * tree.predict(features);
            }
        }
        Ok(scores)
    }

    pub fn predict_proba(&self, features: &[f64]) -> Result<[f64; 3], KbError> {
        let probs = softmax(self.scores(features)?);
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        Ok(probs)
    }

    pub fn predict(&self, features: &[f64]) -> Result<Label, KbError> {
        let probs = self.predict_proba(features)?;
        let mut best = 0;
        for k in 1..3 {
            if probs[k] > probs[best] {
                best = k;
            }
        }
        Ok(Label::ALL[best])
    }
}

/// Trains the boosted ensemble. Each round fits one tree per class to the
/// softmax gradients. Training is fully deterministic; the seed is recorded
/// for provenance.
pub fn train_classifier(
    examples: &[LabeledExample],
    rounds: usize,
    depth: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<TermClassifier, KbError> {
    if examples.is_empty() {
        return Err(KbError::NoTrainingExamples);
    }
    let n_features = examples[0].features.len();
    for ex in examples {
        if ex.features.len() != n_features {
            return Err(KbError::FeatureLengthMismatch {
                expected: n_features,
                got: ex.features.len(),
            });
        }
    }
    for label in Label::ALL {
        if !examples.iter().any(|e| e.label == label) {
            return Err(KbError::MissingLabelClass(label.name()));
        }
    }
    let features: Vec<Vec<f64>> = examples.iter().map(|e| e.features.clone()).collect();
    let n = examples.len();
    let mut raw_scores = vec![[0.0f64; 3]; n];
    let mut ensembles: Vec<[RegressionTree; 3]> = Vec::with_capacity(rounds);
    let mut training_log_loss = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let probs: Vec<[f64; 3]> = raw_scores.iter().map(|&s| softmax(s)).collect();
        let round: [RegressionTree; 3] = std::array::from_fn(|k| {
            let mut grad = Vec::with_capacity(n);
            let mut hess = Vec::with_capacity(n);
            for (i, ex) in examples.iter().enumerate() {
                let y = f64::from(ex.label.index() == k);
                grad.push(probs[i][k] - y);
                hess.push(probs[i][k] * (1.0 - probs[i][k]));
            }
            fit_tree(&features, &grad, &hess, depth)
        });
        for (i, score) in raw_scores.iter_mut().enumerate() {
            for (k, tree) in round.iter().enumerate() {
                score[k] += learning_rate * tree.predict(&features[i]);
            }
        }
        ensembles.push(round);
        let loss: f64 = raw_scores
            .iter()
            .zip(examples)
            .map(|(&s, ex)| -softmax(s)[ex.label.index()].ln())
            .sum::<f64>()
            / n as f64;
        training_log_loss.push(loss);
    }
    Ok(TermClassifier {
        rounds: ensembles,
        learning_rate,
        n_features,
        seed,
        training_log_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(term: &str, features: Vec<f64>, label: Label) -> LabeledExample {
        LabeledExample {
            term: term.to_string(),
            features,
            label,
        }
    }

    /// Three well-separated clusters, one per class.
    fn separable_fixture() -> Vec<LabeledExample> {
        let mut out = Vec::new();
        for i in 0..8 {
            let jitter = i as f64 * 0.01;
            out.push(example(
                &format!("alg{i}"),
                vec![1.0 + jitter, 0.0, 5.0],
                Label::Algorithm,
            ));
            out.push(example(
                &format!("prob{i}"),
                vec![5.0 + jitter, 3.0, 0.0],
                Label::Problem,
            ));
            out.push(example(
                &format!("other{i}"),
                vec![9.0 + jitter, 9.0, 9.0],
                Label::Other,
            ));
        }
        out
    }

    #[test]
    fn separable_fixture_reaches_full_accuracy() {
        let examples = separable_fixture();
        let clf = train_classifier(&examples, 50, 3, 0.1, 1).unwrap();
        for ex in &examples {
            assert_eq!(clf.predict(&ex.features).unwrap(), ex.label);
        }
    }

    #[test]
    fn log_loss_strictly_decreases_on_separable_fixture() {
        let examples = separable_fixture();
        let clf = train_classifier(&examples, 30, 3, 0.1, 1).unwrap();
        for pair in clf.training_log_loss.windows(2) {
            assert!(pair[1] < pair[0], "loss did not decrease: {pair:?}");
        }
    }

    #[test]
    fn conflicting_labels_converge_to_priors() {
        // Same feature vector everywhere; class counts 2:3:5.
        let mut examples = Vec::new();
        for i in 0..2 {
            examples.push(example(&format!("a{i}"), vec![1.0, 2.0], Label::Algorithm));
        }
        for i in 0..3 {
            examples.push(example(&format!("p{i}"), vec![1.0, 2.0], Label::Problem));
        }
        for i in 0..5 {
            examples.push(example(&format!("o{i}"), vec![1.0, 2.0], Label::Other));
        }
        let clf = train_classifier(&examples, 200, 3, 0.1, 1).unwrap();
        let probs = clf.predict_proba(&[1.0, 2.0]).unwrap();
        assert!((probs[0] - 0.2).abs() < 0.05, "{probs:?}");
        assert!((probs[1] - 0.3).abs() < 0.05, "{probs:?}");
        assert!((probs[2] - 0.5).abs() < 0.05, "{probs:?}");
    }

    #[test]
    fn single_round_depth_one_is_three_stumps() {
        let examples = separable_fixture();
        let clf = train_classifier(&examples, 1, 1, 0.1, 1).unwrap();
        assert_eq!(clf.n_rounds(), 1);
        for tree in &clf.rounds()[0] {
            assert!(tree.is_stump());
        }
        let probs = clf.predict_proba(&examples[0].features).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn missing_class_rejected() {
        let examples = vec![
            example("a", vec![1.0], Label::Algorithm),
            example("p", vec![2.0], Label::Problem),
        ];
        assert!(matches!(
            train_classifier(&examples, 5, 2, 0.1, 1),
            Err(KbError::MissingLabelClass("other"))
        ));
    }

    #[test]
    fn probability_rows_always_sum_to_one() {
        let examples = separable_fixture();
        let clf = train_classifier(&examples, 10, 2, 0.1, 1).unwrap();
        for ex in &examples {
            let p = clf.predict_proba(&ex.features).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}
