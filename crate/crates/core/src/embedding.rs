//! Weighted log-bilinear keyword embeddings trained on the co-occurrence
//! matrix, plus the exported vector store and cosine similarity.
//!
//! For each stored pair the model fits `w_i . w~_j + b_i + b~_j` to
//! `log X_ij`, weighted by the saturating function `f(x)`. Both orientations
//! of every unordered pair contribute, keeping the word and context roles
//! symmetric. Updates are per-pair adaptive gradient descent with
//! per-parameter squared-gradient scaling.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cooccurrence::{CooccurrenceMatrix, TermIndex};

/// Initial learning rate for the adaptive updates.
pub const LEARNING_RATE: f64 = 0.05;
/// Squared-gradient accumulators start here so the first scaled step is
/// finite and bounded by the learning rate.
const ACCUMULATOR_EPSILON: f64 = 1e-8;

pub const DEFAULT_ALPHA: f64 = 0.75;
pub const DEFAULT_X_MAX: f64 = 10.0;
pub const DEFAULT_DIMENSION: usize = 200;
pub const DEFAULT_ITERATIONS: usize = 20;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("alpha must be in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("x_max must be > 0, got {0}")]
    InvalidXMax(f64),
    #[error("weighting function input must be > 0, got {0}")]
    NonPositiveWeight(f64),
    #[error("embedding dimension must be >= 1, got {0}")]
    InvalidDimension(usize),
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("model vocabulary does not match matrix vocabulary")]
    VocabularyMismatch,
    #[error("iterations must be >= 1")]
    InvalidIterations,
    #[error("non-finite loss at iteration {iteration} on pair ({term_i}, {term_j})")]
    NonFiniteLoss {
        iteration: usize,
        term_i: String,
        term_j: String,
    },
    #[error("cosine requires equal-length vectors ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("cosine is undefined for a zero vector")]
    ZeroVector,
    #[error("unknown term: {0}")]
    UnknownTerm(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed vector line {line}: {reason}")]
    MalformedVectorLine { line: usize, reason: String },
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
}

/// Loss weighting parameters: exponent `alpha` and saturation point `x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightingConfig {
    alpha: f64,
    x_max: f64,
}

impl Default for WeightingConfig {
    fn default() -> Self {
        WeightingConfig {
            alpha: DEFAULT_ALPHA,
            x_max: DEFAULT_X_MAX,
        }
    }
}

impl WeightingConfig {
    pub fn new(alpha: f64, x_max: f64) -> Result<Self, EmbeddingError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(EmbeddingError::InvalidAlpha(alpha));
        }
        if !(x_max > 0.0) {
            return Err(EmbeddingError::InvalidXMax(x_max));
        }
        Ok(WeightingConfig { alpha, x_max })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }
}

/// `(x / x_max)^alpha` below the saturation point, 1 above it.
pub fn f_weight(x: f64, config: &WeightingConfig) -> Result<f64, EmbeddingError> {
    if !(x > 0.0) {
        return Err(EmbeddingError::NonPositiveWeight(x));
    }
    Ok(weight_positive(x, config))
}

#[inline]
fn weight_positive(x: f64, config: &WeightingConfig) -> f64 {
    if x <= config.x_max {
        (x / config.x_max).powf(config.alpha)
    } else {
        1.0
    }
}

/// Word and context vectors, biases and adaptive-gradient state for every
/// vocabulary term.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    index: TermIndex,
    dim: usize,
    seed: u64,
    /// Word vectors, row-major `vocab x dim`.
    w: Vec<f64>,
    /// Context vectors, row-major `vocab x dim`.
    wc: Vec<f64>,
    b: Vec<f64>,
    bc: Vec<f64>,
    grad_w: Vec<f64>,
    grad_wc: Vec<f64>,
    grad_b: Vec<f64>,
    grad_bc: Vec<f64>,
}

/// Loss trajectory of a training run.
#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub initial_loss: f64,
    /// Total loss after each completed iteration.
    pub losses: Vec<f64>,
    pub iterations: usize,
    pub duration: Duration,
}

impl TrainingReport {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(self.initial_loss)
    }
}

impl EmbeddingModel {
    pub fn index(&self) -> &TermIndex {
        &self.index
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocab_len(&self) -> usize {
        self.index.len()
    }

    /// Total trainable parameter count: flattened as [w, w~, b, b~].
    pub fn n_params(&self) -> usize {
        2 * self.index.len() * self.dim + 2 * self.index.len()
    }

    pub fn param(&self, k: usize) -> f64 {
        let ve = self.index.len() * self.dim;
        if k < ve {
            self.w[k]
        } else if k < 2 * ve {
            self.wc[k - ve]
        } else if k < 2 * ve + self.index.len() {
            self.b[k - 2 * ve]
        } else {
            self.bc[k - 2 * ve - self.index.len()]
        }
    }

    pub fn set_param(&mut self, k: usize, value: f64) {
        let ve = self.index.len() * self.dim;
        if k < ve {
            self.w[k] = value;
        } else if k < 2 * ve {
            self.wc[k - ve] = value;
        } else if k < 2 * ve + self.index.len() {
            self.b[k - 2 * ve] = value;
        } else {
            self.bc[k - 2 * ve - self.index.len()] = value;
        }
    }

    fn word(&self, id: u32) -> &[f64] {
        let o = id as usize * self.dim;
        &self.w[o..o + self.dim]
    }

    fn context(&self, id: u32) -> &[f64] {
        let o = id as usize * self.dim;
        &self.wc[o..o + self.dim]
    }

    fn residual(&self, i: u32, j: u32, log_x: f64) -> f64 {
        let dot: f64 = self
            .word(i)
            .iter()
            .zip(self.context(j))
            .map(|(a, b)| a * b)
            .sum();
        dot + self.b[i as usize] + self.bc[j as usize] - log_x
    }
}

/// Initializes a model with vector entries drawn uniformly from
/// `[-0.5/e, +0.5/e]`, zero biases and epsilon accumulators. The same seed
/// always produces the same model.
pub fn init_model(
    index: &TermIndex,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingModel, EmbeddingError> {
    if dim < 1 {
        return Err(EmbeddingError::InvalidDimension(dim));
    }
    if index.is_empty() {
        return Err(EmbeddingError::EmptyVocabulary);
    }
    let v = index.len();
    let half = 0.5 / dim as f64;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-half..half)).collect()
    };
    let w = draw(v * dim);
    let wc = draw(v * dim);
    Ok(EmbeddingModel {
        index: index.clone(),
        dim,
        seed,
        w,
        wc,
        b: vec![0.0; v],
        bc: vec![0.0; v],
        grad_w: vec![ACCUMULATOR_EPSILON; v * dim],
        grad_wc: vec![ACCUMULATOR_EPSILON; v * dim],
        grad_b: vec![ACCUMULATOR_EPSILON; v],
        grad_bc: vec![ACCUMULATOR_EPSILON; v],
    })
}

fn check_vocabulary(
    model: &EmbeddingModel,
    matrix: &CooccurrenceMatrix,
) -> Result<(), EmbeddingError> {
    if model.index != *matrix.index() {
        return Err(EmbeddingError::VocabularyMismatch);
    }
    Ok(())
}

/// Total weighted least-squares loss over both orientations of every stored
/// pair.
pub fn loss(
    model: &EmbeddingModel,
    matrix: &CooccurrenceMatrix,
    config: &WeightingConfig,
) -> Result<f64, EmbeddingError> {
    check_vocabulary(model, matrix)?;
    let mut total = 0.0;
    for (i, j, x) in matrix.iter() {
        let f = weight_positive(x, config);
        let log_x = x.ln();
        let r_ij = model.residual(i, j, log_x);
        let r_ji = model.residual(j, i, log_x);
        total += f * (r_ij * r_ij + r_ji * r_ji);
    }
    Ok(total)
}

/// Full-batch gradient of the loss with respect to every parameter, in the
/// same flattened order as `param`/`set_param`. Used by the
/// finite-difference checks.
pub fn gradient(
    model: &EmbeddingModel,
    matrix: &CooccurrenceMatrix,
    config: &WeightingConfig,
) -> Result<Vec<f64>, EmbeddingError> {
    check_vocabulary(model, matrix)?;
    let v = model.index.len();
    let e = model.dim;
    let mut grad = vec![0.0; model.n_params()];
    let (gw, rest) = grad.split_at_mut(v * e);
    let (gwc, rest) = rest.split_at_mut(v * e);
    let (gb, gbc) = rest.split_at_mut(v);
    for (i, j, x) in matrix.iter() {
        let f = weight_positive(x, config);
        let log_x = x.ln();
        for (a, b) in [(i, j), (j, i)] {
            let r = model.residual(a, b, log_x);
            let scale = 2.0 * f * r;
            let (ao, bo) = (a as usize * e, b as usize * e);
            for k in 0..e {
                gw[ao + k] += scale * model.wc[bo + k];
                gwc[bo + k] += scale * model.w[ao + k];
            }
            gb[a as usize] += scale;
            gbc[b as usize] += scale;
        }
    }
    Ok(grad)
}

/// Runs `iterations` full passes over the stored pairs, visiting them in a
/// per-iteration shuffled order drawn from the model seed. Returns the loss
/// trajectory. Aborts if any residual goes non-finite.
pub fn train(
    model: &mut EmbeddingModel,
    matrix: &CooccurrenceMatrix,
    config: &WeightingConfig,
    iterations: usize,
) -> Result<TrainingReport, EmbeddingError> {
    if iterations < 1 {
        return Err(EmbeddingError::InvalidIterations);
    }
    check_vocabulary(model, matrix)?;
    let start = Instant::now();
    let initial_loss = loss(model, matrix, config)?;
    // Precompute per-pair constants; sorted base order keeps the shuffle
    // deterministic.
    let mut pairs: Vec<(u32, u32, f64, f64)> = matrix
        .sorted_entries()
        .into_iter()
        .map(|(i, j, x)| (i, j, weight_positive(x, config), x.ln()))
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(model.seed.wrapping_add(1));
    let e = model.dim;
    let mut losses = Vec::with_capacity(iterations);
    for iteration in 0..iterations {
        pairs.shuffle(&mut rng);
        for &(i, j, f, log_x) in &pairs {
            for (a, b) in [(i, j), (j, i)] {
                let r = model.residual(a, b, log_x);
                if !r.is_finite() {
                    return Err(EmbeddingError::NonFiniteLoss {
                        iteration: iteration + 1,
                        term_i: model.index.term(i).to_string(),
                        term_j: model.index.term(j).to_string(),
                    });
                }
                let scale = 2.0 * f * r;
                let (ao, bo) = (a as usize * e, b as usize * e);
                for k in 0..e {
                    let gw = scale * model.wc[bo + k];
                    let gc = scale * model.w[ao + k];
                    model.grad_w[ao + k] += gw * gw;
                    model.grad_wc[bo + k] += gc * gc;
                    model.w[ao + k] -= LEARNING_RATE * gw / model.grad_w[ao + k].sqrt();
                    model.wc[bo + k] -= LEARNING_RATE * gc / model.grad_wc[bo + k].sqrt();
                }
                model.grad_b[a as usize] += scale * scale;
                model.grad_bc[b as usize] += scale * scale;
                model.b[a as usize] -= LEARNING_RATE * scale / model.grad_b[a as usize].sqrt();
                model.bc[b as usize] -= LEARNING_RATE * scale / model.grad_bc[b as usize].sqrt();
            }
        }
        losses.push(loss(model, matrix, config)?);
    }
    Ok(TrainingReport {
        initial_loss,
        losses,
        iterations,
        duration: start.elapsed(),
    })
}

/// Cosine similarity of two nonzero vectors.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::DimensionMismatch(u.len(), v.len()));
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok(dot / (nu.sqrt() * nv.sqrt()))
}

/// The exported per-term vectors (`w + w~`), keyed by term.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl VectorStore {
    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.vectors.contains_key(term)
    }

    pub fn get(&self, term: &str) -> Option<&[f64]> {
        self.vectors.get(term).map(Vec::as_slice)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn cosine_terms(&self, a: &str, b: &str) -> Result<f64, EmbeddingError> {
        let va = self
            .get(a)
            .ok_or_else(|| EmbeddingError::UnknownTerm(a.to_string()))?;
        let vb = self
            .get(b)
            .ok_or_else(|| EmbeddingError::UnknownTerm(b.to_string()))?;
        cosine(va, vb)
    }

    /// Rows sorted lexicographically by term; components space-separated at
    /// full round-trip precision.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<(), EmbeddingError> {
        for (term, vector) in &self.vectors {
            write!(w, "{term}\t")?;
            for (k, c) in vector.iter().enumerate() {
                if k > 0 {
                    write!(w, " ")?;
                }
                write!(w, "{c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut vectors = BTreeMap::new();
        let mut dim = None;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (term, rest) =
                line.split_once('\t')
                    .ok_or_else(|| EmbeddingError::MalformedVectorLine {
                        line: idx + 1,
                        reason: "missing tab".to_string(),
                    })?;
            let vector: Vec<f64> = rest
                .split(' ')
                .map(|c| c.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| EmbeddingError::MalformedVectorLine {
                    line: idx + 1,
                    reason: format!("bad component: {e}"),
                })?;
            match dim {
                None => dim = Some(vector.len()),
                Some(d) if d != vector.len() => {
                    return Err(EmbeddingError::MalformedVectorLine {
                        line: idx + 1,
                        reason: format!("expected {d} components, got {}", vector.len()),
                    })
                }
                _ => {}
            }
            vectors.insert(term.to_string(), vector);
        }
        Ok(VectorStore {
            dim: dim.unwrap_or(0),
            vectors,
        })
    }
}

/// Exports the final per-term vector `w + w~`.
pub fn export_vectors(model: &EmbeddingModel) -> VectorStore {
    let mut vectors = BTreeMap::new();
    for (id, term) in model.index.terms().iter().enumerate() {
        let v: Vec<f64> = model
            .word(id as u32)
            .iter()
            .zip(model.context(id as u32))
            .map(|(a, b)| a + b)
            .collect();
        vectors.insert(term.clone(), v);
    }
    VectorStore {
        dim: model.dim,
        vectors,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    e: usize,
    alpha: f64,
    x_max: f64,
    seed: u64,
    iterations_done: usize,
}

fn write_rows<W: Write>(mut w: W, terms: &[String], values: impl Fn(usize) -> Vec<f64>) -> std::io::Result<()> {
    for (id, term) in terms.iter().enumerate() {
        write!(w, "{term}\t")?;
        for (k, c) in values(id).iter().enumerate() {
            if k > 0 {
                write!(w, " ")?;
            }
            write!(w, "{c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes a model checkpoint directory: a JSON header plus one TSV per
/// parameter block (`w`, `w_context`, `b`, `b_context`). Adaptive-gradient
/// accumulators are not persisted; loading resets them.
pub fn save_checkpoint(
    model: &EmbeddingModel,
    config: &WeightingConfig,
    iterations_done: usize,
    dir: &Path,
) -> Result<(), EmbeddingError> {
    fs::create_dir_all(dir)?;
    let header = CheckpointHeader {
        e: model.dim,
        alpha: config.alpha,
        x_max: config.x_max,
        seed: model.seed,
        iterations_done,
    };
    let mut header_json = serde_json::to_string_pretty(&header).expect("header serializes");
    header_json.push('\n');
    fs::write(dir.join("header.json"), header_json)?;
    let terms = model.index.terms();
    let e = model.dim;
    write_rows(
        BufWriter::new(fs::File::create(dir.join("w.tsv"))?),
        terms,
        |id| model.w[id * e..(id + 1) * e].to_vec(),
    )?;
    write_rows(
        BufWriter::new(fs::File::create(dir.join("w_context.tsv"))?),
        terms,
        |id| model.wc[id * e..(id + 1) * e].to_vec(),
    )?;
    write_rows(
        BufWriter::new(fs::File::create(dir.join("b.tsv"))?),
        terms,
        |id| vec![model.b[id]],
    )?;
    write_rows(
        BufWriter::new(fs::File::create(dir.join("b_context.tsv"))?),
        terms,
        |id| vec![model.bc[id]],
    )?;
    Ok(())
}

fn read_block(path: &Path, index: &TermIndex, expect_dim: usize) -> Result<Vec<f64>, EmbeddingError> {
    let store = VectorStore::read_tsv(BufReader::new(fs::File::open(path)?))?;
    if store.len() != index.len() {
        return Err(EmbeddingError::MalformedCheckpoint(format!(
            "{}: expected {} rows, got {}",
            path.display(),
            index.len(),
            store.len()
        )));
    }
    let mut out = Vec::with_capacity(index.len() * expect_dim);
    for term in index.terms() {
        let v = store.get(term).ok_or_else(|| {
            EmbeddingError::MalformedCheckpoint(format!("{}: missing term {term}", path.display()))
        })?;
        if v.len() != expect_dim {
            return Err(EmbeddingError::MalformedCheckpoint(format!(
                "{}: expected {expect_dim} components for {term}, got {}",
                path.display(),
                v.len()
            )));
        }
        out.extend_from_slice(v);
    }
    Ok(out)
}

/// Loads a checkpoint directory written by [`save_checkpoint`].
pub fn load_checkpoint(
    dir: &Path,
) -> Result<(EmbeddingModel, WeightingConfig, usize), EmbeddingError> {
    let header: CheckpointHeader =
        serde_json::from_str(&fs::read_to_string(dir.join("header.json"))?)
            .map_err(|e| EmbeddingError::MalformedCheckpoint(format!("header.json: {e}")))?;
    let config = WeightingConfig::new(header.alpha, header.x_max)?;
    let w_store = VectorStore::read_tsv(BufReader::new(fs::File::open(dir.join("w.tsv"))?))?;
    let index = TermIndex::from_terms(w_store.terms().map(str::to_string));
    let v = index.len();
    if v == 0 {
        return Err(EmbeddingError::EmptyVocabulary);
    }
    let e = header.e;
    let model = EmbeddingModel {
        w: read_block(&dir.join("w.tsv"), &index, e)?,
        wc: read_block(&dir.join("w_context.tsv"), &index, e)?,
        b: read_block(&dir.join("b.tsv"), &index, 1)?,
        bc: read_block(&dir.join("b_context.tsv"), &index, 1)?,
        grad_w: vec![ACCUMULATOR_EPSILON; v * e],
        grad_wc: vec![ACCUMULATOR_EPSILON; v * e],
        grad_b: vec![ACCUMULATOR_EPSILON; v],
        grad_bc: vec![ACCUMULATOR_EPSILON; v],
        index,
        dim: e,
        seed: header.seed,
    };
    Ok((model, config, header.iterations_done))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, PaperRecord};
    use crate::cooccurrence::build_matrix;

    fn record(id: &str, kws: &[&str], year: i32) -> PaperRecord {
        PaperRecord {
            id: id.to_string(),
            keywords: kws.iter().map(|s| s.to_string()).collect(),
            year,
        }
    }

    fn small_matrix() -> CooccurrenceMatrix {
        let records = vec![
            record("p1", &["a", "b"], 2009),
            record("p2", &["b", "c"], 2004),
            record("p3", &["a", "c"], 2001),
        ];
        let vocab = build_vocabulary(&records, 1).unwrap();
        build_matrix(&records, &vocab).unwrap()
    }

    #[test]
    fn f_weight_branches() {
        let cfg = WeightingConfig::default();
        assert_eq!(f_weight(10.0, &cfg).unwrap(), 1.0);
        assert_eq!(f_weight(20.0, &cfg).unwrap(), 1.0);
        let f5 = f_weight(5.0, &cfg).unwrap();
        assert!((f5 - 0.5f64.powf(0.75)).abs() < 1e-12);
        assert!((f5 - 0.59460).abs() < 1e-5);
        assert!(f_weight(0.0, &cfg).is_err());
    }

    #[test]
    fn f_weight_monotone_and_continuous_at_x_max() {
        let cfg = WeightingConfig::default();
        let mut prev = 0.0;
        for k in 1..400 {
            let x = k as f64 * 0.05;
            let f = f_weight(x, &cfg).unwrap();
            assert!(f >= prev && f <= 1.0);
            prev = f;
        }
        let below = f_weight(10.0 - 1e-9, &cfg).unwrap();
        assert!((below - 1.0).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        assert!(WeightingConfig::new(0.0, 10.0).is_err());
        assert!(WeightingConfig::new(1.1, 10.0).is_err());
        assert!(WeightingConfig::new(0.75, 0.0).is_err());
        assert!(WeightingConfig::new(1.0, 5.0).is_ok());
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let m = small_matrix();
        let a = init_model(m.index(), 2, 7).unwrap();
        let b = init_model(m.index(), 2, 7).unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(a.wc, b.wc);
        assert_eq!(a.n_params(), 3 * (2 + 2) + 6);
        let half = 0.5 / 2.0;
        for k in 0..a.n_params() {
            assert!(a.param(k).abs() <= half);
        }
        let c = init_model(m.index(), 2, 8).unwrap();
        assert_ne!(a.w, c.w);
    }

    #[test]
    fn init_rejects_bad_dimension() {
        let m = small_matrix();
        assert!(init_model(m.index(), 0, 1).is_err());
    }

    #[test]
    fn loss_zero_when_residuals_zero() {
        let records = vec![record("p", &["a", "b"], 2009)];
        let vocab = build_vocabulary(&records, 1).unwrap();
        let matrix = build_matrix(&records, &vocab).unwrap();
        let mut model = init_model(matrix.index(), 2, 3).unwrap();
        // Zero the vectors, split log X across the four biases.
        for k in 0..(2 * 2 * 2) {
            model.set_param(k, 0.0);
        }
        let half_log = 10.0f64.ln() / 2.0;
        for k in (2 * 2 * 2)..model.n_params() {
            model.set_param(k, half_log);
        }
        let j = loss(&model, &matrix, &WeightingConfig::default()).unwrap();
        assert!(j.abs() < 1e-20);
    }

    #[test]
    fn loss_single_pair_unit_residual() {
        // X = 10 so f(X) = 1; push residual to exactly 1 in both orientations.
        let records = vec![record("p", &["a", "b"], 2009)];
        let vocab = build_vocabulary(&records, 1).unwrap();
        let matrix = build_matrix(&records, &vocab).unwrap();
        let mut model = init_model(matrix.index(), 2, 3).unwrap();
        for k in 0..(2 * 2 * 2) {
            model.set_param(k, 0.0);
        }
        let half = (10.0f64.ln() + 1.0) / 2.0;
        for k in (2 * 2 * 2)..model.n_params() {
            model.set_param(k, half);
        }
        let j = loss(&model, &matrix, &WeightingConfig::default()).unwrap();
        assert!((j - 2.0).abs() < 1e-12);
    }

    #[test]
    fn loss_matches_naive_summation() {
        let matrix = small_matrix();
        let model = init_model(matrix.index(), 4, 11).unwrap();
        let cfg = WeightingConfig::default();
        let fast = loss(&model, &matrix, &cfg).unwrap();
        // Independent accumulation over both ordered orientations.
        let mut naive = 0.0;
        for (i, j, x) in matrix.iter() {
            for (a, b) in [(i, j), (j, i)] {
                let mut dot = 0.0;
                for k in 0..4 {
                    dot += model.w[a as usize * 4 + k] * model.wc[b as usize * 4 + k];
                }
                let r = dot + model.b[a as usize] + model.bc[b as usize] - x.ln();
                naive += f_weight(x, &cfg).unwrap() * r * r;
            }
        }
        assert!((fast - naive).abs() <= 1e-10 * naive.abs().max(1.0));
    }

    #[test]
    fn vocabulary_mismatch_rejected() {
        let matrix = small_matrix();
        let other = TermIndex::from_terms(["x".to_string(), "y".to_string()]);
        let model = init_model(&other, 2, 1).unwrap();
        assert!(matches!(
            loss(&model, &matrix, &WeightingConfig::default()),
            Err(EmbeddingError::VocabularyMismatch)
        ));
    }

    #[test]
    fn train_reduces_loss_and_rejects_zero_iterations() {
        let matrix = small_matrix();
        let mut model = init_model(matrix.index(), 8, 42).unwrap();
        let cfg = WeightingConfig::default();
        assert!(matches!(
            train(&mut model, &matrix, &cfg, 0),
            Err(EmbeddingError::InvalidIterations)
        ));
        let report = train(&mut model, &matrix, &cfg, 50).unwrap();
        assert_eq!(report.losses.len(), 50);
        assert!(report.final_loss() < report.initial_loss);
        assert!(report.losses.iter().all(|l| *l >= 0.0));
    }

    #[test]
    fn training_is_deterministic() {
        let matrix = small_matrix();
        let cfg = WeightingConfig::default();
        let mut a = init_model(matrix.index(), 4, 9).unwrap();
        let mut b = init_model(matrix.index(), 4, 9).unwrap();
        train(&mut a, &matrix, &cfg, 10).unwrap();
        train(&mut b, &matrix, &cfg, 10).unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(a.b, b.b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        export_vectors(&a).write_tsv(&mut buf_a).unwrap();
        export_vectors(&b).write_tsv(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn cosine_basics() {
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
        assert!((c - 0.70711).abs() < 1e-5);
        assert!(cosine(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(cosine(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn export_sums_word_and_context() {
        let records = vec![record("p", &["a", "b"], 2009)];
        let vocab = build_vocabulary(&records, 1).unwrap();
        let matrix = build_matrix(&records, &vocab).unwrap();
        let mut model = init_model(matrix.index(), 2, 3).unwrap();
        // term "a" has id 0: w = (1, 0), wc = (0, 1)
        model.set_param(0, 1.0);
        model.set_param(1, 0.0);
        model.set_param(4, 0.0);
        model.set_param(5, 1.0);
        let store = export_vectors(&model);
        assert_eq!(store.get("a").unwrap(), &[1.0, 1.0]);
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn vectors_tsv_round_trip_is_bit_identical() {
        let matrix = small_matrix();
        let mut model = init_model(matrix.index(), 5, 77).unwrap();
        train(&mut model, &matrix, &WeightingConfig::default(), 5).unwrap();
        let store = export_vectors(&model);
        let mut buf = Vec::new();
        store.write_tsv(&mut buf).unwrap();
        let reloaded = VectorStore::read_tsv(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(reloaded, store);
        let mut buf2 = Vec::new();
        reloaded.write_tsv(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let matrix = small_matrix();
        let mut model = init_model(matrix.index(), 3, 5).unwrap();
        let cfg = WeightingConfig::default();
        train(&mut model, &matrix, &cfg, 4).unwrap();
        save_checkpoint(&model, &cfg, 4, dir.path()).unwrap();
        let (loaded, loaded_cfg, done) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(done, 4);
        assert_eq!(loaded_cfg, cfg);
        assert_eq!(loaded.w, model.w);
        assert_eq!(loaded.wc, model.wc);
        assert_eq!(loaded.b, model.b);
        assert_eq!(loaded.bc, model.bc);
        assert_eq!(loaded.seed(), model.seed());
        assert_eq!(loaded.index(), model.index());
    }
}
