//! Graph autoencoder: a small feed-forward encoder trained so that dot
//! products of node embeddings reconstruct the graph's normalized adjacency.
//!
//! The encoder maps a feature vector through tanh hidden layers to a linear
//! output embedding. The decoder is the plain dot product of two embeddings,
//! and the training loss sums squared reconstruction residuals over unordered
//! occupied node pairs:
//!
//! ```text
//! loss = Σ_{u<v} (g_u · g_v − Â[u][v])²,   g = encode(feature)
//! ```
//!
//! where `Â` is the adjacency scaled by its largest off-diagonal entry.
//! Training runs plain full-batch gradient descent over freshly sampled pair
//! subsets; gradients come from hand-written backpropagation (verified
//! against central finite differences in the tests).

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::mat::{dot, Mat};
use crate::rng::Rng;
use crate::state_graph::StateGraph;

/// Errors reported by encoder construction, evaluation, and training.
#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("pair list is empty")]
    EmptySample,
    #[error("invalid node pair ({0}, {1})")]
    InvalidPair(usize, usize),
    #[error("graph has {0} occupied nodes; training needs at least 2")]
    InsufficientData(usize),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),
}

/// Gradient-descent settings for one training phase.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Step size for every parameter.
    pub learning_rate: f64,
    /// Number of gradient steps per phase.
    pub steps_per_phase: usize,
    /// Fraction of all unordered occupied pairs sampled afresh for each
    /// step, in `(0, 1]`.
    pub pair_fraction: f64,
    /// Seed for the pair-sampling stream.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 1e-3, steps_per_phase: 1, pair_fraction: 1.0, seed: 0 }
    }
}

/// Feed-forward encoder parameters: tanh hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    dims: Vec<usize>,
    weights: Vec<Mat>,
    biases: Vec<Vec<f64>>,
}

impl EncoderParams {
    /// Random initialization: weights uniform in `±1/sqrt(fan_in)`, zero
    /// biases. `dims` lists layer widths from input to output and needs at
    /// least two entries.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self, EncoderError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(EncoderError::InvalidConfig(format!(
                "layer dims must have >= 2 positive entries, got {dims:?}"
            )));
        }
        let mut rng = Rng::new(seed).split(0x656e63); // encoder init stream
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let scale = 1.0 / (dims[l] as f64).sqrt();
            weights.push(Mat::from_fn(dims[l + 1], dims[l], |_, _| rng.next_signed() * scale));
            biases.push(vec![0.0; dims[l + 1]]);
        }
        Ok(EncoderParams { dims: dims.to_vec(), weights, biases })
    }

    /// Default architecture for `d`-dimensional features: two tanh hidden
    /// layers of width 64 and a linear output of the same dimension as the
    /// input.
    pub fn default_for_dim(d: usize, seed: u64) -> Result<Self, EncoderError> {
        Self::new(&[d, 64, 64, d], seed)
    }

    /// Builds parameters from explicit weight matrices and bias vectors.
    pub fn from_parts(
        dims: Vec<usize>,
        weights: Vec<Mat>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self, EncoderError> {
        if dims.len() < 2 || weights.len() != dims.len() - 1 || biases.len() != dims.len() - 1 {
            return Err(EncoderError::InvalidConfig(
                "weights/biases do not match layer dims".into(),
            ));
        }
        for l in 0..weights.len() {
            if weights[l].rows() != dims[l + 1]
                || weights[l].cols() != dims[l]
                || biases[l].len() != dims[l + 1]
            {
                return Err(EncoderError::InvalidConfig(format!(
                    "layer {l} shapes do not match dims {dims:?}"
                )));
            }
        }
        Ok(EncoderParams { dims, weights, biases })
    }

    /// Layer widths from input to output.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Input feature dimension.
    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    /// Embedding dimension.
    pub fn embed_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Encodes a feature vector into an embedding.
    pub fn encode(&self, feature: &[f64]) -> Result<Vec<f64>, EncoderError> {
        if feature.len() != self.input_dim() {
            return Err(EncoderError::DimensionMismatch {
                expected: self.input_dim(),
                got: feature.len(),
            });
        }
        Ok(self.forward(feature).pop().unwrap())
    }

    /// Dot-product decoder over two embeddings.
    pub fn decode(&self, a: &[f64], b: &[f64]) -> Result<f64, EncoderError> {
        let m = self.embed_dim();
        if a.len() != m {
            return Err(EncoderError::DimensionMismatch { expected: m, got: a.len() });
        }
        if b.len() != m {
            return Err(EncoderError::DimensionMismatch { expected: m, got: b.len() });
        }
        Ok(dot(a, b))
    }

    /// All layer activations, `a[0] = input` through `a[L] = embedding`.
    fn forward(&self, feature: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.weights.len();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(feature.to_vec());
        for l in 0..layers {
            let mut z = self.weights[l].mul_vec(acts.last().unwrap());
            for (zi, bi) in z.iter_mut().zip(&self.biases[l]) {
                *zi += bi;
            }
            if l + 1 < layers {
                for zi in z.iter_mut() {
                    *zi = zi.tanh();
                }
            }
            acts.push(z);
        }
        acts
    }
}

/// Validates a pair list against the graph: nonempty, occupied, no self
/// pairs.
fn check_pairs(graph: &StateGraph, pairs: &[(usize, usize)]) -> Result<(), EncoderError> {
    if pairs.is_empty() {
        return Err(EncoderError::EmptySample);
    }
    for &(u, v) in pairs {
        if u == v || !graph.is_occupied(u) || !graph.is_occupied(v) {
            return Err(EncoderError::InvalidPair(u, v));
        }
    }
    Ok(())
}

/// Sum of squared residuals between decoded embedding pairs and the
/// normalized adjacency, over the given unordered pairs.
pub fn reconstruction_loss(
    params: &EncoderParams,
    graph: &StateGraph,
    pairs: &[(usize, usize)],
) -> Result<f64, EncoderError> {
    check_pairs(graph, pairs)?;
    if graph.dim().is_some_and(|d| d != params.input_dim()) {
        return Err(EncoderError::DimensionMismatch {
            expected: params.input_dim(),
            got: graph.dim().unwrap(),
        });
    }
    let targets = graph.normalized_adjacency();
    let mut cache: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut loss = 0.0;
    for &(u, v) in pairs {
        for id in [u, v] {
            if let Entry::Vacant(slot) = cache.entry(id) {
                slot.insert(params.encode(graph.feature(id).unwrap())?);
            }
        }
        let r = dot(&cache[&u], &cache[&v]) - targets[(u, v)];
        loss += r * r;
    }
    Ok(loss)
}

/// Loss, weight gradients, and bias gradients, in layer order.
type LossAndGradients = (f64, Vec<Mat>, Vec<Vec<f64>>);

/// Loss and its gradient with respect to every weight and bias, over the
/// given pairs. Shared by training and the finite-difference checks.
fn loss_and_gradient(
    params: &EncoderParams,
    graph: &StateGraph,
    pairs: &[(usize, usize)],
) -> Result<LossAndGradients, EncoderError> {
    check_pairs(graph, pairs)?;
    let targets = graph.normalized_adjacency();
    let layers = params.weights.len();

    // Forward once per distinct node, then accumulate d(loss)/d(embedding).
    let mut ids: Vec<usize> = pairs.iter().flat_map(|&(u, v)| [u, v]).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut acts = HashMap::new();
    let mut d_embed: HashMap<usize, Vec<f64>> = HashMap::new();
    for &id in &ids {
        let feature = graph.feature(id).ok_or(EncoderError::InvalidPair(id, id))?;
        if feature.len() != params.input_dim() {
            return Err(EncoderError::DimensionMismatch {
                expected: params.input_dim(),
                got: feature.len(),
            });
        }
        acts.insert(id, params.forward(feature));
        d_embed.insert(id, vec![0.0; params.embed_dim()]);
    }

    let mut loss = 0.0;
    for &(u, v) in pairs {
        let gu = acts[&u].last().unwrap().clone();
        let gv = acts[&v].last().unwrap().clone();
        let r = dot(&gu, &gv) - targets[(u, v)];
        loss += r * r;
        let du = d_embed.get_mut(&u).unwrap();
        for k in 0..gu.len() {
            du[k] += 2.0 * r * gv[k];
        }
        let dv = d_embed.get_mut(&v).unwrap();
        for k in 0..gv.len() {
            dv[k] += 2.0 * r * gu[k];
        }
    }

    let mut d_weights: Vec<Mat> =
        params.weights.iter().map(|w| Mat::zeros(w.rows(), w.cols())).collect();
    let mut d_biases: Vec<Vec<f64>> = params.biases.iter().map(|b| vec![0.0; b.len()]).collect();
    for &id in &ids {
        let node_acts = &acts[&id];
        let mut delta = d_embed[&id].clone();
        for l in (0..layers).rev() {
            // The output layer is linear; hidden activations are tanh, whose
            // derivative is 1 - a² in terms of the stored activation.
            if l + 1 < layers {
                for (d, a) in delta.iter_mut().zip(&node_acts[l + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let input = &node_acts[l];
            for i in 0..delta.len() {
                d_biases[l][i] += delta[i];
                for j in 0..input.len() {
                    d_weights[l][(i, j)] += delta[i] * input[j];
                }
            }
            if l > 0 {
                delta = params.weights[l].mul_vec_transposed(&delta);
            }
        }
    }
    Ok((loss, d_weights, d_biases))
}

/// All unordered occupied pairs `(u, v)` with `u < v`, ascending.
pub fn occupied_pairs(graph: &StateGraph) -> Vec<(usize, usize)> {
    let ids = graph.occupied_ids();
    let mut pairs = Vec::with_capacity(ids.len() * (ids.len().saturating_sub(1)) / 2);
    for (k, &u) in ids.iter().enumerate() {
        for &v in &ids[k + 1..] {
            pairs.push((u, v));
        }
    }
    pairs
}

/// Runs one training phase and returns the updated parameters.
///
/// Each of `steps_per_phase` gradient steps draws a fresh subset of
/// `ceil(pair_fraction · P)` pairs from the `P` unordered occupied pairs and
/// applies one full-batch descent step on the sampled reconstruction loss.
/// Passing the returned parameters back in continues training exactly where
/// this phase stopped.
pub fn train_phase(
    params: &EncoderParams,
    graph: &StateGraph,
    config: &TrainConfig,
) -> Result<EncoderParams, EncoderError> {
    if !(config.learning_rate > 0.0) || !config.learning_rate.is_finite() {
        return Err(EncoderError::InvalidConfig(format!(
            "learning_rate must be positive, got {}",
            config.learning_rate
        )));
    }
    if config.steps_per_phase == 0 {
        return Err(EncoderError::InvalidConfig("steps_per_phase must be at least 1".into()));
    }
    if !(config.pair_fraction > 0.0 && config.pair_fraction <= 1.0) {
        return Err(EncoderError::InvalidConfig(format!(
            "pair_fraction must lie in (0, 1], got {}",
            config.pair_fraction
        )));
    }
    if graph.node_count() < 2 {
        return Err(EncoderError::InsufficientData(graph.node_count()));
    }
    if let Some(d) = graph.dim() {
        if d != params.input_dim() {
            return Err(EncoderError::DimensionMismatch {
                expected: params.input_dim(),
                got: d,
            });
        }
    }

    let all_pairs = occupied_pairs(graph);
    let sample_size = ((config.pair_fraction * all_pairs.len() as f64).ceil() as usize)
        .clamp(1, all_pairs.len());
    let mut rng = Rng::new(config.seed).split(0x706169); // pair sampling stream
    let mut current = params.clone();
    for _ in 0..config.steps_per_phase {
        let sampled: Vec<(usize, usize)> = if sample_size == all_pairs.len() {
            all_pairs.clone()
        } else {
            rng.choose_indices(all_pairs.len(), sample_size)
                .into_iter()
                .map(|k| all_pairs[k])
                .collect()
        };
        let (_, d_weights, d_biases) = loss_and_gradient(&current, graph, &sampled)?;
        for l in 0..current.weights.len() {
            for i in 0..current.weights[l].rows() {
                current.biases[l][i] -= config.learning_rate * d_biases[l][i];
                for j in 0..current.weights[l].cols() {
                    current.weights[l][(i, j)] -= config.learning_rate * d_weights[l][(i, j)];
                }
            }
        }
    }
    Ok(current)
}

/// Numerical self-check of the backpropagated gradients.
///
/// Compares every weight and bias gradient against a central finite
/// difference of [`reconstruction_loss`] with half-width `step` and
/// returns the largest relative disagreement, where each entry's relative
/// error is `|analytic − fd| / max(|analytic|, |fd|, 1e-8)`.
pub fn gradient_check(
    params: &EncoderParams,
    graph: &StateGraph,
    pairs: &[(usize, usize)],
    step: f64,
) -> Result<f64, EncoderError> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(EncoderError::InvalidConfig(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let (_, d_weights, d_biases) = loss_and_gradient(params, graph, pairs)?;
    let mut worst = 0.0f64;
    for l in 0..params.weights.len() {
        for i in 0..params.weights[l].rows() {
            for j in 0..=params.weights[l].cols() {
                // Column index == cols means "the bias entry".
                let mut plus = params.clone();
                let mut minus = params.clone();
                let analytic = if j < params.weights[l].cols() {
                    plus.weights[l][(i, j)] += step;
                    minus.weights[l][(i, j)] -= step;
                    d_weights[l][(i, j)]
                } else {
                    plus.biases[l][i] += step;
                    minus.biases[l][i] -= step;
                    d_biases[l][i]
                };
                let fd = (reconstruction_loss(&plus, graph, pairs)?
                    - reconstruction_loss(&minus, graph, pairs)?)
                    / (2.0 * step);
                let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
    }
    Ok(worst)
}

// ─────────────────────────────────────────────────────────────────────────
// Checkpoints
// ─────────────────────────────────────────────────────────────────────────

/// Serializes parameters as versioned text: a layer-dims header followed by
/// row-major weight tensors and bias vectors. Floats use shortest
/// round-trip decimal form, so reloading is bit-exact.
pub fn to_checkpoint(params: &EncoderParams) -> String {
    let mut out = String::new();
    out.push_str("denserew-encoder v1\n");
    let dims: Vec<String> = params.dims.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(out, "dims {}", dims.join(" "));
    for l in 0..params.weights.len() {
        let w = &params.weights[l];
        let _ = writeln!(out, "W{l} {} {}", w.rows(), w.cols());
        for i in 0..w.rows() {
            let _ = writeln!(out, "{}", join_floats(w.row(i)));
        }
        let _ = writeln!(out, "b{l}");
        let _ = writeln!(out, "{}", join_floats(&params.biases[l]));
    }
    out.push_str("end\n");
    out
}

/// Restores parameters from [`to_checkpoint`] output.
pub fn from_checkpoint(text: &str) -> Result<EncoderParams, EncoderError> {
    let bad = |msg: String| EncoderError::CheckpointFormat(msg);
    let mut lines = text.lines();
    match lines.next() {
        Some("denserew-encoder v1") => {}
        other => return Err(bad(format!("unsupported header {other:?}"))),
    }
    let dims_line = lines.next().ok_or_else(|| bad("missing dims".into()))?;
    let dims: Vec<usize> = dims_line
        .strip_prefix("dims ")
        .ok_or_else(|| bad(format!("expected dims line, got {dims_line:?}")))?
        .split_whitespace()
        .map(|p| p.parse().map_err(|_| bad(format!("bad dim {p:?}"))))
        .collect::<Result<_, _>>()?;
    if dims.len() < 2 {
        return Err(bad(format!("need at least 2 layer dims, got {dims:?}")));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..dims.len() - 1 {
        let head = lines.next().ok_or_else(|| bad(format!("missing W{l} header")))?;
        let rest = head
            .strip_prefix(&format!("W{l} "))
            .ok_or_else(|| bad(format!("expected W{l} header, got {head:?}")))?;
        let mut hw = rest.split_whitespace();
        let rows: usize =
            hw.next().and_then(|p| p.parse().ok()).ok_or_else(|| bad("bad W rows".into()))?;
        let cols: usize =
            hw.next().and_then(|p| p.parse().ok()).ok_or_else(|| bad("bad W cols".into()))?;
        if rows != dims[l + 1] || cols != dims[l] {
            return Err(bad(format!("W{l} is {rows}x{cols}, dims say {}x{}", dims[l + 1], dims[l])));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let row = lines.next().ok_or_else(|| bad(format!("missing W{l} row")))?;
            let vals = parse_floats(row)?;
            if vals.len() != cols {
                return Err(bad(format!("W{l} row has {} entries, expected {cols}", vals.len())));
            }
            data.extend(vals);
        }
        weights.push(Mat::from_vec(rows, cols, data));
        match lines.next() {
            Some(h) if h == format!("b{l}") => {}
            other => return Err(bad(format!("expected b{l} header, got {other:?}"))),
        }
        let brow = lines.next().ok_or_else(|| bad(format!("missing b{l} values")))?;
        let bvals = parse_floats(brow)?;
        if bvals.len() != dims[l + 1] {
            return Err(bad(format!("b{l} has {} entries, expected {}", bvals.len(), dims[l + 1])));
        }
        biases.push(bvals);
    }
    match lines.next() {
        Some("end") => EncoderParams::from_parts(dims, weights, biases),
        other => Err(bad(format!("expected end marker, got {other:?}"))),
    }
}

fn join_floats(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_floats(s: &str) -> Result<Vec<f64>, EncoderError> {
    s.split_whitespace()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| EncoderError::CheckpointFormat(format!("bad float {p:?}")))
        })
        .collect()
}

// ─────────────────────────────────────────────────────────────────────────
// Tests
// ─────────────────────────────────────────────────────────────────────────
