//! Spectral comparison of state graphs and transfer of value labels.
//!
//! The Laplacian of a state graph's occupied nodes is decomposed into a
//! [`SpectralSummary`] with a deterministic ordering: eigenvalues descending,
//! each eigenvector column scaled so its largest-magnitude entry is positive
//! (ties broken toward the lowest index). Two graphs whose spectra agree
//! within a tolerance can have their nodes paired by greedy nearest-row
//! matching of the eigenvector matrices; the pairing then lets value labels
//! stored on one graph act as intrinsic rewards while learning in the other.
//!
//! Repeated eigenvalues make eigenvector bases ambiguous, so such spectra
//! are detected and reported rather than matched.

mod eigen;

use std::fmt::Write as _;

use thiserror::Error;

use crate::mat::Mat;
use crate::state_graph::{GraphError, StateGraph};

/// Errors reported by spectral analysis and transfer.
#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("graph has no occupied nodes")]
    InsufficientGraph,
    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
    #[error("eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// How far apart two adjacent entries may sit before symmetry validation
/// rejects the matrix.
const SYMMETRY_TOL: f64 = 1e-10;

// ─────────────────────────────────────────────────────────────────────────
// Laplacian and summary
// ─────────────────────────────────────────────────────────────────────────

/// Graph Laplacian `L = D - A` over the occupied nodes, using raw edge
/// weights. Row/column `k` corresponds to the `k`-th occupied slot in
/// ascending id order (see [`StateGraph::occupied_ids`]).
pub fn laplacian(graph: &StateGraph) -> Result<Mat, SpectralError> {
    let ids = graph.occupied_ids();
    if ids.is_empty() {
        return Err(SpectralError::InsufficientGraph);
    }
    let n = ids.len();
    let mut l = Mat::zeros(n, n);
    for (a, &u) in ids.iter().enumerate() {
        let mut degree = 0.0;
        for (b, &v) in ids.iter().enumerate() {
            if a != b {
                let w = graph.edge_weight(u, v);
                degree += w;
                l[(a, b)] = -w;
            }
        }
        l[(a, a)] = degree;
    }
    Ok(l)
}

/// Deterministically ordered eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    eigenvalues: Vec<f64>,
    eigenvectors: Mat,
    distinct: bool,
}

impl SpectralSummary {
    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvector matrix; column `i` belongs to `eigenvalues()[i]`.
    pub fn eigenvectors(&self) -> &Mat {
        &self.eigenvectors
    }

    /// True when all consecutive eigenvalue gaps exceed the gap tolerance.
    pub fn distinct_flag(&self) -> bool {
        self.distinct
    }

    /// Number of nodes the summary covers.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Full symmetric eigendecomposition with a canonical ordering.
///
/// `gap_tol` is relative to the spectral radius: consecutive eigenvalues
/// closer than `gap_tol · max|λ|` mark the spectrum as repeated
/// (`distinct_flag = false`). The input must be symmetric within `1e-10`.
pub fn spectral_summary(matrix: &Mat, gap_tol: f64) -> Result<SpectralSummary, SpectralError> {
    if matrix.rows() != matrix.cols() {
        return Err(SpectralError::SizeMismatch(matrix.rows(), matrix.cols()));
    }
    if !(gap_tol > 0.0) || !gap_tol.is_finite() {
        return Err(SpectralError::InvalidTolerance(format!(
            "gap_tol must be positive and finite, got {gap_tol}"
        )));
    }
    let n = matrix.rows();
    for i in 0..n {
        for j in i + 1..n {
            let diff = (matrix[(i, j)] - matrix[(j, i)]).abs();
            if diff > SYMMETRY_TOL {
                return Err(SpectralError::NotSymmetric { i, j, diff });
            }
        }
    }

    let (raw_vals, raw_vecs) = eigen::symmetric_eigen(matrix)?;

    // Descending eigenvalue order, columns permuted along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_vals[b].total_cmp(&raw_vals[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| raw_vals[k]).collect();
    let mut eigenvectors = Mat::from_fn(n, n, |i, j| raw_vecs[(i, order[j])]);

    orient_columns(&mut eigenvectors);

    let radius = eigenvalues
        .iter()
        .fold(0.0f64, |acc, &l| acc.max(l.abs()));
    let threshold = gap_tol * radius;
    let distinct = eigenvalues.windows(2).all(|w| w[0] - w[1] > threshold);

    Ok(SpectralSummary { eigenvalues, eigenvectors, distinct })
}

/// Sign convention: scale each column so its largest-magnitude entry is
/// positive; the first index attaining the maximum decides on ties.
fn orient_columns(vectors: &mut Mat) {
    for j in 0..vectors.cols() {
        let mut best = 0;
        for i in 1..vectors.rows() {
            if vectors[(i, j)].abs() > vectors[(best, j)].abs() {
                best = i;
            }
        }
        if vectors[(best, j)] < 0.0 {
            for i in 0..vectors.rows() {
                vectors[(i, j)] = -vectors[(i, j)];
            }
        }
    }
}

// ─────────────────────────────────────────────────────────────────────────
// Spectrum comparison and node matching
// ─────────────────────────────────────────────────────────────────────────

/// True when the squared eigenvalue distance `Σ (λ1_i - λ2_i)²` stays within
/// `eps_lambda`.
pub fn spectra_match(
    s1: &SpectralSummary,
    s2: &SpectralSummary,
    eps_lambda: f64,
) -> Result<bool, SpectralError> {
    if s1.len() != s2.len() {
        return Err(SpectralError::SizeMismatch(s1.len(), s2.len()));
    }
    if !(eps_lambda >= 0.0) {
        return Err(SpectralError::InvalidTolerance(format!(
            "eps_lambda must be nonnegative, got {eps_lambda}"
        )));
    }
    Ok(spectra_distance(s1, s2) <= eps_lambda)
}

/// Squared eigenvalue distance between two equal-size summaries.
pub fn spectra_distance(s1: &SpectralSummary, s2: &SpectralSummary) -> f64 {
    s1.eigenvalues
        .iter()
        .zip(&s2.eigenvalues)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Outcome of node matching between two spectral summaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchResult {
    /// `pairing[row2] = row1`: each graph-2 node's counterpart in graph 1,
    /// by summary row index.
    Matched { pairing: Vec<usize> },
    /// Spectra differ beyond `eps_lambda` (or sizes differ).
    SpectraMismatch,
    /// At least one summary has a repeated eigenvalue, so eigenvector rows
    /// are not a reliable signature.
    RepeatedEigenvalues,
    /// Graph-2 row `node` had no unmatched graph-1 row within `eps_v`.
    RowMatchFailed { node: usize },
}

/// Greedily pairs each eigenvector row of `s2` with the nearest unmatched
/// row of `s1`.
///
/// The spectra are re-checked against `eps_lambda` first, and both summaries
/// must have fully distinct eigenvalues; failures are reported through the
/// result kinds rather than errors.
pub fn match_nodes(
    s1: &SpectralSummary,
    s2: &SpectralSummary,
    eps_v: f64,
    eps_lambda: f64,
) -> MatchResult {
    if s1.len() != s2.len() {
        return MatchResult::SpectraMismatch;
    }
    if spectra_distance(s1, s2) > eps_lambda {
        return MatchResult::SpectraMismatch;
    }
    if !s1.distinct || !s2.distinct {
        return MatchResult::RepeatedEigenvalues;
    }
    let n = s1.len();
    let mut taken = vec![false; n];
    let mut pairing = vec![0usize; n];
    for row2 in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for row1 in 0..n {
            if taken[row1] {
                continue;
            }
            let d = crate::mat::squared_distance(
                s2.eigenvectors.row(row2),
                s1.eigenvectors.row(row1),
            )
            .sqrt();
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((row1, d));
            }
        }
        match best {
            Some((row1, d)) if d <= eps_v => {
                taken[row1] = true;
                pairing[row2] = row1;
            }
            _ => return MatchResult::RowMatchFailed { node: row2 },
        }
    }
    MatchResult::Matched { pairing }
}

// ─────────────────────────────────────────────────────────────────────────
// Label transfer
// ─────────────────────────────────────────────────────────────────────────

/// Stores a value label on an occupied node.
pub fn label_value(graph: &mut StateGraph, node_id: usize, value: f64) -> Result<(), SpectralError> {
    graph.set_label(node_id, value)?;
    Ok(())
}

/// Intrinsic reward for visiting `phi_next` in graph 2's environment.
///
/// The nearest occupied graph-2 node (ties to the lowest id) is mapped
/// through `pairing` (graph-2 summary row → graph-1 summary row, as produced
/// by [`match_nodes`] on summaries of the two graphs in their current node
/// order). `labels1` looks up the stored label by graph-1 row; unlabeled
/// rows contribute zero. Returns `beta · label`.
pub fn transfer_intrinsic(
    graph2: &StateGraph,
    pairing: &[usize],
    labels1: impl Fn(usize) -> Option<f64>,
    phi_next: &[f64],
    beta: f64,
) -> Result<f64, SpectralError> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(SpectralError::InvalidTolerance(format!(
            "beta must be nonnegative and finite, got {beta}"
        )));
    }
    let ids = graph2.occupied_ids();
    if ids.is_empty() {
        return Err(SpectralError::InsufficientGraph);
    }
    if ids.len() != pairing.len() {
        return Err(SpectralError::SizeMismatch(ids.len(), pairing.len()));
    }
    let mut nearest_row = 0usize;
    let mut nearest_d = f64::INFINITY;
    for (row, &id) in ids.iter().enumerate() {
        let d = graph2.distance(phi_next, graph2.feature(id).unwrap())?;
        if d < nearest_d {
            nearest_d = d;
            nearest_row = row;
        }
    }
    let row1 = pairing[nearest_row];
    Ok(match labels1(row1) {
        Some(label) => beta * label,
        None => 0.0,
    })
}

// ─────────────────────────────────────────────────────────────────────────
// CSV exports
// ─────────────────────────────────────────────────────────────────────────

/// CSV rendering of a summary: line `i` carries the `i`-th eigenvalue and
/// the `i`-th eigenvector-matrix row.
pub fn summary_to_csv(summary: &SpectralSummary) -> String {
    let n = summary.len();
    let mut out = String::from("index,eigenvalue");
    for j in 0..n {
        let _ = write!(out, ",v{j}");
    }
    out.push('\n');
    for i in 0..n {
        let _ = write!(out, "{i},{}", summary.eigenvalues[i]);
        for j in 0..n {
            let _ = write!(out, ",{}", summary.eigenvectors[(i, j)]);
        }
        out.push('\n');
    }
    out
}

/// CSV rendering of a successful match, translating summary rows back to
/// graph node ids.
pub fn pairing_to_csv(pairing: &[usize], ids2: &[usize], ids1: &[usize]) -> String {
    let mut out = String::from("node2_id,node1_id\n");
    for (row2, &row1) in pairing.iter().enumerate() {
        let _ = writeln!(out, "{},{}", ids2[row2], ids1[row1]);
    }
    out
}

// ─────────────────────────────────────────────────────────────────────────
// Tests
// ─────────────────────────────────────────────────────────────────────────
