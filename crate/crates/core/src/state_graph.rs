//! Online state graph built from observed transitions.
//!
//! The graph keeps at most `capacity` nodes, each holding a feature vector,
//! an optional value label, and an insertion age. An observed feature either
//! relabels the nearest existing node (when one lies within `epsilon_d`) or
//! becomes a new node, evicting an old one if the graph is full. Edge weights
//! count observed transitions between node pairs.
//!
//! A change counter accumulates the amount of structural churn: each node
//! insertion or replacement adds `capacity - 1`, each edge-weight update adds
//! one. Consumers poll [`StateGraph::should_train_and_reset`] to decide when
//! downstream models (such as the graph autoencoder) should refresh.

use std::fmt::Write as _;

use thiserror::Error;

use crate::mat::Mat;

// ─────────────────────────────────────────────────────────────────────────
// Errors and configuration
// ─────────────────────────────────────────────────────────────────────────

/// Errors reported by graph construction and observation.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph capacity must be at least 2, got {0}")]
    InvalidCapacity(usize),
    #[error("feature weights must be positive and finite ({0})")]
    InvalidWeights(String),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("node {0} is not occupied")]
    StaleNode(usize),
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
    #[error("invalid slot permutation: {0}")]
    InvalidPermutation(String),
    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),
}

/// Which node to evict when a new node must enter a full graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvictionPolicy {
    /// Evict the node with the smallest insertion age.
    Oldest,
    /// Evict the node with the smallest total edge weight; ties go to the
    /// lowest node id.
    WeakestConnected,
}

/// What an observation did to the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObservationKind {
    /// A new node was created in a previously free slot.
    InsertedNew(usize),
    /// An existing node within `epsilon_d` absorbed the observation.
    Relabeled(usize),
    /// The graph was full: `evicted` was removed and its slot reused.
    EvictedAndInserted { evicted: usize, inserted: usize },
    /// The sampling interval gate was closed; nothing changed.
    SkippedByInterval,
}

/// Outcome of [`StateGraph::observe_transition`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationOutcome {
    pub kind: ObservationKind,
    /// Edge whose weight changed this step, as `(min_id, max_id)`.
    pub edge_updated: Option<(usize, usize)>,
}

impl ObservationOutcome {
    /// Node that now represents the observed feature, if any.
    pub fn node_id(&self) -> Option<usize> {
        match self.kind {
            ObservationKind::InsertedNew(id) => Some(id),
            ObservationKind::Relabeled(id) => Some(id),
            ObservationKind::EvictedAndInserted { inserted, .. } => Some(inserted),
            ObservationKind::SkippedByInterval => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    feature: Vec<f64>,
    label: Option<f64>,
    age: u64,
}

// ─────────────────────────────────────────────────────────────────────────
// The graph
// ─────────────────────────────────────────────────────────────────────────

/// Fixed-capacity transition graph over observed feature vectors.
#[derive(Debug, Clone)]
pub struct StateGraph {
    capacity: usize,
    epsilon_d: f64,
    eviction: EvictionPolicy,
    sample_interval: usize,
    feature_weights: Option<Vec<f64>>,
    dim: Option<usize>,
    nodes: Vec<Option<Node>>,
    adjacency: Mat,
    change_counter: f64,
    step_counter: u64,
    age_counter: u64,
}

impl StateGraph {
    /// Creates an empty graph.
    ///
    /// `capacity` must be at least 2, `epsilon_d` positive, and
    /// `sample_interval` at least 1. When `feature_weights` is given, every
    /// weight must be positive and finite, and the weights fix the feature
    /// dimension; otherwise all axes weigh 1 and the dimension is locked in
    /// by the first observation.
    pub fn new(
        capacity: usize,
        epsilon_d: f64,
        eviction: EvictionPolicy,
        sample_interval: usize,
        feature_weights: Option<Vec<f64>>,
    ) -> Result<Self, GraphError> {
        if capacity < 2 {
            return Err(GraphError::InvalidCapacity(capacity));
        }
        if !(epsilon_d > 0.0) || !epsilon_d.is_finite() {
            return Err(GraphError::InvalidTolerance(format!(
                "epsilon_d must be positive and finite, got {epsilon_d}"
            )));
        }
        if sample_interval == 0 {
            return Err(GraphError::InvalidTolerance(
                "sample_interval must be at least 1".into(),
            ));
        }
        if let Some(w) = &feature_weights {
            if w.is_empty() {
                return Err(GraphError::InvalidWeights("weight vector is empty".into()));
            }
            if let Some(bad) = w.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
                return Err(GraphError::InvalidWeights(format!("weight {bad} is not positive")));
            }
        }
        let dim = feature_weights.as_ref().map(|w| w.len());
        Ok(StateGraph {
            capacity,
            epsilon_d,
            eviction,
            sample_interval,
            feature_weights,
            dim,
            nodes: vec![None; capacity],
            adjacency: Mat::zeros(capacity, capacity),
            change_counter: 0.0,
            step_counter: 0,
            age_counter: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn epsilon_d(&self) -> f64 {
        self.epsilon_d
    }

    /// Feature dimension, once known.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn change_counter(&self) -> f64 {
        self.change_counter
    }

    pub fn step_counter(&self) -> u64 {
        self.step_counter
    }

    /// Number of occupied slots.
    pub fn node_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_some()).count()
    }

    pub fn is_occupied(&self, id: usize) -> bool {
        id < self.capacity && self.nodes[id].is_some()
    }

    /// Ids of occupied slots in ascending order.
    pub fn occupied_ids(&self) -> Vec<usize> {
        (0..self.capacity).filter(|&i| self.nodes[i].is_some()).collect()
    }

    /// Feature vector of an occupied node.
    pub fn feature(&self, id: usize) -> Option<&[f64]> {
        self.nodes.get(id)?.as_ref().map(|n| n.feature.as_slice())
    }

    /// Stored value label of an occupied node, if one was set.
    pub fn label(&self, id: usize) -> Option<f64> {
        self.nodes.get(id)?.as_ref().and_then(|n| n.label)
    }

    /// Sets the value label of an occupied node.
    pub fn set_label(&mut self, id: usize, value: f64) -> Result<(), GraphError> {
        match self.nodes.get_mut(id).and_then(|n| n.as_mut()) {
            Some(node) => {
                node.label = Some(value);
                Ok(())
            }
            None => Err(GraphError::StaleNode(id)),
        }
    }

    /// Insertion age of an occupied node.
    pub fn age(&self, id: usize) -> Option<u64> {
        self.nodes.get(id)?.as_ref().map(|n| n.age)
    }

    /// Raw edge weight between two slots.
    pub fn edge_weight(&self, u: usize, v: usize) -> f64 {
        self.adjacency[(u, v)]
    }

    /// Full adjacency matrix (capacity × capacity, zero outside occupied
    /// pairs).
    pub fn adjacency(&self) -> &Mat {
        &self.adjacency
    }

    /// Weighted Euclidean distance between two feature vectors.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64, GraphError> {
        if a.len() != b.len() {
            return Err(GraphError::DimensionMismatch { expected: a.len(), got: b.len() });
        }
        if let Some(d) = self.dim {
            if a.len() != d {
                return Err(GraphError::DimensionMismatch { expected: d, got: a.len() });
            }
        }
        let mut acc = 0.0;
        match &self.feature_weights {
            Some(w) => {
                for k in 0..a.len() {
                    let diff = a[k] - b[k];
                    acc += w[k] * diff * diff;
                }
            }
            None => {
                for k in 0..a.len() {
                    let diff = a[k] - b[k];
                    acc += diff * diff;
                }
            }
        }
        Ok(acc.sqrt())
    }

    /// Advances the per-environment-step counter that drives the sampling
    /// interval. Call exactly once per environment step, before
    /// [`observe_transition`](Self::observe_transition).
    pub fn advance_step(&mut self) {
        self.step_counter += 1;
    }

    /// Feeds one observed feature into the graph.
    ///
    /// `prev_node` is the node that represented the previous observation
    /// (None at an episode boundary). When the step counter is not a
    /// multiple of the sampling interval the observation is dropped and
    /// [`ObservationKind::SkippedByInterval`] is returned.
    ///
    /// Otherwise, with `v` the nearest occupied node:
    /// * `distance ≤ epsilon_d`: node `v` absorbs the observation. Its
    ///   feature moves to the observed one unless that would bring it within
    ///   `epsilon_d` of another node, in which case the old feature is kept.
    ///   If `prev_node` exists and differs from `v`, the edge weight
    ///   `prev_node ↔ v` grows by one and the change counter by one.
    /// * no node within `epsilon_d`: the observation becomes a new node in
    ///   the lowest free slot, or the slot freed by the eviction policy when
    ///   the graph is full. Either way the change counter grows by
    ///   `capacity - 1`, and an edge of weight 1 connects the new node to
    ///   `prev_node` when it exists (and was not itself evicted).
    pub fn observe_transition(
        &mut self,
        prev_node: Option<usize>,
        feature: &[f64],
    ) -> Result<ObservationOutcome, GraphError> {
        if !self.step_counter.is_multiple_of(self.sample_interval as u64) {
            return Ok(ObservationOutcome {
                kind: ObservationKind::SkippedByInterval,
                edge_updated: None,
            });
        }
        match self.dim {
            Some(d) if feature.len() != d => {
                return Err(GraphError::DimensionMismatch { expected: d, got: feature.len() })
            }
            None => self.dim = Some(feature.len()),
            _ => {}
        }
        if let Some(p) = prev_node {
            if !self.is_occupied(p) {
                return Err(GraphError::StaleNode(p));
            }
        }

        // Nearest occupied node; ties resolve to the lowest id.
        let mut nearest: Option<(usize, f64)> = None;
        for id in 0..self.capacity {
            if let Some(node) = &self.nodes[id] {
                let d = self.distance(feature, &node.feature)?;
                if nearest.is_none_or(|(_, best)| d < best) {
                    nearest = Some((id, d));
                }
            }
        }

        if let Some((v, d)) = nearest {
            if d <= self.epsilon_d {
                return Ok(self.relabel(v, prev_node, feature));
            }
        }

        let slot = match (0..self.capacity).find(|&i| self.nodes[i].is_none()) {
            Some(free) => free,
            None => {
                let victim = self.pick_victim();
                self.clear_node(victim);
                return Ok(self.insert(victim, prev_node, feature, Some(victim)));
            }
        };
        Ok(self.insert(slot, prev_node, feature, None))
    }

    /// Relabels node `v` with the observed feature and records the
    /// transition edge from `prev_node`.
    fn relabel(
        &mut self,
        v: usize,
        prev_node: Option<usize>,
        feature: &[f64],
    ) -> ObservationOutcome {
        let violates = (0..self.capacity).any(|u| {
            u != v
                && self.nodes[u].as_ref().is_some_and(|n| {
                    self.distance(feature, &n.feature).unwrap_or(f64::INFINITY)
                        <= self.epsilon_d
                })
        });
        if !violates {
            self.nodes[v].as_mut().expect("relabel target occupied").feature =
                feature.to_vec();
        }
        let mut edge = None;
        if let Some(p) = prev_node {
            if p != v {
                self.adjacency[(p, v)] += 1.0;
                self.adjacency[(v, p)] += 1.0;
                self.change_counter += 1.0;
                edge = Some((p.min(v), p.max(v)));
            }
        }
        ObservationOutcome { kind: ObservationKind::Relabeled(v), edge_updated: edge }
    }

    /// Fills `slot` with a fresh node and charges the change counter.
    fn insert(
        &mut self,
        slot: usize,
        prev_node: Option<usize>,
        feature: &[f64],
        evicted: Option<usize>,
    ) -> ObservationOutcome {
        self.nodes[slot] = Some(Node {
            feature: feature.to_vec(),
            label: None,
            age: self.age_counter,
        });
        self.age_counter += 1;
        self.change_counter += (self.capacity - 1) as f64;
        let mut edge = None;
        if let Some(p) = prev_node {
            // The previous node may have just been evicted to make room; in
            // that case the transition edge has nowhere to attach.
            if p != slot && self.nodes[p].is_some() {
                self.adjacency[(p, slot)] = 1.0;
                self.adjacency[(slot, p)] = 1.0;
                edge = Some((p.min(slot), p.max(slot)));
            }
        }
        let kind = match evicted {
            Some(e) => ObservationKind::EvictedAndInserted { evicted: e, inserted: slot },
            None => ObservationKind::InsertedNew(slot),
        };
        ObservationOutcome { kind, edge_updated: edge }
    }

    fn pick_victim(&self) -> usize {
        match self.eviction {
            EvictionPolicy::Oldest => (0..self.capacity)
                .filter(|&i| self.nodes[i].is_some())
                .min_by_key(|&i| self.nodes[i].as_ref().map(|n| n.age))
                .expect("full graph has nodes"),
            EvictionPolicy::WeakestConnected => {
                let mut best = usize::MAX;
                let mut best_sum = f64::INFINITY;
                for i in 0..self.capacity {
                    if self.nodes[i].is_none() {
                        continue;
                    }
                    let sum: f64 = self.adjacency.row(i).iter().sum();
                    if sum < best_sum {
                        best_sum = sum;
                        best = i;
                    }
                }
                best
            }
        }
    }

    fn clear_node(&mut self, id: usize) {
        self.nodes[id] = None;
        for j in 0..self.capacity {
            self.adjacency[(id, j)] = 0.0;
            self.adjacency[(j, id)] = 0.0;
        }
    }

    /// Returns true (and resets the change counter) when accumulated churn
    /// reaches `beta * (capacity² - capacity)`.
    pub fn should_train_and_reset(&mut self, beta: f64) -> Result<bool, GraphError> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(GraphError::InvalidTolerance(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        let n = self.capacity as f64;
        if self.change_counter >= beta * (n * n - n) {
            self.change_counter = 0.0;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Adjacency divided by its largest off-diagonal entry (all-zero stays
    /// all-zero).
    pub fn normalized_adjacency(&self) -> Mat {
        let n = self.capacity;
        let mut max = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    max = max.max(self.adjacency[(i, j)]);
                }
            }
        }
        if max == 0.0 {
            return Mat::zeros(n, n);
        }
        Mat::from_fn(n, n, |i, j| self.adjacency[(i, j)] / max)
    }

    /// Copy of the graph with node slots renamed: the node in slot `i`
    /// moves to slot `new_slot[i]`, edges and labels following along.
    /// `new_slot` must be a permutation of `0..capacity`.
    pub fn relabeled(&self, new_slot: &[usize]) -> Result<StateGraph, GraphError> {
        if new_slot.len() != self.capacity {
            return Err(GraphError::InvalidPermutation(format!(
                "permutation covers {} slots, capacity is {}",
                new_slot.len(),
                self.capacity
            )));
        }
        let mut seen = vec![false; self.capacity];
        for &slot in new_slot {
            if slot >= self.capacity || seen[slot] {
                return Err(GraphError::InvalidPermutation(format!(
                    "slot {slot} is out of range or repeated"
                )));
            }
            seen[slot] = true;
        }
        let mut old_slot = vec![0; self.capacity];
        for (i, &j) in new_slot.iter().enumerate() {
            old_slot[j] = i;
        }
        let mut out = self.clone();
        for (i, &j) in new_slot.iter().enumerate() {
            out.nodes[j] = self.nodes[i].clone();
        }
        out.adjacency = Mat::from_fn(self.capacity, self.capacity, |i, j| {
            self.adjacency[(old_slot[i], old_slot[j])]
        });
        Ok(out)
    }

    // ─────────────────────────────────────────────────────────────────────
    // Snapshots
    // ─────────────────────────────────────────────────────────────────────

    /// Serializes the full graph state as versioned text.
    ///
    /// Floats are written in Rust's shortest round-trip decimal form, so
    /// loading a snapshot reproduces every stored value bit for bit.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        out.push_str("denserew-graph v1\n");
        let _ = writeln!(out, "capacity {}", self.capacity);
        let _ = writeln!(out, "dim {}", opt_usize(self.dim));
        let _ = writeln!(out, "epsilon_d {}", self.epsilon_d);
        let policy = match self.eviction {
            EvictionPolicy::Oldest => "oldest",
            EvictionPolicy::WeakestConnected => "weakest-connected",
        };
        let _ = writeln!(out, "eviction {policy}");
        let _ = writeln!(out, "sample_interval {}", self.sample_interval);
        let _ = writeln!(out, "step_counter {}", self.step_counter);
        let _ = writeln!(out, "change_counter {}", self.change_counter);
        let _ = writeln!(out, "age_counter {}", self.age_counter);
        match &self.feature_weights {
            Some(w) => {
                let _ = writeln!(out, "weights {}", join_floats(w));
            }
            None => out.push_str("weights -\n"),
        }
        let _ = writeln!(out, "nodes {}", self.node_count());
        for id in 0..self.capacity {
            if let Some(node) = &self.nodes[id] {
                let label = match node.label {
                    Some(l) => format!("{l}"),
                    None => "-".to_string(),
                };
                let _ =
                    writeln!(out, "node {} {} {} {}", id, node.age, label, join_floats(&node.feature));
            }
        }
        out.push_str("adjacency\n");
        for i in 0..self.capacity {
            let _ = writeln!(out, "{}", join_floats(self.adjacency.row(i)));
        }
        out.push_str("end\n");
        out
    }

    /// Restores a graph from [`to_snapshot`](Self::to_snapshot) output.
    pub fn from_snapshot(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != "denserew-graph v1" {
            return Err(GraphError::SnapshotFormat(format!(
                "unsupported header {header:?}"
            )));
        }
        let mut field = |name: &str| -> Result<String, GraphError> {
            let line = lines
                .next()
                .ok_or_else(|| GraphError::SnapshotFormat(format!("missing field {name}")))?;
            let rest = line.strip_prefix(name).and_then(|r| r.strip_prefix(' ')).ok_or_else(
                || GraphError::SnapshotFormat(format!("expected field {name}, got {line:?}")),
            )?;
            Ok(rest.to_string())
        };

        let capacity: usize = parse_field(&field("capacity")?, "capacity")?;
        let dim_raw = field("dim")?;
        let dim = if dim_raw == "-" { None } else { Some(parse_field(&dim_raw, "dim")?) };
        let epsilon_d: f64 = parse_field(&field("epsilon_d")?, "epsilon_d")?;
        let eviction = match field("eviction")?.as_str() {
            "oldest" => EvictionPolicy::Oldest,
            "weakest-connected" => EvictionPolicy::WeakestConnected,
            other => {
                return Err(GraphError::SnapshotFormat(format!(
                    "unknown eviction policy {other:?}"
                )))
            }
        };
        let sample_interval: usize = parse_field(&field("sample_interval")?, "sample_interval")?;
        let step_counter: u64 = parse_field(&field("step_counter")?, "step_counter")?;
        let change_counter: f64 = parse_field(&field("change_counter")?, "change_counter")?;
        let age_counter: u64 = parse_field(&field("age_counter")?, "age_counter")?;
        let weights_raw = field("weights")?;
        let feature_weights = if weights_raw == "-" {
            None
        } else {
            Some(parse_floats(&weights_raw)?)
        };
        let node_lines: usize = parse_field(&field("nodes")?, "nodes")?;

        let mut graph = StateGraph::new(
            capacity,
            epsilon_d,
            eviction,
            sample_interval,
            feature_weights,
        )?;
        graph.dim = dim;
        graph.step_counter = step_counter;
        graph.change_counter = change_counter;
        graph.age_counter = age_counter;

        for _ in 0..node_lines {
            let line = lines
                .next()
                .ok_or_else(|| GraphError::SnapshotFormat("missing node line".into()))?;
            let rest = line
                .strip_prefix("node ")
                .ok_or_else(|| GraphError::SnapshotFormat(format!("expected node line, got {line:?}")))?;
            let mut parts = rest.split_whitespace();
            let id: usize = parse_field(parts.next().unwrap_or(""), "node id")?;
            let age: u64 = parse_field(parts.next().unwrap_or(""), "node age")?;
            let label_raw = parts
                .next()
                .ok_or_else(|| GraphError::SnapshotFormat("node line missing label".into()))?;
            let label =
                if label_raw == "-" { None } else { Some(parse_field(label_raw, "node label")?) };
            let feature: Vec<f64> = parts
                .map(|p| parse_field(p, "node feature"))
                .collect::<Result<_, _>>()?;
            if id >= capacity {
                return Err(GraphError::SnapshotFormat(format!(
                    "node id {id} out of range for capacity {capacity}"
                )));
            }
            graph.nodes[id] = Some(Node { feature, label, age });
        }

        match lines.next() {
            Some("adjacency") => {}
            other => {
                return Err(GraphError::SnapshotFormat(format!(
                    "expected adjacency section, got {other:?}"
                )))
            }
        }
        for i in 0..capacity {
            let line = lines
                .next()
                .ok_or_else(|| GraphError::SnapshotFormat("missing adjacency row".into()))?;
            let row = parse_floats(line)?;
            if row.len() != capacity {
                return Err(GraphError::SnapshotFormat(format!(
                    "adjacency row {i} has {} entries, expected {capacity}",
                    row.len()
                )));
            }
            for (j, v) in row.into_iter().enumerate() {
                graph.adjacency[(i, j)] = v;
            }
        }
        match lines.next() {
            Some("end") => Ok(graph),
            other => Err(GraphError::SnapshotFormat(format!(
                "expected end marker, got {other:?}"
            ))),
        }
    }
}

fn opt_usize(v: Option<usize>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "-".to_string(),
    }
}

fn join_floats(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_floats(s: &str) -> Result<Vec<f64>, GraphError> {
    s.split_whitespace().map(|p| parse_field(p, "float list")).collect()
}

fn parse_field<T: std::str::FromStr>(raw: &str, what: &str) -> Result<T, GraphError> {
    raw.trim()
        .parse()
        .map_err(|_| GraphError::SnapshotFormat(format!("cannot parse {what} from {raw:?}")))
}

// ─────────────────────────────────────────────────────────────────────────
// Tests
// ─────────────────────────────────────────────────────────────────────────
