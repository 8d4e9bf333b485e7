//! Policy-invariance checks on prefix-tree MDPs.
//!
//! A generated sequence induces a rooted tree: states are prefixes, actions
//! are edges to child prefixes, leaves carry the terminal reward of the
//! finished sequence. A dense decomposition assigns each edge a credit;
//! it is efficient when every root-to-leaf credit sum equals that leaf's
//! return. Blending with weight `α` pays `α·credit` on every edge plus
//! `(1−α)·return` on entering a leaf, so for efficient decompositions the
//! total reward of every trajectory is independent of `α`, and the optimal
//! action sets from exact backward induction must coincide for all blends.

use super::CreditError;

/// Most state-action pairs (edges) accepted for exact evaluation.
const MAX_EDGES: usize = 10_000;

/// Tie tolerance when collecting optimal action sets.
const TIE_TOLERANCE: f64 = 1e-9;

/// A rooted tree MDP with terminal rewards on leaves; node 0 is the root.
#[derive(Debug, Clone)]
pub struct TrajectoryMdp {
    children: Vec<Vec<usize>>,
    leaf_returns: Vec<Option<f64>>,
}

impl TrajectoryMdp {
    /// Builds the tree from `(from, to)` edges and per-leaf returns.
    ///
    /// Every node except the root needs exactly one parent, every node must
    /// be reachable from the root, and exactly the childless nodes must
    /// appear in `leaf_returns`.
    pub fn new(
        node_count: usize,
        edges: &[(usize, usize)],
        leaf_returns: &[(usize, f64)],
    ) -> Result<Self, CreditError> {
        if node_count == 0 {
            return Err(CreditError::InvalidMdp("no states".into()));
        }
        if edges.len() > MAX_EDGES {
            return Err(CreditError::InvalidMdp(format!(
                "{} state-action pairs exceed the exact-evaluation cap of {MAX_EDGES}",
                edges.len()
            )));
        }
        let mut children = vec![Vec::new(); node_count];
        let mut has_parent = vec![false; node_count];
        for &(from, to) in edges {
            if from >= node_count || to >= node_count {
                return Err(CreditError::InvalidMdp(format!(
                    "edge ({from}, {to}) names a state outside 0..{node_count}"
                )));
            }
            if to == 0 {
                return Err(CreditError::InvalidMdp("the root cannot be a child".into()));
            }
            if has_parent[to] {
                return Err(CreditError::InvalidMdp(format!(
                    "state {to} has two parents"
                )));
            }
            has_parent[to] = true;
            children[from].push(to);
        }
        for list in &mut children {
            list.sort_unstable();
        }

        let mut reachable = vec![false; node_count];
        reachable[0] = true;
        let mut queue = vec![0usize];
        while let Some(node) = queue.pop() {
            for &c in &children[node] {
                if !reachable[c] {
                    reachable[c] = true;
                    queue.push(c);
                }
            }
        }
        if let Some(stray) = reachable.iter().position(|&r| !r) {
            return Err(CreditError::InvalidMdp(format!(
                "state {stray} is unreachable from the root"
            )));
        }

        let mut returns = vec![None; node_count];
        for &(node, value) in leaf_returns {
            if node >= node_count {
                return Err(CreditError::InvalidMdp(format!(
                    "return attached to unknown state {node}"
                )));
            }
            if !children[node].is_empty() {
                return Err(CreditError::InvalidMdp(format!(
                    "state {node} has children but carries a terminal return"
                )));
            }
            if returns[node].is_some() {
                return Err(CreditError::InvalidMdp(format!(
                    "state {node} has two terminal returns"
                )));
            }
            returns[node] = Some(value);
        }
        for node in 0..node_count {
            if children[node].is_empty() && returns[node].is_none() {
                return Err(CreditError::InvalidMdp(format!(
                    "leaf {node} has no terminal return"
                )));
            }
        }
        Ok(TrajectoryMdp { children, leaf_returns: returns })
    }

    pub fn node_count(&self) -> usize {
        self.children.len()
    }

    /// Child states of `node`, ascending.
    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children[node].is_empty()
    }

    /// Terminal return of a leaf, `None` for interior nodes.
    pub fn leaf_return(&self, node: usize) -> Option<f64> {
        self.leaf_returns[node]
    }

    /// Nodes ordered so every child precedes its parent.
    fn backward_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.node_count());
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            order.push(node);
            queue.extend(self.children[node].iter().copied());
        }
        order.reverse();
        order
    }
}

fn check_inputs(
    mdp: &TrajectoryMdp,
    edge_credits: &[f64],
    alpha: f64,
) -> Result<(), CreditError> {
    if edge_credits.len() != mdp.node_count() {
        return Err(CreditError::DimensionError {
            expected: mdp.node_count(),
            got: edge_credits.len(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CreditError::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Per-state optimal action sets under the blended reward, by exact
/// backward induction.
///
/// `edge_credits[c]` is the credit on the edge entering state `c` (the
/// root's entry is ignored). Entering child `c` pays
/// `α·edge_credits[c] + (1−α)·return(c)` when `c` is a leaf and
/// `α·edge_credits[c]` otherwise. The returned set for each state lists
/// the child states whose action value is within `tie_tol` of the best;
/// leaves get empty sets.
pub fn optimal_action_sets(
    mdp: &TrajectoryMdp,
    edge_credits: &[f64],
    alpha: f64,
    tie_tol: f64,
) -> Result<Vec<Vec<usize>>, CreditError> {
    check_inputs(mdp, edge_credits, alpha)?;
    if !(tie_tol >= 0.0) {
        return Err(CreditError::BoundaryError(format!(
            "tie tolerance must be nonnegative, got {tie_tol}"
        )));
    }
    let n = mdp.node_count();
    let mut value = vec![0.0; n];
    let mut sets = vec![Vec::new(); n];
    for node in mdp.backward_order() {
        if mdp.is_leaf(node) {
            continue;
        }
        let action_values: Vec<f64> = mdp
            .children(node)
            .iter()
            .map(|&c| {
                let entry = alpha * edge_credits[c]
                    + (1.0 - alpha) * mdp.leaf_return(c).unwrap_or(0.0);
                entry + value[c]
            })
            .collect();
        let best = action_values.iter().fold(f64::NEG_INFINITY, |a, &q| a.max(q));
        value[node] = best;
        sets[node] = mdp
            .children(node)
            .iter()
            .zip(&action_values)
            .filter(|&(_, &q)| q >= best - tie_tol)
            .map(|(&c, _)| c)
            .collect();
    }
    Ok(sets)
}

/// True when every root-to-leaf credit sum matches that leaf's return
/// within `tol`.
pub fn decomposition_is_efficient(
    mdp: &TrajectoryMdp,
    edge_credits: &[f64],
    tol: f64,
) -> Result<bool, CreditError> {
    check_inputs(mdp, edge_credits, 0.0)?;
    let mut stack = vec![(0usize, 0.0f64)];
    while let Some((node, sum)) = stack.pop() {
        if mdp.is_leaf(node) {
            let ret = mdp.leaf_return(node).unwrap_or(0.0);
            if (sum - ret).abs() > tol {
                return Ok(false);
            }
            continue;
        }
        for &c in mdp.children(node) {
            stack.push((c, sum + edge_credits[c]));
        }
    }
    Ok(true)
}

/// True when the optimal action sets under every blend weight in `alphas`
/// coincide with the sparse (`α = 0`) sets at every state.
pub fn verify_policy_invariance(
    mdp: &TrajectoryMdp,
    edge_credits: &[f64],
    alphas: &[f64],
) -> Result<bool, CreditError> {
    let sparse = optimal_action_sets(mdp, edge_credits, 0.0, TIE_TOLERANCE)?;
    for &alpha in alphas {
        let blended = optimal_action_sets(mdp, edge_credits, alpha, TIE_TOLERANCE)?;
        if blended != sparse {
            return Ok(false);
        }
    }
    Ok(true)
}
