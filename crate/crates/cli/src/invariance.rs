//! Policy-invariance trials on random tree MDPs: build an
//! efficiency-preserving per-edge credit assignment, check that blending
//! it into the terminal reward never changes any optimal action set, and
//! show that deliberately breaking efficiency does.

use denserew::credit::{optimal_action_sets, verify_policy_invariance, TrajectoryMdp};
use denserew::rng::Rng;

use crate::{runtime, CliError};

/// Blend weights exercised by every trial.
pub const TRIAL_ALPHAS: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

const TIE_TOLERANCE: f64 = 1e-9;

/// Outcome of one random MDP trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvarianceTrial {
    /// Optimal action sets agreed across all blend weights.
    pub invariant: bool,
    /// Breaking efficiency on one edge changed some optimal action set.
    pub control_flipped: bool,
}

/// Random rooted tree with `states` nodes, random leaf returns, and an
/// exactly efficient per-edge credit assignment.
///
/// The root always branches at least twice so the negative control has a
/// suboptimal first action to promote. Interior edges get random credits;
/// each leaf's edge absorbs the remainder of its return. Returns and
/// credits are snapped to a coarse binary grid, which keeps every
/// root-to-leaf sum exact in floating point whatever the summation order.
pub fn random_mdp(states: usize, rng: &mut Rng) -> Result<(TrajectoryMdp, Vec<f64>), CliError> {
    if states < 3 {
        return Err(CliError::Validation(format!(
            "invariance trials need at least 3 states, got {states}"
        )));
    }
    let mut parents = vec![0usize; states];
    for (node, parent) in parents.iter_mut().enumerate().skip(3) {
        *parent = rng.next_below(node);
    }
    let edges: Vec<(usize, usize)> =
        parents.iter().enumerate().skip(1).map(|(node, &parent)| (parent, node)).collect();

    let mut is_leaf = vec![true; states];
    for &(parent, _) in &edges {
        is_leaf[parent] = false;
    }
    let leaf_returns: Vec<(usize, f64)> = (0..states)
        .filter(|&node| is_leaf[node])
        .map(|node| (node, lattice(rng.next_f64() * 10.0 - 5.0)))
        .collect();
    let mdp = TrajectoryMdp::new(states, &edges, &leaf_returns).map_err(runtime)?;

    let mut credits = vec![0.0; states];
    for node in 1..states {
        if !is_leaf[node] {
            credits[node] = lattice(rng.next_f64() * 2.0 - 1.0);
        }
    }
    for &(leaf, ret) in &leaf_returns {
        let mut path_sum = 0.0;
        let mut node = parents[leaf];
        while node != 0 {
            path_sum += credits[node];
            node = parents[node];
        }
        credits[leaf] = ret - path_sum;
    }
    Ok((mdp, credits))
}

/// Snaps to multiples of 2^-20. Sums and differences of a few dozen grid
/// values are exact in an f64, so they do not depend on evaluation order.
fn lattice(x: f64) -> f64 {
    (x * 1_048_576.0).round() / 1_048_576.0
}

/// Copies the credits and inflates one sparse-suboptimal root edge enough
/// to dominate every blended action value at full blend weight.
pub fn break_efficiency(
    mdp: &TrajectoryMdp,
    credits: &[f64],
) -> Result<Vec<f64>, CliError> {
    let sparse = optimal_action_sets(mdp, credits, 0.0, TIE_TOLERANCE).map_err(runtime)?;
    let target = mdp
        .children(0)
        .iter()
        .copied()
        .find(|child| !sparse[0].contains(child))
        .or_else(|| mdp.children(0).first().copied())
        .ok_or_else(|| CliError::Runtime("root has no actions".to_string()))?;
    let mut broken = credits.to_vec();
    let bound: f64 = credits.iter().map(|c| c.abs()).sum::<f64>()
        + (0..mdp.node_count())
            .filter_map(|node| mdp.leaf_return(node))
            .fold(0.0f64, |acc, r| acc.max(r.abs()));
    broken[target] += 2.0 * bound + 1.0;
    Ok(broken)
}

/// Runs `count` seeded trials on `states`-node MDPs.
pub fn run_trials(
    states: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<InvarianceTrial>, CliError> {
    if count == 0 {
        return Err(CliError::Validation("trial count must be at least 1".to_string()));
    }
    let base = Rng::new(seed);
    let mut trials = Vec::with_capacity(count);
    for index in 0..count {
        let mut rng = base.split(index as u64 + 1);
        let (mdp, credits) = random_mdp(states, &mut rng)?;
        let invariant =
            verify_policy_invariance(&mdp, &credits, &TRIAL_ALPHAS).map_err(runtime)?;
        let broken = break_efficiency(&mdp, &credits)?;
        let control_flipped =
            !verify_policy_invariance(&mdp, &broken, &TRIAL_ALPHAS).map_err(runtime)?;
        trials.push(InvarianceTrial { invariant, control_flipped });
    }
    Ok(trials)
}

/// Report rows as CSV: `trial,invariant,control_flipped`.
pub fn trials_to_csv(trials: &[InvarianceTrial]) -> String {
    let mut csv = String::from("trial,invariant,control_flipped\n");
    for (index, trial) in trials.iter().enumerate() {
        csv.push_str(&format!(
            "{index},{},{}\n",
            trial.invariant as u8, trial.control_flipped as u8
        ));
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;
    use denserew::credit::decomposition_is_efficient;

    #[test]
    fn random_mdps_carry_exactly_efficient_credits() {
        let mut rng = Rng::new(11);
        for _ in 0..20 {
            let (mdp, credits) = random_mdp(6, &mut rng).unwrap();
            assert!(decomposition_is_efficient(&mdp, &credits, 0.0).unwrap());
            assert!(mdp.children(0).len() >= 2);
        }
    }

    #[test]
    fn breaking_efficiency_is_detectable() {
        let mut rng = Rng::new(4);
        let (mdp, credits) = random_mdp(6, &mut rng).unwrap();
        let broken = break_efficiency(&mdp, &credits).unwrap();
        assert!(!decomposition_is_efficient(&mdp, &broken, 1e-9).unwrap());
    }

    #[test]
    fn trials_hold_invariance_and_the_control_flips() {
        let trials = run_trials(6, 20, 7).unwrap();
        assert_eq!(trials.len(), 20);
        assert!(trials.iter().all(|t| t.invariant));
        assert!(trials.iter().any(|t| t.control_flipped));
    }

    #[test]
    fn trials_are_seed_deterministic() {
        assert_eq!(run_trials(5, 8, 3).unwrap(), run_trials(5, 8, 3).unwrap());
    }

    #[test]
    fn csv_lists_one_row_per_trial() {
        let trials = vec![
            InvarianceTrial { invariant: true, control_flipped: true },
            InvarianceTrial { invariant: false, control_flipped: false },
        ];
        assert_eq!(trials_to_csv(&trials), "trial,invariant,control_flipped\n0,1,1\n1,0,0\n");
    }

    #[test]
    fn tiny_state_counts_are_rejected() {
        let mut rng = Rng::new(0);
        assert!(random_mdp(2, &mut rng).is_err());
    }
}
