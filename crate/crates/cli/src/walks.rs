//! Builds state graphs from grid mazes: a deterministic sweep that turns
//! every free cell into a node and every legal move into an edge, and a
//! seeded random walk for calibration runs.

use denserew::rng::Rng;
use denserew::shaping::{Action, GridEnv};
use denserew::state_graph::{EvictionPolicy, StateGraph};

use crate::{runtime, CliError};

/// Distance threshold that keeps every grid cell its own node: features of
/// distinct cells sit at least `1/max(width, height)` apart.
pub fn cell_epsilon(env: &GridEnv) -> f64 {
    0.45 / env.width().max(env.height()) as f64
}

/// Free cells in row-major order.
pub fn free_cells(env: &GridEnv) -> Vec<(usize, usize)> {
    let mut cells = Vec::new();
    for y in 0..env.height() {
        for x in 0..env.width() {
            if !env.is_wall((x, y)) {
                cells.push((x, y));
            }
        }
    }
    cells
}

/// Sweeps the maze deterministically: one node per free cell, one edge
/// increment per legal directed move. Two-way neighbors end at weight 2,
/// one-way door passages at weight 1, so door structure shows up in the
/// spectrum. Returns the graph and each slot's cell, in slot order.
pub fn sweep_graph(env: &GridEnv) -> Result<(StateGraph, Vec<(usize, usize)>), CliError> {
    let cells = free_cells(env);
    let mut graph =
        StateGraph::new(cells.len(), cell_epsilon(env), EvictionPolicy::Oldest, 1, None)
            .map_err(runtime)?;
    let mut slot_of = vec![usize::MAX; env.cell_count()];
    let mut slot_cells = vec![(0, 0); cells.len()];
    for &cell in &cells {
        graph.advance_step();
        let outcome = graph.observe_transition(None, &env.feature(cell)).map_err(runtime)?;
        let slot = outcome.node_id().expect("sampling interval 1 never skips");
        slot_of[env.cell_index(cell)] = slot;
        slot_cells[slot] = cell;
    }
    for &cell in &cells {
        for action in Action::ALL {
            let (next, _, _) = env.step(cell, action);
            if next != cell {
                graph.advance_step();
                graph
                    .observe_transition(Some(slot_of[env.cell_index(cell)]), &env.feature(next))
                    .map_err(runtime)?;
            }
        }
    }
    Ok((graph, slot_cells))
}

/// Uniform random walk from the start for `steps` moves; reaching the goal
/// teleports the walker home without linking an edge across the reset.
pub fn random_walk_graph(
    env: &GridEnv,
    steps: usize,
    epsilon_d: f64,
    seed: u64,
) -> Result<StateGraph, CliError> {
    let capacity = free_cells(env).len();
    let mut graph = StateGraph::new(capacity, epsilon_d, EvictionPolicy::Oldest, 1, None)
        .map_err(runtime)?;
    let mut rng = Rng::new(seed);
    let mut cell = env.start();
    graph.advance_step();
    let mut prev = graph.observe_transition(None, &env.feature(cell)).map_err(runtime)?.node_id();
    for _ in 0..steps {
        let action = Action::from_index(rng.next_below(4)).expect("actions index to 0..4");
        let (next, _, done) = env.step(cell, action);
        graph.advance_step();
        let outcome =
            graph.observe_transition(prev, &env.feature(next)).map_err(runtime)?;
        prev = outcome.node_id();
        cell = next;
        if done {
            cell = env.start();
            prev = None;
        }
    }
    Ok(graph)
}

/// Uniform permutation of `0..n` by Fisher-Yates.
pub fn random_permutation(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.next_below(i + 1);
        perm.swap(i, j);
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use denserew::shaping::RewardMode;

    fn corridor() -> GridEnv {
        GridEnv::from_map("#####\n#S G#\n#####\n", RewardMode::Sparse).unwrap()
    }

    #[test]
    fn sweep_covers_every_free_cell_with_symmetric_weights() {
        let env = corridor();
        let (graph, cells) = sweep_graph(&env).unwrap();
        assert_eq!(graph.node_count(), 3);
        assert_eq!(cells, vec![(1, 1), (2, 1), (3, 1)]);
        let adjacency = graph.adjacency();
        // Each adjacent pair was traversed once in each direction.
        assert_eq!(adjacency[(0, 1)], 2.0);
        assert_eq!(adjacency[(1, 0)], 2.0);
        assert_eq!(adjacency[(1, 2)], 2.0);
        assert_eq!(adjacency[(0, 2)], 0.0);
        assert_eq!(adjacency[(0, 0)], 0.0);
    }

    #[test]
    fn one_way_doors_leave_weight_one_edges() {
        let env =
            GridEnv::from_map("#####\n#S>G#\n#####\n", RewardMode::Sparse).unwrap();
        let (graph, cells) = sweep_graph(&env).unwrap();
        assert_eq!(cells, vec![(1, 1), (2, 1), (3, 1)]);
        let adjacency = graph.adjacency();
        // The door cell admits entry only rightward, so the S-door pair is
        // walked once from the left plus once back out of the door.
        assert_eq!(adjacency[(0, 1)], 2.0);
        // Door to G: rightward entry is the exit move, and G cannot step
        // back into the door, leaving a single traversal.
        assert_eq!(adjacency[(1, 2)], 1.0);
    }

    #[test]
    fn random_walks_are_seed_deterministic_and_fill_the_graph() {
        let env = corridor();
        let a = random_walk_graph(&env, 500, cell_epsilon(&env), 9).unwrap();
        let b = random_walk_graph(&env, 500, cell_epsilon(&env), 9).unwrap();
        assert_eq!(a.to_snapshot(), b.to_snapshot());
        assert_eq!(a.node_count(), 3);
        let c = random_walk_graph(&env, 500, cell_epsilon(&env), 10).unwrap();
        assert_ne!(a.to_snapshot(), c.to_snapshot());
    }

    #[test]
    fn permutations_are_bijective() {
        let mut rng = Rng::new(3);
        let perm = random_permutation(8, &mut rng);
        let mut seen = vec![false; 8];
        for &p in &perm {
            assert!(!seen[p]);
            seen[p] = true;
        }
        assert!(seen.into_iter().all(|s| s));
    }
}
