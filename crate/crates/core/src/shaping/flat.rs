//! Flat tabular Q-learning over grid cells with an injectable per-step
//! bonus, plus a TD(0) state-value estimate of the behaviour policy.
//!
//! This is the runner behind label-transfer studies: a source run's
//! state values label graph nodes, and a target run receives those
//! labels back through the bonus closure.

use super::env::{Action, GridEnv};
use super::metrics::{EpisodeRecord, MetricsTable};
use super::ShapingError;
use crate::rng::Rng;
use std::time::Instant;

/// Settings for [`run_shaped_q`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatParams {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub max_steps: usize,
}

impl Default for FlatParams {
    fn default() -> Self {
        FlatParams {
            learning_rate: 0.1,
            discount: 0.99,
            epsilon_start: 0.1,
            epsilon_end: 0.01,
            max_steps: 200,
        }
    }
}

impl FlatParams {
    pub fn validate(&self) -> Result<(), ShapingError> {
        if self.max_steps == 0 {
            return Err(ShapingError::InvalidConfig("max_steps must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ShapingError::InvalidConfig(format!(
                "learning_rate must be finite and > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(ShapingError::InvalidConfig(format!(
                "discount must be in [0, 1), got {}",
                self.discount
            )));
        }
        for (name, eps) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(ShapingError::InvalidConfig(format!(
                    "{name} must be in [0, 1], got {eps}"
                )));
            }
        }
        Ok(())
    }
}

/// Runs epsilon-greedy Q-learning where each step is paid the external
/// reward plus `bonus(next_cell)`. Returns the per-episode metrics
/// (external returns only) and the TD(0) state-value table over cells,
/// learned from the same shaped rewards. Deterministic given the seed up
/// to wall-clock times.
pub fn run_shaped_q(
    env: &GridEnv,
    params: &FlatParams,
    episodes: usize,
    seed: u64,
    bonus: &mut dyn FnMut((usize, usize)) -> f64,
) -> Result<(MetricsTable, Vec<f64>), ShapingError> {
    params.validate()?;
    if episodes == 0 {
        return Err(ShapingError::InvalidConfig("episodes must be at least 1".into()));
    }
    if !env.goal_reachable() {
        return Err(ShapingError::InvalidEnv("goal is not reachable from the start".into()));
    }

    let cells = env.cell_count();
    let goal = env.goal();
    let mut action_rng = Rng::new(seed).split(1);
    let mut q = vec![0.0f64; cells * 4];
    let mut values = vec![0.0f64; cells];
    let mut table = MetricsTable::new();

    for episode in 0..episodes {
        let clock = Instant::now();
        let frac = if episodes > 1 { episode as f64 / (episodes - 1) as f64 } else { 0.0 };
        let epsilon = params.epsilon_start + (params.epsilon_end - params.epsilon_start) * frac;

        let mut cell = env.start();
        if cell == goal {
            table.push(EpisodeRecord {
                episode,
                success: true,
                external_return: 0.0,
                steps: 0,
                wallclock_ms: clock.elapsed().as_secs_f64() * 1e3,
            });
            continue;
        }
        let mut external_return = 0.0;
        let mut success = false;
        let mut steps = 0;

        for t in 0..params.max_steps {
            let state_idx = env.cell_index(cell);
            let action_idx = if action_rng.next_f64() < epsilon {
                action_rng.next_below(4)
            } else {
                let row = &q[state_idx * 4..state_idx * 4 + 4];
                let mut best = 0;
                for i in 1..4 {
                    if row[i] > row[best] {
                        best = i;
                    }
                }
                best
            };
            let action = Action::from_index(action_idx).unwrap();
            let (next, external, done) = env.step(cell, action);
            steps = t + 1;
            external_return += external;

            let reward = external + bonus(next);
            let next_idx = env.cell_index(next);
            let q_bootstrap = if done {
                0.0
            } else {
                q[next_idx * 4..next_idx * 4 + 4].iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
            };
            let entry = &mut q[state_idx * 4 + action_idx];
            *entry += params.learning_rate * (reward + params.discount * q_bootstrap - *entry);

            let v_bootstrap = if done { 0.0 } else { values[next_idx] };
            values[state_idx] += params.learning_rate
                * (reward + params.discount * v_bootstrap - values[state_idx]);

            cell = next;
            if done {
                success = true;
                break;
            }
        }

        table.push(EpisodeRecord {
            episode,
            success,
            external_return,
            steps,
            wallclock_ms: clock.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok((table, values))
}
