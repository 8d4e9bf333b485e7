//! The hierarchical shaping experiment loop.
//!
//! Two tabular Q-learners share one run: a high level that picks a
//! subgoal cell every `subgoal_interval` steps from the state graph's
//! node features (with the environment goal always on the ballot), and a
//! low level that picks grid moves toward the active subgoal. Every
//! environment step feeds the state graph; the graph's change counter
//! gates autoencoder training phases; the encoder feeds both shaped
//! reward terms.

use super::env::{Action, GridEnv};
use super::metrics::{EpisodeRecord, MetricsTable};
use super::{ShapingConfig, ShapingError};
use crate::autoencoder::{train_phase, EncoderParams, TrainConfig};
use crate::mat::squared_distance;
use crate::rng::Rng;
use crate::state_graph::{EvictionPolicy, StateGraph};
use std::time::Instant;

/// Ablation arms: which shaped terms are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Both,
    HighOnly,
    LowOnly,
    Vanilla,
}

impl Variant {
    pub const ALL: [Variant; 4] =
        [Variant::Both, Variant::HighOnly, Variant::LowOnly, Variant::Vanilla];

    /// Shaping weights after masking: `(alpha_high, alpha_low)`.
    pub fn effective_alphas(self, config: &ShapingConfig) -> (f64, f64) {
        match self {
            Variant::Both => (config.alpha_high, config.alpha_low),
            Variant::HighOnly => (config.alpha_high, 0.0),
            Variant::LowOnly => (0.0, config.alpha_low),
            Variant::Vanilla => (0.0, 0.0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Both => "both",
            Variant::HighOnly => "high_only",
            Variant::LowOnly => "low_only",
            Variant::Vanilla => "vanilla",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Variant, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.label() == s)
            .ok_or_else(|| format!("unknown variant {s:?}; use both|high_only|low_only|vanilla"))
    }
}

/// Learner, graph, and encoder settings for one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentParams {
    pub graph_capacity: usize,
    pub epsilon_d: f64,
    pub eviction: EvictionPolicy,
    pub sample_interval: usize,
    pub max_steps: usize,
    /// Encoder layer widths; the input layer must match the 2-d grid
    /// features.
    pub encoder_dims: Vec<usize>,
    pub encoder_learning_rate: f64,
    pub encoder_steps_per_phase: usize,
    pub encoder_pair_fraction: f64,
    pub low_learning_rate: f64,
    pub low_discount: f64,
    pub high_learning_rate: f64,
    pub high_discount: f64,
    /// Exploration rate decays linearly from start to end across
    /// episodes; both levels share it.
    pub epsilon_start: f64,
    pub epsilon_end: f64,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            graph_capacity: 32,
            epsilon_d: 0.15,
            eviction: EvictionPolicy::WeakestConnected,
            sample_interval: 1,
            max_steps: 200,
            encoder_dims: vec![2, 16, 16, 2],
            encoder_learning_rate: 0.05,
            encoder_steps_per_phase: 4,
            encoder_pair_fraction: 1.0,
            low_learning_rate: 0.1,
            low_discount: 0.99,
            high_learning_rate: 0.1,
            high_discount: 0.99,
            epsilon_start: 0.1,
            epsilon_end: 0.01,
        }
    }
}

impl ExperimentParams {
    pub fn validate(&self) -> Result<(), ShapingError> {
        if self.max_steps == 0 {
            return Err(ShapingError::InvalidConfig("max_steps must be at least 1".into()));
        }
        let rates = [
            ("low_learning_rate", self.low_learning_rate),
            ("high_learning_rate", self.high_learning_rate),
            ("encoder_learning_rate", self.encoder_learning_rate),
        ];
        for (name, rate) in rates {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(ShapingError::InvalidConfig(format!(
                    "{name} must be finite and > 0, got {rate}"
                )));
            }
        }
        for (name, gamma) in [("low_discount", self.low_discount), ("high_discount", self.high_discount)] {
            if !(0.0..1.0).contains(&gamma) {
                return Err(ShapingError::InvalidConfig(format!(
                    "{name} must be in [0, 1), got {gamma}"
                )));
            }
        }
        for (name, eps) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(ShapingError::InvalidConfig(format!(
                    "{name} must be in [0, 1], got {eps}"
                )));
            }
        }
        if self.encoder_dims.first() != Some(&2) {
            return Err(ShapingError::InvalidConfig(format!(
                "encoder_dims must start at the 2-d grid feature width, got {:?}",
                self.encoder_dims
            )));
        }
        if self.encoder_steps_per_phase == 0 {
            return Err(ShapingError::InvalidConfig(
                "encoder_steps_per_phase must be at least 1".into(),
            ));
        }
        if !(self.encoder_pair_fraction > 0.0 && self.encoder_pair_fraction <= 1.0) {
            return Err(ShapingError::InvalidConfig(format!(
                "encoder_pair_fraction must be in (0, 1], got {}",
                self.encoder_pair_fraction
            )));
        }
        Ok(())
    }
}

/// Progress callbacks emitted by [`run_experiment_with`].
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentEvent {
    SubgoalSelected {
        episode: usize,
        step: usize,
        cell: (usize, usize),
    },
    EncoderTrained {
        episode: usize,
        step: usize,
    },
    StepRewards {
        episode: usize,
        step: usize,
        state: (usize, usize),
        action: Action,
        next: (usize, usize),
        subgoal: (usize, usize),
        external: f64,
        high: f64,
        low: f64,
    },
}

/// Per-cell embedding cache, flushed whenever the encoder trains.
struct EmbedCache {
    entries: Vec<Option<Vec<f64>>>,
}

impl EmbedCache {
    fn new(cells: usize) -> Self {
        EmbedCache { entries: vec![None; cells] }
    }

    fn clear(&mut self) {
        self.entries.fill(None);
    }

    /// Decoded similarity of two cells' embeddings.
    fn similarity(
        &mut self,
        encoder: &EncoderParams,
        env: &GridEnv,
        a: (usize, usize),
        b: (usize, usize),
    ) -> Result<f64, ShapingError> {
        for cell in [a, b] {
            let idx = env.cell_index(cell);
            if self.entries[idx].is_none() {
                self.entries[idx] = Some(encoder.encode(&env.feature(cell))?);
            }
        }
        let za = self.entries[env.cell_index(a)].as_ref().unwrap();
        let zb = self.entries[env.cell_index(b)].as_ref().unwrap();
        Ok(encoder.decode(za, zb)?)
    }
}

/// One open high-level decision: subgoal chosen at `state_idx`, rewards
/// accumulated with `discount^len` until the window closes.
struct Window {
    state_idx: usize,
    subgoal_idx: usize,
    sum: f64,
    len: i32,
}

/// Subgoal ballot: every occupied graph node's cell in ascending slot
/// order, with the environment goal always appended last.
fn candidate_cells(graph: &StateGraph, env: &GridEnv) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = graph
        .occupied_ids()
        .into_iter()
        .map(|id| env.nearest_cell(graph.feature(id).unwrap()))
        .collect();
    out.push(env.goal());
    out
}

fn best_candidate_value(high_q: &[f64], cells: usize, state_idx: usize, candidates: &[(usize, usize)], env: &GridEnv) -> f64 {
    candidates
        .iter()
        .map(|&c| high_q[state_idx * cells + env.cell_index(c)])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Runs the experiment with default learner settings.
pub fn run_experiment(
    env: &GridEnv,
    shaping: &ShapingConfig,
    variant: Variant,
    episodes: usize,
    seed: u64,
) -> Result<MetricsTable, ShapingError> {
    run_experiment_with(
        env,
        shaping,
        &ExperimentParams::default(),
        variant,
        episodes,
        seed,
        &mut |_| {},
    )
}

/// Runs the full hierarchical loop and reports one row per episode.
///
/// Subgoals are re-selected exactly at steps that are multiples of the
/// subgoal interval. The per-step high-level value is the external reward
/// plus the weighted embedding similarity of the post-step state with the
/// goal; those values are discount-summed over the window and drive the
/// high-level Q update when the window closes (bootstrapped unless the
/// episode ended at the goal). Outcomes are deterministic for a given
/// seed; only wall-clock times vary.
pub fn run_experiment_with(
    env: &GridEnv,
    shaping: &ShapingConfig,
    params: &ExperimentParams,
    variant: Variant,
    episodes: usize,
    seed: u64,
    observer: &mut dyn FnMut(&ExperimentEvent),
) -> Result<MetricsTable, ShapingError> {
    shaping.validate()?;
    params.validate()?;
    if episodes == 0 {
        return Err(ShapingError::InvalidConfig("episodes must be at least 1".into()));
    }
    if !env.goal_reachable() {
        return Err(ShapingError::InvalidEnv("goal is not reachable from the start".into()));
    }

    let (alpha_high, alpha_low) = variant.effective_alphas(shaping);
    let cells = env.cell_count();
    let goal = env.goal();

    let base_rng = Rng::new(seed);
    let mut low_rng = base_rng.split(1);
    let mut high_rng = base_rng.split(2);
    let encoder_seed = base_rng.split(3).next_u64();
    let mut train_rng = base_rng.split(4);

    let mut graph = StateGraph::new(
        params.graph_capacity,
        params.epsilon_d,
        params.eviction,
        params.sample_interval,
        None,
    )?;
    let mut encoder = EncoderParams::new(&params.encoder_dims, encoder_seed)?;
    let mut cache = EmbedCache::new(cells);

    let mut low_q = vec![0.0f64; cells * cells * 4];
    let mut high_q = vec![0.0f64; cells * cells];
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

        // Anchor the episode's first transition edge on the start state.
        let mut prev_node = graph.observe_transition(None, &env.feature(cell))?.node_id();

        let mut subgoal = goal;
        let mut window = Window { state_idx: 0, subgoal_idx: 0, sum: 0.0, len: 0 };
        let mut external_return = 0.0;
        let mut success = false;
        let mut steps = 0;

        for t in 0..params.max_steps {
            if t % shaping.subgoal_interval == 0 {
                if t > 0 {
                    close_window(&mut high_q, &window, env.cell_index(cell), true, params, &graph, env, cells);
                }
                subgoal = select_subgoal(env, &graph, &high_q, env.cell_index(cell), epsilon, &mut high_rng, cells);
                window = Window {
                    state_idx: env.cell_index(cell),
                    subgoal_idx: env.cell_index(subgoal),
                    sum: 0.0,
                    len: 0,
                };
                observer(&ExperimentEvent::SubgoalSelected { episode, step: t, cell: subgoal });
            }

            let sub_idx = env.cell_index(subgoal);
            let state_idx = env.cell_index(cell);
            let q_base = (sub_idx * cells + state_idx) * 4;
            let action_idx = if low_rng.next_f64() < epsilon {
                low_rng.next_below(4)
            } else {
                argmax(&low_q[q_base..q_base + 4])
            };
            let action = Action::from_index(action_idx).unwrap();

            let (next, external, done) = env.step(cell, action);
            steps = t + 1;
            external_return += external;

            graph.advance_step();
            if let Some(id) = graph.observe_transition(prev_node, &env.feature(next))?.node_id() {
                prev_node = Some(id);
            }
            if graph.should_train_and_reset(shaping.beta)? && graph.node_count() >= 2 {
                let config = TrainConfig {
                    learning_rate: params.encoder_learning_rate,
                    steps_per_phase: params.encoder_steps_per_phase,
                    pair_fraction: params.encoder_pair_fraction,
                    seed: train_rng.next_u64(),
                };
                encoder = train_phase(&encoder, &graph, &config)?;
                cache.clear();
                observer(&ExperimentEvent::EncoderTrained { episode, step: t });
            }

            let high = if alpha_high == 0.0 {
                external
            } else {
                external + alpha_high * cache.similarity(&encoder, env, next, goal)?
            };
            let low_base = -squared_distance(&env.feature(next), &env.feature(subgoal));
            let low = if alpha_low == 0.0 {
                low_base
            } else {
                low_base + alpha_low * cache.similarity(&encoder, env, next, subgoal)?
            };
            observer(&ExperimentEvent::StepRewards {
                episode,
                step: t,
                state: cell,
                action,
                next,
                subgoal,
                external,
                high,
                low,
            });

            let next_idx = env.cell_index(next);
            let bootstrap = if done {
                0.0
            } else {
                let next_base = (sub_idx * cells + next_idx) * 4;
                low_q[next_base..next_base + 4].iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
            };
            let entry = &mut low_q[q_base + action_idx];
            *entry += params.low_learning_rate * (low + params.low_discount * bootstrap - *entry);

            window.sum += params.high_discount.powi(window.len) * high;
            window.len += 1;

            cell = next;
            if done {
                success = true;
                break;
            }
        }

        if window.len > 0 {
            close_window(&mut high_q, &window, env.cell_index(cell), !success, params, &graph, env, cells);
        }
        table.push(EpisodeRecord {
            episode,
            success,
            external_return,
            steps,
            wallclock_ms: clock.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(table)
}

fn select_subgoal(
    env: &GridEnv,
    graph: &StateGraph,
    high_q: &[f64],
    state_idx: usize,
    epsilon: f64,
    rng: &mut Rng,
    cells: usize,
) -> (usize, usize) {
    let candidates = candidate_cells(graph, env);
    if rng.next_f64() < epsilon {
        candidates[rng.next_below(candidates.len())]
    } else {
        let mut best = 0;
        for i in 1..candidates.len() {
            let qi = high_q[state_idx * cells + env.cell_index(candidates[i])];
            if qi > high_q[state_idx * cells + env.cell_index(candidates[best])] {
                best = i;
            }
        }
        candidates[best]
    }
}

#[allow(clippy::too_many_arguments)]
fn close_window(
    high_q: &mut [f64],
    window: &Window,
    close_idx: usize,
    bootstrap: bool,
    params: &ExperimentParams,
    graph: &StateGraph,
    env: &GridEnv,
    cells: usize,
) {
    let mut target = window.sum;
    if bootstrap {
        let candidates = candidate_cells(graph, env);
        target += params.high_discount.powi(window.len)
            * best_candidate_value(high_q, cells, close_idx, &candidates, env);
    }
    let entry = &mut high_q[window.state_idx * cells + window.subgoal_idx];
    *entry += params.high_learning_rate * (target - *entry);
}

/// First index of the largest value.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::squared_distance;
    use crate::shaping::RewardMode;

    const CORRIDOR: &str = "\
#######
#S   G#
#######";

    fn corridor(mode: RewardMode) -> GridEnv {
        GridEnv::from_map(CORRIDOR, mode).unwrap()
    }

    fn small_params() -> ExperimentParams {
        ExperimentParams {
            graph_capacity: 8,
            max_steps: 40,
            encoder_dims: vec![2, 8, 2],
            ..ExperimentParams::default()
        }
    }

    fn config() -> ShapingConfig {
        ShapingConfig { alpha_high: 0.4, alpha_low: 0.2, subgoal_interval: 4, beta: 0.05 }
    }

    #[test]
    fn variants_mask_the_shaping_weights() {
        let cfg = config();
        assert_eq!(Variant::Both.effective_alphas(&cfg), (0.4, 0.2));
        assert_eq!(Variant::HighOnly.effective_alphas(&cfg), (0.4, 0.0));
        assert_eq!(Variant::LowOnly.effective_alphas(&cfg), (0.0, 0.2));
        assert_eq!(Variant::Vanilla.effective_alphas(&cfg), (0.0, 0.0));
        assert_eq!("high_only".parse::<Variant>().unwrap(), Variant::HighOnly);
        assert!("High".parse::<Variant>().is_err());
    }

    #[test]
    fn params_validation_rejects_bad_settings() {
        assert!(ExperimentParams::default().validate().is_ok());
        let bad = [
            ExperimentParams { max_steps: 0, ..ExperimentParams::default() },
            ExperimentParams { low_discount: 1.0, ..ExperimentParams::default() },
            ExperimentParams { epsilon_start: 1.5, ..ExperimentParams::default() },
            ExperimentParams { encoder_dims: vec![3, 8, 2], ..ExperimentParams::default() },
            ExperimentParams { encoder_pair_fraction: 0.0, ..ExperimentParams::default() },
            ExperimentParams { high_learning_rate: 0.0, ..ExperimentParams::default() },
        ];
        for params in bad {
            assert!(matches!(params.validate(), Err(ShapingError::InvalidConfig(_))));
        }
    }

    #[test]
    fn unreachable_goals_are_rejected_before_running() {
        let walled = GridEnv::from_map("#####\n#S#G#\n#####", RewardMode::Sparse).unwrap();
        let err = run_experiment(&walled, &config(), Variant::Vanilla, 3, 0).unwrap_err();
        assert!(matches!(err, ShapingError::InvalidEnv(_)));
        let one_way = GridEnv::from_map("#####\n#S<G#\n#####", RewardMode::Sparse).unwrap();
        let err = run_experiment(&one_way, &config(), Variant::Both, 3, 0).unwrap_err();
        assert!(matches!(err, ShapingError::InvalidEnv(_)));
        let err = run_experiment(&corridor(RewardMode::Sparse), &config(), Variant::Both, 0, 0)
            .unwrap_err();
        assert!(matches!(err, ShapingError::InvalidConfig(_)));
    }

    #[test]
    fn starting_on_the_goal_succeeds_immediately_for_every_variant() {
        let mut env = corridor(RewardMode::Sparse);
        env.set_start(env.goal()).unwrap();
        for variant in Variant::ALL {
            let table = run_experiment(&env, &config(), variant, 4, 9).unwrap();
            assert_eq!(table.len(), 4);
            for row in table.rows() {
                assert!(row.success);
                assert_eq!(row.steps, 0);
                assert_eq!(row.external_return, 0.0);
            }
        }
    }

    #[test]
    fn same_seed_reproduces_outcomes_and_events() {
        let env = corridor(RewardMode::Dense);
        let mut events_a = Vec::new();
        let mut events_b = Vec::new();
        let a = run_experiment_with(&env, &config(), &small_params(), Variant::Both, 6, 123, &mut |e| {
            events_a.push(e.clone())
        })
        .unwrap();
        let b = run_experiment_with(&env, &config(), &small_params(), Variant::Both, 6, 123, &mut |e| {
            events_b.push(e.clone())
        })
        .unwrap();
        assert!(a.same_outcomes(&b));
        assert_eq!(events_a, events_b);
    }

    #[test]
    fn subgoals_are_reselected_exactly_on_interval_boundaries() {
        let env = corridor(RewardMode::Sparse);
        let mut selections: Vec<(usize, usize)> = Vec::new();
        let mut step_counts = [0usize; 5];
        run_experiment_with(&env, &config(), &small_params(), Variant::Both, 5, 42, &mut |e| {
            match *e {
                ExperimentEvent::SubgoalSelected { episode, step, .. } => {
                    selections.push((episode, step))
                }
                ExperimentEvent::StepRewards { episode, .. } => step_counts[episode] += 1,
                _ => {}
            }
        })
        .unwrap();
        for episode in 0..5 {
            let expected: Vec<usize> =
                (0..step_counts[episode]).step_by(config().subgoal_interval).collect();
            let got: Vec<usize> = selections
                .iter()
                .filter(|(e, _)| *e == episode)
                .map(|&(_, s)| s)
                .collect();
            assert_eq!(got, expected, "episode {episode}");
        }
    }

    #[test]
    fn vanilla_rewards_match_the_classical_forms_bitwise() {
        let env = corridor(RewardMode::Dense);
        let mut checked = 0;
        run_experiment_with(&env, &config(), &small_params(), Variant::Vanilla, 6, 7, &mut |e| {
            if let ExperimentEvent::StepRewards { next, subgoal, external, high, low, .. } = *e {
                assert_eq!(high.to_bits(), external.to_bits());
                let classical = -squared_distance(&env.feature(next), &env.feature(subgoal));
                assert_eq!(low.to_bits(), classical.to_bits());
                checked += 1;
            }
        })
        .unwrap();
        assert!(checked > 0);
    }

    #[test]
    fn zero_weights_reproduce_vanilla_while_still_training_the_encoder() {
        let env = corridor(RewardMode::Dense);
        let zeroed = ShapingConfig { alpha_high: 0.0, alpha_low: 0.0, ..config() };
        let mut rewards_zero = Vec::new();
        let mut trains = 0;
        let masked = run_experiment_with(&env, &zeroed, &small_params(), Variant::Both, 6, 11, &mut |e| {
            match *e {
                ExperimentEvent::StepRewards { high, low, .. } => {
                    rewards_zero.push((high.to_bits(), low.to_bits()))
                }
                ExperimentEvent::EncoderTrained { .. } => trains += 1,
                _ => {}
            }
        })
        .unwrap();
        let mut rewards_vanilla = Vec::new();
        let vanilla = run_experiment_with(&env, &config(), &small_params(), Variant::Vanilla, 6, 11, &mut |e| {
            if let ExperimentEvent::StepRewards { high, low, .. } = *e {
                rewards_vanilla.push((high.to_bits(), low.to_bits()));
            }
        })
        .unwrap();
        assert!(masked.same_outcomes(&vanilla));
        assert_eq!(rewards_zero, rewards_vanilla);
        assert!(trains > 0, "the encoder should keep training at zero weights");
    }

    #[test]
    fn corridor_is_learned_and_rows_cover_every_episode() {
        let env = corridor(RewardMode::Dense);
        let episodes = 60;
        let table = run_experiment_with(
            &env,
            &config(),
            &small_params(),
            Variant::Both,
            episodes,
            5,
            &mut |_| {},
        )
        .unwrap();
        assert_eq!(table.len(), episodes);
        for (i, row) in table.rows().iter().enumerate() {
            assert_eq!(row.episode, i);
            assert!(row.external_return.is_finite());
            assert!(row.steps <= small_params().max_steps);
        }
        assert!(
            table.trailing_success_rate(10) >= 0.8,
            "trailing success {}",
            table.trailing_success_rate(10)
        );
    }
}
