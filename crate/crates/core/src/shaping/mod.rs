//! Two-level reward shaping over grid worlds.
//!
//! A high-level policy picks a subgoal from the state graph every fixed
//! number of steps; a low-level policy chases that subgoal. Both levels
//! receive shaped rewards built from the graph autoencoder: the high
//! level adds a similarity bonus between the current state and the final
//! goal, the low level is paid for closing in on its subgoal, in feature
//! space and in embedding space.

mod env;
mod experiment;
mod flat;
mod metrics;

pub use env::{Action, GridEnv, RewardMode};
pub use experiment::{
    run_experiment, run_experiment_with, ExperimentEvent, ExperimentParams, Variant,
};
pub use flat::{run_shaped_q, FlatParams};
pub use metrics::{EpisodeRecord, MetricsTable};

use crate::autoencoder::{EncoderError, EncoderParams};
use crate::mat::squared_distance;
use crate::state_graph::GraphError;
use thiserror::Error;

/// Errors raised while configuring or running shaping experiments.
#[derive(Debug, Error)]
pub enum ShapingError {
    #[error("invalid environment: {0}")]
    InvalidEnv(String),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionError { expected: usize, got: usize },
    #[error("invalid shaping configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Weights and cadence of the shaping terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingConfig {
    /// Weight of the high-level embedding bonus.
    pub alpha_high: f64,
    /// Weight of the low-level embedding bonus.
    pub alpha_low: f64,
    /// Steps between subgoal selections; the high level acts whenever
    /// the step index is a multiple of this.
    pub subgoal_interval: usize,
    /// Graph train trigger threshold passed to
    /// [`StateGraph::should_train_and_reset`](crate::state_graph::StateGraph::should_train_and_reset).
    pub beta: f64,
}

impl ShapingConfig {
    pub fn validate(&self) -> Result<(), ShapingError> {
        if !(self.alpha_high >= 0.0 && self.alpha_high.is_finite()) {
            return Err(ShapingError::InvalidConfig(format!(
                "alpha_high must be finite and >= 0, got {}",
                self.alpha_high
            )));
        }
        if !(self.alpha_low >= 0.0 && self.alpha_low.is_finite()) {
            return Err(ShapingError::InvalidConfig(format!(
                "alpha_low must be finite and >= 0, got {}",
                self.alpha_low
            )));
        }
        if self.subgoal_interval == 0 {
            return Err(ShapingError::InvalidConfig(
                "subgoal_interval must be at least 1".into(),
            ));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(ShapingError::InvalidConfig(format!(
                "beta must be finite and > 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// High-level reward: the external reward plus a weighted embedding
/// similarity between the current state and the environment goal. A zero
/// weight skips the encoder entirely, so unshaped rewards pass through
/// bit for bit.
pub fn high_level_reward(
    external_reward: f64,
    state_feature: &[f64],
    goal_feature: &[f64],
    encoder: &EncoderParams,
    alpha_high: f64,
) -> Result<f64, ShapingError> {
    if alpha_high == 0.0 {
        return Ok(external_reward);
    }
    if state_feature.len() != goal_feature.len() {
        return Err(ShapingError::DimensionError {
            expected: state_feature.len(),
            got: goal_feature.len(),
        });
    }
    let a = encoder.encode(state_feature)?;
    let b = encoder.encode(goal_feature)?;
    Ok(external_reward + alpha_high * encoder.decode(&a, &b)?)
}

/// Low-level reward: the negative squared feature distance to the
/// subgoal plus a weighted embedding similarity with it. A zero weight
/// skips the encoder.
pub fn low_level_reward(
    next_feature: &[f64],
    subgoal_feature: &[f64],
    encoder: &EncoderParams,
    alpha_low: f64,
) -> Result<f64, ShapingError> {
    if next_feature.len() != subgoal_feature.len() {
        return Err(ShapingError::DimensionError {
            expected: next_feature.len(),
            got: subgoal_feature.len(),
        });
    }
    let base = -squared_distance(next_feature, subgoal_feature);
    if alpha_low == 0.0 {
        return Ok(base);
    }
    let a = encoder.encode(next_feature)?;
    let b = encoder.encode(subgoal_feature)?;
    Ok(base + alpha_low * encoder.decode(&a, &b)?)
}
