//! Dense credit assignment for sequence-level rewards.
//!
//! A scalar reward attached to a whole token sequence is redistributed over
//! the units of that sequence (tokens, sentences, or spans) as cooperative
//! game credits, then placed back onto the trajectory timeline:
//!
//! 1. [`segment`] cuts the sequence into units and an optional coalition
//!    structure over them.
//! 2. [`CoalitionGame`] memoises a characteristic-function oracle over unit
//!    subsets, with the empty rendering's score subtracted so `v(∅) = 0`.
//! 3. [`exact_shapley`], [`owen_value`], and [`hierarchical_owen`] allocate
//!    the grand-coalition value across units; all three satisfy efficiency.
//! 4. [`place_rewards`] drops each credit at its unit's final timestep and
//!    [`total_reward`] blends the dense credits with the original terminal
//!    reward, preserving the per-trajectory reward sum for every blend
//!    weight.
//! 5. [`TrajectoryMdp`] and [`verify_policy_invariance`] check on small
//!    prefix-tree MDPs that the blend leaves optimal action sets unchanged.

mod game;
mod mdp;
mod placement;
mod values;

pub use game::{
    check_units, render_coalition, segment, CoalitionGame, CoalitionStructure, Hierarchy,
    Segmentation, Unit, EXACT_PLAYER_CAP, MASK_PLAYER_CAP,
};
pub use mdp::{
    decomposition_is_efficient, optimal_action_sets, verify_policy_invariance, TrajectoryMdp,
};
pub use placement::{credits_to_csv, kl_penalty, place_rewards, total_reward, RewardTrace};
pub use values::{exact_shapley, hierarchical_owen, owen_value, CreditVector};

use thiserror::Error;

/// Errors produced while segmenting, evaluating, or redistributing credit.
#[derive(Debug, Error)]
pub enum CreditError {
    /// The token sequence (or unit list) was empty.
    #[error("token sequence is empty")]
    EmptySequence,
    /// A player count exceeded the enumeration or bitmask cap.
    #[error("player count {count} exceeds the cap of {cap}")]
    TooManyPlayers { count: usize, cap: usize },
    /// The supplied unions do not partition the player set.
    #[error("not a partition of the player set: {0}")]
    InvalidPartition(String),
    /// The supplied hierarchy is not a tree whose leaves are the players.
    #[error("malformed hierarchy tree: {0}")]
    InvalidTree(String),
    /// Unit ranges, coalition masks, or unit end times are inconsistent.
    #[error("inconsistent boundaries: {0}")]
    BoundaryError(String),
    /// The dense/terminal blend weight lies outside `[0, 1]`.
    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    /// The KL penalty coefficient is negative.
    #[error("kl coefficient must be nonnegative, got {0}")]
    NegativeKlCoefficient(f64),
    /// Two vectors that must share a length do not.
    #[error("length mismatch: expected {expected}, got {got}")]
    DimensionError { expected: usize, got: usize },
    /// The transition structure is not a rooted tree of bounded size.
    #[error("invalid trajectory MDP: {0}")]
    InvalidMdp(String),
    /// A replayed game was asked for a coalition it never recorded.
    #[error("no recorded evaluation for coalition mask {0}")]
    MissingEvaluation(u64),
}
