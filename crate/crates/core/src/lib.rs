//! Dense reward construction for sparse-reward learning problems.
//!
//! Three mechanisms are provided, each usable on its own:
//!
//! * [`state_graph`] + [`autoencoder`] + [`shaping`] — an online state graph
//!   built from observed transitions, a graph autoencoder trained to
//!   reconstruct its normalized adjacency, and hierarchical reward shaping
//!   that scores subgoals by embedding similarity.
//! * [`credit`] — cooperative-game credit assignment over text units
//!   (exact Shapley, Owen, and a hierarchical Owen variant with quadratic
//!   oracle cost) plus reward placement that provably preserves optimal
//!   policies.
//! * [`spectral`] — Laplacian spectra of state graphs, node matching between
//!   near-isomorphic graphs, and transfer of stored value labels as intrinsic
//!   reward in a new environment.

// Validation sites negate comparisons (`!(x > 0.0)`) so NaN fails closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Loop indices here are semantic (coalition bitmasks, node slot ids, matrix
// rows), not mere positions.
#![allow(clippy::needless_range_loop)]

pub mod autoencoder;
pub mod credit;
pub mod mat;
pub mod rng;
pub mod shaping;
pub mod spectral;
pub mod state_graph;
