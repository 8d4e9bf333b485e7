//! Command-line argument declarations. Flags override config values;
//! anything left unset falls back to the config file, then to defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "denserew",
    version,
    about = "Dense-reward construction toolkit: hierarchical graph shaping, \
             Shapley credit assignment, and spectral value transfer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run hierarchical shaping variants on a grid maze and emit learning curves
    #[command(name = "g4rl-run")]
    G4rlRun(G4rlArgs),
    /// Compute per-unit credit for a token-sequence game and place it on the timeline
    #[command(name = "scar-credit")]
    ScarCredit(ScarCreditArgs),
    /// Check reward-placement policy invariance on random tree MDPs
    #[command(name = "scar-invariance")]
    ScarInvariance(ScarInvarianceArgs),
    /// Transfer value labels between spectrally matched mazes and compare learning speed
    #[command(name = "transfer-run")]
    TransferRun(TransferArgs),
    /// Measure spectral distances across seeded walks and propose matching tolerances
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
pub struct G4rlArgs {
    /// Config file with [run], [shaping], [graph], [encoder], [learner] sections
    #[arg(long)]
    pub config: PathBuf,
    /// Number of seeds to run (overrides the config)
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Episodes per run (overrides the config)
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Comma-separated variants: both,high_only,low_only,vanilla
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    /// Output directory (falls back to $DENSEREW_OUT, then ./out)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write SVG learning-curve plots
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct ScarCreditArgs {
    /// Game file: a fresh game (tokens + oracle) or a replay dump
    #[arg(long)]
    pub game: PathBuf,
    /// Credit allocator: exact | owen | hier
    #[arg(long, default_value = "exact")]
    pub method: String,
    /// Unit granularity for fresh games: tokens | sentences | spans
    #[arg(long)]
    pub partition: Option<String>,
    /// Blend weight in [0, 1] between the terminal reward and placed credits
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// KL penalty coefficient applied to the game file's log-probabilities
    #[arg(long, default_value_t = 0.0)]
    pub beta_kl: f64,
    /// Output directory (falls back to $DENSEREW_OUT, then ./out)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScarInvarianceArgs {
    /// Number of random MDPs to test
    #[arg(long, default_value_t = 20)]
    pub mdps: usize,
    /// States per MDP
    #[arg(long, default_value_t = 6)]
    pub states: usize,
    /// Base seed for MDP generation
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output directory (falls back to $DENSEREW_OUT, then ./out)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Config file with [run], [source], [transfer] sections
    #[arg(long)]
    pub config: PathBuf,
    /// Number of seeds to run (overrides the config)
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Intrinsic-reward weight on transferred labels (overrides the config)
    #[arg(long)]
    pub beta: Option<f64>,
    /// Output directory (falls back to $DENSEREW_OUT, then ./out)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG success-curve plot
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// First maze map
    #[arg(long)]
    pub map_a: PathBuf,
    /// Structurally different maze map to contrast against
    #[arg(long)]
    pub map_b: PathBuf,
    /// Seeded random walks per maze
    #[arg(long, default_value_t = 5)]
    pub walks: usize,
    /// Steps per walk
    #[arg(long, default_value_t = 4000)]
    pub steps: usize,
    /// Base seed for the walks
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory (falls back to $DENSEREW_OUT, then ./out)
    #[arg(long)]
    pub out: Option<PathBuf>,
}
