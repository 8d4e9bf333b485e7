//! `transfer-run`: learn state values in a maze, store them on a swept
//! state graph, relabel the graph's slots, recover the pairing spectrally,
//! and compare target-run learning speed with and without the transferred
//! labels as intrinsic reward.

use std::path::Path;

use denserew::rng::Rng;
use denserew::shaping::{run_shaped_q, FlatParams, GridEnv, MetricsTable};
use denserew::spectral::{
    label_value, laplacian, match_nodes, spectra_distance, spectra_match, spectral_summary,
    transfer_intrinsic, MatchResult, SpectralSummary,
};
use denserew::state_graph::StateGraph;

use crate::args::TransferArgs;
use crate::commands::g4rl::{load_map, parse_reward};
use crate::commands::shaping_error;
use crate::config::Config;
use crate::plot::{line_plot, Series};
use crate::walks::{random_permutation, sweep_graph};
use crate::{out, runtime, CliError};

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    (
        "run",
        &[
            "map",
            "reward",
            "episodes",
            "seeds",
            "seed_base",
            "success_window",
            "max_steps",
            "learning_rate",
            "discount",
            "epsilon_start",
            "epsilon_end",
        ],
    ),
    ("source", &["episodes", "seed"]),
    (
        "transfer",
        &["beta", "epsilon_lambda", "epsilon_v", "gap_tol", "relabel_seed"],
    ),
];

/// Resolved transfer-run parameters.
pub struct TransferSetup {
    pub env: GridEnv,
    pub flat: FlatParams,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub success_window: usize,
    pub source_episodes: usize,
    pub source_seed: u64,
    pub beta: f64,
    pub epsilon_lambda: f64,
    pub epsilon_v: f64,
    pub gap_tol: f64,
    pub relabel_seed: u64,
}

/// Episodes until the trailing success rate first reaches 90%, per seed,
/// without and with the transferred intrinsic reward.
#[derive(Debug, Clone, Copy)]
pub struct SeedOutcome {
    pub seed: u64,
    pub plain: Option<usize>,
    pub transferred: Option<usize>,
}

/// Everything the command reports or writes.
pub struct TransferReport {
    pub spectra_distance: f64,
    pub pairing: Vec<usize>,
    pub per_seed: Vec<SeedOutcome>,
    pub spectrum_source: String,
    pub spectrum_target: String,
    pub matching_csv: String,
    pub plain_curve: Vec<(f64, f64)>,
    pub transfer_curve: Vec<(f64, f64)>,
}

impl TransferReport {
    /// Fraction of seeds where the transferred run reached the success
    /// target strictly earlier; an unreached target counts as slowest.
    pub fn fraction_faster(&self) -> f64 {
        let faster = self
            .per_seed
            .iter()
            .filter(|row| match (row.transferred, row.plain) {
                (Some(t), Some(p)) => t < p,
                (Some(_), None) => true,
                _ => false,
            })
            .count();
        faster as f64 / self.per_seed.len().max(1) as f64
    }
}

pub fn setup_from_file(
    config_path: &Path,
    seeds: Option<usize>,
    beta: Option<f64>,
) -> Result<TransferSetup, CliError> {
    let config = Config::from_file(config_path)?;
    config.check_known(KNOWN_KEYS)?;

    let map_value = config.raw("run", "map").ok_or_else(|| {
        CliError::Validation("config needs `map` in section `[run]`".to_string())
    })?;
    let reward = parse_reward(config.raw("run", "reward").unwrap_or("sparse"))?;
    let env = load_map(config_path, map_value, reward)?;

    let defaults = FlatParams::default();
    let flat = FlatParams {
        learning_rate: config.parsed_or("run", "learning_rate", defaults.learning_rate)?,
        discount: config.parsed_or("run", "discount", defaults.discount)?,
        epsilon_start: config.parsed_or("run", "epsilon_start", defaults.epsilon_start)?,
        epsilon_end: config.parsed_or("run", "epsilon_end", defaults.epsilon_end)?,
        max_steps: config.parsed_or("run", "max_steps", defaults.max_steps)?,
    };
    flat.validate().map_err(shaping_error)?;

    let seed_count = match seeds {
        Some(value) => value,
        None => config.parsed_or("run", "seeds", 20)?,
    };
    if seed_count == 0 {
        return Err(CliError::Validation("need at least one seed".to_string()));
    }
    let seed_base: u64 = config.parsed_or("run", "seed_base", 0)?;
    let beta = match beta {
        Some(value) => value,
        None => config.parsed_or("transfer", "beta", 0.5)?,
    };
    if beta < 0.0 || !beta.is_finite() {
        return Err(CliError::Validation(format!(
            "transfer beta must be finite and nonnegative, got {beta}"
        )));
    }

    Ok(TransferSetup {
        env,
        flat,
        episodes: config.parsed_or("run", "episodes", 400)?,
        seeds: (0..seed_count as u64).map(|k| seed_base + k).collect(),
        success_window: config.parsed_or("run", "success_window", 20)?,
        source_episodes: config.parsed_or("source", "episodes", 600)?,
        source_seed: config.parsed_or("source", "seed", 101)?,
        beta,
        epsilon_lambda: config.parsed_or("transfer", "epsilon_lambda", 1e-9)?,
        epsilon_v: config.parsed_or("transfer", "epsilon_v", 1e-6)?,
        gap_tol: config.parsed_or("transfer", "gap_tol", 1e-6)?,
        relabel_seed: config.parsed_or("transfer", "relabel_seed", 5)?,
    })
}

/// Eigenvalues followed by the eigenvector matrix, one node row per line.
pub fn spectrum_csv(summary: &SpectralSummary) -> String {
    let mut csv = String::from("eigenvalues\n");
    let lambdas: Vec<String> =
        summary.eigenvalues().iter().map(|v| format!("{v}")).collect();
    csv.push_str(&lambdas.join(","));
    csv.push_str("\neigenvectors\n");
    let vectors = summary.eigenvectors();
    for row in 0..summary.len() {
        let entries: Vec<String> =
            (0..summary.len()).map(|col| format!("{}", vectors[(row, col)])).collect();
        csv.push_str(&entries.join(","));
        csv.push('\n');
    }
    csv
}

fn matching_csv(graph1: &StateGraph, graph2: &StateGraph, pairing: &[usize]) -> String {
    let ids1 = graph1.occupied_ids();
    let ids2 = graph2.occupied_ids();
    let mut csv = String::from("node2_id,node1_id\n");
    for (row2, &row1) in pairing.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", ids2[row2], ids1[row1]));
    }
    csv
}

fn mean_success_curve(tables: &[MetricsTable], episodes: usize) -> Vec<(f64, f64)> {
    (0..episodes)
        .map(|e| {
            let rate = tables.iter().map(|t| t.rows()[e].success as u8 as f64).sum::<f64>()
                / tables.len() as f64;
            (e as f64, rate)
        })
        .collect()
}

/// The full pipeline: source values, swept graph, relabeled copy, spectral
/// match, then seeded target runs with and without the intrinsic bonus.
pub fn run_pipeline(setup: &TransferSetup) -> Result<TransferReport, CliError> {
    let env = &setup.env;
    let (_, values) = run_shaped_q(
        env,
        &setup.flat,
        setup.source_episodes,
        setup.source_seed,
        &mut |_| 0.0,
    )
    .map_err(shaping_error)?;

    let (mut graph1, cells) = sweep_graph(env)?;
    for (slot, &cell) in cells.iter().enumerate() {
        label_value(&mut graph1, slot, values[env.cell_index(cell)]).map_err(runtime)?;
    }
    let mut relabel_rng = Rng::new(setup.relabel_seed);
    let permutation = random_permutation(graph1.node_count(), &mut relabel_rng);
    let graph2 = graph1.relabeled(&permutation).map_err(runtime)?;

    let s1 =
        spectral_summary(&laplacian(&graph1).map_err(runtime)?, setup.gap_tol).map_err(runtime)?;
    let s2 =
        spectral_summary(&laplacian(&graph2).map_err(runtime)?, setup.gap_tol).map_err(runtime)?;
    if !spectra_match(&s1, &s2, setup.epsilon_lambda).map_err(runtime)? {
        return Err(CliError::Runtime(format!(
            "spectra of the relabeled graphs differ by {}, beyond epsilon_lambda {}",
            spectra_distance(&s1, &s2),
            setup.epsilon_lambda
        )));
    }
    let pairing = match match_nodes(&s1, &s2, setup.epsilon_v, setup.epsilon_lambda) {
        MatchResult::Matched { pairing } => pairing,
        MatchResult::RepeatedEigenvalues => {
            return Err(CliError::Runtime(
                "the maze graph has repeated eigenvalues; node matching is unavailable \
                 (try a less symmetric maze)"
                    .to_string(),
            ))
        }
        other => {
            return Err(CliError::Runtime(format!("node matching failed: {other:?}")))
        }
    };

    let labels = |row1: usize| graph1.label(row1);
    let mut per_seed = Vec::with_capacity(setup.seeds.len());
    let mut plain_tables = Vec::with_capacity(setup.seeds.len());
    let mut transfer_tables = Vec::with_capacity(setup.seeds.len());
    for &seed in &setup.seeds {
        let (plain_table, _) =
            run_shaped_q(env, &setup.flat, setup.episodes, seed, &mut |_| 0.0)
                .map_err(shaping_error)?;
        let mut bonus = |next: (usize, usize)| {
            transfer_intrinsic(&graph2, &pairing, labels, &env.feature(next), setup.beta)
                .unwrap_or(0.0)
        };
        let (transfer_table, _) =
            run_shaped_q(env, &setup.flat, setup.episodes, seed, &mut bonus)
                .map_err(shaping_error)?;
        per_seed.push(SeedOutcome {
            seed,
            plain: plain_table.first_episode_at_success(setup.success_window, 0.9),
            transferred: transfer_table.first_episode_at_success(setup.success_window, 0.9),
        });
        plain_tables.push(plain_table);
        transfer_tables.push(transfer_table);
    }

    Ok(TransferReport {
        spectra_distance: spectra_distance(&s1, &s2),
        spectrum_source: spectrum_csv(&s1),
        spectrum_target: spectrum_csv(&s2),
        matching_csv: matching_csv(&graph1, &graph2, &pairing),
        pairing,
        per_seed,
        plain_curve: mean_success_curve(&plain_tables, setup.episodes),
        transfer_curve: mean_success_curve(&transfer_tables, setup.episodes),
    })
}

fn seeds_csv(report: &TransferReport) -> String {
    let mut csv = String::from("seed,episodes_to_90_plain,episodes_to_90_transfer\n");
    for row in &report.per_seed {
        let fmt = |v: Option<usize>| v.map(|e| e.to_string()).unwrap_or_default();
        csv.push_str(&format!("{},{},{}\n", row.seed, fmt(row.plain), fmt(row.transferred)));
    }
    csv
}

pub fn run(args: &TransferArgs) -> Result<(), CliError> {
    let setup = setup_from_file(&args.config, args.seeds, args.beta)?;
    let report = run_pipeline(&setup)?;
    let dir = out::prepare(args.out.as_deref())?;

    out::write_text(&dir, "transfer_seeds.csv", &seeds_csv(&report))?;
    out::write_text(&dir, "spectrum_source.csv", &report.spectrum_source)?;
    out::write_text(&dir, "spectrum_target.csv", &report.spectrum_target)?;
    out::write_text(&dir, "matching.csv", &report.matching_csv)?;
    if args.plot {
        let svg = line_plot(
            "success rate across seeds",
            "episode",
            "success rate",
            &[
                Series { label: "plain".to_string(), points: report.plain_curve.clone() },
                Series {
                    label: format!("transfer beta={}", setup.beta),
                    points: report.transfer_curve.clone(),
                },
            ],
        );
        out::write_text(&dir, "transfer_success.svg", &svg)?;
    }

    println!(
        "spectra matched (distance {:.3e}); {} nodes paired",
        report.spectra_distance,
        report.pairing.len()
    );
    println!(
        "transfer beta={} reached 90% success earlier than beta=0 in {:.0}% of {} seeds",
        setup.beta,
        report.fraction_faster() * 100.0,
        report.per_seed.len()
    );
    println!("artifacts in {}", dir.display());
    Ok(())
}
