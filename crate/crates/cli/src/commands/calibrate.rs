//! `calibrate`: measure spectral distances between seeded random-walk
//! graphs of the same maze and of structurally different mazes, then
//! propose matching tolerances sitting between the two scales.

use std::path::Path;

use denserew::rng::Rng;
use denserew::shaping::{GridEnv, RewardMode};
use denserew::spectral::{laplacian, spectra_distance, spectral_summary, SpectralSummary};

use crate::args::CalibrateArgs;
use crate::walks::{cell_epsilon, random_walk_graph};
use crate::{out, runtime, CliError};

const GAP_TOL: f64 = 1e-6;

struct WalkSummary {
    maze: &'static str,
    index: usize,
    summary: SpectralSummary,
}

fn load_maze(path: &Path) -> Result<GridEnv, CliError> {
    let text = std::fs::read_to_string(path).map_err(|err| {
        CliError::Runtime(format!("cannot read map {}: {err}", path.display()))
    })?;
    GridEnv::from_map(&text, RewardMode::Sparse).map_err(crate::commands::shaping_error)
}

/// Largest distance from any row of `s2`'s eigenvector matrix to its
/// nearest row in `s1`'s; the scale a row-matching tolerance must cover.
fn worst_nearest_row_distance(s1: &SpectralSummary, s2: &SpectralSummary) -> f64 {
    let n = s1.len();
    let v1 = s1.eigenvectors();
    let v2 = s2.eigenvectors();
    let mut worst = 0.0f64;
    for row2 in 0..n {
        let mut nearest = f64::INFINITY;
        for row1 in 0..n {
            let mut dist = 0.0;
            for col in 0..n {
                let diff = v2[(row2, col)] - v1[(row1, col)];
                dist += diff * diff;
            }
            nearest = nearest.min(dist.sqrt());
        }
        worst = worst.max(nearest);
    }
    worst
}

struct PairRow {
    kind: &'static str,
    a: String,
    b: String,
    spectra_distance: Option<f64>,
    row_distance: Option<f64>,
}

fn pair_rows(walks: &[WalkSummary]) -> Vec<PairRow> {
    let mut rows = Vec::new();
    for (i, first) in walks.iter().enumerate() {
        for second in walks.iter().skip(i + 1) {
            let kind = match (first.maze, second.maze) {
                ("a", "a") => "same_a",
                ("b", "b") => "same_b",
                _ => "cross",
            };
            let comparable = first.summary.len() == second.summary.len();
            rows.push(PairRow {
                kind,
                a: format!("{}{}", first.maze, first.index),
                b: format!("{}{}", second.maze, second.index),
                spectra_distance: comparable
                    .then(|| spectra_distance(&first.summary, &second.summary)),
                row_distance: comparable
                    .then(|| worst_nearest_row_distance(&first.summary, &second.summary)),
            });
        }
    }
    rows
}

/// Geometric midpoint of the same-maze and cross-maze scales, with
/// fallbacks when either side is empty or zero.
fn propose(max_same: Option<f64>, min_cross: Option<f64>, floor: f64) -> f64 {
    match (max_same, min_cross) {
        (Some(same), Some(cross)) if same > 0.0 && cross > same => (same * cross).sqrt(),
        (Some(same), _) if same > 0.0 => same * 10.0,
        (_, Some(cross)) if cross > 0.0 => cross / 10.0,
        _ => floor,
    }
}

pub fn run(args: &CalibrateArgs) -> Result<(), CliError> {
    if args.walks == 0 || args.steps == 0 {
        return Err(CliError::Validation(
            "walks and steps must both be at least 1".to_string(),
        ));
    }
    let maze_a = load_maze(&args.map_a)?;
    let maze_b = load_maze(&args.map_b)?;

    let base = Rng::new(args.seed);
    let mut walks = Vec::new();
    for (maze_name, env) in [("a", &maze_a), ("b", &maze_b)] {
        for index in 0..args.walks {
            let stream = if maze_name == "a" { 1 + index as u64 } else { 1001 + index as u64 };
            let seed = base.split(stream).next_u64();
            let graph = random_walk_graph(env, args.steps, cell_epsilon(env), seed)?;
            let summary = spectral_summary(&laplacian(&graph).map_err(runtime)?, GAP_TOL)
                .map_err(runtime)?;
            walks.push(WalkSummary { maze: maze_name, index, summary });
        }
    }

    let rows = pair_rows(&walks);
    let mut csv = String::from("kind,walk_a,walk_b,spectra_distance,worst_row_distance\n");
    for row in &rows {
        let fmt = |v: Option<f64>| v.map(|d| format!("{d}")).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.kind,
            row.a,
            row.b,
            fmt(row.spectra_distance),
            fmt(row.row_distance)
        ));
    }

    let same = |row: &&PairRow| row.kind != "cross";
    let max_same_spectra = rows
        .iter()
        .filter(same)
        .filter_map(|r| r.spectra_distance)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));
    let min_cross_spectra = rows
        .iter()
        .filter(|r| r.kind == "cross")
        .filter_map(|r| r.spectra_distance)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))));
    let max_same_rows = rows
        .iter()
        .filter(same)
        .filter_map(|r| r.row_distance)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));
    let min_cross_rows = rows
        .iter()
        .filter(|r| r.kind == "cross")
        .filter_map(|r| r.row_distance)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))));

    let epsilon_lambda = propose(max_same_spectra, min_cross_spectra, 1e-9);
    let epsilon_v = propose(max_same_rows, min_cross_rows, 1e-6);

    let dir = out::prepare(args.out.as_deref())?;
    out::write_text(&dir, "calibration.csv", &csv)?;
    let proposals = format!(
        "# tolerances proposed from {} walks x {} steps per maze\n[transfer]\nepsilon_lambda = {epsilon_lambda}\nepsilon_v = {epsilon_v}\n",
        args.walks, args.steps
    );
    out::write_text(&dir, "proposals.cfg", &proposals)?;

    println!(
        "same-maze spectra distances up to {}, cross-maze from {}",
        max_same_spectra.map(|d| format!("{d:.3e}")).unwrap_or_else(|| "n/a".to_string()),
        min_cross_spectra.map(|d| format!("{d:.3e}")).unwrap_or_else(|| "n/a".to_string())
    );
    println!("proposing epsilon_lambda = {epsilon_lambda:.3e}, epsilon_v = {epsilon_v:.3e}");
    println!("artifacts in {}", dir.display());
    Ok(())
}
