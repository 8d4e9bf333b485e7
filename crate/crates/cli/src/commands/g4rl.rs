//! `g4rl-run`: hierarchical shaping variants on a grid maze, one seeded
//! run per (variant, seed) pair, with per-seed and aggregate learning
//! curves.

use std::path::Path;
use std::time::Instant;

use denserew::shaping::{
    run_experiment_with, ExperimentParams, GridEnv, MetricsTable, RewardMode, ShapingConfig,
    Variant,
};
use denserew::state_graph::EvictionPolicy;

use crate::args::G4rlArgs;
use crate::commands::shaping_error;
use crate::config::Config;
use crate::plot::{line_plot, Series};
use crate::{out, CliError};

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    (
        "run",
        &["map", "reward", "episodes", "seeds", "seed_base", "variants", "success_window"],
    ),
    ("shaping", &["alpha_high", "alpha_low", "subgoal_interval", "beta"]),
    ("graph", &["capacity", "epsilon_d", "eviction", "sample_interval"]),
    ("encoder", &["dims", "learning_rate", "steps_per_phase", "pair_fraction"]),
    (
        "learner",
        &[
            "low_learning_rate",
            "low_discount",
            "high_learning_rate",
            "high_discount",
            "epsilon_start",
            "epsilon_end",
            "max_steps",
        ],
    ),
];

/// Everything a batch of runs needs, resolved from config plus overrides.
pub struct G4rlSetup {
    pub env: GridEnv,
    pub shaping: ShapingConfig,
    pub params: ExperimentParams,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    pub success_window: usize,
}

/// Reads a map file, with relative paths anchored at the config file.
pub fn load_map(config_path: &Path, map_value: &str, reward: RewardMode) -> Result<GridEnv, CliError> {
    let map_path = {
        let raw = Path::new(map_value);
        if raw.is_absolute() {
            raw.to_path_buf()
        } else {
            config_path.parent().unwrap_or(Path::new(".")).join(raw)
        }
    };
    let text = std::fs::read_to_string(&map_path).map_err(|err| {
        CliError::Runtime(format!("cannot read map {}: {err}", map_path.display()))
    })?;
    GridEnv::from_map(&text, reward).map_err(shaping_error)
}

pub(crate) fn parse_reward(name: &str) -> Result<RewardMode, CliError> {
    match name {
        "sparse" => Ok(RewardMode::Sparse),
        "dense" => Ok(RewardMode::Dense),
        other => Err(CliError::Validation(format!(
            "unknown reward mode `{other}`; use sparse|dense"
        ))),
    }
}

fn parse_eviction(name: &str) -> Result<EvictionPolicy, CliError> {
    match name {
        "oldest" => Ok(EvictionPolicy::Oldest),
        "weakest" => Ok(EvictionPolicy::WeakestConnected),
        other => Err(CliError::Validation(format!(
            "unknown eviction policy `{other}`; use oldest|weakest"
        ))),
    }
}

fn parse_variants(labels: &[String]) -> Result<Vec<Variant>, CliError> {
    let mut variants = Vec::new();
    for label in labels {
        let variant: Variant = label.parse().map_err(CliError::Validation)?;
        if variants.contains(&variant) {
            return Err(CliError::Validation(format!("variant `{label}` listed twice")));
        }
        variants.push(variant);
    }
    if variants.is_empty() {
        return Err(CliError::Validation("no variants selected".to_string()));
    }
    Ok(variants)
}

/// Resolves the full run setup; flags beat config values beat defaults.
pub fn setup_from_file(
    config_path: &Path,
    seeds: Option<usize>,
    episodes: Option<usize>,
    variants: Option<&[String]>,
) -> Result<G4rlSetup, CliError> {
    let config = Config::from_file(config_path)?;
    config.check_known(KNOWN_KEYS)?;

    let map_value = config.raw("run", "map").ok_or_else(|| {
        CliError::Validation("config needs `map` in section `[run]`".to_string())
    })?;
    let reward = parse_reward(config.raw("run", "reward").unwrap_or("sparse"))?;
    let env = load_map(config_path, map_value, reward)?;

    let defaults = ExperimentParams::default();
    let shaping = ShapingConfig {
        alpha_high: config.parsed_or("shaping", "alpha_high", 0.5)?,
        alpha_low: config.parsed_or("shaping", "alpha_low", 0.5)?,
        subgoal_interval: config.parsed_or("shaping", "subgoal_interval", 10)?,
        beta: config.parsed_or("shaping", "beta", 0.2)?,
    };
    let encoder_dims = match config.list("encoder", "dims") {
        None => defaults.encoder_dims.clone(),
        Some(items) => items
            .iter()
            .map(|item| {
                item.parse::<usize>().map_err(|err| {
                    CliError::Validation(format!(
                        "config [encoder] dims: cannot parse `{item}`: {err}"
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    let params = ExperimentParams {
        graph_capacity: config.parsed_or("graph", "capacity", defaults.graph_capacity)?,
        epsilon_d: config.parsed_or("graph", "epsilon_d", defaults.epsilon_d)?,
        eviction: match config.raw("graph", "eviction") {
            Some(name) => parse_eviction(name)?,
            None => defaults.eviction,
        },
        sample_interval: config
            .parsed_or("graph", "sample_interval", defaults.sample_interval)?,
        max_steps: config.parsed_or("learner", "max_steps", defaults.max_steps)?,
        encoder_dims,
        encoder_learning_rate: config
            .parsed_or("encoder", "learning_rate", defaults.encoder_learning_rate)?,
        encoder_steps_per_phase: config
            .parsed_or("encoder", "steps_per_phase", defaults.encoder_steps_per_phase)?,
        encoder_pair_fraction: config
            .parsed_or("encoder", "pair_fraction", defaults.encoder_pair_fraction)?,
        low_learning_rate: config
            .parsed_or("learner", "low_learning_rate", defaults.low_learning_rate)?,
        low_discount: config.parsed_or("learner", "low_discount", defaults.low_discount)?,
        high_learning_rate: config
            .parsed_or("learner", "high_learning_rate", defaults.high_learning_rate)?,
        high_discount: config.parsed_or("learner", "high_discount", defaults.high_discount)?,
        epsilon_start: config.parsed_or("learner", "epsilon_start", defaults.epsilon_start)?,
        epsilon_end: config.parsed_or("learner", "epsilon_end", defaults.epsilon_end)?,
    };
    shaping.validate().map_err(shaping_error)?;
    params.validate().map_err(shaping_error)?;

    let episodes = match episodes {
        Some(value) => value,
        None => config.parsed_or("run", "episodes", 500)?,
    };
    let seed_count = match seeds {
        Some(value) => value,
        None => config.parsed_or("run", "seeds", 20)?,
    };
    if seed_count == 0 {
        return Err(CliError::Validation("need at least one seed".to_string()));
    }
    let seed_base: u64 = config.parsed_or("run", "seed_base", 0)?;
    let variant_labels = match variants {
        Some(labels) => labels.to_vec(),
        None => config.list("run", "variants").unwrap_or_else(|| {
            Variant::ALL.iter().map(|v| v.label().to_string()).collect()
        }),
    };

    Ok(G4rlSetup {
        env,
        shaping,
        params,
        episodes,
        seeds: (0..seed_count as u64).map(|k| seed_base + k).collect(),
        variants: parse_variants(&variant_labels)?,
        success_window: config.parsed_or("run", "success_window", 50)?,
    })
}

/// Per-episode means across seeds, as CSV plus the success curve.
pub fn aggregate(tables: &[MetricsTable], episodes: usize) -> (String, Vec<(f64, f64)>) {
    let mut csv = String::from("episode,success_rate,mean_return,mean_steps\n");
    let mut curve = Vec::with_capacity(episodes);
    let n = tables.len() as f64;
    for e in 0..episodes {
        let success =
            tables.iter().map(|t| t.rows()[e].success as u8 as f64).sum::<f64>() / n;
        let mean_return =
            tables.iter().map(|t| t.rows()[e].external_return).sum::<f64>() / n;
        let mean_steps = tables.iter().map(|t| t.rows()[e].steps as f64).sum::<f64>() / n;
        csv.push_str(&format!("{e},{success},{mean_return},{mean_steps}\n"));
        curve.push((e as f64, success));
    }
    (csv, curve)
}

pub fn run(args: &G4rlArgs) -> Result<(), CliError> {
    let setup = setup_from_file(
        &args.config,
        args.seeds,
        args.episodes,
        args.variants.as_deref(),
    )?;
    let dir = out::prepare(args.out.as_deref())?;
    let started = Instant::now();

    let mut summary =
        String::from("variant,seed,final_success_rate,auc,episodes_to_90\n");
    let mut curves = Vec::new();
    for &variant in &setup.variants {
        let mut tables = Vec::with_capacity(setup.seeds.len());
        for &seed in &setup.seeds {
            let table = run_experiment_with(
                &setup.env,
                &setup.shaping,
                &setup.params,
                variant,
                setup.episodes,
                seed,
                &mut |_| {},
            )
            .map_err(shaping_error)?;
            out::write_text(
                &dir,
                &format!("g4rl_{}_seed{}.csv", variant.label(), seed),
                &table.to_csv(),
            )?;
            let reached = table
                .first_episode_at_success(setup.success_window, 0.9)
                .map(|e| e.to_string())
                .unwrap_or_default();
            summary.push_str(&format!(
                "{},{},{},{},{}\n",
                variant.label(),
                seed,
                table.trailing_success_rate(setup.success_window),
                table.return_auc(),
                reached
            ));
            tables.push(table);
        }
        let (csv, curve) = aggregate(&tables, setup.episodes);
        out::write_text(&dir, &format!("g4rl_{}_mean.csv", variant.label()), &csv)?;
        let final_success = tables
            .iter()
            .map(|t| t.trailing_success_rate(setup.success_window))
            .sum::<f64>()
            / tables.len() as f64;
        let mean_auc =
            tables.iter().map(MetricsTable::return_auc).sum::<f64>() / tables.len() as f64;
        println!(
            "variant {}: mean final success {final_success:.3}, mean return AUC {mean_auc:.3}",
            variant.label()
        );
        curves.push(Series { label: variant.label().to_string(), points: curve });
    }
    out::write_text(&dir, "g4rl_summary.csv", &summary)?;
    if args.plot {
        let svg = line_plot("success rate across seeds", "episode", "success rate", &curves);
        out::write_text(&dir, "g4rl_success.svg", &svg)?;
    }
    println!(
        "ran {} variants x {} seeds x {} episodes in {:.1}s; artifacts in {}",
        setup.variants.len(),
        setup.seeds.len(),
        setup.episodes,
        started.elapsed().as_secs_f64(),
        dir.display()
    );
    Ok(())
}
