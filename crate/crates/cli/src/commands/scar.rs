//! `scar-credit`: segment a token sequence, allocate the sequence reward
//! over the units, and place the credits back on the timeline.

use std::path::Path;

use denserew::credit::{
    credits_to_csv, exact_shapley, hierarchical_owen, owen_value, place_rewards,
    render_coalition, segment, total_reward, CoalitionGame, CoalitionStructure, CreditError,
    Hierarchy, RewardTrace, Segmentation, Unit,
};

use crate::args::ScarCreditArgs;
use crate::gamefile::{replay_oracle, GameFile, GameInput};
use crate::{out, runtime, validation, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Exact,
    Owen,
    Hier,
}

impl Method {
    fn parse(name: &str) -> Result<Method, CliError> {
        match name {
            "exact" => Ok(Method::Exact),
            "owen" => Ok(Method::Owen),
            "hier" => Ok(Method::Hier),
            other => Err(CliError::Validation(format!(
                "unknown method `{other}`; use exact|owen|hier"
            ))),
        }
    }
}

fn default_delimiters() -> Vec<String> {
    [".", "!", "?"].map(str::to_string).to_vec()
}

pub fn run(args: &ScarCreditArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&args.alpha) {
        return Err(CliError::Validation(format!(
            "InvalidAlpha: the blend weight must lie in [0, 1], got {}",
            args.alpha
        )));
    }
    if args.beta_kl < 0.0 || !args.beta_kl.is_finite() {
        return Err(CliError::Validation(format!(
            "the KL coefficient must be finite and nonnegative, got {}",
            args.beta_kl
        )));
    }
    let method = Method::parse(&args.method)?;
    let input = GameFile::load(&args.game)?;
    let dir = out::prepare(args.out.as_deref())?;

    match input {
        GameInput::Fresh { tokens, oracle, delimiters, spans, logps } => {
            let partition = args.partition.as_deref().unwrap_or("tokens");
            let segmentation = match partition {
                "tokens" => Segmentation::TokenLevel,
                "sentences" => Segmentation::SentenceLevel {
                    delimiters: delimiters.unwrap_or_else(default_delimiters),
                },
                "spans" => Segmentation::SpanLevel { hierarchy: spans },
                other => {
                    return Err(CliError::Validation(format!(
                        "unknown partition `{other}`; use tokens|sentences|spans"
                    )))
                }
            };
            let (units, structure) = segment(&tokens, &segmentation).map_err(validation)?;
            let placeholder = oracle.placeholder.clone();
            let scoring_tokens = tokens.clone();
            let scoring_units = units.clone();
            let scorer = move |mask: u64| -> Result<f64, CreditError> {
                let rendered =
                    render_coalition(&scoring_tokens, &scoring_units, mask, &placeholder)?;
                Ok(oracle.score(&rendered))
            };
            let game = CoalitionGame::new(units, scorer).map_err(validation)?;
            finish(&dir, &tokens, game, structure, method, args, logps.as_ref())
        }
        GameInput::Replay { tokens, units, evaluations, logps } => {
            if args.partition.is_some() {
                return Err(CliError::Validation(
                    "a replay dump fixes its own units; drop --partition".to_string(),
                ));
            }
            let structure = CoalitionStructure::singletons(units.len());
            let game =
                CoalitionGame::new(units, replay_oracle(evaluations)).map_err(validation)?;
            finish(&dir, &tokens, game, structure, method, args, logps.as_ref())
        }
    }
}

fn finish<F>(
    dir: &Path,
    tokens: &[String],
    mut game: CoalitionGame<F>,
    mut structure: CoalitionStructure,
    method: Method,
    args: &ScarCreditArgs,
    logps: Option<&(Vec<f64>, Vec<f64>)>,
) -> Result<(), CliError>
where
    F: FnMut(u64) -> Result<f64, CreditError>,
{
    if method == Method::Hier && structure.hierarchy.is_none() {
        structure.hierarchy =
            Some(Hierarchy::balanced(game.player_count()).map_err(validation)?);
    }
    let credits = match method {
        Method::Exact => exact_shapley(&mut game),
        Method::Owen => owen_value(&mut game, &structure),
        Method::Hier => hierarchical_owen(&mut game, &structure),
    }
    .map_err(runtime)?;
    let grand_value = game.value(game.grand_coalition()).map_err(runtime)?;

    let horizon = game.units().last().map(|u| u.end).unwrap_or(0);
    let kl_terms = match logps {
        Some((policy, reference)) => {
            denserew::credit::kl_penalty(policy, reference, args.beta_kl).map_err(validation)?
        }
        None if args.beta_kl > 0.0 => {
            return Err(CliError::Validation(
                "--beta-kl needs logp_policy and logp_ref in the game file".to_string(),
            ))
        }
        None => vec![0.0; horizon],
    };
    let trace = RewardTrace {
        horizon,
        unit_end_times: game.units().iter().map(|u| u.end).collect(),
        kl_terms,
        terminal_reward: grand_value + game.baseline(),
        baseline: game.baseline(),
        alpha: args.alpha,
        kl_coefficient: args.beta_kl,
    };
    let placed = place_rewards(&credits, &trace).map_err(runtime)?;
    let totals = total_reward(&trace, &placed).map_err(runtime)?;

    let credits_csv = credits_to_csv(game.units(), &credits).map_err(runtime)?;
    let credits_path = out::write_text(dir, "credits.csv", &credits_csv)?;
    let rewards_path = out::write_text(dir, "rewards.csv", &rewards_csv(&trace, &placed, &totals))?;
    let dump = GameFile::dump(tokens, game.units(), &game.evaluation_table());
    let dump_path = dir.join("game_dump.json");
    dump.write(&dump_path)?;

    let residual = (credits.total() - grand_value).abs();
    println!(
        "allocated {} units over {} tokens with {}: total credit {}, efficiency residual {:.3e}",
        game.player_count(),
        horizon,
        args.method,
        credits.total(),
        residual
    );
    println!("coalition evaluations: {}", game.evaluations());
    print_units(tokens, game.units(), credits.values());
    println!(
        "wrote {}, {}, {}",
        credits_path.display(),
        rewards_path.display(),
        dump_path.display()
    );
    Ok(())
}

fn rewards_csv(trace: &RewardTrace, placed: &[f64], totals: &[f64]) -> String {
    let mut csv = String::from("t,kl,placed,total\n");
    for t in 0..trace.horizon {
        csv.push_str(&format!("{},{},{},{}\n", t + 1, trace.kl_terms[t], placed[t], totals[t]));
    }
    csv
}

fn print_units(tokens: &[String], units: &[Unit], credits: &[f64]) {
    for (index, (unit, credit)) in units.iter().zip(credits).enumerate() {
        println!("  unit {index} [{}] credit {credit}", tokens[unit.start..unit.end].join(" "));
    }
}
