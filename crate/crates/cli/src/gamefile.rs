//! JSON game files: either a fresh game (tokens plus a scoring oracle) or
//! a recorded dump (units plus raw coalition evaluations) that replays
//! offline without the oracle.

use std::collections::BTreeMap;
use std::path::Path;

use denserew::credit::{CreditError, Hierarchy, Unit};
use serde::{Deserialize, Serialize};
use serde_json::Value as JsonValue;

use crate::oracle::ToyRewardOracle;
use crate::{runtime, CliError};

/// On-disk shape shared by fresh games and replay dumps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<ToyRewardOracle>,
    /// Sentence-ending tokens for the `sentences` partition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delimiters: Option<Vec<String>>,
    /// Bracketing tree over unit indices for the `spans` partition:
    /// nested arrays with integer leaves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<JsonValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logp_policy: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logp_ref: Option<Vec<f64>>,
    /// Replay dumps: each unit as its token slice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<Vec<Vec<String>>>,
    /// Replay dumps: raw oracle scores keyed by decimal coalition mask.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluations: Option<BTreeMap<String, f64>>,
}

/// Per-token log-probabilities under the policy and the reference model.
pub type LogpPair = (Vec<f64>, Vec<f64>);

/// A loaded game, ready to build a coalition game from.
#[derive(Debug, Clone)]
pub enum GameInput {
    Fresh {
        tokens: Vec<String>,
        oracle: ToyRewardOracle,
        delimiters: Option<Vec<String>>,
        spans: Option<Hierarchy>,
        logps: Option<LogpPair>,
    },
    Replay {
        tokens: Vec<String>,
        units: Vec<Unit>,
        evaluations: BTreeMap<u64, f64>,
        logps: Option<LogpPair>,
    },
}

/// Converts nested JSON arrays with integer leaves into a bracketing tree.
pub fn hierarchy_from_json(value: &JsonValue) -> Result<Hierarchy, CliError> {
    match value {
        JsonValue::Number(number) => number
            .as_u64()
            .map(|i| Hierarchy::Leaf(i as usize))
            .ok_or_else(|| {
                CliError::Validation(format!("span leaf must be a unit index, got {number}"))
            }),
        JsonValue::Array(items) if !items.is_empty() => {
            let children = items
                .iter()
                .map(hierarchy_from_json)
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Hierarchy::Node(children))
        }
        other => Err(CliError::Validation(format!(
            "span tree nodes must be unit indices or non-empty arrays, got {other}"
        ))),
    }
}

fn check_logps(
    policy: &Option<Vec<f64>>,
    reference: &Option<Vec<f64>>,
    token_count: usize,
) -> Result<Option<LogpPair>, CliError> {
    match (policy, reference) {
        (None, None) => Ok(None),
        (Some(p), Some(r)) => {
            if p.len() != token_count || r.len() != token_count {
                return Err(CliError::Validation(format!(
                    "logp_policy and logp_ref must each have one entry per token ({token_count}), got {} and {}",
                    p.len(),
                    r.len()
                )));
            }
            Ok(Some((p.clone(), r.clone())))
        }
        _ => Err(CliError::Validation(
            "logp_policy and logp_ref must be given together".to_string(),
        )),
    }
}

impl GameFile {
    pub fn load(path: &Path) -> Result<GameInput, CliError> {
        let text = std::fs::read_to_string(path).map_err(|err| {
            CliError::Runtime(format!("cannot read game file {}: {err}", path.display()))
        })?;
        let file: GameFile = serde_json::from_str(&text).map_err(|err| {
            CliError::Validation(format!("malformed game file {}: {err}", path.display()))
        })?;
        file.into_input()
    }

    fn into_input(self) -> Result<GameInput, CliError> {
        if self.version != 1 {
            return Err(CliError::Validation(format!(
                "unsupported game file version {}, expected 1",
                self.version
            )));
        }
        let is_replay = self.units.is_some() || self.evaluations.is_some();
        if is_replay {
            if self.tokens.is_some() || self.oracle.is_some() || self.delimiters.is_some()
                || self.spans.is_some()
            {
                return Err(CliError::Validation(
                    "a replay dump carries only units and evaluations; tokens, oracle, \
                     delimiters, and spans belong to fresh games"
                        .to_string(),
                ));
            }
            let (Some(unit_tokens), Some(raw_evals)) = (self.units, self.evaluations) else {
                return Err(CliError::Validation(
                    "a replay dump needs both units and evaluations".to_string(),
                ));
            };
            let mut tokens = Vec::new();
            let mut units = Vec::new();
            for (index, unit) in unit_tokens.iter().enumerate() {
                if unit.is_empty() {
                    return Err(CliError::Validation(format!("unit {index} is empty")));
                }
                let start = tokens.len();
                tokens.extend(unit.iter().cloned());
                units.push(Unit { start, end: tokens.len() });
            }
            if units.is_empty() {
                return Err(CliError::Validation("a replay dump needs units".to_string()));
            }
            let mut evaluations = BTreeMap::new();
            for (key, value) in raw_evals {
                let mask: u64 = key.parse().map_err(|_| {
                    CliError::Validation(format!(
                        "evaluation key `{key}` is not a decimal coalition mask"
                    ))
                })?;
                evaluations.insert(mask, value);
            }
            let logps = check_logps(&self.logp_policy, &self.logp_ref, tokens.len())?;
            return Ok(GameInput::Replay { tokens, units, evaluations, logps });
        }

        let tokens = self.tokens.unwrap_or_default();
        if tokens.is_empty() {
            return Err(CliError::Validation(
                "a fresh game needs a non-empty token list".to_string(),
            ));
        }
        let oracle = self.oracle.ok_or_else(|| {
            CliError::Validation("a fresh game needs an oracle".to_string())
        })?;
        oracle.validate().map_err(CliError::Validation)?;
        let spans = self.spans.as_ref().map(hierarchy_from_json).transpose()?;
        let logps = check_logps(&self.logp_policy, &self.logp_ref, tokens.len())?;
        Ok(GameInput::Fresh { tokens, oracle, delimiters: self.delimiters, spans, logps })
    }

    /// Builds a replay dump from a finished game's units and raw scores.
    pub fn dump(
        tokens: &[String],
        units: &[Unit],
        evaluations: &BTreeMap<u64, f64>,
    ) -> GameFile {
        GameFile {
            version: 1,
            tokens: None,
            oracle: None,
            delimiters: None,
            spans: None,
            logp_policy: None,
            logp_ref: None,
            units: Some(units.iter().map(|u| tokens[u.start..u.end].to_vec()).collect()),
            evaluations: Some(
                evaluations.iter().map(|(mask, value)| (mask.to_string(), *value)).collect(),
            ),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(runtime)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|err| {
            CliError::Runtime(format!("cannot write game file {}: {err}", path.display()))
        })
    }
}

/// Oracle closure over recorded evaluations; coalitions that were never
/// recorded surface as [`CreditError::MissingEvaluation`].
pub fn replay_oracle(
    evaluations: BTreeMap<u64, f64>,
) -> impl FnMut(u64) -> Result<f64, CreditError> {
    move |mask| {
        evaluations
            .get(&mask)
            .copied()
            .ok_or(CreditError::MissingEvaluation(mask))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use denserew::credit::{exact_shapley, render_coalition, CoalitionGame};

    fn fresh_json() -> String {
        r#"{
            "version": 1,
            "tokens": ["good", "story"],
            "oracle": {
                "weights": {"good": 1.0},
                "bonuses": [["good", "story", 0.5]],
                "length_penalty": 0.0,
                "placeholder": "_"
            }
        }"#
        .to_string()
    }

    fn load_str(text: &str) -> Result<GameInput, CliError> {
        let file: GameFile = serde_json::from_str(text)
            .map_err(|err| CliError::Validation(err.to_string()))?;
        file.into_input()
    }

    #[test]
    fn loads_a_fresh_game() {
        let GameInput::Fresh { tokens, oracle, delimiters, spans, logps } =
            load_str(&fresh_json()).unwrap()
        else {
            panic!("expected a fresh game");
        };
        assert_eq!(tokens, vec!["good".to_string(), "story".into()]);
        assert_eq!(oracle.score(&tokens), 1.5);
        assert!(delimiters.is_none() && spans.is_none() && logps.is_none());
    }

    #[test]
    fn loads_a_replay_dump_and_replays_it() {
        let text = r#"{
            "version": 1,
            "units": [["good"], ["story"]],
            "evaluations": {"0": 0.0, "1": 1.0, "2": 0.0, "3": 1.5}
        }"#;
        let GameInput::Replay { tokens, units, evaluations, .. } = load_str(text).unwrap()
        else {
            panic!("expected a replay dump");
        };
        assert_eq!(tokens.len(), 2);
        let mut game = CoalitionGame::new(units, replay_oracle(evaluations)).unwrap();
        let credits = exact_shapley(&mut game).unwrap();
        assert!((credits.values()[0] - 1.25).abs() < 1e-12);
        assert!((credits.values()[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn replay_reports_missing_coalitions() {
        let mut oracle = replay_oracle(BTreeMap::from([(0, 0.0)]));
        assert!((oracle)(0).is_ok());
        assert!(matches!((oracle)(2), Err(CreditError::MissingEvaluation(2))));
    }

    #[test]
    fn dump_then_reload_reproduces_the_credits() {
        let GameInput::Fresh { tokens, oracle, .. } = load_str(&fresh_json()).unwrap() else {
            panic!("expected a fresh game");
        };
        let units =
            vec![Unit { start: 0, end: 1 }, Unit { start: 1, end: 2 }];
        let scorer = |mask: u64| {
            Ok(oracle.score(&render_coalition(&tokens, &units, mask, "_").unwrap()))
        };
        let mut game = CoalitionGame::new(units.clone(), scorer).unwrap();
        let fresh_credits = exact_shapley(&mut game).unwrap();

        let dump = GameFile::dump(&tokens, game.units(), &game.evaluation_table());
        let json = serde_json::to_string(&dump).unwrap();
        let GameInput::Replay { units: reloaded, evaluations, .. } = load_str(&json).unwrap()
        else {
            panic!("expected a replay dump");
        };
        let mut replayed = CoalitionGame::new(reloaded, replay_oracle(evaluations)).unwrap();
        let replay_credits = exact_shapley(&mut replayed).unwrap();
        assert_eq!(fresh_credits.values(), replay_credits.values());
    }

    #[test]
    fn rejects_malformed_files() {
        let cases = [
            r#"{"version": 2, "tokens": ["a"], "oracle": {}}"#,
            r#"{"version": 1}"#,
            r#"{"version": 1, "tokens": ["a"]}"#,
            r#"{"version": 1, "units": [["a"]]}"#,
            r#"{"version": 1, "tokens": ["a"], "oracle": {}, "units": [["a"]], "evaluations": {}}"#,
            r#"{"version": 1, "units": [[]], "evaluations": {"0": 0.0}}"#,
            r#"{"version": 1, "units": [["a"]], "evaluations": {"x": 0.0}}"#,
            r#"{"version": 1, "tokens": ["a"], "oracle": {}, "logp_policy": [0.0]}"#,
            r#"{"version": 1, "tokens": ["a"], "oracle": {}, "logp_policy": [0.0, 0.0], "logp_ref": [0.0, 0.0]}"#,
            r#"{"version": 1, "tokens": ["a"], "oracle": {}, "mystery": 3}"#,
        ];
        for text in cases {
            let err = load_str(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn span_trees_convert_from_nested_arrays() {
        let value: JsonValue = serde_json::from_str("[[0, 1], 2]").unwrap();
        let tree = hierarchy_from_json(&value).unwrap();
        assert_eq!(
            tree,
            Hierarchy::Node(vec![
                Hierarchy::Node(vec![Hierarchy::Leaf(0), Hierarchy::Leaf(1)]),
                Hierarchy::Leaf(2),
            ])
        );
        for bad in ["[]", "[-1]", "[0.5]", r#"["x"]"#] {
            let value: JsonValue = serde_json::from_str(bad).unwrap();
            assert!(hierarchy_from_json(&value).is_err(), "{bad}");
        }
    }
}
