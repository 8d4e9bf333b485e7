//! A deterministic keyword scorer standing in for a learned sequence
//! reward model, so credit games over rendered coalitions have an exactly
//! checkable ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

fn default_placeholder() -> String {
    "_".to_string()
}

/// Scores a token sequence from keyword weights, pairwise interaction
/// bonuses, and a per-token length penalty.
///
/// `score = Σ weights over non-placeholder tokens
///        + Σ bonuses whose pair is co-present
///        − length_penalty · sequence length`
///
/// Placeholder tokens carry no weight and join no interactions, but they
/// still count toward the length. A bonus pair is co-present when its two
/// members appear at distinct positions, so a self-pair `(w, w)` needs the
/// token twice. Each occurrence of a weighted token adds its weight; each
/// bonus entry fires at most once.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyRewardOracle {
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
    #[serde(default)]
    pub bonuses: Vec<(String, String, f64)>,
    #[serde(default)]
    pub length_penalty: f64,
    #[serde(default = "default_placeholder")]
    pub placeholder: String,
}

impl Default for ToyRewardOracle {
    fn default() -> Self {
        ToyRewardOracle {
            weights: BTreeMap::new(),
            bonuses: Vec::new(),
            length_penalty: 0.0,
            placeholder: default_placeholder(),
        }
    }
}

impl ToyRewardOracle {
    /// Rejects non-finite numbers and an empty placeholder before any
    /// game is built on top of the oracle.
    pub fn validate(&self) -> Result<(), String> {
        if self.placeholder.is_empty() {
            return Err("oracle placeholder must not be empty".to_string());
        }
        if !self.length_penalty.is_finite() {
            return Err(format!(
                "oracle length_penalty must be finite, got {}",
                self.length_penalty
            ));
        }
        for (token, weight) in &self.weights {
            if !weight.is_finite() {
                return Err(format!("oracle weight for `{token}` must be finite, got {weight}"));
            }
        }
        for (a, b, bonus) in &self.bonuses {
            if !bonus.is_finite() {
                return Err(format!("oracle bonus for (`{a}`, `{b}`) must be finite, got {bonus}"));
            }
        }
        Ok(())
    }

    pub fn score(&self, tokens: &[String]) -> f64 {
        let present: Vec<&String> =
            tokens.iter().filter(|t| **t != self.placeholder).collect();
        let mut score = -self.length_penalty * tokens.len() as f64;
        for token in &present {
            if let Some(weight) = self.weights.get(*token) {
                score += weight;
            }
        }
        for (a, b, bonus) in &self.bonuses {
            let co_present = if a == b {
                present.iter().filter(|t| **t == a).count() >= 2
            } else {
                present.contains(&a) && present.contains(&b)
            };
            if co_present {
                score += bonus;
            }
        }
        score
    }
}
