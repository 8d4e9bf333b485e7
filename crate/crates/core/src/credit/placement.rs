//! Placing per-unit credits back onto the trajectory timeline.
//!
//! Timesteps are 1-based: a trajectory of horizon `T` has steps `1..=T`,
//! stored in vectors at indices `0..T`. Each unit's credit lands at the
//! step where the unit's last token was emitted. [`total_reward`] blends
//! the placed credits with the original terminal reward so that, for every
//! blend weight, the per-trajectory sum of non-KL reward equals the
//! terminal reward exactly (the placed credits are baseline-subtracted, so
//! the baseline is re-emitted at the final step, scaled by the blend).

use super::game::Unit;
use super::values::CreditVector;
use super::CreditError;

/// Everything needed to materialise the per-step reward sequence for one
/// trajectory.
#[derive(Debug, Clone)]
pub struct RewardTrace {
    /// Horizon `T`: number of steps in the trajectory.
    pub horizon: usize,
    /// 1-based step at which each unit ends; strictly increasing, the last
    /// entry equals the horizon.
    pub unit_end_times: Vec<usize>,
    /// Per-step KL penalties, already scaled; length equals the horizon.
    pub kl_terms: Vec<f64>,
    /// Reward of the full sequence.
    pub terminal_reward: f64,
    /// Raw score of the empty rendering, subtracted inside the game's
    /// characteristic function.
    pub baseline: f64,
    /// Blend weight: 0 keeps the sparse terminal reward, 1 fully replaces
    /// it with the placed credits.
    pub alpha: f64,
    /// Nonnegative KL coefficient used when the `kl_terms` were built.
    pub kl_coefficient: f64,
}

impl RewardTrace {
    /// Checks the structural invariants shared by the placement routines.
    pub fn validate(&self) -> Result<(), CreditError> {
        if self.horizon == 0 {
            return Err(CreditError::BoundaryError("horizon is zero".into()));
        }
        if self.kl_terms.len() != self.horizon {
            return Err(CreditError::DimensionError {
                expected: self.horizon,
                got: self.kl_terms.len(),
            });
        }
        if self.unit_end_times.is_empty() {
            return Err(CreditError::BoundaryError("no unit end times".into()));
        }
        let mut prev = 0usize;
        for (i, &t) in self.unit_end_times.iter().enumerate() {
            if t <= prev {
                return Err(CreditError::BoundaryError(format!(
                    "unit end times must be strictly increasing and start at 1, got {t} at position {i}"
                )));
            }
            prev = t;
        }
        if prev != self.horizon {
            return Err(CreditError::BoundaryError(format!(
                "last unit ends at step {prev} but the horizon is {}",
                self.horizon
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            return Err(CreditError::InvalidAlpha(self.alpha));
        }
        if !(self.kl_coefficient >= 0.0) {
            return Err(CreditError::NegativeKlCoefficient(self.kl_coefficient));
        }
        Ok(())
    }
}

/// Scatters the credits onto the timeline: position `t−1` receives the
/// credit of the unit ending at step `t`, zeros elsewhere.
pub fn place_rewards(
    credits: &CreditVector,
    trace: &RewardTrace,
) -> Result<Vec<f64>, CreditError> {
    trace.validate()?;
    if credits.len() != trace.unit_end_times.len() {
        return Err(CreditError::BoundaryError(format!(
            "{} credits but {} unit end times",
            credits.len(),
            trace.unit_end_times.len()
        )));
    }
    let mut out = vec![0.0; trace.horizon];
    for (&t, &credit) in trace.unit_end_times.iter().zip(credits.values()) {
        out[t - 1] = credit;
    }
    Ok(out)
}

/// Blends placed credits with the terminal reward.
///
/// `R_t = kl_terms[t] + α·placed[t]`, and the final step additionally
/// receives `(1−α)·terminal_reward + α·baseline`. Because the placed
/// credits sum to `terminal_reward − baseline` (efficiency of the
/// allocators plus baseline subtraction), `Σ_t (R_t − kl_terms[t])`
/// equals the terminal reward for every `α`.
pub fn total_reward(trace: &RewardTrace, placed: &[f64]) -> Result<Vec<f64>, CreditError> {
    trace.validate()?;
    if placed.len() != trace.horizon {
        return Err(CreditError::DimensionError {
            expected: trace.horizon,
            got: placed.len(),
        });
    }
    let mut out = Vec::with_capacity(trace.horizon);
    for t in 1..=trace.horizon {
        let mut r = trace.kl_terms[t - 1] + trace.alpha * placed[t - 1];
        if t == trace.horizon {
            r += (1.0 - trace.alpha) * trace.terminal_reward + trace.alpha * trace.baseline;
        }
        out.push(r);
    }
    Ok(out)
}

/// Per-step KL penalty `−β·(logp_policy − logp_ref)`.
pub fn kl_penalty(
    logp_policy: &[f64],
    logp_ref: &[f64],
    beta_kl: f64,
) -> Result<Vec<f64>, CreditError> {
    if logp_policy.len() != logp_ref.len() {
        return Err(CreditError::DimensionError {
            expected: logp_policy.len(),
            got: logp_ref.len(),
        });
    }
    if !(beta_kl >= 0.0) {
        return Err(CreditError::NegativeKlCoefficient(beta_kl));
    }
    Ok(logp_policy
        .iter()
        .zip(logp_ref)
        .map(|(p, r)| -beta_kl * (p - r))
        .collect())
}

/// Credit table as CSV: `unit_index,start_t,end_t,credit` with 1-based
/// token times.
pub fn credits_to_csv(units: &[Unit], credits: &CreditVector) -> Result<String, CreditError> {
    if units.len() != credits.len() {
        return Err(CreditError::DimensionError {
            expected: units.len(),
            got: credits.len(),
        });
    }
    let mut out = String::from("unit_index,start_t,end_t,credit\n");
    for (i, (unit, credit)) in units.iter().zip(credits.values()).enumerate() {
        out.push_str(&format!("{i},{},{},{credit}\n", unit.start + 1, unit.end));
    }
    Ok(out)
}
