//! Reward-schedule construction and the parameter bounds used by the
//! equilibrium results: deviation-safety thresholds, the external-reward
//! bound `delta` and the largest admissible discount factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{Instance, RewardSchedule};

/// Residual tolerance for the schedule identities.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Derives `(a, s)` from a threshold, approximation slack and rejection
/// reward, requiring `a >= a'`.
///
/// `a = (1 + eps) (1 - T) a'` and `s = a (T (1 + eps) - 1) / ((1 - T)(1 + eps))`.
/// Both are evaluated as differences of `(1 + eps)` and `(1 + eps) T`, which
/// keeps round inputs such as `T = 0.9, eps = 19` exact.
pub fn derive_schedule(threshold: f64, epsilon: f64, a_prime: f64) -> Result<RewardSchedule> {
    let schedule = derive_schedule_relaxed(threshold, epsilon, a_prime)?;
    if schedule.a < schedule.a_prime * (1.0 - 1e-12) {
        return Err(Error::RewardDominance {
            a: schedule.a,
            a_prime: schedule.a_prime,
        });
    }
    Ok(schedule)
}

/// Like [`derive_schedule`] but without the `a >= a'` requirement; the
/// resulting diagnostics will flag it.
pub fn derive_schedule_relaxed(threshold: f64, epsilon: f64, a_prime: f64) -> Result<RewardSchedule> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::DegenerateThreshold(threshold));
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "epsilon = {epsilon} must be a finite non-negative number"
        )));
    }
    if !(a_prime > 0.0) || !a_prime.is_finite() {
        return Err(Error::InvalidSchedule(format!(
            "a_prime = {a_prime} must be positive"
        )));
    }
    if !(1.0 / (epsilon + 1.0) < threshold) {
        return Err(Error::EpsilonCondition { epsilon, threshold });
    }
    let m = 1.0 + epsilon;
    let mt = m * threshold;
    let a = a_prime * (m - mt);
    let s = a * (mt - 1.0) / (m - mt);
    Ok(RewardSchedule {
        a,
        a_prime,
        s,
        threshold,
        epsilon,
        delta: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDiagnostics {
    /// `|T - (a' + s) / (a' + s + a)|`
    pub threshold_identity_residual: f64,
    /// `|T a - (1 - T) s - a' (1 - T)|`
    pub inflection_residual: f64,
    pub a_dominates: bool,
    pub epsilon_condition: bool,
    pub all_ok: bool,
}

pub fn validate_schedule(schedule: &RewardSchedule) -> ScheduleDiagnostics {
    let RewardSchedule {
        a,
        a_prime,
        s,
        threshold: t,
        epsilon,
        ..
    } = *schedule;
    let threshold_identity_residual = (t - (a_prime + s) / (a_prime + s + a)).abs();
    let inflection_residual = (t * a - (1.0 - t) * s - a_prime * (1.0 - t)).abs();
    let a_dominates = a >= a_prime;
    let epsilon_condition = 1.0 / (epsilon + 1.0) < t;
    ScheduleDiagnostics {
        threshold_identity_residual,
        inflection_residual,
        a_dominates,
        epsilon_condition,
        all_ok: threshold_identity_residual <= IDENTITY_TOL
            && inflection_residual <= IDENTITY_TOL
            && a_dominates
            && epsilon_condition,
    }
}

/// Which form of the deviation-safety bound to treat as effective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdVariant {
    /// Second term `(a'(1 - T) + s) / (a + s + g)`, as derived step by step.
    #[default]
    Proof,
    /// Second term `(a'(1 - T) + a) / (a + s + g)`, as the bound is usually quoted.
    Statement,
}

/// Beliefs below `effective_threshold` can never make it profitable to
/// approve a proposal the expert originally rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyEnvelope {
    pub statement_branch: f64,
    pub proof_branch: f64,
    pub effective_threshold: f64,
    pub variant: ThresholdVariant,
}

pub fn deviation_safety_threshold(schedule: &RewardSchedule, external: f64) -> SafetyEnvelope {
    deviation_safety_threshold_with(schedule, external, ThresholdVariant::Proof)
}

pub fn deviation_safety_threshold_with(
    schedule: &RewardSchedule,
    external: f64,
    variant: ThresholdVariant,
) -> SafetyEnvelope {
    let RewardSchedule {
        a,
        a_prime,
        s,
        threshold: t,
        ..
    } = *schedule;
    let denom = a + s + external;
    let approve_term = t * (a + s) / denom;
    let statement_branch = ((a_prime * (1.0 - t) + a) / denom).clamp(0.0, 1.0);
    let proof_branch = approve_term
        .min((a_prime * (1.0 - t) + s) / denom)
        .clamp(0.0, 1.0);
    let effective_threshold = match variant {
        ThresholdVariant::Proof => proof_branch,
        ThresholdVariant::Statement => approve_term.min(statement_branch).clamp(0.0, 1.0),
    };
    SafetyEnvelope {
        statement_branch,
        proof_branch,
        effective_threshold,
        variant,
    }
}

/// Smallest `delta` with `g_ij / w_i <= a * delta` for every cell.
pub fn external_bound_delta(instance: &Instance, schedule: &RewardSchedule) -> Result<f64> {
    let mut worst = 0.0_f64;
    for i in 0..instance.n() {
        for j in 0..instance.k() {
            worst = worst.max(instance.normalized_external(i, j)?);
        }
    }
    Ok(worst / schedule.a)
}

/// Checks a caller-supplied `delta` against the instance; without one the
/// computed bound is used.
pub fn resolve_delta(
    instance: &Instance,
    schedule: &RewardSchedule,
    supplied: Option<f64>,
) -> Result<f64> {
    let required = external_bound_delta(instance, schedule)?;
    match supplied {
        Some(d) if d < required - 1e-12 => Err(Error::DeltaTooSmall {
            supplied: d,
            required,
        }),
        Some(d) => Ok(d),
        None => Ok(required),
    }
}

/// `(1 - (1 - zeta) gamma) / (1 - (1 + zeta) gamma)`: how much the delayed
/// weight rule can tilt discounted rewards towards a deviator.
pub fn discount_ratio(gamma: f64, zeta: f64) -> f64 {
    (1.0 - (1.0 - zeta) * gamma) / (1.0 - (1.0 + zeta) * gamma)
}

/// Largest discount factor for which [`discount_ratio`] stays within
/// `1 + epsilon`. A return value of 1 means every `gamma < 1` qualifies.
pub fn max_discount(epsilon: f64, zeta: f64) -> f64 {
    let denom = (1.0 + epsilon) * (1.0 + zeta) - (1.0 - zeta);
    if epsilon <= 0.0 || denom <= 0.0 {
        return 0.0;
    }
    (epsilon / denom).clamp(0.0, 1.0)
}
