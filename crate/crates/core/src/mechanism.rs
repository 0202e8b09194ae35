//! Weighted approval voting over a set of proposals.
//!
//! Each expert approves or rejects every proposal; the proposal with the most
//! approving weight is implemented. Once implemented its quality is revealed
//! and every expert is paid according to how they voted on the winner only.
//!
//! Proposal and expert indices are zero-based. The "dummy" outcome, selected
//! when nobody puts weight behind any proposal, is represented as `None`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for utility comparisons. A utility is "strictly better"
/// only when it exceeds the other by more than this.
pub const UTILITY_TOL: f64 = 1e-9;

/// Relative tolerance used when comparing approval masses. Masses within this
/// relative distance of the maximum count as tied.
pub const MASS_RTOL: f64 = 1e-12;

/// Vote vectors are stored as bitmasks, so the proposal count is bounded.
pub const MAX_PROPOSALS: usize = 32;

/// The one-shot game: expert weights, beliefs and external rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    weights: Vec<f64>,
    beliefs: Vec<Vec<f64>>,
    external: Vec<Vec<f64>>,
}

impl Instance {
    pub fn new(weights: Vec<f64>, beliefs: Vec<Vec<f64>>, external: Vec<Vec<f64>>) -> Result<Self> {
        let n = weights.len();
        if n == 0 || beliefs.first().is_none_or(|row| row.is_empty()) {
            return Err(Error::EmptyInstance);
        }
        let k = beliefs[0].len();
        if k > MAX_PROPOSALS {
            return Err(Error::TooManyProposals {
                max: MAX_PROPOSALS,
                found: k,
            });
        }
        check_matrix("beliefs", &beliefs, n, k)?;
        check_matrix("external", &external, n, k)?;
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::OutOfRange {
                    field: format!("weights[{i}]"),
                    value: w,
                    range: "[0, inf)",
                });
            }
        }
        for (i, row) in beliefs.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::OutOfRange {
                        field: format!("beliefs[{i}][{j}]"),
                        value: p,
                        range: "[0, 1]",
                    });
                }
            }
        }
        for (i, row) in external.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                if !(g >= 0.0) || !g.is_finite() {
                    return Err(Error::OutOfRange {
                        field: format!("external[{i}][{j}]"),
                        value: g,
                        range: "[0, inf)",
                    });
                }
            }
        }
        Ok(Self {
            weights,
            beliefs,
            external,
        })
    }

    /// An instance with every external reward set to zero.
    pub fn without_externals(weights: Vec<f64>, beliefs: Vec<Vec<f64>>) -> Result<Self> {
        let external = beliefs.iter().map(|row| vec![0.0; row.len()]).collect();
        Self::new(weights, beliefs, external)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn k(&self) -> usize {
        self.beliefs[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn beliefs(&self) -> &[Vec<f64>] {
        &self.beliefs
    }

    pub fn external(&self) -> &[Vec<f64>] {
        &self.external
    }

    pub fn belief(&self, expert: usize, proposal: usize) -> f64 {
        self.beliefs[expert][proposal]
    }

    /// External reward divided by the expert's weight, which puts it on the
    /// same scale as the weight-free mechanism rewards used for analysis.
    pub fn normalized_external(&self, expert: usize, proposal: usize) -> Result<f64> {
        let g = self.external[expert][proposal];
        if g == 0.0 {
            return Ok(0.0);
        }
        let w = self.weights[expert];
        if w == 0.0 {
            return Err(Error::ZeroWeightExternal { expert, proposal });
        }
        Ok(g / w)
    }

    /// Same beliefs and externals with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.weights.iter().map(|w| w * factor).collect(),
            self.beliefs.clone(),
            self.external.clone(),
        )
    }
}

fn check_matrix(what: &str, m: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    if m.len() != rows {
        return Err(Error::DimensionMismatch {
            what: format!("{what} rows"),
            expected: rows,
            found: m.len(),
        });
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::DimensionMismatch {
                what: format!("{what}[{i}]"),
                expected: cols,
                found: row.len(),
            });
        }
    }
    Ok(())
}

/// Reward parameters of the mechanism.
///
/// `a` pays a correct approval, `a_prime` a correct rejection and `s` is the
/// penalty for approving a proposal that turns out bad. A wrong rejection pays
/// nothing. `threshold` is the belief at which approving and rejecting the
/// winner have equal expected reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSchedule {
    pub a: f64,
    pub a_prime: f64,
    pub s: f64,
    #[serde(rename = "T")]
    pub threshold: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl RewardSchedule {
    /// Builds a schedule from explicit rewards. The approximation slack is
    /// read off `a = (1 + epsilon) (1 - T) a'`; `delta` starts at zero.
    ///
    /// Only the sign and range constraints are enforced here. Whether the
    /// rewards are consistent with `threshold` is reported by
    /// [`crate::params::validate_schedule`].
    pub fn new(a: f64, a_prime: f64, s: f64, threshold: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidSchedule(format!("a = {a} must be positive")));
        }
        if !(a_prime >= 0.0) || !a_prime.is_finite() {
            return Err(Error::InvalidSchedule(format!(
                "a_prime = {a_prime} must be non-negative"
            )));
        }
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidSchedule(format!("s = {s} must be non-negative")));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::DegenerateThreshold(threshold));
        }
        let epsilon = if a_prime > 0.0 {
            (a / ((1.0 - threshold) * a_prime) - 1.0).max(0.0)
        } else {
            0.0
        };
        Ok(Self {
            a,
            a_prime,
            s,
            threshold,
            epsilon,
            delta: 0.0,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }
}

/// An n x k matrix of approve (1) / reject (0) votes.
///
/// Row `i` is stored as a bitmask with proposal `j` at bit `j`, so the numeric
/// value of a vote vector reads proposal 0 as the least significant bit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VotingProfile {
    k: usize,
    rows: Vec<u32>,
}

impl VotingProfile {
    pub fn zeros(n: usize, k: usize) -> Self {
        assert!(k <= MAX_PROPOSALS);
        Self { k, rows: vec![0; n] }
    }

    pub fn from_bits(k: usize, rows: Vec<u32>) -> Result<Self> {
        if k > MAX_PROPOSALS {
            return Err(Error::TooManyProposals {
                max: MAX_PROPOSALS,
                found: k,
            });
        }
        let mask = row_mask(k);
        if let Some(i) = rows.iter().position(|r| r & !mask != 0) {
            return Err(Error::InvalidArgument(format!(
                "row {i} has bits set beyond proposal {k}"
            )));
        }
        Ok(Self { k, rows })
    }

    pub fn from_matrix(votes: &[Vec<u8>]) -> Result<Self> {
        let k = votes.first().map_or(0, Vec::len);
        if k > MAX_PROPOSALS {
            return Err(Error::TooManyProposals {
                max: MAX_PROPOSALS,
                found: k,
            });
        }
        let mut rows = Vec::with_capacity(votes.len());
        for (i, row) in votes.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch {
                    what: format!("votes[{i}]"),
                    expected: k,
                    found: row.len(),
                });
            }
            let mut bits = 0u32;
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => bits |= 1 << j,
                    _ => {
                        return Err(Error::NonBinaryVote {
                            field: format!("votes[{i}][{j}]"),
                            value: v,
                        })
                    }
                }
            }
            rows.push(bits);
        }
        Ok(Self { k, rows })
    }

    /// Decodes the profile with index `index` in the canonical enumeration
    /// order: expert `i` owns bits `i*k .. (i+1)*k`.
    pub fn from_index(n: usize, k: usize, index: u64) -> Self {
        let mask = row_mask(k) as u64;
        let rows = (0..n)
            .map(|i| ((index >> (i * k)) & mask) as u32)
            .collect();
        Self { k, rows }
    }

    /// Inverse of [`VotingProfile::from_index`].
    pub fn index(&self) -> u64 {
        self.rows
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &r)| acc | ((r as u64) << (i * self.k)))
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> &[u32] {
        &self.rows
    }

    pub fn row(&self, expert: usize) -> u32 {
        self.rows[expert]
    }

    pub fn vote(&self, expert: usize, proposal: usize) -> bool {
        self.rows[expert] >> proposal & 1 == 1
    }

    pub fn with_row(&self, expert: usize, row: u32) -> Self {
        let mut next = self.clone();
        next.rows[expert] = row;
        next
    }

    pub fn with_vote(&self, expert: usize, proposal: usize, approve: bool) -> Self {
        let mut next = self.clone();
        if approve {
            next.rows[expert] |= 1 << proposal;
        } else {
            next.rows[expert] &= !(1 << proposal);
        }
        next
    }

    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        self.rows
            .iter()
            .map(|&r| row_to_vec(r, self.k))
            .collect()
    }

    fn check_against(&self, instance: &Instance) -> Result<()> {
        if self.rows.len() != instance.n() {
            return Err(Error::DimensionMismatch {
                what: "profile rows".into(),
                expected: instance.n(),
                found: self.rows.len(),
            });
        }
        if self.k != instance.k() {
            return Err(Error::DimensionMismatch {
                what: "profile columns".into(),
                expected: instance.k(),
                found: self.k,
            });
        }
        Ok(())
    }
}

impl Serialize for VotingProfile {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_matrix().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for VotingProfile {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let votes = Vec::<Vec<u8>>::deserialize(deserializer)?;
        Self::from_matrix(&votes).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn row_mask(k: usize) -> u32 {
    if k >= 32 {
        u32::MAX
    } else {
        (1u32 << k) - 1
    }
}

pub fn row_to_vec(row: u32, k: usize) -> Vec<u8> {
    (0..k).map(|j| (row >> j & 1) as u8).collect()
}

/// Result of running the selection rule on a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// Selected proposal, `None` for the dummy outcome.
    pub winner: Option<usize>,
    pub approval_mass: Vec<f64>,
    /// Quality of the winner, known only after it has been implemented.
    pub revealed_quality: Option<bool>,
}

impl Outcome {
    pub fn reveal(mut self, quality: bool) -> Self {
        if self.winner.is_some() {
            self.revealed_quality = Some(quality);
        }
        self
    }
}

/// Approving weight behind each proposal.
pub fn approval_mass(weights: &[f64], rows: &[u32], k: usize) -> Vec<f64> {
    let mut mass = vec![0.0; k];
    for (&w, &row) in weights.iter().zip(rows) {
        for (j, m) in mass.iter_mut().enumerate() {
            if row >> j & 1 == 1 {
                *m += w;
            }
        }
    }
    mass
}

/// Smallest index whose mass is (relatively) tied with the maximum; `None`
/// when no proposal has any approving weight.
pub fn select_from_mass(mass: &[f64]) -> Option<usize> {
    let top = mass.iter().copied().fold(0.0_f64, f64::max);
    if top <= 0.0 {
        return None;
    }
    let floor = top - MASS_RTOL * top;
    mass.iter().position(|&m| m >= floor)
}

/// Runs the selection rule: most approving weight wins, ties go to the
/// smallest index, and the dummy outcome is chosen only when no proposal has
/// any approving weight.
pub fn winner(instance: &Instance, profile: &VotingProfile) -> Result<Outcome> {
    profile.check_against(instance)?;
    let approval_mass = approval_mass(instance.weights(), profile.rows(), instance.k());
    Ok(Outcome {
        winner: select_from_mass(&approval_mass),
        approval_mass,
        revealed_quality: None,
    })
}

/// Realized payment to an expert of the given weight once the winner's
/// quality is known.
pub fn reward(approved: bool, good: bool, schedule: &RewardSchedule, weight: f64) -> f64 {
    let base = match (approved, good) {
        (true, true) => schedule.a,
        (true, false) => -schedule.s,
        (false, false) => schedule.a_prime,
        (false, true) => 0.0,
    };
    weight * base
}

/// Weight-free expected reward of a vote on the winner, from the viewpoint
/// of an expert who believes it is good with probability `belief`.
pub fn expected_reward(approved: bool, belief: f64, schedule: &RewardSchedule) -> f64 {
    if approved {
        belief * schedule.a - (1.0 - belief) * schedule.s
    } else {
        (1.0 - belief) * schedule.a_prime
    }
}

/// Subjective expected utility of `expert` under `profile`, with rewards
/// normalized by the expert's weight. The dummy outcome is worth zero.
pub fn utility(
    instance: &Instance,
    schedule: &RewardSchedule,
    profile: &VotingProfile,
    expert: usize,
) -> Result<f64> {
    if expert >= instance.n() {
        return Err(Error::NoSuchExpert(expert));
    }
    let outcome = winner(instance, profile)?;
    let Some(j) = outcome.winner else {
        return Ok(0.0);
    };
    let p = instance.belief(expert, j);
    let g = instance.normalized_external(expert, j)?;
    Ok(p * g + expected_reward(profile.vote(expert, j), p, schedule))
}

/// The honest vote vector of one expert as a bitmask.
pub fn honest_row(beliefs: &[f64], threshold: f64) -> u32 {
    beliefs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= threshold)
        .fold(0, |acc, (j, _)| acc | 1 << j)
}

/// Everyone approves exactly the proposals they believe in at least `threshold`.
pub fn honest_profile(instance: &Instance, threshold: f64) -> VotingProfile {
    VotingProfile {
        k: instance.k(),
        rows: instance
            .beliefs()
            .iter()
            .map(|row| honest_row(row, threshold))
            .collect(),
    }
}

/// Estimated quality: total weight of experts whose belief in the proposal
/// reaches the threshold. The dummy outcome has quality zero.
pub fn qual(instance: &Instance, threshold: f64, proposal: Option<usize>) -> f64 {
    let Some(j) = proposal else {
        return 0.0;
    };
    instance
        .weights()
        .iter()
        .zip(instance.beliefs())
        .filter(|(_, row)| row[j] >= threshold)
        .map(|(w, _)| w)
        .sum()
}

/// Best estimated quality over all proposals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptQuality {
    pub proposal: usize,
    pub quality: f64,
}

pub fn opt_quality(instance: &Instance, threshold: f64) -> OptQuality {
    let mut best = OptQuality {
        proposal: 0,
        quality: qual(instance, threshold, Some(0)),
    };
    for j in 1..instance.k() {
        let q = qual(instance, threshold, Some(j));
        if q > best.quality {
            best = OptQuality {
                proposal: j,
                quality: q,
            };
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub p: f64,
    pub approve: f64,
    pub reject: f64,
}

/// Both expected-reward branches sampled on an even grid over [0, 1].
pub fn reward_curve(schedule: &RewardSchedule, samples: usize) -> Result<Vec<CurvePoint>> {
    if samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "reward curve needs at least 2 samples, got {samples}"
        )));
    }
    let last = (samples - 1) as f64;
    Ok((0..samples)
        .map(|i| {
            let p = i as f64 / last;
            CurvePoint {
                p,
                approve: expected_reward(true, p, schedule),
                reject: expected_reward(false, p, schedule),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schedule() -> RewardSchedule {
        RewardSchedule::new(2.0, 1.0, 17.0, 0.9).unwrap()
    }

    fn cycle_instance() -> Instance {
        Instance::without_externals(
            vec![0.49, 0.41, 0.10],
            vec![vec![0.95, 1.0], vec![1.0, 0.95], vec![1.0, 0.0]],
        )
        .unwrap()
    }

    fn tight_instance() -> Instance {
        Instance::without_externals(vec![1.1, 0.9], vec![vec![0.9, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn profile(rows: &[&[u8]]) -> VotingProfile {
        VotingProfile::from_matrix(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn honest_votes_elect_first_proposal_in_cycle_instance() {
        let out = winner(&cycle_instance(), &profile(&[&[1, 1], &[1, 1], &[1, 0]])).unwrap();
        assert_eq!(out.winner, Some(0));
        assert!((out.approval_mass[0] - 1.0).abs() < 1e-12);
        assert!((out.approval_mass[1] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn no_approvals_selects_dummy() {
        let out = winner(&cycle_instance(), &VotingProfile::zeros(3, 2)).unwrap();
        assert_eq!(out.winner, None);
        assert_eq!(out.clone().reveal(true).revealed_quality, None);
    }

    #[test]
    fn heavier_expert_decides_in_tight_instance() {
        let out = winner(&tight_instance(), &profile(&[&[0, 1], &[1, 0]])).unwrap();
        assert_eq!(out.winner, Some(1));
    }

    #[test]
    fn ties_go_to_smallest_index() {
        let inst = Instance::without_externals(vec![1.0, 1.0], vec![vec![0.5, 0.5]; 2]).unwrap();
        let out = winner(&inst, &profile(&[&[0, 1], &[1, 0]])).unwrap();
        assert_eq!(out.winner, Some(0));
    }

    #[test]
    fn zero_weight_approvals_still_give_dummy() {
        let inst = Instance::without_externals(vec![0.0, 1.0], vec![vec![1.0], vec![0.0]]).unwrap();
        let out = winner(&inst, &profile(&[&[1], &[0]])).unwrap();
        assert_eq!(out.winner, None);
    }

    #[test]
    fn mismatched_profile_is_rejected() {
        let err = winner(&cycle_instance(), &VotingProfile::zeros(2, 2)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn reward_cases() {
        let s = schedule();
        assert_eq!(reward(true, true, &s, 0.5), 1.0);
        assert_eq!(reward(false, true, &s, 0.7), 0.0);
        assert_eq!(reward(true, false, &s, 1.0), -17.0);
        assert_eq!(reward(false, false, &s, 2.0), 2.0);
    }

    #[test]
    fn reward_table_matches_all_sign_combinations() {
        // every (vote, quality) pair against a schedule with distinct magnitudes
        let s = RewardSchedule::new(3.0, 5.0, 7.0, 0.5).unwrap();
        for &w in &[0.0, 0.25, 1.0, 4.0] {
            for &(v, q, base) in &[
                (true, true, 3.0),
                (true, false, -7.0),
                (false, false, 5.0),
                (false, true, 0.0),
            ] {
                assert_eq!(reward(v, q, &s, w), w * base);
            }
        }
    }

    #[test]
    fn expected_reward_examples() {
        let s = schedule();
        assert!((expected_reward(true, 0.95, &s) - 1.05).abs() < 1e-12);
        assert!((expected_reward(true, 0.9, &s) - 0.1).abs() < 1e-12);
        assert!((expected_reward(false, 0.9, &s) - 0.1).abs() < 1e-12);
        assert_eq!(expected_reward(false, 1.0, &s), 0.0);
    }

    #[test]
    fn utility_examples() {
        let inst = cycle_instance();
        let s = schedule();
        let honest = honest_profile(&inst, 0.9);
        assert!((utility(&inst, &s, &honest, 0).unwrap() - 1.05).abs() < 1e-12);
        assert!((utility(&inst, &s, &honest, 2).unwrap() - 2.0).abs() < 1e-12);
        let zeros = VotingProfile::zeros(3, 2);
        for i in 0..3 {
            assert_eq!(utility(&inst, &s, &zeros, i).unwrap(), 0.0);
        }
    }

    #[test]
    fn utility_adds_normalized_external_reward() {
        let inst = Instance::new(vec![0.5], vec![vec![0.8]], vec![vec![0.2]]).unwrap();
        let s = schedule();
        let u = utility(&inst, &s, &profile(&[&[1]]), 0).unwrap();
        // 0.8 * (0.2 / 0.5) + 0.8 * 2 - 0.2 * 17
        assert!((u - (0.32 + 1.6 - 3.4)).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_with_external_reward_fails_normalization() {
        let inst = Instance::new(vec![0.0, 1.0], vec![vec![1.0], vec![1.0]], vec![vec![0.3], vec![0.0]])
            .unwrap();
        let err = utility(&inst, &schedule(), &profile(&[&[1], &[1]]), 0).unwrap_err();
        assert_eq!(err, Error::ZeroWeightExternal { expert: 0, proposal: 0 });
    }

    #[test]
    fn honest_profile_examples() {
        assert_eq!(
            honest_profile(&cycle_instance(), 0.9).to_matrix(),
            vec![vec![1, 1], vec![1, 1], vec![1, 0]]
        );
        assert_eq!(
            honest_profile(&tight_instance(), 0.9).to_matrix(),
            vec![vec![1, 1], vec![1, 0]]
        );
        let none = Instance::without_externals(vec![1.0, 2.0], vec![vec![0.0; 3]; 2]).unwrap();
        assert_eq!(honest_profile(&none, 0.9), VotingProfile::zeros(2, 3));
    }

    #[test]
    fn qual_examples() {
        let inst = cycle_instance();
        assert!((qual(&inst, 0.9, Some(0)) - 1.0).abs() < 1e-12);
        assert!((qual(&inst, 0.9, Some(1)) - 0.9).abs() < 1e-12);
        assert_eq!(qual(&inst, 0.9, None), 0.0);

        let mut weights = vec![0.26];
        let mut beliefs = vec![vec![1.0, 0.0]];
        for _ in 0..4 {
            weights.push(0.25);
            beliefs.push(vec![0.0, 1.0]);
        }
        let linear_gap_instance = Instance::without_externals(weights, beliefs).unwrap();
        assert!((qual(&linear_gap_instance, 0.9, Some(1)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn opt_quality_examples() {
        let o = opt_quality(&cycle_instance(), 0.9);
        assert_eq!(o.proposal, 0);
        assert!((o.quality - 1.0).abs() < 1e-12);
        let o = opt_quality(&tight_instance(), 0.9);
        assert_eq!(o.proposal, 0);
        assert!((o.quality - 2.0).abs() < 1e-12);
        let single = Instance::without_externals(vec![0.3, 0.6], vec![vec![0.95], vec![0.2]]).unwrap();
        assert_eq!(opt_quality(&single, 0.9), OptQuality { proposal: 0, quality: 0.3 });
    }

    #[test]
    fn reward_curve_rows() {
        let curve = reward_curve(&schedule(), 101).unwrap();
        assert_eq!(curve.len(), 101);
        let at_t = curve[90];
        assert!((at_t.p - 0.9).abs() < 1e-12);
        assert!((at_t.approve - 0.1).abs() < 1e-9 && (at_t.reject - 0.1).abs() < 1e-9);
        assert_eq!(curve[100].approve, 2.0);
        assert_eq!(curve[100].reject, 0.0);
        assert_eq!(curve[0].approve, -17.0);
        assert_eq!(curve[0].reject, 1.0);
        assert!(reward_curve(&schedule(), 1).is_err());
    }

    #[test]
    fn instance_rejects_bad_cells() {
        let err = Instance::without_externals(vec![1.0], vec![vec![1.2]]).unwrap_err();
        assert_eq!(
            err,
            Error::OutOfRange {
                field: "beliefs[0][0]".into(),
                value: 1.2,
                range: "[0, 1]"
            }
        );
        assert!(Instance::without_externals(vec![-1.0], vec![vec![0.5]]).is_err());
        assert!(Instance::without_externals(vec![], vec![]).is_err());
        assert!(Instance::new(vec![1.0], vec![vec![0.5]], vec![vec![0.1, 0.2]]).is_err());
    }

    #[test]
    fn non_binary_votes_are_rejected() {
        let err = VotingProfile::from_matrix(&[vec![0, 2]]).unwrap_err();
        assert!(matches!(err, Error::NonBinaryVote { .. }));
    }

    fn arb_instance() -> impl Strategy<Value = (Instance, VotingProfile)> {
        (1usize..5, 1usize..4).prop_flat_map(|(n, k)| {
            (
                prop::collection::vec(0.0f64..2.0, n),
                prop::collection::vec(prop::collection::vec(0.0f64..=1.0, k), n),
                prop::collection::vec(0u32..(1 << k), n),
            )
                .prop_map(move |(w, p, rows)| {
                    (
                        Instance::without_externals(w, p).unwrap(),
                        VotingProfile::from_bits(k, rows).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn selection_is_scale_invariant((inst, prof) in arb_instance(), c in 1e-3f64..1e3) {
            let base = winner(&inst, &prof).unwrap().winner;
            let scaled = winner(&inst.scaled(c).unwrap(), &prof).unwrap().winner;
            prop_assert_eq!(base, scaled);
        }

        #[test]
        fn winner_has_maximal_mass((inst, prof) in arb_instance()) {
            let out = winner(&inst, &prof).unwrap();
            let total: f64 = out.approval_mass.iter().sum();
            match out.winner {
                Some(j) => {
                    let top = out.approval_mass.iter().copied().fold(0.0, f64::max);
                    prop_assert!(out.approval_mass[j] >= top * (1.0 - MASS_RTOL));
                }
                None => prop_assert_eq!(total, 0.0),
            }
        }

        #[test]
        fn reward_branches_are_monotone(p in 0.0f64..1.0, dp in 1e-6f64..1e-2) {
            let s = schedule();
            let q = (p + dp).min(1.0);
            prop_assume!(q > p);
            prop_assert!(expected_reward(true, q, &s) > expected_reward(true, p, &s));
            prop_assert!(expected_reward(false, q, &s) < expected_reward(false, p, &s));
        }

        #[test]
        fn qual_is_additive_over_experts((inst, _) in arb_instance(), t in 0.05f64..0.95) {
            for j in 0..inst.k() {
                let parts: f64 = (0..inst.n())
                    .map(|i| {
                        let single = Instance::without_externals(
                            vec![inst.weights()[i]],
                            vec![inst.beliefs()[i].clone()],
                        )
                        .unwrap();
                        qual(&single, t, Some(j))
                    })
                    .sum();
                prop_assert!((parts - qual(&inst, t, Some(j))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn honest_bit_is_optimal_when_not_pivotal() {
        // Expert 0 has negligible weight, so flipping its vote on the winner
        // never changes the outcome; the honest bit must then be a maximizer.
        let s = schedule();
        for step in 0..=100 {
            let p = step as f64 / 100.0;
            let inst =
                Instance::without_externals(vec![0.01, 1.0], vec![vec![p], vec![1.0]]).unwrap();
            let honest = honest_profile(&inst, s.threshold);
            let flipped = honest.with_vote(0, 0, !honest.vote(0, 0));
            assert_eq!(winner(&inst, &flipped).unwrap().winner, Some(0));
            let u_honest = utility(&inst, &s, &honest, 0).unwrap();
            let u_flip = utility(&inst, &s, &flipped, 0).unwrap();
            assert!(u_honest >= u_flip - UTILITY_TOL, "p = {p}");
        }
    }
}
