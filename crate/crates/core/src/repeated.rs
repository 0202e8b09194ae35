//! Repeated update selection with reputation weights.
//!
//! Every round brings a fresh batch of proposals. Experts vote with their
//! current weights, the winner is implemented and its quality revealed, and
//! each expert's weight then moves towards their running fraction of correct
//! predictions by at most a factor `1 +/- zeta`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::Ratio;
use crate::error::{Error, Result};
use crate::mechanism::{
    honest_row, reward, row_mask, row_to_vec, utility, winner, Instance, RewardSchedule,
    VotingProfile,
};
use crate::params::max_discount;

/// Every expert starts at this weight.
pub const INITIAL_WEIGHT: f64 = 0.5;

/// Upper bound on the number of vote plans [`deviation_gap`] may search.
pub const PLAN_LIMIT: u128 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    /// Probability that each expert's signal about a proposal is correct.
    pub expertise: Vec<f64>,
    /// Probability that a fresh proposal is good.
    pub good_prior: f64,
    #[serde(rename = "k")]
    pub proposals_per_round: usize,
    pub zeta: f64,
    pub gamma: f64,
    pub horizon: usize,
    pub seed: u64,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.expertise.is_empty() || self.proposals_per_round == 0 {
            return Err(Error::EmptyInstance);
        }
        if self.proposals_per_round > crate::mechanism::MAX_PROPOSALS {
            return Err(Error::TooManyProposals {
                max: crate::mechanism::MAX_PROPOSALS,
                found: self.proposals_per_round,
            });
        }
        for (i, &pi) in self.expertise.iter().enumerate() {
            if !(0.0..=1.0).contains(&pi) {
                return Err(Error::OutOfRange {
                    field: format!("world.expertise[{i}]"),
                    value: pi,
                    range: "[0, 1]",
                });
            }
        }
        if !(0.0..=1.0).contains(&self.good_prior) {
            return Err(Error::OutOfRange {
                field: "world.good_prior".into(),
                value: self.good_prior,
                range: "[0, 1]",
            });
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::OutOfRange {
                field: "world.zeta".into(),
                value: self.zeta,
                range: "(0, 1)",
            });
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::OutOfRange {
                field: "world.gamma".into(),
                value: self.gamma,
                range: "[0, 1)",
            });
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("world.horizon must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.expertise.len()
    }
}

/// One round of fresh proposals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSample {
    pub quality: Vec<bool>,
    pub beliefs: Vec<Vec<f64>>,
    pub external: Vec<Vec<f64>>,
}

/// Draws true qualities and each expert's signal. Beliefs are 0 or 1; an
/// expert's belief matches the truth with probability equal to their
/// expertise. External rewards are zero.
pub fn sample_round<R: Rng + ?Sized>(world: &WorldConfig, rng: &mut R) -> RoundSample {
    let k = world.proposals_per_round;
    let quality: Vec<bool> = (0..k).map(|_| rng.gen::<f64>() < world.good_prior).collect();
    let beliefs = world
        .expertise
        .iter()
        .map(|&pi| {
            quality
                .iter()
                .map(|&q| {
                    let correct = rng.gen::<f64>() < pi;
                    if correct == q {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    RoundSample {
        quality,
        beliefs,
        external: vec![vec![0.0; k]; world.n()],
    }
}

/// The first `rounds` samples of the world's seeded stream. Samples never
/// depend on votes, so every policy run on the same seed sees the same rounds.
pub fn sample_rounds(world: &WorldConfig, rounds: usize) -> Vec<RoundSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(world.seed);
    (0..rounds).map(|_| sample_round(world, &mut rng)).collect()
}

/// Fraction of correct predictions so far; one half before anything has been
/// revealed.
pub fn correct_fraction(correct: usize, revealed: usize) -> f64 {
    debug_assert!(correct <= revealed);
    if revealed == 0 {
        INITIAL_WEIGHT
    } else {
        correct as f64 / revealed as f64
    }
}

/// Moves `weight` towards `omega`, by at most a factor `1 +/- zeta`.
pub fn delayed_update(weight: f64, omega: f64, zeta: f64) -> f64 {
    if weight <= omega {
        omega.min((1.0 + zeta) * weight)
    } else {
        omega.max((1.0 - zeta) * weight)
    }
}

/// Reputation update applied after every round.
pub trait WeightRule {
    fn update(&self, weight: f64, omega: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayedUpdate {
    pub zeta: f64,
}

impl WeightRule for DelayedUpdate {
    fn update(&self, weight: f64, omega: f64) -> f64 {
        delayed_update(weight, omega, self.zeta)
    }
}

/// `sum_t gamma^t x_t`
pub fn discounted_total(values: &[f64], gamma: f64) -> f64 {
    values
        .iter()
        .fold((0.0, 1.0), |(acc, factor), &v| (acc + factor * v, factor * gamma))
        .0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    AllHonest,
    /// `expert` votes `plan[t]` (a bitmask) in round `t` and honestly once the
    /// plan runs out; everyone else is honest throughout.
    SingleDeviator { expert: usize, plan: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub profile: VotingProfile,
    pub winner: Option<usize>,
    pub revealed_quality: Option<bool>,
    /// Weights used in this round.
    pub weights: Vec<f64>,
    /// Payment received, including the weight factor.
    pub realized: Vec<f64>,
    /// Expected payment from each expert's own viewpoint, including the
    /// weight factor.
    pub expected: Vec<f64>,
    /// Correct-prediction fraction after this round.
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedTrace {
    pub rounds: Vec<RoundRecord>,
    pub discounted_realized: Vec<f64>,
    pub discounted_expected: Vec<f64>,
    pub correct: Vec<usize>,
    /// Rounds whose winner was not the dummy outcome.
    pub revealed_rounds: usize,
    pub final_weights: Vec<f64>,
    pub gamma_max: f64,
    /// `gamma` is below `gamma_max`, so the discounted honest-play guarantee
    /// applies.
    pub discount_ok: bool,
}

pub fn run(world: &WorldConfig, schedule: &RewardSchedule, policy: &Policy) -> Result<RepeatedTrace> {
    world.validate()?;
    let samples = sample_rounds(world, world.horizon);
    run_on(world, schedule, policy, &samples, &DelayedUpdate { zeta: world.zeta })
}

/// Runs the game over pre-drawn rounds with an arbitrary weight rule.
pub fn run_on(
    world: &WorldConfig,
    schedule: &RewardSchedule,
    policy: &Policy,
    samples: &[RoundSample],
    rule: &dyn WeightRule,
) -> Result<RepeatedTrace> {
    let n = world.n();
    let k = world.proposals_per_round;
    if let Policy::SingleDeviator { expert, plan } = policy {
        if *expert >= n {
            return Err(Error::NoSuchExpert(*expert));
        }
        if let Some(bad) = plan.iter().find(|&&r| r & !row_mask(k) != 0) {
            return Err(Error::InvalidArgument(format!(
                "plan row {bad:#b} has votes beyond proposal {k}"
            )));
        }
    }

    let mut weights = vec![INITIAL_WEIGHT; n];
    let mut correct = vec![0usize; n];
    let mut revealed_rounds = 0usize;
    let mut realized_series = vec![Vec::with_capacity(samples.len()); n];
    let mut expected_series = vec![Vec::with_capacity(samples.len()); n];
    let mut rounds = Vec::with_capacity(samples.len());

    for (t, sample) in samples.iter().enumerate() {
        let instance = Instance::new(weights.clone(), sample.beliefs.clone(), sample.external.clone())?;
        let mut rows: Vec<u32> = sample
            .beliefs
            .iter()
            .map(|b| honest_row(b, schedule.threshold))
            .collect();
        if let Policy::SingleDeviator { expert, plan } = policy {
            if let Some(&r) = plan.get(t) {
                rows[*expert] = r;
            }
        }
        let profile = VotingProfile::from_bits(k, rows)?;
        let outcome = winner(&instance, &profile)?;

        let mut realized = vec![0.0; n];
        let mut expected = vec![0.0; n];
        let mut revealed_quality = None;
        if let Some(j) = outcome.winner {
            let q = sample.quality[j];
            revealed_quality = Some(q);
            revealed_rounds += 1;
            for i in 0..n {
                let vote = profile.vote(i, j);
                realized[i] = reward(vote, q, schedule, weights[i]);
                expected[i] = weights[i] * utility(&instance, schedule, &profile, i)?;
                if vote == q {
                    correct[i] += 1;
                }
            }
        }
        for i in 0..n {
            realized_series[i].push(realized[i]);
            expected_series[i].push(expected[i]);
        }

        let omega: Vec<f64> = correct
            .iter()
            .map(|&c| correct_fraction(c, revealed_rounds))
            .collect();
        rounds.push(RoundRecord {
            round: t,
            profile,
            winner: outcome.winner,
            revealed_quality,
            weights: weights.clone(),
            realized,
            expected,
            omega: omega.clone(),
        });
        for (w, &o) in weights.iter_mut().zip(&omega) {
            *w = rule.update(*w, o);
        }
    }

    let gamma_max = max_discount(schedule.epsilon, world.zeta);
    Ok(RepeatedTrace {
        rounds,
        discounted_realized: realized_series
            .iter()
            .map(|s| discounted_total(s, world.gamma))
            .collect(),
        discounted_expected: expected_series
            .iter()
            .map(|s| discounted_total(s, world.gamma))
            .collect(),
        correct,
        revealed_rounds,
        final_weights: weights,
        gamma_max,
        discount_ok: world.gamma < gamma_max,
    })
}

/// Outcome of an exhaustive single-deviator search over a short horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationGap {
    pub expert: usize,
    pub horizon: usize,
    pub plans_searched: u64,
    /// Discounted expected reward of honest play over the horizon.
    pub honest_total: f64,
    /// Best discounted expected reward of any plan over the horizon.
    pub best_total: f64,
    pub best_plan: Vec<Vec<u8>>,
    /// Lower bound on honest rewards after the horizon.
    pub honest_tail: f64,
    /// Best plan value plus an upper bound on its rewards after the horizon.
    pub best_total_with_tail: f64,
    pub ratio: Ratio,
    pub ratio_with_tail: Ratio,
    /// `(1 + 3 eps)(1 + delta)`
    pub bound: f64,
    /// `(1 + eps)(1 + delta)`
    pub single_shot_bound: f64,
}

/// Searches every vote plan of `expert` over the first `horizon` rounds,
/// all other experts voting honestly, and compares the best discounted
/// expected reward against honest play.
///
/// Rewards after the horizon are bounded analytically: honest play earns at
/// least `w (1 - T) a'` per round while the weight can shrink by `1 - zeta`
/// per round; a deviator earns at most `(1 + delta) w a` while the weight can
/// grow by `1 + zeta` per round.
pub fn deviation_gap(
    world: &WorldConfig,
    schedule: &RewardSchedule,
    expert: usize,
    horizon: usize,
) -> Result<DeviationGap> {
    world.validate()?;
    if expert >= world.n() {
        return Err(Error::NoSuchExpert(expert));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let k = world.proposals_per_round;
    let per_round = 1u128 << k;
    let plans = (0..horizon).try_fold(1u128, |acc, _| acc.checked_mul(per_round));
    let plans = match plans {
        Some(p) if p <= PLAN_LIMIT => p as u64,
        Some(p) => return Err(Error::SearchGuard { plans: p, limit: PLAN_LIMIT }),
        None => return Err(Error::SearchGuard { plans: u128::MAX, limit: PLAN_LIMIT }),
    };
    let gamma_max = max_discount(schedule.epsilon, world.zeta);
    if world.gamma > gamma_max {
        return Err(Error::DiscountTooLarge {
            gamma: world.gamma,
            max: gamma_max,
        });
    }

    let samples = sample_rounds(world, horizon);
    let rule = DelayedUpdate { zeta: world.zeta };
    let gamma = world.gamma;
    let discount_h = gamma.powi(horizon as i32);
    let zeta = world.zeta;

    let honest = run_on(world, schedule, &Policy::AllHonest, &samples, &rule)?;
    let honest_total = honest.discounted_expected[expert];
    let honest_tail = honest.final_weights[expert]
        * (1.0 - schedule.threshold)
        * schedule.a_prime
        * discount_h
        / (1.0 - (1.0 - zeta) * gamma);

    let evaluate = |idx: u64| -> Result<(u64, f64, f64)> {
        let plan = decode_plan(idx, k, horizon);
        let trace = run_on(
            world,
            schedule,
            &Policy::SingleDeviator { expert, plan },
            &samples,
            &rule,
        )?;
        let total = trace.discounted_expected[expert];
        let tail = (1.0 + schedule.delta) * schedule.a * trace.final_weights[expert] * discount_h
            / (1.0 - (1.0 + zeta) * gamma);
        Ok((idx, total, total + tail))
    };

    #[cfg(feature = "parallel")]
    let values: Vec<(u64, f64, f64)> = {
        use rayon::prelude::*;
        (0..plans).into_par_iter().map(evaluate).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<(u64, f64, f64)> = (0..plans).map(evaluate).collect::<Result<_>>()?;

    // first maximum in plan order
    let (best_idx, best_total, _) = values
        .iter()
        .copied()
        .fold((0, f64::NEG_INFINITY, 0.0), |best, v| if v.1 > best.1 { v } else { best });
    let best_total_with_tail = values
        .iter()
        .map(|v| v.2)
        .fold(f64::NEG_INFINITY, f64::max);

    let eps = schedule.epsilon;
    let delta = schedule.delta;
    Ok(DeviationGap {
        expert,
        horizon,
        plans_searched: plans,
        honest_total,
        best_total,
        best_plan: decode_plan(best_idx, k, horizon)
            .into_iter()
            .map(|r| row_to_vec(r, k))
            .collect(),
        honest_tail,
        best_total_with_tail,
        ratio: gain_ratio(best_total, honest_total),
        ratio_with_tail: gain_ratio(best_total_with_tail, honest_total + honest_tail),
        bound: (1.0 + 3.0 * eps) * (1.0 + delta),
        single_shot_bound: (1.0 + eps) * (1.0 + delta),
    })
}

fn gain_ratio(best: f64, honest: f64) -> Ratio {
    if honest > 0.0 {
        Ratio::Finite(best / honest)
    } else if best <= honest {
        Ratio::Finite(1.0)
    } else {
        Ratio::Infinite
    }
}

fn decode_plan(mut idx: u64, k: usize, horizon: usize) -> Vec<u32> {
    let base = 1u64 << k;
    (0..horizon)
        .map(|_| {
            let r = (idx % base) as u32;
            idx /= base;
            r
        })
        .collect()
}
