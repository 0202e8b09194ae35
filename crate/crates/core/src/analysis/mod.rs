//! Equilibrium analysis of the approval mechanism.
//!
//! Two evaluation routes exist on purpose. [`is_approx_pne`] and
//! [`is_admissible`] go through [`crate::mechanism::utility`] and rebuild the
//! outcome for every candidate profile. Enumeration, best responses and the
//! dynamics use [`Game`], which caches normalized external rewards and the
//! approval mass of the other experts. The two are cross-checked in tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{
    expected_reward, honest_row, row_mask, select_from_mass, utility, Instance, RewardSchedule,
    VotingProfile, MAX_PROPOSALS, UTILITY_TOL,
};
use crate::params::deviation_safety_threshold;

mod dynamics;
mod enumerate;

pub use dynamics::{best_response_dynamics, DynamicsTrace, Move, Terminal};
pub use enumerate::{
    constructive_pne, enumerate_equilibria, ConstructivePne, Equilibrium, EquilibriumReport, Ratio,
    ENUMERATION_LIMIT,
};

/// How experts are allowed to misreport.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Any vote vector is acceptable as long as it maximizes utility.
    Strategic,
    /// An expert only lies on a proposal when telling the truth there would
    /// strictly lower their utility.
    #[serde(rename = "semi")]
    SemiStrategic,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strategic" => Ok(Mode::Strategic),
            "semi" | "semi-strategic" => Ok(Mode::SemiStrategic),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode '{other}', expected 'strategic' or 'semi'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumQuery {
    pub mode: Mode,
    pub epsilon: f64,
}

impl EquilibriumQuery {
    pub fn new(mode: Mode, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "equilibrium slack epsilon = {epsilon} must be non-negative"
            )));
        }
        Ok(Self { mode, epsilon })
    }

    pub fn exact(mode: Mode) -> Self {
        Self { mode, epsilon: 0.0 }
    }
}

/// Cached view of an instance for repeated utility evaluation.
///
/// Utilities are evaluated against the approval mass of everyone except the
/// deviating expert, so trying all `2^k` vote vectors of one expert costs
/// `O(k)` each.
#[derive(Debug, Clone)]
pub struct Game<'a> {
    instance: &'a Instance,
    schedule: &'a RewardSchedule,
    external: Vec<Vec<f64>>,
    honest: Vec<u32>,
}

impl<'a> Game<'a> {
    pub fn new(instance: &'a Instance, schedule: &'a RewardSchedule) -> Result<Self> {
        let mut external = Vec::with_capacity(instance.n());
        for i in 0..instance.n() {
            let row = (0..instance.k())
                .map(|j| instance.normalized_external(i, j))
                .collect::<Result<Vec<_>>>()?;
            external.push(row);
        }
        let honest = instance
            .beliefs()
            .iter()
            .map(|b| honest_row(b, schedule.threshold))
            .collect();
        Ok(Self {
            instance,
            schedule,
            external,
            honest,
        })
    }

    pub fn instance(&self) -> &Instance {
        self.instance
    }

    pub fn n(&self) -> usize {
        self.instance.n()
    }

    pub fn k(&self) -> usize {
        self.instance.k()
    }

    pub fn honest_row(&self, expert: usize) -> u32 {
        self.honest[expert]
    }

    /// Number of distinct vote vectors of one expert.
    pub fn row_count(&self) -> u32 {
        row_mask(self.k()).wrapping_add(1)
    }

    /// Approving weight per proposal, leaving `expert` out.
    pub fn others_mass(&self, rows: &[u32], expert: usize) -> Vec<f64> {
        let k = self.k();
        let mut mass = vec![0.0; k];
        for (i, (&w, &row)) in self.instance.weights().iter().zip(rows).enumerate() {
            if i == expert {
                continue;
            }
            for (j, m) in mass.iter_mut().enumerate() {
                if row >> j & 1 == 1 {
                    *m += w;
                }
            }
        }
        mass
    }

    pub fn winner_with(&self, others: &[f64], expert: usize, row: u32) -> Option<usize> {
        let w = self.instance.weights()[expert];
        let mut buf = [0.0; MAX_PROPOSALS];
        let mass = &mut buf[..others.len()];
        for (j, m) in mass.iter_mut().enumerate() {
            *m = others[j] + if row >> j & 1 == 1 { w } else { 0.0 };
        }
        select_from_mass(mass)
    }

    /// Utility of `expert` for the outcome `winner` given their vote vector.
    pub fn payoff(&self, expert: usize, row: u32, winner: Option<usize>) -> f64 {
        let Some(j) = winner else {
            return 0.0;
        };
        let p = self.instance.belief(expert, j);
        p * self.external[expert][j] + expected_reward(row >> j & 1 == 1, p, self.schedule)
    }

    pub fn utility_with(&self, others: &[f64], expert: usize, row: u32) -> f64 {
        self.payoff(expert, row, self.winner_with(others, expert, row))
    }

    /// Utility of every vote vector of `expert`, indexed by its bitmask.
    pub fn row_utilities(&self, others: &[f64], expert: usize) -> Vec<f64> {
        (0..self.row_count())
            .map(|row| self.utility_with(others, expert, row))
            .collect()
    }

    /// Replaces dishonest coordinates by honest ones for as long as doing so
    /// costs no more than the comparison tolerance.
    fn honestify(&self, utils: &[f64], expert: usize, mut row: u32) -> u32 {
        let honest = self.honest[expert];
        loop {
            let mut changed = false;
            for j in 0..self.k() {
                let bit = 1u32 << j;
                if (row ^ honest) & bit != 0 {
                    let flipped = row ^ bit;
                    if utils[flipped as usize] >= utils[row as usize] - UTILITY_TOL {
                        row = flipped;
                        changed = true;
                    }
                }
            }
            if !changed {
                return row;
            }
        }
    }

    /// Optimal vote vectors for `expert` against `rows`, sorted by bitmask.
    pub fn best_responses(&self, rows: &[u32], expert: usize, mode: Mode) -> Vec<u32> {
        let others = self.others_mass(rows, expert);
        let utils = self.row_utilities(&others, expert);
        let best = utils.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let maximizers = (0..self.row_count()).filter(|&r| utils[r as usize] >= best - UTILITY_TOL);
        let mut out: Vec<u32> = match mode {
            Mode::Strategic => maximizers.collect(),
            Mode::SemiStrategic => maximizers
                .map(|r| self.honestify(&utils, expert, r))
                .collect(),
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Semi-strategic admissibility of one expert's current vote vector.
    pub fn admissible(&self, rows: &[u32], expert: usize) -> bool {
        let others = self.others_mass(rows, expert);
        self.admissible_with(&others, rows[expert], expert)
    }

    fn admissible_with(&self, others: &[f64], row: u32, expert: usize) -> bool {
        let current = self.utility_with(others, expert, row);
        let dishonest = row ^ self.honest[expert];
        (0..self.k()).filter(|j| dishonest >> j & 1 == 1).all(|j| {
            self.utility_with(others, expert, row ^ (1 << j)) < current - UTILITY_TOL
        })
    }

    /// Fast equilibrium test used by enumeration.
    pub fn is_equilibrium(&self, rows: &[u32], query: &EquilibriumQuery) -> bool {
        let factor = 1.0 + query.epsilon;
        (0..self.n()).all(|i| {
            let others = self.others_mass(rows, i);
            if query.mode == Mode::SemiStrategic && !self.admissible_with(&others, rows[i], i) {
                return false;
            }
            let bound = factor * self.utility_with(&others, i, rows[i]) + UTILITY_TOL;
            (0..self.row_count()).all(|r| self.utility_with(&others, i, r) <= bound)
        })
    }
}

/// Best responses of `expert` to `profile`, as vote vectors.
///
/// In semi-strategic mode every maximizer is pushed towards honesty one
/// coordinate at a time (re-evaluating the winner for each flip) whenever the
/// honest coordinate is no worse, so the returned vectors are admissible.
pub fn best_response(
    instance: &Instance,
    schedule: &RewardSchedule,
    profile: &VotingProfile,
    expert: usize,
    mode: Mode,
) -> Result<Vec<Vec<u8>>> {
    check(instance, profile, expert)?;
    let game = Game::new(instance, schedule)?;
    Ok(game
        .best_responses(profile.rows(), expert, mode)
        .into_iter()
        .map(|r| crate::mechanism::row_to_vec(r, instance.k()))
        .collect())
}

fn check(instance: &Instance, profile: &VotingProfile, expert: usize) -> Result<()> {
    if expert >= instance.n() {
        return Err(Error::NoSuchExpert(expert));
    }
    crate::mechanism::winner(instance, profile).map(|_| ())
}

/// Per-expert semi-strategic admissibility: every dishonest coordinate, when
/// flipped back on its own, must leave the expert strictly worse off.
pub fn is_admissible(
    instance: &Instance,
    schedule: &RewardSchedule,
    profile: &VotingProfile,
) -> Result<Vec<bool>> {
    let t = schedule.threshold;
    (0..instance.n())
        .map(|i| {
            let current = utility(instance, schedule, profile, i)?;
            for j in 0..instance.k() {
                let honest = instance.belief(i, j) >= t;
                if profile.vote(i, j) != honest {
                    let flipped = profile.with_vote(i, j, honest);
                    if utility(instance, schedule, &flipped, i)? >= current - UTILITY_TOL {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        })
        .collect()
}

/// Whether no expert can multiply their utility by more than `1 + epsilon`
/// through a unilateral change of vote vector (and, in semi-strategic mode,
/// every expert is admissible).
pub fn is_approx_pne(
    instance: &Instance,
    schedule: &RewardSchedule,
    profile: &VotingProfile,
    query: &EquilibriumQuery,
) -> Result<bool> {
    crate::mechanism::winner(instance, profile)?;
    if query.mode == Mode::SemiStrategic
        && !is_admissible(instance, schedule, profile)?
            .into_iter()
            .all(|ok| ok)
    {
        return Ok(false);
    }
    let rows = row_mask(instance.k()) as u64 + 1;
    for i in 0..instance.n() {
        let bound = (1.0 + query.epsilon) * utility(instance, schedule, profile, i)? + UTILITY_TOL;
        for r in 0..rows {
            let deviation = profile.with_row(i, r as u32);
            if utility(instance, schedule, &deviation, i)? > bound {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Which (expert, proposal) cells are protected against being pushed into
/// approval of a proposal the expert considers bad.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub safe: Vec<Vec<bool>>,
    /// Every cell with a below-threshold belief is safe.
    pub eligible: bool,
}

pub fn safety_certificate(instance: &Instance, schedule: &RewardSchedule) -> Result<Certificate> {
    let mut safe = Vec::with_capacity(instance.n());
    let mut eligible = true;
    for i in 0..instance.n() {
        let mut row = Vec::with_capacity(instance.k());
        for j in 0..instance.k() {
            let g = instance.normalized_external(i, j)?;
            let p = instance.belief(i, j);
            let ok = p < deviation_safety_threshold(schedule, g).effective_threshold;
            if p < schedule.threshold && !ok {
                eligible = false;
            }
            row.push(ok);
        }
        safe.push(row);
    }
    Ok(Certificate { safe, eligible })
}
