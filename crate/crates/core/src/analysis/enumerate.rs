use serde::{Deserialize, Serialize};

use super::{best_response_dynamics, EquilibriumQuery, Game, Mode, Terminal};
use crate::error::{Error, Result};
use crate::mechanism::{
    opt_quality, qual, select_from_mass, approval_mass, Instance, OptQuality, RewardSchedule,
    VotingProfile, UTILITY_TOL,
};

/// Largest `n * k` for which exhaustive enumeration is attempted.
pub const ENUMERATION_LIMIT: usize = 24;

/// Efficiency ratio; unbounded when an equilibrium selects nothing of value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Finite(f64),
    Infinite,
}

impl Ratio {
    /// `opt / quality`. Zero-quality outcomes give an infinite ratio unless
    /// the optimum is itself zero, in which case nothing was lost.
    pub fn of(opt: f64, quality: f64) -> Self {
        if quality > 0.0 {
            Ratio::Finite(opt / quality)
        } else if opt > 0.0 {
            Ratio::Infinite
        } else {
            Ratio::Finite(1.0)
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Ratio::Finite(v) => v,
            Ratio::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Ratio::Finite(_))
    }
}

impl Serialize for Ratio {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Ratio::Finite(v) => serializer.serialize_f64(*v),
            Ratio::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(Ratio::Finite(v)),
            Raw::Text(s) if s == "inf" => Ok(Ratio::Infinite),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("invalid ratio '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub profile: VotingProfile,
    pub winner: Option<usize>,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub query: EquilibriumQuery,
    /// In canonical profile-index order.
    pub equilibria: Vec<Equilibrium>,
    pub opt: OptQuality,
    /// `None` when there is no equilibrium to measure.
    pub poa: Option<Ratio>,
    pub pos: Option<Ratio>,
    pub profiles_checked: u64,
}

/// Checks every one of the `2^(n k)` profiles.
pub fn enumerate_equilibria(
    instance: &Instance,
    schedule: &RewardSchedule,
    query: &EquilibriumQuery,
) -> Result<EquilibriumReport> {
    let (n, k) = (instance.n(), instance.k());
    let cells = n * k;
    if cells > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard {
            cells,
            limit: ENUMERATION_LIMIT,
        });
    }
    let game = Game::new(instance, schedule)?;
    let total = 1u64 << cells;
    let accept = |idx: u64| {
        let profile = VotingProfile::from_index(n, k, idx);
        game.is_equilibrium(profile.rows(), query)
    };

    #[cfg(feature = "parallel")]
    let hits: Vec<u64> = {
        use rayon::prelude::*;
        (0..total).into_par_iter().filter(|&idx| accept(idx)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let hits: Vec<u64> = (0..total).filter(|&idx| accept(idx)).collect();

    let t = schedule.threshold;
    let equilibria: Vec<Equilibrium> = hits
        .into_iter()
        .map(|idx| {
            let profile = VotingProfile::from_index(n, k, idx);
            let winner = select_from_mass(&approval_mass(instance.weights(), profile.rows(), k));
            Equilibrium {
                quality: qual(instance, t, winner),
                profile,
                winner,
            }
        })
        .collect();

    let opt = opt_quality(instance, t);
    let worst = equilibria.iter().map(|e| e.quality).reduce(f64::min);
    let best = equilibria.iter().map(|e| e.quality).reduce(f64::max);
    Ok(EquilibriumReport {
        query: *query,
        poa: worst.map(|q| Ratio::of(opt.quality, q)),
        pos: best.map(|q| Ratio::of(opt.quality, q)),
        opt,
        equilibria,
        profiles_checked: total,
    })
}

/// A pure equilibrium built from a single approval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructivePne {
    pub profile: VotingProfile,
    /// `(expert, proposal)` of the seeding approval, `None` when nobody gains
    /// from any lone approval and the all-reject profile is used.
    pub anchor: Option<(usize, usize)>,
    /// Best-response moves needed after the seed, zero when the seed already
    /// is an equilibrium.
    pub repair_moves: usize,
    /// Whether the returned profile passed the exact strategic check.
    pub verified: bool,
}

/// Builds a strategic pure equilibrium.
///
/// Among experts who would profit from being the only approver of some
/// proposal, the heaviest (lowest index on ties) approves their favourite
/// proposal and everyone else rejects everything. If no expert profits from a
/// lone approval, everyone rejects everything.
///
/// The seed is not always an equilibrium: an expert who is unable to move the
/// winner may still gain by approving it. Such seeds are repaired with
/// strategic best-response dynamics; if those do not settle, the first
/// equilibrium in canonical order is taken from exhaustive enumeration
/// (within [`ENUMERATION_LIMIT`]).
pub fn constructive_pne(instance: &Instance, schedule: &RewardSchedule) -> Result<ConstructivePne> {
    let (n, k) = (instance.n(), instance.k());
    let game = Game::new(instance, schedule)?;
    let exact = EquilibriumQuery::exact(Mode::Strategic);

    let lone_utility = |i: usize, j: usize| {
        let mut rows = vec![0u32; n];
        rows[i] = 1 << j;
        let others = game.others_mass(&rows, i);
        game.utility_with(&others, i, rows[i])
    };

    let mut anchor: Option<(usize, usize)> = None;
    let mut anchor_weight = f64::NEG_INFINITY;
    for i in 0..n {
        let utils: Vec<f64> = (0..k).map(|j| lone_utility(i, j)).collect();
        if !utils.iter().any(|&u| u > UTILITY_TOL) {
            continue;
        }
        let w = instance.weights()[i];
        if w > anchor_weight {
            let mut best = 0;
            for j in 1..k {
                if utils[j] > utils[best] + UTILITY_TOL {
                    best = j;
                }
            }
            anchor = Some((i, best));
            anchor_weight = w;
        }
    }

    let mut seed = VotingProfile::zeros(n, k);
    if let Some((i, j)) = anchor {
        seed = seed.with_vote(i, j, true);
    }
    if game.is_equilibrium(seed.rows(), &exact) {
        return Ok(ConstructivePne {
            profile: seed,
            anchor,
            repair_moves: 0,
            verified: true,
        });
    }

    let max_steps = 64 * n * game.row_count() as usize;
    let trace = best_response_dynamics(instance, schedule, &seed, Mode::Strategic, max_steps)?;
    if trace.terminal == Terminal::FixedPoint {
        return Ok(ConstructivePne {
            verified: game.is_equilibrium(trace.final_profile.rows(), &exact),
            repair_moves: trace.path.len(),
            profile: trace.final_profile,
            anchor,
        });
    }

    if n * k <= ENUMERATION_LIMIT {
        let report = enumerate_equilibria(instance, schedule, &exact)?;
        if let Some(first) = report.equilibria.into_iter().next() {
            return Ok(ConstructivePne {
                profile: first.profile,
                anchor,
                repair_moves: trace.path.len(),
                verified: true,
            });
        }
    }
    Ok(ConstructivePne {
        profile: seed,
        anchor,
        repair_moves: trace.path.len(),
        verified: false,
    })
}
