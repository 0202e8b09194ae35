//! Named instances that exhibit the mechanism's known worst cases.

use avgov::analysis::{EquilibriumQuery, Mode};
use avgov::mechanism::Instance;
use clap::ValueEnum;

use crate::error::{CliError, Result};
use crate::scenario::{Scenario, ScheduleSource};

pub const BUILTIN_THRESHOLD: f64 = 0.9;

/// Every built-in uses the schedule derived from `T = 0.9`, `epsilon = 19`,
/// `a' = 1`, i.e. `a = 2`, `s = 17`.
pub const BUILTIN_SCHEDULE: ScheduleSource = ScheduleSource::Derived {
    threshold: BUILTIN_THRESHOLD,
    epsilon: 19.0,
    a_prime: 1.0,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    /// One slightly heavier expert alone approves a proposal nobody else
    /// likes; the equilibrium quality ratio grows linearly in `--n`.
    #[value(alias = "prop3")]
    LinearGap,
    /// Three experts whose semi-strategic best responses cycle forever.
    #[value(alias = "prop4")]
    Cycle,
    /// Two experts whose bad equilibrium has quality ratio
    /// `2 / (1 + eps-weight)`.
    #[value(alias = "thm6")]
    TightGap,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::LinearGap => "linear-gap",
            Builtin::Cycle => "cycle",
            Builtin::TightGap => "tight-gap",
        }
    }
}

pub fn linear_gap(n: usize) -> Result<Instance> {
    if n < 2 {
        return Err(CliError::Argument(format!("--n must be at least 2, got {n}")));
    }
    let share = 1.0 / n as f64;
    let mut weights = vec![share + 0.01];
    weights.extend(std::iter::repeat_n(share, n));
    let mut beliefs = vec![vec![1.0, 0.0]];
    beliefs.extend(std::iter::repeat_n(vec![0.0, 1.0], n));
    Ok(Instance::without_externals(weights, beliefs)?)
}

pub fn cycle() -> Instance {
    Instance::without_externals(
        vec![0.49, 0.41, 0.10],
        vec![vec![0.95, 1.0], vec![1.0, 0.95], vec![1.0, 0.0]],
    )
    .expect("valid instance")
}

pub fn tight_gap(slack: f64) -> Result<Instance> {
    if !(slack > 0.0 && slack < 1.0) {
        return Err(CliError::Argument(format!(
            "--eps-weight must lie in (0, 1), got {slack}"
        )));
    }
    Ok(Instance::without_externals(
        vec![1.0 + slack, 1.0 - slack],
        vec![vec![BUILTIN_THRESHOLD, 1.0], vec![1.0, 0.0]],
    )?)
}

pub fn scenario(builtin: Builtin, n: usize, slack: f64, query: EquilibriumQuery) -> Result<Scenario> {
    let instance = match builtin {
        Builtin::LinearGap => linear_gap(n)?,
        Builtin::Cycle => cycle(),
        Builtin::TightGap => tight_gap(slack)?,
    };
    Scenario::from_parts(instance, BUILTIN_SCHEDULE, None, query, None)
}

/// The query each built-in is usually examined under.
pub fn default_query(builtin: Builtin) -> EquilibriumQuery {
    match builtin {
        Builtin::LinearGap => EquilibriumQuery::exact(Mode::Strategic),
        Builtin::Cycle | Builtin::TightGap => EquilibriumQuery::exact(Mode::SemiStrategic),
    }
}
