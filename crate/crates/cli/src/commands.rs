use std::path::{Path, PathBuf};

use avgov::analysis::{
    best_response, best_response_dynamics, constructive_pne, enumerate_equilibria, is_admissible,
    is_approx_pne, safety_certificate, EquilibriumQuery, Mode, Ratio, Terminal,
};
use avgov::mechanism::{
    approval_mass, honest_profile, opt_quality, qual, reward, reward_curve, row_to_vec, utility,
    winner, RewardSchedule, VotingProfile,
};
use avgov::params::{
    derive_schedule, derive_schedule_relaxed, deviation_safety_threshold_with,
    external_bound_delta, validate_schedule, ThresholdVariant,
};
use avgov::repeated::{deviation_gap, run, Policy};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::builtin::{self, Builtin};
use crate::error::{CliError, Result};
use crate::format::{real, to_json};
use crate::scenario::{load_scenario, Scenario};

/// Tolerance for the built-in ratio claims.
pub const CLAIM_TOL: f64 = 1e-9;

pub const DEFAULT_SAMPLES: usize = 101;
pub const DEFAULT_GAP_HORIZON: usize = 3;

/// Analyse weighted approval voting over candidate updates.
#[derive(Debug, Parser)]
#[command(name = "avgov", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Also write the command's table as CSV (or its report as JSON) here.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for the repeated-game world, overriding the scenario.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Expert behaviour: strategic or semi.
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    /// Equilibrium slack, or the schedule slack for derive-params and
    /// reward-curve.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Number of belief samples for reward-curve.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Rounds to simulate (repeat) or to search (deviation-gap).
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Scenario JSON file.
    pub scenario: Option<PathBuf>,
    /// Use a built-in instance instead of a scenario file.
    #[arg(long, conflicts_with = "scenario")]
    pub builtin: Option<Builtin>,
    /// Number of light experts in linear-gap.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Weight slack in tight-gap.
    #[arg(long = "eps-weight", default_value_t = 0.1)]
    pub eps_weight: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Proof,
    Statement,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive rewards from a threshold, slack (--epsilon) and rejection reward.
    DeriveParams {
        #[arg(long)]
        threshold: f64,
        #[arg(long = "a-prime", default_value_t = 1.0)]
        a_prime: f64,
        /// Allow a correct approval to pay less than a correct rejection.
        #[arg(long)]
        relaxed: bool,
    },
    /// Load a scenario and report its schedule diagnostics and delta.
    Validate(Source),
    /// Winner, utilities and admissibility of a profile (honest by default).
    Winner {
        #[command(flatten)]
        source: Source,
        /// Votes as comma-separated rows of 0/1, e.g. 01,10.
        #[arg(long)]
        profile: Option<String>,
        /// Also list this expert's best responses.
        #[arg(long)]
        expert: Option<usize>,
        /// Reveal the winner's quality (0 or 1) and report payments.
        #[arg(long)]
        reveal: Option<u8>,
    },
    /// Estimated quality of every proposal and the best one.
    Qual(Source),
    /// The honest profile and whether it is an approximate equilibrium.
    Honest(Source),
    /// All pure equilibria under the query.
    Enumerate(Source),
    /// Price of anarchy and stability, with the safety certificate.
    Poa(Source),
    /// A strategic equilibrium built from a single approval.
    ConstructPne(Source),
    /// Best-response dynamics until a fixed point, cycle or step limit.
    Dynamics {
        #[command(flatten)]
        source: Source,
        /// Starting votes (honest by default).
        #[arg(long)]
        profile: Option<String>,
        #[arg(long = "max-steps", default_value_t = 1000)]
        max_steps: usize,
    },
    /// Belief thresholds below which approving a rejected proposal never pays.
    Safety {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value = "proof")]
        variant: VariantArg,
    },
    /// Expected reward of approving and rejecting across beliefs.
    RewardCurve {
        #[command(flatten)]
        source: Source,
        /// Threshold when no scenario is given.
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
        #[arg(long = "a-prime", default_value_t = 1.0)]
        a_prime: f64,
    },
    /// Simulate the repeated game with reputation weights.
    Repeat {
        #[command(flatten)]
        source: Source,
        /// Expert following --plan instead of voting honestly.
        #[arg(long)]
        deviator: Option<usize>,
        /// Per-round votes of the deviator, e.g. 11,00,10.
        #[arg(long, requires = "deviator")]
        plan: Option<String>,
    },
    /// Best single-expert deviation over a short horizon against honest play.
    DeviationGap {
        #[command(flatten)]
        source: Source,
        /// Only search this expert (all experts by default).
        #[arg(long)]
        deviator: Option<usize>,
    },
    /// Rebuild a built-in instance and check its known property.
    Reproduce {
        name: Builtin,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long = "eps-weight", default_value_t = 0.1)]
        eps_weight: f64,
    },
}

/// Which library operations each command exposes.
pub const DISPATCH: &[(&str, &[&str])] = &[
    ("derive-params", &["derive_schedule"]),
    ("validate", &["load_scenario", "validate_schedule", "external_bound_delta"]),
    ("winner", &["winner", "utility", "reward", "best_response", "is_admissible"]),
    ("qual", &["qual", "opt_quality"]),
    ("honest", &["honest_profile", "is_approx_pne"]),
    ("enumerate", &["enumerate_equilibria"]),
    ("poa", &["safety_certificate"]),
    ("construct-pne", &["constructive_pne"]),
    ("dynamics", &["best_response_dynamics"]),
    ("safety", &["deviation_safety_threshold"]),
    ("reward-curve", &["reward_curve", "expected_reward"]),
    (
        "repeat",
        &["run", "sample_round", "correct_fraction", "delayed_update", "max_discount"],
    ),
    ("deviation-gap", &["deviation_gap"]),
    ("reproduce", &["reproduce"]),
];

/// A table for CSV export.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub json: String,
    pub table: Option<Table>,
    /// Set when a checked claim did not hold.
    pub failed_claim: Option<String>,
}

impl Report {
    fn plain(value: &Value) -> Result<Self> {
        Ok(Self {
            json: to_json(value)?,
            table: None,
            failed_claim: None,
        })
    }

    fn with_table(value: &Value, table: Table) -> Result<Self> {
        Ok(Self {
            table: Some(table),
            ..Self::plain(value)?
        })
    }

    /// Writes the CSV table, or the JSON report when there is no table.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let io_err = |source| CliError::Write {
            path: path.display().to_string(),
            source,
        };
        match &self.table {
            Some(table) => {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(&table.header)?;
                for row in &table.rows {
                    w.write_record(row)?;
                }
                w.flush().map_err(io_err)?;
            }
            None => std::fs::write(path, &self.json).map_err(io_err)?,
        }
        Ok(())
    }
}

pub fn execute(cli: &Cli) -> Result<Report> {
    let flags = &cli.flags;
    match &cli.command {
        Command::DeriveParams {
            threshold,
            a_prime,
            relaxed,
        } => derive_params(*threshold, flags, *a_prime, *relaxed),
        Command::Validate(src) => validate(&resolve(src, flags)?),
        Command::Winner {
            source,
            profile,
            expert,
            reveal,
        } => winner_report(&resolve(source, flags)?, profile.as_deref(), *expert, *reveal),
        Command::Qual(src) => qual_report(&resolve(src, flags)?),
        Command::Honest(src) => honest_report(&resolve(src, flags)?),
        Command::Enumerate(src) => enumerate_report(&resolve(src, flags)?),
        Command::Poa(src) => poa_report(&resolve(src, flags)?),
        Command::ConstructPne(src) => construct_report(&resolve(src, flags)?),
        Command::Dynamics {
            source,
            profile,
            max_steps,
        } => dynamics_report(&resolve(source, flags)?, profile.as_deref(), *max_steps),
        Command::Safety { source, variant } => safety_report(&resolve(source, flags)?, *variant),
        Command::RewardCurve {
            source,
            threshold,
            a_prime,
        } => {
            let schedule = if source.scenario.is_some() || source.builtin.is_some() {
                resolve(source, &Flags { epsilon: None, ..flags.clone() })?.schedule
            } else {
                derive_schedule(*threshold, flags.epsilon.unwrap_or(19.0), *a_prime)?
            };
            curve_report(&schedule, flags.samples.unwrap_or(DEFAULT_SAMPLES))
        }
        Command::Repeat {
            source,
            deviator,
            plan,
        } => repeat_report(&resolve(source, flags)?, *deviator, plan.as_deref()),
        Command::DeviationGap { source, deviator } => gap_report(
            &resolve(source, flags)?,
            *deviator,
            flags.horizon.unwrap_or(DEFAULT_GAP_HORIZON),
        ),
        Command::Reproduce { name, n, eps_weight } => reproduce(*name, *n, *eps_weight, flags),
    }
}

/// Loads the scenario or built-in and applies the flag overrides.
pub fn resolve(source: &Source, flags: &Flags) -> Result<Scenario> {
    let mut scenario = match (&source.scenario, source.builtin) {
        (Some(path), _) => load_scenario(path)?,
        (None, Some(b)) => builtin::scenario(b, source.n, source.eps_weight, builtin::default_query(b))?,
        (None, None) => {
            return Err(CliError::Argument(
                "give a scenario file or --builtin".into(),
            ))
        }
    };
    scenario.query = EquilibriumQuery::new(
        flags.mode.unwrap_or(scenario.query.mode),
        flags.epsilon.unwrap_or(scenario.query.epsilon),
    )?;
    if let Some(world) = &mut scenario.world {
        if let Some(seed) = flags.seed {
            world.seed = seed;
        }
        if let Some(h) = flags.horizon {
            world.horizon = h;
        }
        world.validate()?;
    }
    Ok(scenario)
}

pub fn parse_profile(text: &str, n: usize, k: usize) -> Result<VotingProfile> {
    let rows = parse_rows(text, k)?;
    if rows.len() != n {
        return Err(CliError::Argument(format!(
            "profile has {} rows, the instance has {n} experts",
            rows.len()
        )));
    }
    Ok(VotingProfile::from_matrix(&rows)?)
}

fn parse_rows(text: &str, k: usize) -> Result<Vec<Vec<u8>>> {
    text.split(',')
        .map(|row| {
            let row = row.trim();
            if row.len() != k {
                return Err(CliError::Argument(format!(
                    "vote row '{row}' should have {k} digits"
                )));
            }
            row.chars()
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    other => Err(CliError::Argument(format!("vote '{other}' is not 0 or 1"))),
                })
                .collect()
        })
        .collect()
}

fn votes_text(profile: &VotingProfile) -> String {
    profile
        .to_matrix()
        .iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<String>())
        .collect::<Vec<_>>()
        .join(",")
}

fn opt_text(w: Option<usize>) -> String {
    w.map_or_else(String::new, |j| j.to_string())
}

fn derive_params(threshold: f64, flags: &Flags, a_prime: f64, relaxed: bool) -> Result<Report> {
    let epsilon = flags
        .epsilon
        .ok_or_else(|| CliError::Argument("derive-params needs --epsilon".into()))?;
    let schedule = if relaxed {
        derive_schedule_relaxed(threshold, epsilon, a_prime)?
    } else {
        derive_schedule(threshold, epsilon, a_prime)?
    };
    Report::plain(&json!({
        "schedule": schedule,
        "diagnostics": validate_schedule(&schedule),
    }))
}

fn validate(sc: &Scenario) -> Result<Report> {
    Report::plain(&json!({
        "experts": sc.instance.n(),
        "proposals": sc.instance.k(),
        "schedule": sc.schedule,
        "schedule_source": sc.source,
        "diagnostics": sc.diagnostics,
        "delta": {
            "required": external_bound_delta(&sc.instance, &sc.schedule)?,
            "supplied": sc.supplied_delta,
            "used": sc.schedule.delta,
        },
        "query": sc.query,
        "world": sc.world,
    }))
}

fn winner_report(sc: &Scenario, profile: Option<&str>, expert: Option<usize>, reveal: Option<u8>) -> Result<Report> {
    let inst = &sc.instance;
    let s = &sc.schedule;
    let profile = match profile {
        Some(text) => parse_profile(text, inst.n(), inst.k())?,
        None => honest_profile(inst, s.threshold),
    };
    let outcome = winner(inst, &profile)?;
    let utilities = (0..inst.n())
        .map(|i| utility(inst, s, &profile, i))
        .collect::<avgov::Result<Vec<_>>>()?;
    let mut report = json!({
        "profile": profile,
        "winner": outcome.winner,
        "approval_mass": outcome.approval_mass,
        "quality": qual(inst, s.threshold, outcome.winner),
        "utilities": utilities,
        "admissible": is_admissible(inst, s, &profile)?,
    });
    if let Some(i) = expert {
        report["best_responses"] = json!({
            "expert": i,
            "mode": sc.query.mode,
            "responses": best_response(inst, s, &profile, i, sc.query.mode)?,
        });
    }
    if let Some(q) = reveal {
        let good = match q {
            0 => false,
            1 => true,
            other => return Err(CliError::Argument(format!("--reveal must be 0 or 1, got {other}"))),
        };
        let payments: Vec<f64> = (0..inst.n())
            .map(|i| match outcome.winner {
                Some(j) => reward(profile.vote(i, j), good, s, inst.weights()[i]),
                None => 0.0,
            })
            .collect();
        report["payments"] = json!(payments);
        report["revealed_quality"] = json!(outcome.winner.map(|_| good));
    }
    Report::plain(&report)
}

fn qual_report(sc: &Scenario) -> Result<Report> {
    let t = sc.schedule.threshold;
    let qualities: Vec<f64> = (0..sc.instance.k()).map(|j| qual(&sc.instance, t, Some(j))).collect();
    Report::plain(&json!({
        "threshold": t,
        "quality": qualities,
        "opt": opt_quality(&sc.instance, t),
    }))
}

fn honest_report(sc: &Scenario) -> Result<Report> {
    let (inst, s) = (&sc.instance, &sc.schedule);
    let profile = honest_profile(inst, s.threshold);
    let w = winner(inst, &profile)?.winner;
    let guarantee = EquilibriumQuery::new(
        Mode::SemiStrategic,
        (1.0 + s.epsilon) * (1.0 + s.delta) - 1.0,
    )?;
    Report::plain(&json!({
        "profile": profile,
        "winner": w,
        "quality": qual(inst, s.threshold, w),
        "query": sc.query,
        "is_equilibrium": is_approx_pne(inst, s, &profile, &sc.query)?,
        "guarantee_query": guarantee,
        "is_equilibrium_at_guarantee": is_approx_pne(inst, s, &profile, &guarantee)?,
    }))
}

fn enumerate_report(sc: &Scenario) -> Result<Report> {
    let report = enumerate_equilibria(&sc.instance, &sc.schedule, &sc.query)?;
    let table = Table {
        header: vec!["index", "votes", "winner", "quality"],
        rows: report
            .equilibria
            .iter()
            .map(|e| {
                vec![
                    e.profile.index().to_string(),
                    votes_text(&e.profile),
                    opt_text(e.winner),
                    real(e.quality),
                ]
            })
            .collect(),
    };
    Report::with_table(&serde_json::to_value(&report).expect("report serializes"), table)
}

fn poa_report(sc: &Scenario) -> Result<Report> {
    let report = enumerate_equilibria(&sc.instance, &sc.schedule, &sc.query)?;
    let certificate = safety_certificate(&sc.instance, &sc.schedule)?;
    let worst = report
        .equilibria
        .iter()
        .min_by(|a, b| a.quality.total_cmp(&b.quality));
    let best = report
        .equilibria
        .iter()
        .max_by(|a, b| a.quality.total_cmp(&b.quality));
    Report::plain(&json!({
        "query": sc.query,
        "equilibria": report.equilibria.len(),
        "opt": report.opt,
        "poa": report.poa,
        "pos": report.pos,
        "worst": worst,
        "best": best,
        "certificate": certificate,
    }))
}

fn construct_report(sc: &Scenario) -> Result<Report> {
    let (inst, s) = (&sc.instance, &sc.schedule);
    let c = constructive_pne(inst, s)?;
    let w = winner(inst, &c.profile)?.winner;
    let quality = qual(inst, s.threshold, w);
    let opt = opt_quality(inst, s.threshold);
    Report::plain(&json!({
        "profile": c.profile,
        "anchor": c.anchor,
        "repair_moves": c.repair_moves,
        "verified": c.verified,
        "winner": w,
        "quality": quality,
        "opt": opt,
        "ratio": Ratio::of(opt.quality, quality),
    }))
}

fn dynamics_report(sc: &Scenario, profile: Option<&str>, max_steps: usize) -> Result<Report> {
    let inst = &sc.instance;
    let start = match profile {
        Some(text) => parse_profile(text, inst.n(), inst.k())?,
        None => honest_profile(inst, sc.schedule.threshold),
    };
    let trace = best_response_dynamics(inst, &sc.schedule, &start, sc.query.mode, max_steps)?;
    let row = |v: &[u8]| v.iter().map(|x| x.to_string()).collect::<String>();
    let table = Table {
        header: vec!["step", "expert", "old_votes", "new_votes", "winner"],
        rows: trace
            .path
            .iter()
            .enumerate()
            .map(|(t, m)| {
                vec![
                    (t + 1).to_string(),
                    m.expert.to_string(),
                    row(&m.old_votes),
                    row(&m.new_votes),
                    opt_text(m.winner),
                ]
            })
            .collect(),
    };
    Report::with_table(
        &json!({ "mode": sc.query.mode, "max_steps": max_steps, "trace": trace }),
        table,
    )
}

fn safety_report(sc: &Scenario, variant: VariantArg) -> Result<Report> {
    let variant = match variant {
        VariantArg::Proof => ThresholdVariant::Proof,
        VariantArg::Statement => ThresholdVariant::Statement,
    };
    let inst = &sc.instance;
    let mut cells = Vec::new();
    for i in 0..inst.n() {
        for j in 0..inst.k() {
            let g = inst.normalized_external(i, j)?;
            let env = deviation_safety_threshold_with(&sc.schedule, g, variant);
            let p = inst.belief(i, j);
            cells.push(json!({
                "expert": i,
                "proposal": j,
                "belief": p,
                "external_per_weight": g,
                "statement_branch": env.statement_branch,
                "proof_branch": env.proof_branch,
                "effective_threshold": env.effective_threshold,
                "safe": p < env.effective_threshold,
                "below_threshold": p < sc.schedule.threshold,
            }));
        }
    }
    Report::plain(&json!({ "variant": variant, "cells": cells }))
}

fn curve_report(schedule: &RewardSchedule, samples: usize) -> Result<Report> {
    let points = reward_curve(schedule, samples)?;
    let crossing = points
        .iter()
        .find(|pt| pt.approve >= pt.reject - CLAIM_TOL)
        .map(|pt| pt.p);
    let table = Table {
        header: vec!["p", "approve", "reject"],
        rows: points
            .iter()
            .map(|pt| vec![real(pt.p), real(pt.approve), real(pt.reject)])
            .collect(),
    };
    Report::with_table(
        &json!({ "schedule": schedule, "samples": samples, "crossing_p": crossing, "points": points }),
        table,
    )
}

fn repeat_report(sc: &Scenario, deviator: Option<usize>, plan: Option<&str>) -> Result<Report> {
    let world = sc
        .world
        .as_ref()
        .ok_or_else(|| CliError::Scenario("the scenario has no world section".into()))?;
    let k = world.proposals_per_round;
    let policy = match deviator {
        None => Policy::AllHonest,
        Some(expert) => {
            let rows = match plan {
                Some(text) => VotingProfile::from_matrix(&parse_rows(text, k)?)?.rows().to_vec(),
                None => Vec::new(),
            };
            Policy::SingleDeviator { expert, plan: rows }
        }
    };
    let trace = run(world, &sc.schedule, &policy)?;
    let mut rows = Vec::new();
    for r in &trace.rounds {
        for i in 0..world.n() {
            rows.push(vec![
                r.round.to_string(),
                i.to_string(),
                real(r.weights[i]),
                real(r.omega[i]),
                row_to_vec(r.profile.row(i), k).iter().map(|v| v.to_string()).collect(),
                opt_text(r.winner),
                r.revealed_quality.map_or_else(String::new, |q| u8::from(q).to_string()),
                real(r.realized[i]),
                real(r.expected[i]),
            ]);
        }
    }
    let table = Table {
        header: vec![
            "round", "expert", "weight", "omega", "votes", "winner", "quality", "realized", "expected",
        ],
        rows,
    };
    let winners: Vec<Option<usize>> = trace.rounds.iter().map(|r| r.winner).collect();
    Report::with_table(
        &json!({
            "world": world,
            "policy": policy,
            "rounds": trace.rounds.len(),
            "revealed_rounds": trace.revealed_rounds,
            "correct": trace.correct,
            "final_weights": trace.final_weights,
            "discounted_realized": trace.discounted_realized,
            "discounted_expected": trace.discounted_expected,
            "gamma_max": trace.gamma_max,
            "discount_ok": trace.discount_ok,
            "dummy_rounds": winners.iter().filter(|w| w.is_none()).count(),
        }),
        table,
    )
}

fn gap_report(sc: &Scenario, deviator: Option<usize>, horizon: usize) -> Result<Report> {
    let world = sc
        .world
        .as_ref()
        .ok_or_else(|| CliError::Scenario("the scenario has no world section".into()))?;
    let experts: Vec<usize> = match deviator {
        Some(i) => vec![i],
        None => (0..world.n()).collect(),
    };
    let gaps = experts
        .into_iter()
        .map(|i| deviation_gap(world, &sc.schedule, i, horizon))
        .collect::<avgov::Result<Vec<_>>>()?;
    let within = gaps.iter().all(|g| g.ratio_with_tail.value() <= g.bound);
    Report::plain(&json!({ "horizon": horizon, "gaps": gaps, "within_bound": within }))
}

fn reproduce(name: Builtin, n: usize, slack: f64, flags: &Flags) -> Result<Report> {
    let base = builtin::default_query(name);
    let query = EquilibriumQuery::new(
        flags.mode.unwrap_or(base.mode),
        flags.epsilon.unwrap_or(base.epsilon),
    )?;
    let sc = builtin::scenario(name, n, slack, query)?;
    let (inst, s) = (&sc.instance, &sc.schedule);
    let (value, pass, claim) = match name {
        Builtin::Cycle => {
            let report = enumerate_equilibria(inst, s, &query)?;
            let trace =
                best_response_dynamics(inst, s, &honest_profile(inst, s.threshold), query.mode, 1000)?;
            let cycle_length = match trace.terminal {
                Terminal::Cycle { length } => Some(length),
                _ => None,
            };
            let equilibria: Vec<&VotingProfile> = report.equilibria.iter().map(|e| &e.profile).collect();
            let pass = equilibria.is_empty() && cycle_length.is_some();
            (
                json!({
                    "equilibria": equilibria,
                    "cycle_length": cycle_length,
                    "moves": trace.path,
                }),
                pass,
                "no pure equilibrium exists and best responses cycle",
            )
        }
        Builtin::TightGap => {
            let report = enumerate_equilibria(inst, s, &query)?;
            let worst = report
                .equilibria
                .iter()
                .min_by(|a, b| a.quality.total_cmp(&b.quality));
            let expected = 2.0 / (1.0 + slack);
            let poa = report.poa.map(Ratio::value);
            let pass = poa.is_some_and(|r| (r - expected).abs() <= CLAIM_TOL);
            (
                json!({
                    "pne_quality": worst.map(|e| e.quality),
                    "pne_profile": worst.map(|e| &e.profile),
                    "opt": report.opt.quality,
                    "poa": report.poa,
                    "expected_ratio": expected,
                }),
                pass,
                "worst equilibrium is a factor 2 / (1 + eps-weight) below the optimum",
            )
        }
        Builtin::LinearGap => {
            let c = constructive_pne(inst, s)?;
            let w = winner(inst, &c.profile)?.winner;
            let quality = qual(inst, s.threshold, w);
            let opt = opt_quality(inst, s.threshold).quality;
            let ratio = Ratio::of(opt, quality);
            let expected = 1.0 / (1.0 / n as f64 + 0.01);
            let is_eq = is_approx_pne(inst, s, &c.profile, &query)?;
            let pass = is_eq && (ratio.value() - expected).abs() <= CLAIM_TOL;
            (
                json!({
                    "pne_quality": quality,
                    "pne_profile": c.profile,
                    "is_equilibrium": is_eq,
                    "opt": opt,
                    "ratio": ratio,
                    "expected_ratio": expected,
                    "approval_mass": approval_mass(inst.weights(), c.profile.rows(), inst.k()),
                }),
                pass,
                "equilibrium quality ratio equals 1 / (1/n + 0.01)",
            )
        }
    };
    let mut value = value;
    value["name"] = json!(name.name());
    value["query"] = json!(query);
    value["claim"] = json!(claim);
    value["pass"] = json!(pass);
    Ok(Report {
        json: to_json(&value)?,
        table: None,
        failed_claim: (!pass).then(|| format!("{}: {claim}", name.name())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use std::collections::HashSet;

    const LIBRARY_OPERATIONS: &[&str] = &[
        "winner",
        "reward",
        "expected_reward",
        "utility",
        "honest_profile",
        "qual",
        "opt_quality",
        "reward_curve",
        "derive_schedule",
        "validate_schedule",
        "deviation_safety_threshold",
        "external_bound_delta",
        "max_discount",
        "best_response",
        "is_admissible",
        "is_approx_pne",
        "enumerate_equilibria",
        "constructive_pne",
        "best_response_dynamics",
        "safety_certificate",
        "correct_fraction",
        "delayed_update",
        "sample_round",
        "run",
        "deviation_gap",
        "load_scenario",
        "reproduce",
    ];

    #[test]
    fn every_operation_has_exactly_one_command() {
        let mut seen = HashSet::new();
        for (_, ops) in DISPATCH {
            for op in *ops {
                assert!(seen.insert(*op), "{op} is listed twice");
            }
        }
        let expected: HashSet<&str> = LIBRARY_OPERATIONS.iter().copied().collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn dispatch_table_matches_subcommands() {
        let cmd = Cli::command();
        let names: HashSet<&str> = cmd.get_subcommands().map(|c| c.get_name()).collect();
        let table: HashSet<&str> = DISPATCH.iter().map(|(c, _)| *c).collect();
        assert_eq!(names, table);
        assert_eq!(names.len(), 14);
    }

    #[test]
    fn profiles_parse_row_by_row() {
        let p = parse_profile("01,10", 2, 2).unwrap();
        assert_eq!(p.to_matrix(), vec![vec![0, 1], vec![1, 0]]);
        assert!(parse_profile("01", 2, 2).is_err());
        assert!(parse_profile("012,100", 2, 3).is_err());
        assert!(parse_profile("1,0", 2, 2).is_err());
    }
}
