//! Scenario files: an instance, a reward schedule, an equilibrium query and
//! an optional repeated-game world.

use std::path::Path;

use avgov::analysis::{EquilibriumQuery, Mode};
use avgov::mechanism::{Instance, RewardSchedule};
use avgov::params::{derive_schedule, resolve_delta, validate_schedule, ScheduleDiagnostics};
use avgov::repeated::WorldConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub experts: Vec<ExpertEntry>,
    pub schedule: ScheduleEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<QueryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<WorldConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertEntry {
    pub weight: f64,
    pub beliefs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<Vec<f64>>,
}

/// Either explicit rewards `{a, a_prime, s, T}` or the design inputs
/// `{T, epsilon, a_prime}`; `delta` may accompany either.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_prime: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryEntry {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub epsilon: f64,
}

fn default_mode() -> Mode {
    Mode::SemiStrategic
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ScheduleSource {
    Explicit {
        a: f64,
        a_prime: f64,
        s: f64,
        #[serde(rename = "T")]
        threshold: f64,
    },
    Derived {
        #[serde(rename = "T")]
        threshold: f64,
        epsilon: f64,
        a_prime: f64,
    },
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub instance: Instance,
    pub schedule: RewardSchedule,
    pub source: ScheduleSource,
    /// `delta` as written in the file, if any.
    pub supplied_delta: Option<f64>,
    pub query: EquilibriumQuery,
    pub world: Option<WorldConfig>,
    pub diagnostics: ScheduleDiagnostics,
}

impl ScheduleEntry {
    pub fn source(&self) -> Result<ScheduleSource> {
        let explicit = self.a.is_some() || self.s.is_some();
        match (explicit, self.epsilon) {
            (true, Some(_)) => Err(CliError::Scenario(
                "schedule: give either {a, a_prime, s, T} or {T, epsilon, a_prime}, not both".into(),
            )),
            (true, None) => Ok(ScheduleSource::Explicit {
                a: required(self.a, "schedule.a")?,
                a_prime: required(self.a_prime, "schedule.a_prime")?,
                s: required(self.s, "schedule.s")?,
                threshold: required(self.threshold, "schedule.T")?,
            }),
            (false, Some(epsilon)) => Ok(ScheduleSource::Derived {
                threshold: required(self.threshold, "schedule.T")?,
                epsilon,
                a_prime: required(self.a_prime, "schedule.a_prime")?,
            }),
            (false, None) => Err(CliError::Scenario(
                "schedule: expected {a, a_prime, s, T} or {T, epsilon, a_prime}".into(),
            )),
        }
    }
}

fn required(value: Option<f64>, field: &str) -> Result<f64> {
    value.ok_or_else(|| CliError::Scenario(format!("{field} is missing")))
}

impl ScheduleSource {
    pub fn materialize(&self) -> Result<RewardSchedule> {
        Ok(match *self {
            ScheduleSource::Explicit {
                a,
                a_prime,
                s,
                threshold,
            } => RewardSchedule::new(a, a_prime, s, threshold)?,
            ScheduleSource::Derived {
                threshold,
                epsilon,
                a_prime,
            } => derive_schedule(threshold, epsilon, a_prime)?,
        })
    }

    fn to_entry(self, delta: Option<f64>) -> ScheduleEntry {
        match self {
            ScheduleSource::Explicit {
                a,
                a_prime,
                s,
                threshold,
            } => ScheduleEntry {
                a: Some(a),
                a_prime: Some(a_prime),
                s: Some(s),
                threshold: Some(threshold),
                epsilon: None,
                delta,
            },
            ScheduleSource::Derived {
                threshold,
                epsilon,
                a_prime,
            } => ScheduleEntry {
                threshold: Some(threshold),
                epsilon: Some(epsilon),
                a_prime: Some(a_prime),
                delta,
                ..ScheduleEntry::default()
            },
        }
    }
}

impl Scenario {
    pub fn from_parts(
        instance: Instance,
        source: ScheduleSource,
        supplied_delta: Option<f64>,
        query: EquilibriumQuery,
        world: Option<WorldConfig>,
    ) -> Result<Self> {
        let schedule = source.materialize()?;
        let diagnostics = validate_schedule(&schedule);
        if !diagnostics.all_ok {
            return Err(CliError::Scenario(format!(
                "schedule fails its identities: threshold residual {:e}, inflection residual {:e}, \
                 a >= a_prime: {}, 1/(epsilon + 1) < T: {}",
                diagnostics.threshold_identity_residual,
                diagnostics.inflection_residual,
                diagnostics.a_dominates,
                diagnostics.epsilon_condition
            )));
        }
        let delta = resolve_delta(&instance, &schedule, supplied_delta)?;
        if let Some(world) = &world {
            world.validate()?;
        }
        let query = EquilibriumQuery::new(query.mode, query.epsilon)?;
        Ok(Self {
            instance,
            schedule: schedule.with_delta(delta),
            source,
            supplied_delta,
            query,
            world,
            diagnostics,
        })
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        let k = file.experts.first().map_or(0, |e| e.beliefs.len());
        let weights = file.experts.iter().map(|e| e.weight).collect();
        let beliefs = file.experts.iter().map(|e| e.beliefs.clone()).collect();
        let external = file
            .experts
            .iter()
            .map(|e| e.external.clone().unwrap_or_else(|| vec![0.0; k]))
            .collect();
        let instance = Instance::new(weights, beliefs, external)?;
        let query = file.query.unwrap_or(QueryEntry {
            mode: default_mode(),
            epsilon: 0.0,
        });
        Self::from_parts(
            instance,
            file.schedule.source()?,
            file.schedule.delta,
            EquilibriumQuery {
                mode: query.mode,
                epsilon: query.epsilon,
            },
            file.world,
        )
    }

    pub fn to_file(&self) -> ScenarioFile {
        let inst = &self.instance;
        ScenarioFile {
            experts: (0..inst.n())
                .map(|i| ExpertEntry {
                    weight: inst.weights()[i],
                    beliefs: inst.beliefs()[i].clone(),
                    external: Some(inst.external()[i].clone()),
                })
                .collect(),
            schedule: self.source.to_entry(self.supplied_delta),
            query: Some(QueryEntry {
                mode: self.query.mode,
                epsilon: self.query.epsilon,
            }),
            world: self.world.clone(),
        }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|source| CliError::Parse {
            path: origin.to_string(),
            source,
        })?;
        Self::from_file(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::parse(&text, &path.display().to_string())
}
