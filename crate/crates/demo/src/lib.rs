//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a JSON string; the plain functions underneath are
//! ordinary Rust and are tested natively.

use avgov::analysis::{enumerate_equilibria, EquilibriumQuery, Mode};
use avgov::mechanism::{reward_curve, Instance};
use avgov::params::derive_schedule;
use avgov::repeated::{run, Policy, WorldConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Curve {
    pub a: f64,
    pub s: f64,
    pub p: Vec<f64>,
    pub approve: Vec<f64>,
    pub reject: Vec<f64>,
}

/// Expected reward of approving and rejecting across beliefs for the schedule
/// derived from `threshold`, `epsilon` and `a_prime`.
pub fn curve(threshold: f64, epsilon: f64, a_prime: f64, samples: usize) -> Result<Curve, String> {
    let schedule = derive_schedule(threshold, epsilon, a_prime).map_err(|e| e.to_string())?;
    let points = reward_curve(&schedule, samples).map_err(|e| e.to_string())?;
    Ok(Curve {
        a: schedule.a,
        s: schedule.s,
        p: points.iter().map(|pt| pt.p).collect(),
        approve: points.iter().map(|pt| pt.approve).collect(),
        reject: points.iter().map(|pt| pt.reject).collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct GapPoint {
    pub slack: f64,
    pub worst_quality: f64,
    pub opt: f64,
    pub ratio: f64,
}

/// Worst semi-strategic equilibrium of the two-expert instance with weights
/// `1 +/- slack`, for each slack in `slacks`.
pub fn tight_gap(slacks: &[f64]) -> Result<Vec<GapPoint>, String> {
    let schedule = derive_schedule(0.9, 19.0, 1.0).map_err(|e| e.to_string())?;
    slacks
        .iter()
        .map(|&slack| {
            if !(slack > 0.0 && slack < 1.0) {
                return Err(format!("slack {slack} must lie in (0, 1)"));
            }
            let inst = Instance::without_externals(
                vec![1.0 + slack, 1.0 - slack],
                vec![vec![schedule.threshold, 1.0], vec![1.0, 0.0]],
            )
            .map_err(|e| e.to_string())?;
            let report = enumerate_equilibria(&inst, &schedule, &EquilibriumQuery::exact(Mode::SemiStrategic))
                .map_err(|e| e.to_string())?;
            let worst = report
                .equilibria
                .iter()
                .map(|e| e.quality)
                .fold(f64::INFINITY, f64::min);
            Ok(GapPoint {
                slack,
                worst_quality: worst,
                opt: report.opt.quality,
                ratio: report.poa.map_or(f64::NAN, |r| r.value()),
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct Trajectory {
    /// `weights[t][i]`: weight of expert `i` in round `t`, final weights last.
    pub weights: Vec<Vec<f64>>,
    pub revealed_rounds: usize,
}

/// Reputation weights of honest experts with the given signal accuracies.
pub fn trajectory(expertise: Vec<f64>, zeta: f64, horizon: usize, seed: u64) -> Result<Trajectory, String> {
    let world = WorldConfig {
        expertise,
        good_prior: 0.5,
        proposals_per_round: 2,
        zeta,
        gamma: 0.0,
        horizon,
        seed,
    };
    let schedule = derive_schedule(0.9, 19.0, 1.0).map_err(|e| e.to_string())?;
    let trace = run(&world, &schedule, &Policy::AllHonest).map_err(|e| e.to_string())?;
    let mut weights: Vec<Vec<f64>> = trace.rounds.iter().map(|r| r.weights.clone()).collect();
    weights.push(trace.final_weights);
    Ok(Trajectory {
        weights,
        revealed_rounds: trace.revealed_rounds,
    })
}

fn to_js<T: Serialize>(value: Result<T, String>) -> Result<String, JsValue> {
    value
        .and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = rewardCurve)]
pub fn reward_curve_js(threshold: f64, epsilon: f64, a_prime: f64, samples: usize) -> Result<String, JsValue> {
    to_js(curve(threshold, epsilon, a_prime, samples))
}

#[wasm_bindgen(js_name = tightGap)]
pub fn tight_gap_js(slacks: Vec<f64>) -> Result<String, JsValue> {
    to_js(tight_gap(&slacks))
}

#[wasm_bindgen(js_name = weightTrajectory)]
pub fn trajectory_js(expertise: Vec<f64>, zeta: f64, horizon: usize, seed: u64) -> Result<String, JsValue> {
    to_js(trajectory(expertise, zeta, horizon, seed))
}
