//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use avgov::analysis::{
    best_response_dynamics, constructive_pne, enumerate_equilibria, is_approx_pne,
    safety_certificate, EquilibriumQuery, Mode, Ratio, Terminal,
};
use avgov::mechanism::{
    honest_profile, honest_row, opt_quality, qual, utility, winner, Instance, RewardSchedule,
    VotingProfile,
};
use avgov::params::{derive_schedule, max_discount, validate_schedule};
use avgov::repeated::{deviation_gap, run, sample_rounds, Policy, WorldConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RATIO_TOL: f64 = 1e-9;
const IDENTITY_RESIDUAL_TOL: f64 = 1e-12;
const QUALITY_TOL: f64 = 1e-12;
const WEIGHT_CONVERGENCE_TOL: f64 = 0.05;
const EXTERNAL_DELTA: f64 = 0.1;

const LIMIT_CYCLE_INSTANCE: Duration = Duration::from_secs(1);
const LIMIT_HONEST_SUITE: Duration = Duration::from_secs(30);
const LIMIT_TRUNCATED_REPEATED: Duration = Duration::from_secs(10);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn reference_schedule() -> RewardSchedule {
    derive_schedule(0.9, 19.0, 1.0).expect("reference schedule")
}

fn profile(rows: &[&[u8]]) -> VotingProfile {
    VotingProfile::from_matrix(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn cycle_instance() -> Verdict {
    let start = Instant::now();
    let s = reference_schedule();
    let inst = Instance::without_externals(
        vec![0.49, 0.41, 0.10],
        vec![vec![0.95, 1.0], vec![1.0, 0.95], vec![1.0, 0.0]],
    )
    .unwrap();
    let report = enumerate_equilibria(&inst, &s, &EquilibriumQuery::exact(Mode::SemiStrategic)).unwrap();
    let trace = best_response_dynamics(&inst, &s, &honest_profile(&inst, s.threshold), Mode::SemiStrategic, 100)
        .unwrap();
    let moves: Vec<(usize, Vec<u8>)> = trace.path.iter().map(|m| (m.expert, m.new_votes.clone())).collect();
    let expected = vec![(0, vec![0, 1]), (1, vec![1, 0]), (0, vec![1, 1]), (1, vec![1, 1])];
    let elapsed = start.elapsed();
    verdict(
        report.profiles_checked == 64
            && report.equilibria.is_empty()
            && trace.terminal == Terminal::Cycle { length: 4 }
            && moves == expected
            && elapsed < LIMIT_CYCLE_INSTANCE,
        format!(
            "{} profiles, {} equilibria, terminal {:?}, {:?}",
            report.profiles_checked,
            report.equilibria.len(),
            trace.terminal,
            elapsed
        ),
    )
}

fn tight_instance(slack: f64) -> Instance {
    Instance::without_externals(
        vec![1.0 + slack, 1.0 - slack],
        vec![vec![0.9, 1.0], vec![1.0, 0.0]],
    )
    .unwrap()
}

fn tight_lower_bound() -> Verdict {
    let s = reference_schedule();
    let exact = EquilibriumQuery::exact(Mode::SemiStrategic);
    let inst = tight_instance(0.1);
    let bad = profile(&[&[0, 1], &[1, 0]]);
    let is_eq = is_approx_pne(&inst, &s, &bad, &exact).unwrap();
    let w = winner(&inst, &bad).unwrap().winner;
    let q = qual(&inst, s.threshold, w);
    let opt = opt_quality(&inst, s.threshold).quality;
    let report = enumerate_equilibria(&inst, &s, &exact).unwrap();
    let poa = report.poa.map(Ratio::value).unwrap_or(f64::NAN);

    let narrow = enumerate_equilibria(&tight_instance(0.01), &s, &exact).unwrap();
    let narrow_poa = narrow.poa.map(Ratio::value).unwrap_or(f64::NAN);
    verdict(
        is_eq
            && (q - 1.1).abs() <= RATIO_TOL
            && (opt - 2.0).abs() <= RATIO_TOL
            && (poa - 20.0 / 11.0).abs() <= RATIO_TOL
            && narrow_poa > 1.98,
        format!("quality {q}, opt {opt}, ratio {poa}, ratio at slack 0.01 {narrow_poa}"),
    )
}

fn linear_lower_bound() -> Verdict {
    let s = reference_schedule();
    let mut details = Vec::new();
    let mut pass = true;
    for n in [3usize, 4, 5] {
        let mut weights = vec![1.0 / n as f64 + 0.01];
        weights.extend(std::iter::repeat_n(1.0 / n as f64, n));
        let mut beliefs = vec![vec![1.0, 0.0]];
        beliefs.extend(std::iter::repeat_n(vec![0.0, 1.0], n));
        let inst = Instance::without_externals(weights, beliefs).unwrap();
        let c = constructive_pne(&inst, &s).unwrap();
        let mut lone = vec![vec![0u8, 0]; n + 1];
        lone[0][0] = 1;
        let is_lone = c.profile.to_matrix() == lone;
        let is_eq = is_approx_pne(&inst, &s, &c.profile, &EquilibriumQuery::exact(Mode::Strategic)).unwrap();
        let w = winner(&inst, &c.profile).unwrap().winner;
        let ratio = Ratio::of(opt_quality(&inst, s.threshold).quality, qual(&inst, s.threshold, w)).value();
        let expected = 1.0 / (1.0 / n as f64 + 0.01);
        pass &= is_lone && is_eq && (ratio - expected).abs() <= RATIO_TOL;
        details.push(format!("n={n} ratio {ratio:.6}"));
    }
    verdict(pass, details.join(", "))
}

/// (T, epsilon) pairs with `1/(1+eps) < T` and `a >= a'`.
fn schedule_grid() -> Vec<RewardSchedule> {
    let mut out = Vec::new();
    for &t in &[0.6, 0.75, 0.9] {
        let floor = t / (1.0 - t);
        for &extra in &[0.25, 1.0, 5.0] {
            out.push(derive_schedule(t, floor + extra, 1.0).unwrap());
        }
    }
    out
}

fn honest_play_suite() -> Verdict {
    let start = Instant::now();
    let grid = schedule_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut electing, mut failures, mut failures_electing) = (0, 0, 0);
    for _ in 0..1000 {
        let s = grid[rng.gen_range(0..grid.len())].with_delta(EXTERNAL_DELTA);
        let n = rng.gen_range(1..=4);
        let k = rng.gen_range(1..=3);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let beliefs: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.gen::<f64>()).collect()).collect();
        let external: Vec<Vec<f64>> = weights
            .iter()
            .map(|&w| (0..k).map(|_| w * rng.gen_range(0.0..=s.a * EXTERNAL_DELTA)).collect())
            .collect();
        let inst = Instance::new(weights, beliefs, external).unwrap();
        let honest = honest_profile(&inst, s.threshold);
        let query = EquilibriumQuery::new(
            Mode::SemiStrategic,
            (1.0 + s.epsilon) * (1.0 + EXTERNAL_DELTA) - 1.0,
        )
        .unwrap();
        let elects = winner(&inst, &honest).unwrap().winner.is_some();
        let stable = is_approx_pne(&inst, &s, &honest, &query).unwrap();
        electing += usize::from(elects);
        if !stable {
            failures += 1;
            failures_electing += usize::from(elects);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        failures == 0 && elapsed < LIMIT_HONEST_SUITE,
        format!(
            "1000 instances, {failures} failures, {elapsed:?}; honest play elects a proposal in \
             {electing} of them with {failures_electing} failures there; the rest start from the \
             empty outcome"
        ),
    )
}

fn quality_bound_suite() -> Verdict {
    let grid = schedule_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut checked, mut equilibria, mut failures) = (0, 0usize, 0usize);
    let mut first_failure = None;
    while checked < 500 {
        let s = grid[rng.gen_range(0..grid.len())];
        let n = rng.gen_range(1..=4);
        let k = rng.gen_range(1..=3);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let beliefs: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.gen::<f64>()).collect()).collect();
        let inst = Instance::without_externals(weights, beliefs).unwrap();
        if !safety_certificate(&inst, &s).unwrap().eligible {
            continue;
        }
        checked += 1;
        let query = EquilibriumQuery::new(Mode::SemiStrategic, s.epsilon).unwrap();
        let report = enumerate_equilibria(&inst, &s, &query).unwrap();
        for eq in report.equilibria.iter().filter(|e| e.winner.is_some()) {
            equilibria += 1;
            if eq.quality < report.opt.quality / 2.0 - QUALITY_TOL {
                failures += 1;
                first_failure.get_or_insert_with(|| {
                    format!(
                        "w={:?} p={:?} votes={:?} quality {} opt {}",
                        inst.weights(),
                        inst.beliefs(),
                        eq.profile.to_matrix(),
                        eq.quality,
                        report.opt.quality
                    )
                });
            }
        }
    }
    let mut detail = format!("{checked} instances, {equilibria} equilibria, {failures} below half of optimum");
    if let Some(f) = first_failure {
        detail.push_str(&format!("; first: {f}"));
    }
    verdict(failures == 0, detail)
}

fn schedule_identities() -> Verdict {
    let mut points = 0;
    let mut worst: f64 = 0.0;
    for ti in 0..20 {
        let t = 0.5 + 0.02 * ti as f64;
        let floor = t / (1.0 - t);
        for &extra in &[0.1, 0.5, 1.0, 3.0, 10.0] {
            for &a_prime in &[0.5, 1.0, 2.0] {
                let s = derive_schedule(t, floor + extra, a_prime).unwrap();
                let d = validate_schedule(&s);
                worst = worst.max(d.threshold_identity_residual).max(d.inflection_residual);
                points += 1;
            }
        }
    }
    let s = reference_schedule();
    let reference_ok = s.a == 2.0 && s.s == 17.0 && (s.a_prime + s.s) / (s.a_prime + s.s + s.a) == 18.0 / 20.0;
    verdict(
        points >= 200 && worst <= IDENTITY_RESIDUAL_TOL && reference_ok,
        format!("{points} points, worst residual {worst:e}, reference a={} s={}", s.a, s.s),
    )
}

fn weight_convergence() -> Verdict {
    let s = reference_schedule();
    let world = WorldConfig {
        expertise: vec![0.9, 0.6],
        good_prior: 0.5,
        proposals_per_round: 2,
        zeta: 0.05,
        gamma: 0.5,
        horizon: 2000,
        seed: 2024,
    };
    let trace = run(&world, &s, &Policy::AllHonest).unwrap();
    let gaps: Vec<f64> = trace
        .final_weights
        .iter()
        .zip(&world.expertise)
        .map(|(w, p)| (w - p).abs())
        .collect();

    let mut violations = 0;
    for seed in 0..5 {
        let mut w = world.clone();
        w.seed += seed;
        let t = run(&w, &s, &Policy::AllHonest).unwrap();
        let mut series: Vec<&[f64]> = t.rounds.iter().map(|r| r.weights.as_slice()).collect();
        series.push(&t.final_weights);
        for pair in series.windows(2) {
            for (&prev, &next) in pair[0].iter().zip(pair[1]) {
                if next > (1.0 + w.zeta) * prev || next < (1.0 - w.zeta) * prev {
                    violations += 1;
                }
            }
        }
    }
    verdict(
        gaps.iter().all(|&g| g <= WEIGHT_CONVERGENCE_TOL) && violations == 0,
        format!("final weights {:?}, bracket violations {violations}", trace.final_weights),
    )
}

fn truncated_repeated() -> Verdict {
    let start = Instant::now();
    let s = reference_schedule();
    let zeta = 0.05;
    let mut world = WorldConfig {
        expertise: vec![0.9, 0.7, 0.6],
        good_prior: 0.5,
        proposals_per_round: 2,
        zeta,
        gamma: 0.9 * max_discount(s.epsilon, zeta),
        horizon: 3,
        seed: 99,
    };
    let mut pass = true;
    let mut worst: f64 = 0.0;
    let mut bound = 0.0;
    for expert in 0..3 {
        let gap = deviation_gap(&world, &s, expert, 3).unwrap();
        pass &= gap.plans_searched <= 4096 && gap.ratio_with_tail.value() <= gap.bound;
        worst = worst.max(gap.ratio_with_tail.value());
        bound = gap.bound;
    }

    // with no discounting only the first round counts
    world.gamma = 0.0;
    let round = &sample_rounds(&world, 1)[0];
    let inst = Instance::new(vec![0.5; 3], round.beliefs.clone(), round.external.clone()).unwrap();
    let honest = VotingProfile::from_bits(2, round.beliefs.iter().map(|b| honest_row(b, s.threshold)).collect())
        .unwrap();
    let mut single_shot_worst: f64 = 0.0;
    for expert in 0..3 {
        let gap = deviation_gap(&world, &s, expert, 1).unwrap();
        let base = utility(&inst, &s, &honest, expert).unwrap();
        let best = (0..4u32)
            .map(|r| utility(&inst, &s, &honest.with_row(expert, r), expert).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let direct = Ratio::of(best, base).value();
        pass &= gap.ratio.value() <= gap.single_shot_bound && (gap.ratio.value() - direct).abs() <= RATIO_TOL;
        single_shot_worst = single_shot_worst.max(gap.ratio.value());
    }
    let elapsed = start.elapsed();
    verdict(
        pass && elapsed < LIMIT_TRUNCATED_REPEATED,
        format!(
            "worst ratio with tail {worst:.4} (bound {bound}), undiscounted worst {single_shot_worst:.4} (bound {}), {elapsed:?}",
            (1.0 + s.epsilon) * (1.0 + s.delta)
        ),
    )
}

fn oracle_consistency() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let grid = schedule_grid();
    let (mut profiles, mut disagreements) = (0u64, 0u64);
    for _ in 0..50 {
        let s = grid[rng.gen_range(0..grid.len())];
        let n = rng.gen_range(1..=4);
        let k = rng.gen_range(1..=(12 / n).min(3));
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let beliefs: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.gen::<f64>()).collect()).collect();
        let external: Vec<Vec<f64>> = weights
            .iter()
            .map(|&w| (0..k).map(|_| w * rng.gen_range(0.0..=0.2)).collect())
            .collect();
        let inst = Instance::new(weights, beliefs, external).unwrap();
        for query in [
            EquilibriumQuery::exact(Mode::Strategic),
            EquilibriumQuery::exact(Mode::SemiStrategic),
            EquilibriumQuery::new(Mode::SemiStrategic, 0.5).unwrap(),
        ] {
            let report = enumerate_equilibria(&inst, &s, &query).unwrap();
            let listed: std::collections::HashSet<u64> =
                report.equilibria.iter().map(|e| e.profile.index()).collect();
            for idx in 0..(1u64 << (n * k)) {
                let p = VotingProfile::from_index(n, k, idx);
                profiles += 1;
                if is_approx_pne(&inst, &s, &p, &query).unwrap() != listed.contains(&idx) {
                    disagreements += 1;
                }
            }
        }
    }
    verdict(
        disagreements == 0,
        format!("{profiles} profile checks, {disagreements} disagreements"),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("cycle instance has no equilibrium and a 4-move cycle", cycle_instance),
        ("two-expert instance attains ratio 20/11", tight_lower_bound),
        ("lone heavy approver gives linear ratio", linear_lower_bound),
        ("honest play is an approximate equilibrium", honest_play_suite),
        ("approximate equilibria reach half the optimum", quality_bound_suite),
        ("derived schedules satisfy their identities", schedule_identities),
        ("reputation weights converge within bracket", weight_convergence),
        ("truncated repeated deviation ratio is bounded", truncated_repeated),
        ("enumeration agrees with the direct check", oracle_consistency),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} {}. {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
