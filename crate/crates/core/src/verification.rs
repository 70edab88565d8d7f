//! Executable verification suite: each check pits an analytic construction
//! against an independent route (closed forms, brute-force rollouts, a
//! generic QP, or scenario regressions) and reports pass/fail with detail.
//!
//! The integration test suite asserts these checks; the command-line
//! `verify` subcommand runs the same code and prints one line per check.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::filter::{solve_acc_qp, solve_generic_scalar_qp, QpSetup};
use crate::first_order::{
    feasible_interval, linear_cbf, linear_cbf_slope, optimal_zbf, BoundaryTolerance,
};
use crate::model::{
    eval_barrier, BarrierSpec, ControlAffineDynamics, ControlBounds, EnvelopeFunction,
};
use crate::oracle::{grid_safe_set, sample_profile_minimality, GridSpec, RolloutConfig};
use crate::second_order::{
    alpha, classify_c2, reduced_constraint, stopping_margin, switching_control, OptimalCbfConfig,
    SafeSetLabel, DEFAULT_CLASSIFY_TOL,
};
use crate::sim::{
    acc_barrier_spec, acc_state_for, compare_scenarios, run_scenario, ControllerKind,
    ScenarioConfig,
};

/// Outcome of one verification check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub runtime: Duration,
}

impl CheckResult {
    pub fn summary_line(&self) -> String {
        format!(
            "[{}] {} ({:.2} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.runtime.as_secs_f64(),
            self.details
        )
    }
}

fn finish(name: &'static str, start: Instant, passed: bool, details: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        details,
        runtime: start.elapsed(),
    }
}

const U_MAX: f64 = 5.0;

fn envelope() -> EnvelopeFunction {
    EnvelopeFunction::constant(-U_MAX)
}

/// Gain function sanity: zero at zero, strictly increasing in `-b`, and
/// bounded below by the authority margin `eps sqrt(2|b|)`.
pub fn check_class_k_gain(seed: u64) -> CheckResult {
    let start = Instant::now();
    let env = envelope();
    let mut failures = Vec::new();

    let at_zero = alpha(&env, 0.0).unwrap();
    if at_zero != 0.0 {
        failures.push(format!("alpha(0) = {at_zero}, expected exactly 0"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bs: Vec<f64> = (0..1000).map(|_| rng.gen_range(-100.0..0.0)).collect();
    bs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bs.dedup();

    let eps = 1.0;
    let mut prev = f64::INFINITY;
    for &b in &bs {
        let a = alpha(&env, b).unwrap();
        if a >= prev {
            failures.push(format!("alpha not strictly decreasing toward 0 at b = {b}"));
            break;
        }
        if a < eps * (2.0 * b.abs()).sqrt() {
            failures.push(format!("alpha({b}) = {a} below the authority floor"));
            break;
        }
        prev = a;
    }

    let passed = failures.is_empty();
    let details = if passed {
        format!("zero at zero, strictly monotone and floored on {} samples", bs.len())
    } else {
        failures.join("; ")
    };
    finish("class-K-infinity gain", start, passed, details)
}

/// Quadrature route equals the closed form `sqrt(-2 u_max b)` for the
/// constant braking envelope.
pub fn check_gain_closed_form() -> CheckResult {
    let start = Instant::now();
    // Deliberately *not* the constant fast path: force the quadrature.
    let env = EnvelopeFunction::from_fn(|_| -U_MAX);
    let mut worst = 0.0f64;
    let n = 1000;
    let (lo, hi) = (-100.0f64, -1e-6f64);
    for i in 0..n {
        // log-spaced magnitudes cover both ends of the range
        let frac = i as f64 / (n - 1) as f64;
        let b = -(-lo).powf(1.0 - frac) * (-hi).powf(frac);
        let got = alpha(&env, b).unwrap();
        let want = (-2.0 * U_MAX * b).sqrt();
        worst = worst.max((got - want).abs() / want);
    }
    let passed = worst <= 1e-9;
    finish(
        "gain closed form via quadrature",
        start,
        passed,
        format!("worst relative error {worst:.2e} over {n} points"),
    )
}

/// Analytic safe-set classification agrees with extremal braking rollouts
/// on a phase-plane grid.
pub fn check_safe_set_oracle_equivalence() -> CheckResult {
    let start = Instant::now();
    let signal = crate::model::ExogenousSignal::constant_speed(40.0, 1.0);
    let spec = acc_barrier_spec(signal.clone(), 10.0, U_MAX, 1.0).unwrap();
    let bounds = ControlBounds::new(U_MAX).unwrap();
    let grid = GridSpec {
        b_range: (-50.0, 0.0),
        bdot_range: (0.0, 25.0),
        b_count: 101,
        bdot_count: 101,
    };
    let cfg = RolloutConfig {
        dt: 1e-4,
        horizon: 10.0,
        violation_threshold: 1.0,
    };
    let report = grid_safe_set(
        &spec,
        &bounds,
        &envelope(),
        &grid,
        &|b, bdot| acc_state_for(&signal, 10.0, 0.0, b, bdot),
        0.0,
        &cfg,
    )
    .unwrap();

    let frac = report.agreement.agreement_fraction();
    let margin_ok = report.agreement.max_abs_margin_disagreement <= 0.1;
    let passed = frac >= 0.99 && margin_ok && report.agreement.errors == 0;
    finish(
        "safe-set oracle equivalence",
        start,
        passed,
        format!(
            "{}/{} cells agree ({:.4}%), {} disagreements within |margin| {:.3}, {} errors",
            report.agreement.agreements,
            report.agreement.total,
            100.0 * frac,
            report.agreement.disagreements,
            report.agreement.max_abs_margin_disagreement,
            report.agreement.errors
        ),
    )
}

/// Extremal braking yields the minimal peak constraint value among random
/// admissible control profiles.
pub fn check_braking_minimality(seed: u64) -> CheckResult {
    let start = Instant::now();
    let signal = crate::model::ExogenousSignal::constant_speed(40.0, 1.0);
    let spec = acc_barrier_spec(signal.clone(), 10.0, U_MAX, 1.0).unwrap();
    let bounds = ControlBounds::new(U_MAX).unwrap();
    let cfg = RolloutConfig {
        dt: 1e-3,
        horizon: 6.0,
        violation_threshold: 1e3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let n_states = 200;
    for i in 0..n_states {
        let b = rng.gen_range(-45.0..-5.0);
        let frac = rng.gen_range(0.05..0.95);
        let bdot = frac * (-2.0 * U_MAX * b).sqrt();
        let state = acc_state_for(&signal, 10.0, 0.0, b, bdot);
        let report = sample_profile_minimality(
            &spec,
            &bounds,
            &state,
            0.0,
            100,
            &cfg,
            seed.wrapping_add(i),
        )
        .unwrap();
        worst = worst.max(report.worst_margin);
        if !report.holds {
            return finish(
                "extremal braking minimality",
                start,
                false,
                format!(
                    "violated at b = {b:.3}, b_dot = {bdot:.3}: margin {} > {}",
                    report.worst_margin, report.tolerance
                ),
            );
        }
    }
    finish(
        "extremal braking minimality",
        start,
        true,
        format!(
            "{n_states} states x 100 profiles, worst margin {worst:.2e} <= {:.0e}",
            10.0 * cfg.dt
        ),
    )
}

/// Closing-scenario regression: safety, settling, onset ordering, and the
/// extremal braking arc.
pub fn check_closing_scenario() -> CheckResult {
    let start = Instant::now();
    let optimal = run_scenario(&ScenarioConfig::closing(ControllerKind::Optimal)).unwrap();
    let linear = run_scenario(&ScenarioConfig::closing(ControllerKind::Linear)).unwrap();

    let mut failures = Vec::new();

    // (a) both runs stay within the discrete-step safety band
    for (name, out) in [("optimal", &optimal), ("linear", &linear)] {
        if out.metrics.max_b > 1e-3 {
            failures.push(format!("{name} max_b = {:.3e} > 1e-3", out.metrics.max_b));
        }
    }
    // (b) both settle at the minimum gap with matched speeds
    for (name, out) in [("optimal", &optimal), ("linear", &linear)] {
        if out.metrics.terminal_b_dot.abs() > 0.05 {
            failures.push(format!(
                "{name} terminal b_dot = {:.3}",
                out.metrics.terminal_b_dot
            ));
        }
        if out.metrics.terminal_b.abs() > 0.5 {
            failures.push(format!("{name} terminal b = {:.3}", out.metrics.terminal_b));
        }
    }
    // (c) the linear controller brakes strictly earlier
    let onset_opt = optimal.metrics.braking_onset;
    let onset_lin = linear.metrics.braking_onset;
    match (onset_lin, onset_opt) {
        (Some(l), Some(o)) if l < o => {}
        _ => failures.push(format!(
            "linear onset {onset_lin:?} not strictly earlier than optimal onset {onset_opt:?}"
        )),
    }
    // (d) the optimal run rides the extremal braking arc
    let min_u = optimal
        .log
        .rows
        .iter()
        .map(|r| r.u)
        .fold(f64::INFINITY, f64::min);
    if min_u > -0.99 * U_MAX {
        failures.push(format!("optimal min u = {min_u:.3} never reached -0.99 u_max"));
    }

    let passed = failures.is_empty();
    let details = if passed {
        format!(
            "max_b {:.2e}/{:.2e}, terminal b {:.3}/{:.3}, onsets optimal {:?} linear {:?}, min u {:.3}",
            optimal.metrics.max_b,
            linear.metrics.max_b,
            optimal.metrics.terminal_b,
            linear.metrics.terminal_b,
            onset_opt,
            onset_lin,
            min_u
        )
    } else {
        failures.join("; ")
    };
    finish("closing-scenario regression", start, passed, details)
}

/// With matched ego and lead speeds the loop holds `u = 0`, `b = -11`.
pub fn check_steady_lead_scenario() -> CheckResult {
    let start = Instant::now();
    let out = run_scenario(&ScenarioConfig::steady_lead(ControllerKind::Optimal)).unwrap();
    let mut passed = out.aborted_at.is_none();
    let mut worst_b = 0.0f64;
    for r in &out.log.rows {
        if r.u != 0.0 {
            passed = false;
        }
        worst_b = worst_b.max((r.b + 11.0).abs());
    }
    if worst_b > 1e-6 {
        passed = false;
    }
    finish(
        "steady-lead hold",
        start,
        passed,
        format!(
            "u identically zero: {}, worst |b + 11| = {worst_b:.2e}",
            out.log.rows.iter().all(|r| r.u == 0.0)
        ),
    )
}

/// Closed-form tracking QP equals the generic interval QP.
pub fn check_qp_oracle_equality(seed: u64) -> CheckResult {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let n = 10_000;
    for _ in 0..n {
        let v = rng.gen_range(-50.0..50.0);
        let v_star = rng.gen_range(-50.0..50.0);
        let dt = rng.gen_range(0.01..1.0);
        let a = rng.gen_range(-10.0..10.0);
        let b = rng.gen_range(-10.0..10.0);
        let (lower, upper) = if a <= b { (a, b) } else { (b, a) };
        let closed = solve_acc_qp(QpSetup {
            v,
            v_star,
            dt,
            lower,
            upper,
        })
        .unwrap()
        .u_applied;
        let generic =
            solve_generic_scalar_qp(dt * dt, 2.0 * dt * (v - v_star), lower, upper).unwrap();
        worst = worst.max((closed - generic).abs());
    }
    let passed = worst <= 1e-12;
    finish(
        "tracking QP vs generic QP",
        start,
        passed,
        format!("worst |difference| {worst:.2e} over {n} instances"),
    )
}

/// With the slope from the max-rate rule, the linear first-order barrier's
/// feasible interval coincides with the feasibility-maximizing one.
pub fn check_linear_cbf_closeness() -> CheckResult {
    let start = Instant::now();
    // test system: x_dot = u, b = x - 5, u_max = 5
    let dynamics = ControlAffineDynamics::new(
        1,
        1,
        |_, out| out[0] = 0.0,
        |_, out| out[0] = 1.0,
    );
    let spec = BarrierSpec::first_order(
        dynamics,
        |x, _| x[0] - 5.0,
        |_, _| 0.0,
        |_, _| vec![1.0],
        1.0,
    )
    .unwrap();
    let bounds = ControlBounds::new(U_MAX).unwrap();
    let eps = 0.01;

    let band: Vec<(Vec<f64>, f64)> = (0..200)
        .map(|i| (vec![5.0 - eps * i as f64 / 199.0], 0.0))
        .collect();
    let slope = linear_cbf_slope(&spec, &bounds, eps, &band).unwrap();

    let tol = BoundaryTolerance::analytic();
    let mut worst = 0.0f64;
    let mut passed = !slope.non_binding;
    for i in 0..200 {
        // states with b <= -eps
        let b = -eps - 40.0 * i as f64 / 199.0;
        let eval = eval_barrier(&spec, &[5.0 + b], 0.0).unwrap();
        let zbf = feasible_interval(&[optimal_zbf(&eval, &bounds, tol).unwrap()], &bounds)
            .unwrap();
        let lin = feasible_interval(&[linear_cbf(&eval, slope.c1).unwrap()], &bounds).unwrap();
        match (zbf.bounds(), lin.bounds()) {
            (Some((zl, zu)), Some((ll, lu))) => {
                // the maximal interval is the whole control-bound interval
                worst = worst
                    .max((zl - (-U_MAX)).abs())
                    .max((zu - U_MAX).abs())
                    .max((zl - ll).abs())
                    .max((zu - lu).abs());
            }
            _ => passed = false,
        }
    }
    if worst > 1e-12 {
        passed = false;
    }

    // both upper ends vanish on the boundary
    let eval0 = eval_barrier(&spec, &[5.0], 0.0).unwrap();
    let zbf0 = feasible_interval(&[optimal_zbf(&eval0, &bounds, tol).unwrap()], &bounds).unwrap();
    let lin0 = feasible_interval(&[linear_cbf(&eval0, slope.c1).unwrap()], &bounds).unwrap();
    let boundary_ok = match (zbf0.bounds(), lin0.bounds()) {
        (Some((_, zu)), Some((_, lu))) => zu.abs() <= 1e-12 && lu.abs() <= 1e-12,
        _ => false,
    };
    if !boundary_ok {
        passed = false;
    }

    finish(
        "linear barrier epsilon-closeness",
        start,
        passed,
        format!(
            "slope c1 = {:.1}, worst interval deviation {worst:.2e}, boundary upper ends match: {boundary_ok}",
            slope.c1
        ),
    )
}

/// Switching policy: extremal braking on the set boundary, clamped nominal
/// strictly inside.
pub fn check_switching_policy(seed: u64) -> CheckResult {
    let start = Instant::now();
    let env = envelope();
    let cfg = OptimalCbfConfig::new(env.clone(), 3.0).unwrap();
    let bounds = ControlBounds::new(U_MAX).unwrap();
    let signal = crate::model::ExogenousSignal::constant_speed(40.0, 1.0);
    let spec = acc_barrier_spec(signal.clone(), 10.0, U_MAX, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();

    // boundary states: b_dot = sqrt(-2 u_max b) within 1e-9 of the manifold
    for _ in 0..100 {
        let b = rng.gen_range(-50.0..-0.05);
        let bdot = (-2.0 * U_MAX * b).sqrt();
        let state = acc_state_for(&signal, 10.0, 0.0, b, bdot);
        let eval = eval_barrier(&spec, &state, 0.0).unwrap();
        let m = stopping_margin(&env, eval.b, eval.bdot_drift).unwrap();
        if m.abs() > 1e-9 {
            failures.push(format!("constructed state missed the manifold: M = {m:e}"));
            break;
        }
        let u = switching_control(&eval, &cfg, &bounds, rng.gen_range(-5.0..5.0)).unwrap();
        if u != -U_MAX {
            failures.push(format!("boundary control {u} != -u_max at b = {b:.3}"));
            break;
        }
    }

    // interior states (stopping margin at most -1): clamp of the nominal
    // into the feasible interval
    let mut checked = 0;
    while checked < 100 && failures.is_empty() {
        let b = rng.gen_range(-50.0..-0.5);
        let margin_cap = (-2.0 * U_MAX * b - 1.0).max(0.0).sqrt();
        let bdot = rng.gen_range(-5.0..margin_cap);
        let state = acc_state_for(&signal, 10.0, 0.0, b, bdot);
        let eval = eval_barrier(&spec, &state, 0.0).unwrap();
        let m = stopping_margin(&env, eval.b, eval.bdot_drift).unwrap();
        if m > -1.0 {
            continue;
        }
        checked += 1;
        let label = classify_c2(&eval, &env, DEFAULT_CLASSIFY_TOL).unwrap();
        if label != SafeSetLabel::InteriorC2 {
            failures.push(format!("expected interior at b = {b:.3}, got {label:?}"));
            break;
        }
        let nominal = rng.gen_range(-6.0..6.0);
        let constraints = if eval.bdot_drift > 0.0 {
            vec![reduced_constraint(&eval, &cfg).unwrap()]
        } else {
            Vec::new()
        };
        let interval = feasible_interval(&constraints, &bounds).unwrap();
        let expected = interval.clamp(nominal).unwrap();
        let got = switching_control(&eval, &cfg, &bounds, nominal).unwrap();
        if (got - expected).abs() > 1e-12 {
            failures.push(format!(
                "interior control {got} != clamped nominal {expected} at b = {b:.3}, b_dot = {bdot:.3}"
            ));
            break;
        }
    }

    let passed = failures.is_empty();
    let details = if passed {
        "100 boundary states brake at -u_max exactly; 100 interior states clamp the nominal"
            .to_string()
    } else {
        failures.join("; ")
    };
    finish("switching policy", start, passed, details)
}

/// Comparison plumbing: paired logs align and the onset delta is reported.
pub fn comparison_data() -> crate::sim::Comparison {
    compare_scenarios(
        &ScenarioConfig::closing(ControllerKind::Optimal),
        &ScenarioConfig::closing(ControllerKind::Linear),
    )
    .unwrap()
}

/// Run the whole suite in acceptance order.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    vec![
        check_class_k_gain(seed),
        check_gain_closed_form(),
        check_safe_set_oracle_equivalence(),
        check_braking_minimality(seed),
        check_closing_scenario(),
        check_steady_lead_scenario(),
        check_qp_oracle_equality(seed),
        check_linear_cbf_closeness(),
        check_switching_policy(seed),
    ]
}
