//! Discrete-time closed-loop simulation of the vehicle-following scenario:
//! double-integrator ego dynamics, a headway constraint against an
//! exogenous lead trajectory, and a choice of upper-bound controller
//! (optimal square-root barrier, linear second-order barrier, or none)
//! feeding the tracking QP at every step.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::filter::{solve_acc_qp, QpSetup};
use crate::model::{
    eval_barrier, BarrierSpec, ControlAffineDynamics, ControlBounds, EnvelopeFunction,
    ExogenousSignal,
};
use crate::second_order::{
    classify_c2, reduced_constraint, OptimalCbfConfig, SafeSetLabel, DEFAULT_CLASSIFY_TOL,
};

/// Steps with `b` above this value count as discrete-time violations.
pub const VIOLATION_TOL: f64 = 1e-3;

/// Which upper-bound controller filters the nominal control.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Optimal,
    Linear,
    None,
}

impl ControllerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::Optimal => "optimal",
            ControllerKind::Linear => "linear",
            ControllerKind::None => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(ControllerKind::Optimal),
            "linear" => Ok(ControllerKind::Linear),
            "none" => Ok(ControllerKind::None),
            other => Err(Error::InvalidConfig(format!(
                "unknown controller '{other}' (expected optimal|linear|none)"
            ))),
        }
    }
}

/// Lead-vehicle model kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeadKind {
    ConstantSpeed,
    ConstantAcceleration,
    WorstCaseBraking,
}

impl LeadKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LeadKind::ConstantSpeed => "constant-speed",
            LeadKind::ConstantAcceleration => "constant-acceleration",
            LeadKind::WorstCaseBraking => "worst-case-braking",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "constant-speed" => Ok(LeadKind::ConstantSpeed),
            "constant-acceleration" => Ok(LeadKind::ConstantAcceleration),
            "worst-case-braking" => Ok(LeadKind::WorstCaseBraking),
            other => Err(Error::InvalidConfig(format!(
                "unknown lead_kind '{other}' \
                 (expected constant-speed|constant-acceleration|worst-case-braking)"
            ))),
        }
    }
}

/// Complete scenario description.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub p0: f64,
    pub v0: f64,
    pub v_star: f64,
    pub gamma: f64,
    pub u_max: f64,
    pub c1: f64,
    pub c_a: f64,
    pub c_b: f64,
    pub dt: f64,
    pub t_end: f64,
    pub lead_kind: LeadKind,
    pub delta0: f64,
    pub delta_dot0: f64,
    pub delta_ddot: f64,
    pub controller: ControllerKind,
}

impl ScenarioConfig {
    /// Preset in which the ego closes on a slower lead and must settle at
    /// the minimum gap.
    pub fn closing(controller: ControllerKind) -> Self {
        Self {
            p0: 0.0,
            v0: 10.0,
            v_star: 10.0,
            gamma: 10.0,
            u_max: 5.0,
            c1: 3.0,
            c_a: 100.0,
            c_b: 1.0,
            dt: 1e-3,
            t_end: 30.0,
            lead_kind: LeadKind::ConstantSpeed,
            delta0: 40.0,
            delta_dot0: 1.0,
            delta_ddot: 0.0,
            controller,
        }
    }

    /// Preset with matched speeds: zero relative motion, the constraint
    /// never activates.
    pub fn steady_lead(controller: ControllerKind) -> Self {
        Self {
            delta0: 1.0,
            delta_dot0: 10.0,
            ..Self::closing(controller)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dt", self.dt),
            ("T_end", self.t_end),
            ("gamma", self.gamma),
            ("u_max", self.u_max),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        match self.controller {
            ControllerKind::Optimal => {
                if !(self.c1 > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "c1 must be positive for the optimal controller, got {}",
                        self.c1
                    )));
                }
            }
            ControllerKind::Linear => {
                if !(self.c_a > 0.0) || !(self.c_b > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "cA and cB must be positive for the linear controller, got {} and {}",
                        self.c_a, self.c_b
                    )));
                }
            }
            ControllerKind::None => {}
        }
        if self.lead_kind == LeadKind::WorstCaseBraking && !(self.delta_ddot < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "worst-case-braking requires delta_ddot < 0, got {}",
                self.delta_ddot
            )));
        }
        let finite = [
            self.p0,
            self.v0,
            self.v_star,
            self.delta0,
            self.delta_dot0,
            self.delta_ddot,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("all values must be finite".into()));
        }
        Ok(())
    }

    /// Build the lead trajectory declared by this scenario.
    pub fn signal(&self) -> Result<ExogenousSignal> {
        match self.lead_kind {
            LeadKind::ConstantSpeed => Ok(ExogenousSignal::constant_speed(
                self.delta0,
                self.delta_dot0,
            )),
            LeadKind::ConstantAcceleration => Ok(ExogenousSignal::constant_acceleration(
                self.delta0,
                self.delta_dot0,
                self.delta_ddot,
            )),
            LeadKind::WorstCaseBraking => {
                ExogenousSignal::worst_case_braking(self.delta0, self.delta_dot0, self.delta_ddot)
            }
        }
    }
}

/// Ego dynamics: `p_dot = v`, `v_dot = u`.
pub fn double_integrator() -> ControlAffineDynamics {
    ControlAffineDynamics::new(
        2,
        1,
        |x, out| {
            out[0] = x[1];
            out[1] = 0.0;
        },
        |_, out| {
            out[0] = 0.0;
            out[1] = 1.0;
        },
    )
}

/// Worst acceleration the declared lead model can exhibit; the envelope
/// must cover it so the braking primitive's line integral stays a lower
/// bound on achievable stopping.
fn lead_min_accel(signal: &ExogenousSignal) -> f64 {
    match signal {
        ExogenousSignal::ConstantSpeed { .. } => 0.0,
        ExogenousSignal::ConstantAcceleration { accel, .. } => *accel,
        ExogenousSignal::WorstCaseBraking { decel, .. } => *decel,
        ExogenousSignal::Tabulated {
            sample_period,
            rates,
            ..
        } => rates
            .windows(2)
            .map(|w| (w[1] - w[0]) / sample_period)
            .fold(0.0_f64, f64::min),
    }
}

/// Authority margin certifying the braking envelope of a scenario:
/// `epsilon^2` is half the envelope magnitude, capped at 1.
pub fn scenario_margin(cfg: &ScenarioConfig) -> Result<f64> {
    let signal = cfg.signal()?;
    let envelope_value = -cfg.u_max - lead_min_accel(&signal);
    if !(envelope_value < 0.0) {
        return Err(Error::InvalidConfig(format!(
            "lead model exhausts the braking authority (envelope {envelope_value} >= 0)"
        )));
    }
    Ok((0.5 * -envelope_value).sqrt().min(1.0))
}

/// Headway constraint `b = p - delta(t) - gamma <= 0` for the double
/// integrator, with the lead model folded into the second-derivative
/// envelope: `envelope = -u_max - min_t delta_ddot(t)`.
pub fn acc_barrier_spec(
    signal: ExogenousSignal,
    gamma: f64,
    u_max: f64,
    epsilon: f64,
) -> Result<BarrierSpec> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::NonPositiveParameter {
            name: "gamma",
            value: gamma,
        });
    }
    let bounds = ControlBounds::new(u_max)?;
    let envelope_value = -bounds.u_max() - lead_min_accel(&signal);
    if envelope_value > -epsilon * epsilon {
        return Err(Error::InvalidConfig(format!(
            "lead model leaves insufficient braking authority: \
             envelope {envelope_value} exceeds -epsilon^2 = {}",
            -epsilon * epsilon
        )));
    }
    let sig_b = signal.clone();
    let sig_bdot = signal.clone();
    let sig_bddot = signal;
    BarrierSpec::second_order(
        double_integrator(),
        move |x, t| x[0] - sig_b.position(t) - gamma,
        move |x, t| x[1] - sig_bdot.rate(t),
        move |_, t| -sig_bddot.accel(t),
        |_, _| 1.0,
        EnvelopeFunction::constant(envelope_value),
        epsilon,
    )
}

/// State realizing phase-plane coordinates `(b, b_dot)` at time `t`.
pub fn acc_state_for(
    signal: &ExogenousSignal,
    gamma: f64,
    t: f64,
    b: f64,
    bdot: f64,
) -> Vec<f64> {
    vec![b + signal.position(t) + gamma, bdot + signal.rate(t)]
}

/// One explicit Euler step of the ego vehicle.
pub fn step(state: (f64, f64), u: f64, dt: f64) -> (f64, f64) {
    let (p, v) = state;
    (p + v * dt, v + u * dt)
}

/// Everything derived from a [`ScenarioConfig`] that the loop needs.
#[derive(Debug, Clone)]
pub struct ScenarioRuntime {
    pub cfg: ScenarioConfig,
    pub signal: ExogenousSignal,
    pub spec: BarrierSpec,
    pub bounds: ControlBounds,
    pub cbf: Option<OptimalCbfConfig>,
}

impl ScenarioRuntime {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let signal = cfg.signal()?;
        let spec = acc_barrier_spec(signal.clone(), cfg.gamma, cfg.u_max, scenario_margin(&cfg)?)?;
        let bounds = ControlBounds::new(cfg.u_max)?;
        let cbf = match cfg.controller {
            ControllerKind::Optimal => {
                let envelope = spec
                    .envelope()
                    .expect("second-order spec carries an envelope")
                    .clone();
                Some(OptimalCbfConfig::new(envelope, cfg.c1)?)
            }
            _ => None,
        };
        Ok(Self {
            cfg,
            signal,
            spec,
            bounds,
            cbf,
        })
    }

    /// Upper bound on the control at `(state, t)`, `+inf` when inactive.
    ///
    /// Both barrier controllers are enforced only while `b_dot > 0`; with
    /// `b_dot <= 0` the constraint value is already decreasing. For the
    /// optimal controller the bound is the reduced-constraint offset, with
    /// extremal braking on the set boundary, inside the singularity band,
    /// and after any excursion outside the set (the excursion is also
    /// reported as a safety event).
    pub fn controller_bound(&self, state: &[f64], t: f64) -> Result<BoundOutcome> {
        let eval = eval_barrier(&self.spec, state, t)?;
        match self.cfg.controller {
            ControllerKind::None => Ok(BoundOutcome::inactive()),
            ControllerKind::Linear => {
                if eval.bdot_drift <= 0.0 {
                    return Ok(BoundOutcome::inactive());
                }
                let second = eval.second_terms()?;
                let upper = -(self.cfg.c_a + self.cfg.c_b) * eval.bdot_drift
                    - self.cfg.c_a * self.cfg.c_b * eval.b
                    - second.drift;
                Ok(BoundOutcome::active(upper))
            }
            ControllerKind::Optimal => {
                let cbf = self.cbf.as_ref().expect("optimal controller has a config");
                let label = classify_c2(&eval, &cbf.envelope, DEFAULT_CLASSIFY_TOL)?;
                // The excursion fallback outranks the b_dot gate: a state
                // past the set must brake even while the gap is reopening,
                // otherwise the nominal ratchets it across the boundary
                // one discrete step at a time.
                match label {
                    SafeSetLabel::OutsideC2WithinC1 | SafeSetLabel::OutsideC1 => {
                        Ok(BoundOutcome::violation(-self.bounds.u_max()))
                    }
                    _ if eval.bdot_drift <= 0.0 => Ok(BoundOutcome::inactive()),
                    SafeSetLabel::BoundaryC2 => {
                        Ok(BoundOutcome::active(-self.bounds.u_max()))
                    }
                    SafeSetLabel::InteriorC2 => {
                        if eval.b > -cbf.b_floor {
                            return Ok(BoundOutcome::active(-self.bounds.u_max()));
                        }
                        let constraint = reduced_constraint(&eval, cbf)?;
                        let gain = constraint.normal[0];
                        if gain <= 0.0 {
                            return Err(Error::DegenerateConstraint);
                        }
                        Ok(BoundOutcome::active(constraint.offset / gain))
                    }
                }
            }
        }
    }
}

/// Controller output for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOutcome {
    pub upper: f64,
    pub safety_event: bool,
}

impl BoundOutcome {
    fn inactive() -> Self {
        Self {
            upper: f64::INFINITY,
            safety_event: false,
        }
    }

    fn active(upper: f64) -> Self {
        Self {
            upper,
            safety_event: false,
        }
    }

    fn violation(upper: f64) -> Self {
        Self {
            upper,
            safety_event: true,
        }
    }
}

/// One logged simulation step.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub p: f64,
    pub v: f64,
    pub u: f64,
    pub delta: f64,
    pub delta_dot: f64,
    pub b: f64,
    pub b_dot: f64,
    pub cbf_upper_bound: f64,
    pub cbf_active: bool,
    pub infeasible: bool,
}

/// Time-indexed record of one simulation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    /// CSV with the column order fixed by the log row definition.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "t,p,v,u,delta,delta_dot,b,b_dot,cbf_upper_bound,cbf_active,infeasible\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                fmt_sig(r.t),
                fmt_sig(r.p),
                fmt_sig(r.v),
                fmt_sig(r.u),
                fmt_sig(r.delta),
                fmt_sig(r.delta_dot),
                fmt_sig(r.b),
                fmt_sig(r.b_dot),
                fmt_sig(r.cbf_upper_bound),
                r.cbf_active,
                r.infeasible,
            );
        }
        out
    }

    /// `(b, upper bound)` pairs for bound-versus-constraint plots.
    pub fn bound_vs_b(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.b, r.cbf_upper_bound)).collect()
    }
}

/// Numbers serialized with 12 significant digits so downstream checks can
/// be reproduced from the CSV alone.
fn fmt_sig(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.11e}")
    }
}

/// Summary statistics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub max_b: f64,
    pub terminal_b: f64,
    pub terminal_b_dot: f64,
    /// First time the applied control drops below -0.01.
    pub braking_onset: Option<f64>,
    /// Steps with `b` above [`VIOLATION_TOL`].
    pub violation_steps: usize,
    pub infeasible_steps: usize,
    pub safety_events: usize,
}

impl Metrics {
    /// Flat key=value text block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "max_b={}", fmt_sig(self.max_b));
        let _ = writeln!(out, "terminal_b={}", fmt_sig(self.terminal_b));
        let _ = writeln!(out, "terminal_b_dot={}", fmt_sig(self.terminal_b_dot));
        let _ = writeln!(
            out,
            "braking_onset={}",
            self.braking_onset.map_or("none".into(), fmt_sig)
        );
        let _ = writeln!(out, "violation_steps={}", self.violation_steps);
        let _ = writeln!(out, "infeasible_steps={}", self.infeasible_steps);
        let _ = writeln!(out, "safety_events={}", self.safety_events);
        out
    }
}

/// Result of [`run_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub log: TrajectoryLog,
    pub metrics: Metrics,
    /// Set when the run aborted on a non-finite state; the final log row
    /// is the diagnostic sample.
    pub aborted_at: Option<f64>,
}

/// Run the closed loop: evaluate the barrier, compute the controller
/// bound, solve the tracking QP, log, and step, from `t = 0` to `T_end`.
///
/// Conservative barrier bounds below `-u_max` are clipped to `-u_max`
/// before the QP (saturated braking is the only admissible response), but
/// logged raw.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimulationOutput> {
    let runtime = ScenarioRuntime::new(cfg.clone())?;
    let n_steps = (cfg.t_end / cfg.dt).round() as usize;

    let mut log = TrajectoryLog {
        rows: Vec::with_capacity(n_steps + 1),
    };
    let mut p = cfg.p0;
    let mut v = cfg.v0;
    let mut max_b = f64::NEG_INFINITY;
    let mut braking_onset = None;
    let mut violation_steps = 0usize;
    let mut infeasible_steps = 0usize;
    let mut safety_events = 0usize;
    let mut aborted_at = None;

    for k in 0..=n_steps {
        let t = k as f64 * cfg.dt;
        let state = [p, v];
        let delta = runtime.signal.position(t);
        let delta_dot = runtime.signal.rate(t);
        let b = p - delta - cfg.gamma;
        let b_dot = v - delta_dot;

        if !p.is_finite() || !v.is_finite() {
            log.rows.push(LogRow {
                t,
                p,
                v,
                u: f64::NAN,
                delta,
                delta_dot,
                b,
                b_dot,
                cbf_upper_bound: f64::NAN,
                cbf_active: false,
                infeasible: false,
            });
            aborted_at = Some(t);
            break;
        }

        let bound = runtime.controller_bound(&state, t)?;
        if bound.safety_event {
            safety_events += 1;
        }
        let upper = cfg.u_max.min(bound.upper.max(-cfg.u_max));
        let result = solve_acc_qp(QpSetup {
            v,
            v_star: cfg.v_star,
            dt: cfg.dt,
            lower: -cfg.u_max,
            upper,
        })?;
        let u = result.u_applied;
        let cbf_active = bound.upper < cfg.u_max && u >= upper;

        log.rows.push(LogRow {
            t,
            p,
            v,
            u,
            delta,
            delta_dot,
            b,
            b_dot,
            cbf_upper_bound: bound.upper,
            cbf_active,
            infeasible: result.infeasible,
        });

        max_b = max_b.max(b);
        if b > VIOLATION_TOL {
            violation_steps += 1;
        }
        if result.infeasible {
            infeasible_steps += 1;
        }
        if braking_onset.is_none() && u < -0.01 {
            braking_onset = Some(t);
        }

        if k < n_steps {
            let next = step((p, v), u, cfg.dt);
            p = next.0;
            v = next.1;
        }
    }

    let last = log.rows.last().expect("at least one row");
    let metrics = Metrics {
        max_b,
        terminal_b: last.b,
        terminal_b_dot: last.b_dot,
        braking_onset,
        violation_steps,
        infeasible_steps,
        safety_events,
    };
    Ok(SimulationOutput {
        log,
        metrics,
        aborted_at,
    })
}

/// Paired runs of the same physical scenario under two controllers.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub output_a: SimulationOutput,
    pub output_b: SimulationOutput,
    /// `onset_b - onset_a`, when both runs braked.
    pub onset_delta: Option<f64>,
}

/// Run both configs and align their logs. The configs must agree on every
/// physical parameter; comparing a controller against itself is the
/// trivial case and yields zero deltas.
pub fn compare_scenarios(cfg_a: &ScenarioConfig, cfg_b: &ScenarioConfig) -> Result<Comparison> {
    if cfg_a.dt != cfg_b.dt {
        return Err(Error::ConfigMismatch { field: "dt" });
    }
    if cfg_a.t_end != cfg_b.t_end {
        return Err(Error::ConfigMismatch { field: "T_end" });
    }
    for (field, a, b) in [
        ("p0", cfg_a.p0, cfg_b.p0),
        ("v0", cfg_a.v0, cfg_b.v0),
        ("v_star", cfg_a.v_star, cfg_b.v_star),
        ("gamma", cfg_a.gamma, cfg_b.gamma),
        ("u_max", cfg_a.u_max, cfg_b.u_max),
        ("delta0", cfg_a.delta0, cfg_b.delta0),
        ("delta_dot0", cfg_a.delta_dot0, cfg_b.delta_dot0),
        ("delta_ddot", cfg_a.delta_ddot, cfg_b.delta_ddot),
    ] {
        if a != b {
            return Err(Error::ConfigMismatch { field });
        }
    }
    if cfg_a.lead_kind != cfg_b.lead_kind {
        return Err(Error::ConfigMismatch { field: "lead_kind" });
    }

    let output_a = run_scenario(cfg_a)?;
    let output_b = run_scenario(cfg_b)?;
    let onset_delta = match (
        output_a.metrics.braking_onset,
        output_b.metrics.braking_onset,
    ) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };
    Ok(Comparison {
        output_a,
        output_b,
        onset_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_step_examples() {
        assert_eq!(step((0.0, 10.0), 0.0, 0.1), (1.0, 10.0));
        assert_eq!(step((0.0, 10.0), -5.0, 0.1), (1.0, 9.5));
        let s = step((3.0, 7.0), 2.0, 0.0);
        assert_eq!(s, (3.0, 7.0));
    }

    #[test]
    fn optimal_bound_near_boundary() {
        let rt = ScenarioRuntime::new(ScenarioConfig::closing(ControllerKind::Optimal)).unwrap();
        // b = -10, b_dot = 9 at t = 0: p = -10 + 40 + 10 = 40, v = 10
        let out = rt.controller_bound(&[40.0, 10.0], 0.0).unwrap();
        assert!((out.upper - (-1.5)).abs() < 1e-12, "bound {}", out.upper);
        assert!(!out.safety_event);
    }

    #[test]
    fn optimal_bound_inactive_when_receding() {
        let rt = ScenarioRuntime::new(ScenarioConfig::closing(ControllerKind::Optimal)).unwrap();
        // v = 0.5 < lead rate 1.0: b_dot < 0
        let out = rt.controller_bound(&[0.0, 0.5], 0.0).unwrap();
        assert_eq!(out.upper, f64::INFINITY);
    }

    #[test]
    fn optimal_bound_flags_excursions() {
        let rt = ScenarioRuntime::new(ScenarioConfig::closing(ControllerKind::Optimal)).unwrap();
        // b = -10, b_dot = 11: outside the recursively feasible set
        let out = rt.controller_bound(&[40.0, 12.0], 0.0).unwrap();
        assert_eq!(out.upper, -5.0);
        assert!(out.safety_event);
    }

    #[test]
    fn linear_bound_value() {
        let rt = ScenarioRuntime::new(ScenarioConfig::closing(ControllerKind::Linear)).unwrap();
        // b = -10, b_dot = 9: -(100 + 1) * 9 - 100 * 1 * (-10) = -909 + 1000 = 91
        let out = rt.controller_bound(&[40.0, 10.0], 0.0).unwrap();
        assert!((out.upper - 91.0).abs() < 1e-9, "bound {}", out.upper);
    }

    #[test]
    fn unfiltered_bound_is_infinite() {
        let rt = ScenarioRuntime::new(ScenarioConfig::closing(ControllerKind::None)).unwrap();
        let out = rt.controller_bound(&[40.0, 10.0], 0.0).unwrap();
        assert_eq!(out.upper, f64::INFINITY);
    }

    #[test]
    fn steady_lead_never_moves() {
        let out = run_scenario(&ScenarioConfig::steady_lead(ControllerKind::Optimal)).unwrap();
        assert!(out.aborted_at.is_none());
        for r in &out.log.rows {
            assert_eq!(r.u, 0.0, "u nonzero at t={}", r.t);
            assert!((r.b + 11.0).abs() < 1e-6, "b drifted at t={}: {}", r.t, r.b);
            assert_eq!(r.b_dot, 0.0);
        }
        assert!(out.metrics.braking_onset.is_none());
    }

    #[test]
    fn row_count_matches_step_count() {
        let mut cfg = ScenarioConfig::closing(ControllerKind::None);
        cfg.t_end = 0.5;
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.log.rows.len(), 501);
        assert_eq!(out.log.rows[0].t, 0.0);
        let last_t = out.log.rows.last().unwrap().t;
        assert!((last_t - 0.5).abs() < 1e-12);
        for pair in out.log.rows.windows(2) {
            assert!(pair[1].t > pair[0].t);
            assert!((pair[1].t - pair[0].t - cfg.dt).abs() < 1e-12);
        }
    }

    #[test]
    fn unfiltered_closing_scenario_collides() {
        let out = run_scenario(&ScenarioConfig::closing(ControllerKind::None)).unwrap();
        assert!(out.metrics.max_b > 100.0);
        assert!(out.metrics.violation_steps > 0);
        assert!(out.metrics.braking_onset.is_none());
    }

    #[test]
    fn csv_schema_and_digits() {
        let mut cfg = ScenarioConfig::closing(ControllerKind::None);
        cfg.t_end = 0.01;
        let out = run_scenario(&cfg).unwrap();
        let csv = out.log.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,p,v,u,delta,delta_dot,b,b_dot,cbf_upper_bound,cbf_active,infeasible"
        );
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 11);
        // +inf bound serializes as "inf" and parses back
        assert!(first.contains("inf"));
        assert_eq!("inf".parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn comparison_requires_identical_physics() {
        let a = ScenarioConfig::closing(ControllerKind::Optimal);
        let mut b = ScenarioConfig::closing(ControllerKind::Linear);
        b.dt = 2e-3;
        assert!(matches!(
            compare_scenarios(&a, &b),
            Err(Error::ConfigMismatch { field: "dt" })
        ));
        let mut c = ScenarioConfig::closing(ControllerKind::Linear);
        c.t_end = 10.0;
        assert!(matches!(
            compare_scenarios(&a, &c),
            Err(Error::ConfigMismatch { field: "T_end" })
        ));
    }

    #[test]
    fn self_comparison_has_zero_deltas() {
        let mut a = ScenarioConfig::closing(ControllerKind::Optimal);
        a.t_end = 6.0;
        let cmp = compare_scenarios(&a, &a).unwrap();
        assert_eq!(cmp.onset_delta, Some(0.0));
        assert_eq!(cmp.output_a.log.rows, cmp.output_b.log.rows);
    }

    #[test]
    fn onset_delta_undefined_when_one_run_never_brakes() {
        let mut a = ScenarioConfig::closing(ControllerKind::Optimal);
        let mut b = ScenarioConfig::closing(ControllerKind::None);
        a.t_end = 6.0;
        b.t_end = 6.0;
        let cmp = compare_scenarios(&a, &b).unwrap();
        assert!(cmp.output_a.metrics.braking_onset.is_some());
        assert!(cmp.output_b.metrics.braking_onset.is_none());
        assert_eq!(cmp.onset_delta, None);
    }

    #[test]
    fn comparison_of_identical_physics_aligns_logs() {
        let mut a = ScenarioConfig::closing(ControllerKind::Optimal);
        let mut b = ScenarioConfig::closing(ControllerKind::Linear);
        a.t_end = 1.0;
        b.t_end = 1.0;
        let cmp = compare_scenarios(&a, &b).unwrap();
        assert_eq!(cmp.output_a.log.rows.len(), cmp.output_b.log.rows.len());
    }

    #[test]
    fn margin_scales_with_available_authority() {
        let cfg = ScenarioConfig::closing(ControllerKind::Optimal);
        assert_eq!(scenario_margin(&cfg).unwrap(), 1.0);

        let mut weak = cfg.clone();
        weak.u_max = 0.5;
        let eps = scenario_margin(&weak).unwrap();
        assert!((eps - 0.5).abs() < 1e-12);
        // a low-authority scenario still builds
        assert!(ScenarioRuntime::new(weak).is_ok());

        let mut hard_lead = cfg;
        hard_lead.lead_kind = LeadKind::WorstCaseBraking;
        hard_lead.delta_ddot = -5.0;
        assert!(scenario_margin(&hard_lead).is_err());
    }

    #[test]
    fn metrics_text_block() {
        let mut cfg = ScenarioConfig::closing(ControllerKind::None);
        cfg.t_end = 0.1;
        let out = run_scenario(&cfg).unwrap();
        let text = out.metrics.to_text();
        assert!(text.contains("max_b="));
        assert!(text.contains("braking_onset=none"));
        assert!(text.contains("violation_steps=0"));
    }
}
