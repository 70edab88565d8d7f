//! Dynamical system, constraint, control-bound, and exogenous-signal
//! abstractions shared by every other module.
//!
//! A [`BarrierSpec`] bundles a constraint `b(x, t) <= 0` with its
//! time-derivative decomposition along control-affine dynamics
//! `x_dot = f(x) + g(x) u`, the constraint order (how many derivatives
//! before the control appears), and the lower envelope of the second
//! derivative used by the second-order constructions.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Scalar-valued evaluator of state and time.
pub type ScalarField = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Row-vector-valued evaluator of state and time (length = control dim).
pub type RowField = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;

/// Order of an inequality constraint: the number of time derivatives of
/// `b` taken before the control input first appears.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintOrder {
    First,
    Second,
}

impl ConstraintOrder {
    pub fn as_u8(self) -> u8 {
        match self {
            ConstraintOrder::First => 1,
            ConstraintOrder::Second => 2,
        }
    }
}

impl fmt::Display for ConstraintOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Norm bound on the control input: the admissible set is `||u|| <= u_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBounds {
    u_max: f64,
}

impl ControlBounds {
    pub fn new(u_max: f64) -> Result<Self> {
        if !(u_max > 0.0) || !u_max.is_finite() {
            return Err(Error::NonPositiveParameter {
                name: "u_max",
                value: u_max,
            });
        }
        Ok(Self { u_max })
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    /// Clamp a scalar control into `[-u_max, u_max]`.
    pub fn clamp_scalar(&self, u: f64) -> f64 {
        u.clamp(-self.u_max, self.u_max)
    }

    pub fn contains_scalar(&self, u: f64) -> bool {
        u.abs() <= self.u_max
    }
}

/// Evaluator writing its vector (or row-major matrix) result into a
/// caller-provided buffer, keeping tight integration loops allocation-free.
pub type BufferField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Control-affine dynamics `x_dot = f(x) + g(x) u`.
///
/// `g` is row-major `state_dim x control_dim`.
#[derive(Clone)]
pub struct ControlAffineDynamics {
    state_dim: usize,
    control_dim: usize,
    drift: BufferField,
    input_map: BufferField,
}

impl fmt::Debug for ControlAffineDynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlAffineDynamics")
            .field("state_dim", &self.state_dim)
            .field("control_dim", &self.control_dim)
            .finish()
    }
}

impl ControlAffineDynamics {
    pub fn new(
        state_dim: usize,
        control_dim: usize,
        drift: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        input_map: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            state_dim,
            control_dim,
            drift: Arc::new(drift),
            input_map: Arc::new(input_map),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    /// Evaluate `x_dot = f(x) + g(x) u` into `out`.
    /// `g_buf` must hold `state_dim * control_dim` scratch entries.
    pub fn derivative(&self, x: &[f64], u: &[f64], out: &mut [f64], g_buf: &mut [f64]) {
        (self.drift)(x, out);
        (self.input_map)(x, g_buf);
        for i in 0..self.state_dim {
            let row = &g_buf[i * self.control_dim..(i + 1) * self.control_dim];
            let mut acc = 0.0;
            for (gij, uj) in row.iter().zip(u.iter()) {
                acc += gij * uj;
            }
            out[i] += acc;
        }
    }

    /// One explicit Euler step in place.
    pub fn euler_step(&self, x: &mut [f64], u: &[f64], dt: f64, scratch: &mut Scratch) {
        self.derivative(x, u, &mut scratch.dx, &mut scratch.g);
        for (xi, dxi) in x.iter_mut().zip(scratch.dx.iter()) {
            *xi += dxi * dt;
        }
    }

    /// One classic fourth-order Runge-Kutta step in place (constant `u`).
    #[allow(clippy::needless_range_loop)] // four parallel stage buffers
    pub fn rk4_step(&self, x: &mut [f64], u: &[f64], dt: f64, scratch: &mut Rk4Scratch) {
        let n = self.state_dim;
        scratch.x_tmp[..n].copy_from_slice(x);
        self.derivative(&scratch.x_tmp, u, &mut scratch.k1, &mut scratch.g);
        for i in 0..n {
            scratch.x_tmp[i] = x[i] + 0.5 * dt * scratch.k1[i];
        }
        self.derivative(&scratch.x_tmp, u, &mut scratch.k2, &mut scratch.g);
        for i in 0..n {
            scratch.x_tmp[i] = x[i] + 0.5 * dt * scratch.k2[i];
        }
        self.derivative(&scratch.x_tmp, u, &mut scratch.k3, &mut scratch.g);
        for i in 0..n {
            scratch.x_tmp[i] = x[i] + dt * scratch.k3[i];
        }
        self.derivative(&scratch.x_tmp, u, &mut scratch.k4, &mut scratch.g);
        for i in 0..n {
            x[i] += dt / 6.0
                * (scratch.k1[i] + 2.0 * scratch.k2[i] + 2.0 * scratch.k3[i] + scratch.k4[i]);
        }
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            dx: vec![0.0; self.state_dim],
            g: vec![0.0; self.state_dim * self.control_dim],
        }
    }

    pub fn rk4_scratch(&self) -> Rk4Scratch {
        let n = self.state_dim;
        Rk4Scratch {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            x_tmp: vec![0.0; n],
            g: vec![0.0; n * self.control_dim],
        }
    }
}

/// Reusable buffers for Euler stepping.
#[derive(Debug, Clone)]
pub struct Scratch {
    dx: Vec<f64>,
    g: Vec<f64>,
}

/// Reusable buffers for RK4 stepping.
#[derive(Debug, Clone)]
pub struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    x_tmp: Vec<f64>,
    g: Vec<f64>,
}

/// Exogenous signal `delta(t)` with consistent first and second derivatives
/// under the declared model kind.
#[derive(Debug, Clone)]
pub enum ExogenousSignal {
    /// `delta(t) = delta0 + rate * t`, `delta_ddot = 0`.
    ConstantSpeed { delta0: f64, rate: f64 },
    /// `delta(t) = delta0 + rate0 * t + accel * t^2 / 2`.
    ConstantAcceleration {
        delta0: f64,
        rate0: f64,
        accel: f64,
    },
    /// The signal decelerates at `decel < 0` until its rate reaches zero,
    /// then holds position (minimum-stopping-distance model).
    WorstCaseBraking {
        delta0: f64,
        rate0: f64,
        decel: f64,
    },
    /// Rates sampled at a uniform period, interpolated piecewise-linearly;
    /// position is the exact integral of the interpolant. Outside the table
    /// the rate is held at the nearest endpoint.
    Tabulated {
        delta0: f64,
        sample_period: f64,
        rates: Vec<f64>,
    },
}

impl ExogenousSignal {
    pub fn constant_speed(delta0: f64, rate: f64) -> Self {
        ExogenousSignal::ConstantSpeed { delta0, rate }
    }

    pub fn constant_acceleration(delta0: f64, rate0: f64, accel: f64) -> Self {
        ExogenousSignal::ConstantAcceleration {
            delta0,
            rate0,
            accel,
        }
    }

    pub fn worst_case_braking(delta0: f64, rate0: f64, decel: f64) -> Result<Self> {
        if !(decel < 0.0) {
            return Err(Error::InvalidParameter {
                name: "decel",
                reason: format!("worst-case braking requires decel < 0, got {decel}"),
            });
        }
        Ok(ExogenousSignal::WorstCaseBraking {
            delta0,
            rate0,
            decel,
        })
    }

    pub fn tabulated(delta0: f64, sample_period: f64, rates: Vec<f64>) -> Result<Self> {
        if !(sample_period > 0.0) {
            return Err(Error::NonPositiveParameter {
                name: "sample_period",
                value: sample_period,
            });
        }
        if rates.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "rates",
                reason: format!("need at least 2 samples, got {}", rates.len()),
            });
        }
        if rates.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rates",
                reason: "samples must be finite".into(),
            });
        }
        Ok(ExogenousSignal::Tabulated {
            delta0,
            sample_period,
            rates,
        })
    }

    /// Position `delta(t)`.
    pub fn position(&self, t: f64) -> f64 {
        match self {
            ExogenousSignal::ConstantSpeed { delta0, rate } => delta0 + rate * t,
            ExogenousSignal::ConstantAcceleration {
                delta0,
                rate0,
                accel,
            } => delta0 + rate0 * t + 0.5 * accel * t * t,
            ExogenousSignal::WorstCaseBraking {
                delta0,
                rate0,
                decel,
            } => {
                let t_stop = (-rate0 / decel).max(0.0);
                if t <= t_stop {
                    delta0 + rate0 * t + 0.5 * decel * t * t
                } else {
                    delta0 + rate0 * t_stop + 0.5 * decel * t_stop * t_stop
                }
            }
            ExogenousSignal::Tabulated {
                delta0,
                sample_period,
                rates,
            } => {
                // Exact integral of the piecewise-linear rate (trapezoids).
                let n = rates.len();
                let t_end = (n - 1) as f64 * sample_period;
                if t <= 0.0 {
                    return delta0 + rates[0] * t;
                }
                let mut pos = *delta0;
                let t_in = t.min(t_end);
                let full = (t_in / sample_period).floor() as usize;
                let full = full.min(n - 2);
                for k in 0..full {
                    pos += 0.5 * (rates[k] + rates[k + 1]) * sample_period;
                }
                let t_rem = t_in - full as f64 * sample_period;
                if t_rem > 0.0 {
                    let frac = t_rem / sample_period;
                    let r_end = rates[full] + (rates[full + 1] - rates[full]) * frac;
                    pos += 0.5 * (rates[full] + r_end) * t_rem;
                }
                if t > t_end {
                    pos += rates[n - 1] * (t - t_end);
                }
                pos
            }
        }
    }

    /// Rate `delta_dot(t)`.
    pub fn rate(&self, t: f64) -> f64 {
        match self {
            ExogenousSignal::ConstantSpeed { rate, .. } => *rate,
            ExogenousSignal::ConstantAcceleration { rate0, accel, .. } => rate0 + accel * t,
            ExogenousSignal::WorstCaseBraking { rate0, decel, .. } => {
                let t_stop = (-rate0 / decel).max(0.0);
                if t <= t_stop {
                    rate0 + decel * t
                } else {
                    0.0
                }
            }
            ExogenousSignal::Tabulated {
                sample_period,
                rates,
                ..
            } => {
                let n = rates.len();
                let t_end = (n - 1) as f64 * sample_period;
                if t <= 0.0 {
                    rates[0]
                } else if t >= t_end {
                    rates[n - 1]
                } else {
                    let k = ((t / sample_period).floor() as usize).min(n - 2);
                    let frac = (t - k as f64 * sample_period) / sample_period;
                    rates[k] + (rates[k + 1] - rates[k]) * frac
                }
            }
        }
    }

    /// Acceleration `delta_ddot(t)`.
    pub fn accel(&self, t: f64) -> f64 {
        match self {
            ExogenousSignal::ConstantSpeed { .. } => 0.0,
            ExogenousSignal::ConstantAcceleration { accel, .. } => *accel,
            ExogenousSignal::WorstCaseBraking { rate0, decel, .. } => {
                let t_stop = (-rate0 / decel).max(0.0);
                if t < t_stop {
                    *decel
                } else {
                    0.0
                }
            }
            ExogenousSignal::Tabulated {
                sample_period,
                rates,
                ..
            } => {
                let n = rates.len();
                let t_end = (n - 1) as f64 * sample_period;
                if t < 0.0 || t >= t_end {
                    0.0
                } else {
                    let k = ((t / sample_period).floor() as usize).min(n - 2);
                    (rates[k + 1] - rates[k]) / sample_period
                }
            }
        }
    }
}

/// Lower envelope of the constraint's second derivative along the extremal
/// braking primitive, as a function of the barrier value `b`.
///
/// The constant fast path skips quadrature in the line-integral machinery.
#[derive(Clone)]
pub struct EnvelopeFunction {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    constant: Option<f64>,
}

impl fmt::Debug for EnvelopeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EnvelopeFunction")
            .field("constant", &self.constant)
            .finish()
    }
}

impl EnvelopeFunction {
    /// Constant envelope (e.g. `-u_max` for a double integrator with a
    /// constant-speed exogenous model).
    pub fn constant(value: f64) -> Self {
        Self {
            eval: Arc::new(move |_| value),
            constant: Some(value),
        }
    }

    /// General envelope `b -> envelope(b)`.
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            constant: None,
        }
    }

    pub fn value(&self, b: f64) -> f64 {
        (self.eval)(b)
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }
}

/// A constraint `b(x, t) <= 0` with its Lie-derivative decomposition.
///
/// For order 1 the first derivative is `b_dot = lf_b + lg_b . u`.
/// For order 2 the control does not appear in `b_dot` (`lg_b == 0`) and
/// the second derivative splits as `b_ddot = bddot_drift + bddot_ctrl * u`
/// (scalar control). `lf_b` and `bddot_drift` include all explicit time
/// dependence (e.g. the exogenous signal's motion).
#[derive(Clone)]
pub struct BarrierSpec {
    order: ConstraintOrder,
    dynamics: ControlAffineDynamics,
    b: ScalarField,
    lf_b: ScalarField,
    lg_b: Option<RowField>,
    bddot_drift: Option<ScalarField>,
    bddot_ctrl: Option<ScalarField>,
    envelope: Option<EnvelopeFunction>,
    epsilon: f64,
}

impl fmt::Debug for BarrierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BarrierSpec")
            .field("order", &self.order)
            .field("dynamics", &self.dynamics)
            .field("epsilon", &self.epsilon)
            .finish()
    }
}

impl BarrierSpec {
    /// Order-1 constraint: the control appears in `b_dot`.
    pub fn first_order(
        dynamics: ControlAffineDynamics,
        b: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        lf_b: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        lg_b: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
        epsilon: f64,
    ) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self {
            order: ConstraintOrder::First,
            dynamics,
            b: Arc::new(b),
            lf_b: Arc::new(lf_b),
            lg_b: Some(Arc::new(lg_b)),
            bddot_drift: None,
            bddot_ctrl: None,
            envelope: None,
            epsilon,
        })
    }

    /// Order-2 constraint with scalar control: `b_dot` is control-free and
    /// `b_ddot = bddot_drift + bddot_ctrl * u`.
    pub fn second_order(
        dynamics: ControlAffineDynamics,
        b: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        lf_b: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        bddot_drift: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        bddot_ctrl: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        envelope: EnvelopeFunction,
        epsilon: f64,
    ) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self {
            order: ConstraintOrder::Second,
            dynamics,
            b: Arc::new(b),
            lf_b: Arc::new(lf_b),
            lg_b: None,
            bddot_drift: Some(Arc::new(bddot_drift)),
            bddot_ctrl: Some(Arc::new(bddot_ctrl)),
            envelope: Some(envelope),
            epsilon,
        })
    }

    pub fn order(&self) -> ConstraintOrder {
        self.order
    }

    pub fn dynamics(&self) -> &ControlAffineDynamics {
        &self.dynamics
    }

    pub fn envelope(&self) -> Option<&EnvelopeFunction> {
        self.envelope.as_ref()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Barrier value `b(x, t)`.
    pub fn barrier(&self, x: &[f64], t: f64) -> f64 {
        (self.b)(x, t)
    }

    /// Drift part of `b_dot` (includes the explicit time derivative).
    /// For order 2 this is the full `b_dot`.
    pub fn bdot_drift(&self, x: &[f64], t: f64) -> f64 {
        (self.lf_b)(x, t)
    }

    /// Control coefficient row of `b_dot`; zeros for order 2.
    pub fn bdot_ctrl(&self, x: &[f64], t: f64) -> Vec<f64> {
        match &self.lg_b {
            Some(f) => f(x, t),
            None => vec![0.0; self.dynamics.control_dim()],
        }
    }

    /// Control-free part of `b_ddot` (order 2 only).
    pub fn bddot_drift(&self, x: &[f64], t: f64) -> Result<f64> {
        match &self.bddot_drift {
            Some(f) => Ok(f(x, t)),
            None => Err(Error::OrderMismatch {
                expected: 2,
                actual: self.order.as_u8(),
            }),
        }
    }

    /// Control coefficient of `b_ddot` (order 2, scalar control).
    pub fn bddot_ctrl(&self, x: &[f64], t: f64) -> Result<f64> {
        match &self.bddot_ctrl {
            Some(f) => Ok(f(x, t)),
            None => Err(Error::OrderMismatch {
                expected: 2,
                actual: self.order.as_u8(),
            }),
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::NonPositiveParameter {
            name: "epsilon",
            value: epsilon,
        });
    }
    Ok(())
}

/// Numeric snapshot of the barrier decomposition at one state and time.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierEvaluation {
    pub order: ConstraintOrder,
    pub b: f64,
    pub bdot_drift: f64,
    pub bdot_ctrl: Vec<f64>,
    /// Present for order-2 constraints only.
    pub second: Option<SecondDerivativeTerms>,
}

/// Decomposition of `b_ddot = drift + ctrl * u` for scalar control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondDerivativeTerms {
    pub drift: f64,
    pub ctrl: f64,
}

impl BarrierEvaluation {
    /// `b_dot` under a given control vector.
    pub fn bdot(&self, u: &[f64]) -> f64 {
        let mut acc = self.bdot_drift;
        for (c, ui) in self.bdot_ctrl.iter().zip(u.iter()) {
            acc += c * ui;
        }
        acc
    }

    /// `b_ddot` under a scalar control (order 2 only).
    pub fn bddot(&self, u: f64) -> Result<f64> {
        let s = self.second_terms()?;
        Ok(s.drift + s.ctrl * u)
    }

    pub fn second_terms(&self) -> Result<SecondDerivativeTerms> {
        self.second.ok_or(Error::OrderMismatch {
            expected: 2,
            actual: self.order.as_u8(),
        })
    }

    pub fn bdot_ctrl_norm(&self) -> f64 {
        self.bdot_ctrl.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Evaluate every decomposition term of `spec` at `(x, t)`.
pub fn eval_barrier(spec: &BarrierSpec, x: &[f64], t: f64) -> Result<BarrierEvaluation> {
    let b = spec.barrier(x, t);
    check_finite("b", b, t)?;
    let bdot_drift = spec.bdot_drift(x, t);
    check_finite("bdot_drift", bdot_drift, t)?;
    let bdot_ctrl = spec.bdot_ctrl(x, t);
    for v in &bdot_ctrl {
        check_finite("bdot_ctrl", *v, t)?;
    }
    let second = match spec.order() {
        ConstraintOrder::First => None,
        ConstraintOrder::Second => {
            let drift = spec.bddot_drift(x, t)?;
            check_finite("bddot_drift", drift, t)?;
            let ctrl = spec.bddot_ctrl(x, t)?;
            check_finite("bddot_ctrl", ctrl, t)?;
            Some(SecondDerivativeTerms { drift, ctrl })
        }
    };
    Ok(BarrierEvaluation {
        order: spec.order(),
        b,
        bdot_drift,
        bdot_ctrl,
        second,
    })
}

fn check_finite(field: &'static str, value: f64, t: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteEvaluation { field, value, t })
    }
}

/// Which extreme of the constraint rate to take over the admissible controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Min,
    Max,
}

/// Extreme of `b^(r)` over `||u|| <= u_max`.
///
/// Order 1: `bdot_drift +/- ||bdot_ctrl|| * u_max` (the dot product is
/// extremized by `u` parallel to the coefficient row).
/// Order 2: `bddot_drift +/- |bddot_ctrl| * u_max`.
pub fn extremal_rate(
    eval: &BarrierEvaluation,
    bounds: &ControlBounds,
    which: Extremum,
    order: ConstraintOrder,
) -> Result<f64> {
    if order != eval.order {
        return Err(Error::OrderMismatch {
            expected: order.as_u8(),
            actual: eval.order.as_u8(),
        });
    }
    let (drift, gain) = match order {
        ConstraintOrder::First => (eval.bdot_drift, eval.bdot_ctrl_norm()),
        ConstraintOrder::Second => {
            let s = eval.second_terms()?;
            (s.drift, s.ctrl.abs())
        }
    };
    Ok(match which {
        Extremum::Min => drift - gain * bounds.u_max(),
        Extremum::Max => drift + gain * bounds.u_max(),
    })
}

/// Default step for finite-difference validation of the decomposition.
pub const VALIDATION_FD_STEP: f64 = 1e-5;
/// Default relative tolerance for finite-difference validation.
pub const VALIDATION_FD_TOL: f64 = 1e-4;

/// One sampled state where the control authority assumption fails:
/// `min b^(r) > -epsilon^2` or `max b^(r) < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthorityViolation {
    pub sample: usize,
    pub min_rate: f64,
    pub max_rate: f64,
    pub epsilon: f64,
}

/// One sampled state where finite differences along the flow disagree with
/// the declared decomposition beyond tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionMismatch {
    pub sample: usize,
    pub control: f64,
    pub first_order_rel_err: f64,
    pub second_order_rel_err: Option<f64>,
}

/// Report produced by [`validate_assumptions`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssumptionReport {
    pub authority_violations: Vec<AuthorityViolation>,
    pub decomposition_mismatches: Vec<DecompositionMismatch>,
}

impl AssumptionReport {
    pub fn is_clean(&self) -> bool {
        self.authority_violations.is_empty() && self.decomposition_mismatches.is_empty()
    }
}

/// Check the control-authority and smoothness assumptions over sampled
/// states. Report-only; never fails.
///
/// Control authority: at each sample, `min b^(r) <= -epsilon^2` and
/// `max b^(r) >= 0` must both hold over the admissible controls.
///
/// Decomposition: the declared `b_dot` terms are checked against a forward
/// difference of `b` along the true flow under a few probe controls; for
/// order 2 the `b_ddot` terms are checked against a forward difference of
/// the declared `b_dot` along the same flow.
pub fn validate_assumptions(
    spec: &BarrierSpec,
    bounds: &ControlBounds,
    samples: &[(Vec<f64>, f64)],
) -> Result<AssumptionReport> {
    if samples.is_empty() {
        return Err(Error::Precondition("sample list must be nonempty".into()));
    }
    let mut report = AssumptionReport::default();
    let n_u = spec.dynamics().control_dim();
    let mut rk4 = spec.dynamics().rk4_scratch();
    let h = VALIDATION_FD_STEP;
    let tol = VALIDATION_FD_TOL;
    let eps = spec.epsilon();

    for (idx, (x, t)) in samples.iter().enumerate() {
        let eval = eval_barrier(spec, x, *t)?;
        let min_rate = extremal_rate(&eval, bounds, Extremum::Min, spec.order())?;
        let max_rate = extremal_rate(&eval, bounds, Extremum::Max, spec.order())?;
        if min_rate > -eps * eps || max_rate < 0.0 {
            report.authority_violations.push(AuthorityViolation {
                sample: idx,
                min_rate,
                max_rate,
                epsilon: eps,
            });
        }

        // Probe controls: zero plus +/-u_max along each control axis.
        let mut probes: Vec<Vec<f64>> = vec![vec![0.0; n_u]];
        for axis in 0..n_u {
            for sign in [1.0, -1.0] {
                let mut u = vec![0.0; n_u];
                u[axis] = sign * bounds.u_max();
                probes.push(u);
            }
        }

        for u in &probes {
            let mut x_next = x.clone();
            spec.dynamics().rk4_step(&mut x_next, u, h, &mut rk4);
            let t_next = t + h;

            let fd1 = (spec.barrier(&x_next, t_next) - eval.b) / h;
            let predicted1 = eval.bdot(u);
            let err1 = rel_err(fd1, predicted1);

            let err2 = match spec.order() {
                ConstraintOrder::First => None,
                ConstraintOrder::Second => {
                    let fd = (spec.bdot_drift(&x_next, t_next) - eval.bdot_drift) / h;
                    let predicted = eval.bddot(u[0])?;
                    Some(rel_err(fd, predicted))
                }
            };

            if err1 > tol || err2.is_some_and(|e| e > tol) {
                report.decomposition_mismatches.push(DecompositionMismatch {
                    sample: idx,
                    control: u[0],
                    first_order_rel_err: err1,
                    second_order_rel_err: err2,
                });
                break;
            }
        }
    }
    Ok(report)
}

fn rel_err(measured: f64, reference: f64) -> f64 {
    (measured - reference).abs() / reference.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{acc_barrier_spec, double_integrator};

    fn acc_spec(delta0: f64, rate: f64, gamma: f64, u_max: f64) -> BarrierSpec {
        acc_barrier_spec(
            ExogenousSignal::constant_speed(delta0, rate),
            gamma,
            u_max,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn eval_headway_barrier() {
        let spec = acc_spec(1.0, 10.0, 10.0, 5.0);
        let eval = eval_barrier(&spec, &[0.0, 10.0], 0.0).unwrap();
        assert_eq!(eval.b, -11.0);
        assert_eq!(eval.bdot_drift, 0.0);
        assert_eq!(eval.bdot_ctrl, vec![0.0]);
        let s = eval.second_terms().unwrap();
        assert_eq!(s.drift, 0.0);
        assert_eq!(s.ctrl, 1.0);
    }

    #[test]
    fn eval_on_boundary() {
        let spec = acc_spec(1.0, 10.0, 10.0, 5.0);
        let eval = eval_barrier(&spec, &[11.0, 10.0], 0.0).unwrap();
        assert_eq!(eval.b, 0.0);
    }

    #[test]
    fn eval_closing_gap() {
        let spec = acc_spec(40.0, 1.0, 10.0, 5.0);
        let eval = eval_barrier(&spec, &[0.0, 10.0], 0.0).unwrap();
        assert_eq!(eval.b, -50.0);
        assert_eq!(eval.bdot_drift, 9.0);
    }

    #[test]
    fn eval_rejects_non_finite() {
        let dyn2 = double_integrator();
        let spec = BarrierSpec::second_order(
            dyn2,
            |_, _| f64::NAN,
            |_, _| 0.0,
            |_, _| 0.0,
            |_, _| 1.0,
            EnvelopeFunction::constant(-5.0),
            1.0,
        )
        .unwrap();
        let err = eval_barrier(&spec, &[0.0, 0.0], 0.0).unwrap_err();
        match err {
            Error::NonFiniteEvaluation { field, .. } => assert_eq!(field, "b"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn extremal_rates_second_order() {
        let spec = acc_spec(1.0, 10.0, 10.0, 5.0);
        let bounds = ControlBounds::new(5.0).unwrap();
        let eval = eval_barrier(&spec, &[0.0, 10.0], 0.0).unwrap();
        let lo = extremal_rate(&eval, &bounds, Extremum::Min, ConstraintOrder::Second).unwrap();
        let hi = extremal_rate(&eval, &bounds, Extremum::Max, ConstraintOrder::Second).unwrap();
        assert_eq!(lo, -5.0);
        assert_eq!(hi, 5.0);
    }

    #[test]
    fn extremal_rate_zero_control_row() {
        let eval = BarrierEvaluation {
            order: ConstraintOrder::First,
            b: -1.0,
            bdot_drift: 3.0,
            bdot_ctrl: vec![0.0],
            second: None,
        };
        let bounds = ControlBounds::new(5.0).unwrap();
        for which in [Extremum::Min, Extremum::Max] {
            let r = extremal_rate(&eval, &bounds, which, ConstraintOrder::First).unwrap();
            assert_eq!(r, 3.0);
        }
    }

    #[test]
    fn extremal_rate_order_mismatch() {
        let spec = acc_spec(1.0, 10.0, 10.0, 5.0);
        let bounds = ControlBounds::new(5.0).unwrap();
        let eval = eval_barrier(&spec, &[0.0, 10.0], 0.0).unwrap();
        let err =
            extremal_rate(&eval, &bounds, Extremum::Min, ConstraintOrder::First).unwrap_err();
        assert!(matches!(err, Error::OrderMismatch { .. }));
    }

    #[test]
    fn assumptions_hold_on_acc_grid() {
        let spec = acc_spec(40.0, 1.0, 10.0, 5.0);
        let bounds = ControlBounds::new(5.0).unwrap();
        let mut samples = Vec::new();
        for p in [0.0, 10.0, 25.0] {
            for v in [0.0, 5.0, 12.0] {
                samples.push((vec![p, v], 0.0));
            }
        }
        let report = validate_assumptions(&spec, &bounds, &samples).unwrap();
        assert!(report.is_clean(), "report: {report:?}");
    }

    #[test]
    fn weak_actuation_flags_every_state() {
        let spec = acc_spec(40.0, 1.0, 10.0, 5.0);
        let weak = ControlBounds::new(0.5).unwrap();
        let samples: Vec<_> = (0..5).map(|i| (vec![i as f64, 1.0], 0.0)).collect();
        let report = validate_assumptions(&spec, &weak, &samples).unwrap();
        assert_eq!(report.authority_violations.len(), samples.len());
        assert!(report.decomposition_mismatches.is_empty());
    }

    #[test]
    fn first_order_spec_validates_cleanly() {
        // x_dot = 1 + u, b = x - 5: lf_b = 1, lg_b = [1]
        let dynamics = ControlAffineDynamics::new(
            1,
            1,
            |_, out| out[0] = 1.0,
            |_, out| out[0] = 1.0,
        );
        let spec = BarrierSpec::first_order(
            dynamics,
            |x, _| x[0] - 5.0,
            |_, _| 1.0,
            |_, _| vec![1.0],
            1.0,
        )
        .unwrap();
        let bounds = ControlBounds::new(5.0).unwrap();
        let samples: Vec<_> = (0..5).map(|i| (vec![i as f64], 0.0)).collect();
        let report = validate_assumptions(&spec, &bounds, &samples).unwrap();
        assert!(report.is_clean(), "{report:?}");
    }

    #[test]
    fn empty_sample_list_is_a_precondition_error() {
        let spec = acc_spec(40.0, 1.0, 10.0, 5.0);
        let bounds = ControlBounds::new(5.0).unwrap();
        assert!(validate_assumptions(&spec, &bounds, &[]).is_err());
    }

    #[test]
    fn constant_speed_signal_is_consistent() {
        let sig = ExogenousSignal::constant_speed(40.0, 1.0);
        for t in [0.0, 0.5, 2.0, 17.3] {
            let h = 0.25;
            let lhs = sig.position(t + h) - sig.position(t);
            assert!((lhs - sig.rate(t) * h).abs() < 1e-12);
            assert_eq!(sig.accel(t), 0.0);
        }
    }

    #[test]
    fn worst_case_braking_stops() {
        let sig = ExogenousSignal::worst_case_braking(0.0, 10.0, -2.0).unwrap();
        // stops at t = 5 having travelled 25
        assert!((sig.rate(4.999) - 0.002).abs() < 1e-9);
        assert_eq!(sig.rate(5.0), 0.0);
        assert_eq!(sig.rate(8.0), 0.0);
        assert!((sig.position(10.0) - 25.0).abs() < 1e-12);
        assert_eq!(sig.accel(10.0), 0.0);
        assert_eq!(sig.accel(1.0), -2.0);
    }

    #[test]
    fn tabulated_signal_interpolates_and_integrates() {
        let sig = ExogenousSignal::tabulated(1.0, 0.5, vec![0.0, 2.0, 2.0]).unwrap();
        assert_eq!(sig.rate(0.25), 1.0);
        assert_eq!(sig.accel(0.25), 4.0);
        // integral over [0, 0.5] of a 0->2 ramp is 0.5
        assert!((sig.position(0.5) - 1.5).abs() < 1e-12);
        // constant 2.0 afterwards
        assert!((sig.position(1.0) - 2.5).abs() < 1e-12);
        // held beyond the table
        assert_eq!(sig.rate(5.0), 2.0);
        assert!((sig.position(2.0) - 4.5).abs() < 1e-12);
    }

    #[test]
    fn bounds_reject_non_positive() {
        assert!(ControlBounds::new(0.0).is_err());
        assert!(ControlBounds::new(-1.0).is_err());
        assert!(ControlBounds::new(f64::NAN).is_err());
    }

    #[test]
    fn shared_types_are_send_and_sync() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<BarrierSpec>();
        assert_send_sync::<ControlAffineDynamics>();
        assert_send_sync::<EnvelopeFunction>();
        assert_send_sync::<ExogenousSignal>();
        assert_send_sync::<BarrierEvaluation>();
    }
}
