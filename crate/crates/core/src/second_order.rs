//! Order-2 constructions: the shortest line integral along the extremal
//! braking primitive, the recursively feasible safe set C2 and its
//! classification, the square-root barrier it induces, the reduction of
//! that barrier to a first-order half-space on the control, and the
//! switching controller that rides the set boundary.
//!
//! Geometry in the `(b, b_dot)` phase plane: with `I(b)` the integral of
//! the second-derivative lower envelope from `b` up to 0, the stopping
//! manifold is `M = b_dot^2 + 2 I(b) = 0`. States with `b_dot < 0` are safe
//! whenever `b <= 0`; states with `b_dot >= 0` are safe iff `M <= 0`.

use crate::error::{Error, Result};
use crate::first_order::{feasible_interval, FeasibleInterval, HalfSpaceConstraint};
use crate::model::{BarrierEvaluation, ConstraintOrder, ControlBounds};

pub use crate::model::EnvelopeFunction;

/// Default relative tolerance for the adaptive quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
/// Absolute floor below which quadrature refinement stops.
pub const QUAD_ABS_FLOOR: f64 = 1e-14;
/// Default guard radius around `b = 0` where the reduced constraint's
/// slope term is singular.
pub const DEFAULT_B_FLOOR: f64 = 1e-6;
/// Default band (in barrier units) for safe-set classification.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-6;

/// Classification of a state against the nested safe sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafeSetLabel {
    /// Strictly inside the recursively feasible set.
    InteriorC2,
    /// On the boundary of the recursively feasible set.
    BoundaryC2,
    /// Satisfies the constraint now but cannot avoid violating it under
    /// any admissible control.
    OutsideC2WithinC1,
    /// Violates the constraint outright.
    OutsideC1,
}

impl SafeSetLabel {
    /// Safe means forward invariance of the constraint set is achievable.
    pub fn is_safe(&self) -> bool {
        matches!(self, SafeSetLabel::InteriorC2 | SafeSetLabel::BoundaryC2)
    }
}

/// Configuration for the optimal barrier constructions.
#[derive(Debug, Clone)]
pub struct OptimalCbfConfig {
    pub envelope: EnvelopeFunction,
    /// Slope of the linear enforcement of the reduced first-order
    /// constraint; larger tracks the optimal barrier more tightly.
    pub c1: f64,
    /// Singularity guard radius around `b = 0`.
    pub b_floor: f64,
    /// Relative tolerance for the line-integral quadrature.
    pub quad_tol: f64,
}

impl OptimalCbfConfig {
    pub fn new(envelope: EnvelopeFunction, c1: f64) -> Result<Self> {
        if !(c1 > 0.0) || !c1.is_finite() {
            return Err(Error::NonPositiveParameter {
                name: "c1",
                value: c1,
            });
        }
        Ok(Self {
            envelope,
            c1,
            b_floor: DEFAULT_B_FLOOR,
            quad_tol: DEFAULT_QUAD_TOL,
        })
    }

    pub fn with_b_floor(mut self, b_floor: f64) -> Result<Self> {
        if !(b_floor > 0.0) {
            return Err(Error::NonPositiveParameter {
                name: "b_floor",
                value: b_floor,
            });
        }
        self.b_floor = b_floor;
        Ok(self)
    }

    pub fn with_quad_tol(mut self, quad_tol: f64) -> Result<Self> {
        if !(quad_tol > 0.0) {
            return Err(Error::NonPositiveParameter {
                name: "quad_tol",
                value: quad_tol,
            });
        }
        self.quad_tol = quad_tol;
        Ok(self)
    }
}

/// Shortest line integral `I(b) =` integral of the envelope from `b` to 0.
///
/// Nonpositive for every `b <= 0` because the integrand is negative and the
/// range runs upward. Constant envelopes are integrated in closed form;
/// general envelopes go through adaptive Simpson quadrature at
/// [`DEFAULT_QUAD_TOL`].
pub fn shortest_line_integral(envelope: &EnvelopeFunction, b: f64) -> Result<f64> {
    shortest_line_integral_with_tol(envelope, b, DEFAULT_QUAD_TOL)
}

/// [`shortest_line_integral`] with an explicit quadrature tolerance.
pub fn shortest_line_integral_with_tol(
    envelope: &EnvelopeFunction,
    b: f64,
    rel_tol: f64,
) -> Result<f64> {
    if b > 0.0 {
        return Err(Error::PositiveBarrier { b });
    }
    if b == 0.0 {
        return Ok(0.0);
    }
    if let Some(c) = envelope.constant_value() {
        if c > 0.0 {
            return Err(Error::EnvelopeViolation { b, value: c });
        }
        return Ok(-c * b);
    }
    adaptive_simpson(envelope, b, 0.0, rel_tol)
}

/// The class-K-infinity gain induced by the line integral:
/// `alpha(b) = sqrt(-2 I(b))`, zero at zero and strictly increasing in
/// `-b`. For a constant envelope `-u_max` this is `sqrt(-2 u_max b)`.
pub fn alpha(envelope: &EnvelopeFunction, b: f64) -> Result<f64> {
    alpha_with_tol(envelope, b, DEFAULT_QUAD_TOL)
}

pub fn alpha_with_tol(envelope: &EnvelopeFunction, b: f64, rel_tol: f64) -> Result<f64> {
    let integral = shortest_line_integral_with_tol(envelope, b, rel_tol)?;
    Ok((-2.0 * integral).max(0.0).sqrt())
}

/// Derivative `d alpha / d b = envelope(b) / alpha(b)`, a negative
/// quantity; for the constant `-u_max` envelope this is
/// `-u_max / sqrt(-2 u_max b)`.
///
/// Blows up as `b -> 0`; callers inside the guard band must use the
/// boundary branch of [`switching_control`] instead.
pub fn alpha_slope(envelope: &EnvelopeFunction, b: f64, b_floor: f64) -> Result<f64> {
    alpha_slope_with_tol(envelope, b, b_floor, DEFAULT_QUAD_TOL)
}

pub fn alpha_slope_with_tol(
    envelope: &EnvelopeFunction,
    b: f64,
    b_floor: f64,
    rel_tol: f64,
) -> Result<f64> {
    if b > 0.0 {
        return Err(Error::PositiveBarrier { b });
    }
    if b.abs() < b_floor {
        return Err(Error::SingularityGuard {
            b_abs: b.abs(),
            floor: b_floor,
        });
    }
    let value = envelope.value(b);
    if value > 0.0 {
        return Err(Error::EnvelopeViolation { b, value });
    }
    let a = alpha_with_tol(envelope, b, rel_tol)?;
    Ok(value / a)
}

/// Stopping-manifold value `M = b_dot^2 + 2 I(b)`; for a constant
/// `-u_max` envelope, `M = b_dot^2 + 2 u_max b`.
pub fn stopping_margin(envelope: &EnvelopeFunction, b: f64, bdot: f64) -> Result<f64> {
    let integral = shortest_line_integral(envelope, b.min(0.0))?;
    Ok(bdot * bdot + 2.0 * integral)
}

/// Classify a state against the nested safe sets.
///
/// With `b_dot < 0` the constraint value is currently decreasing, so
/// membership reduces to the sign of `b`. With `b_dot >= 0` membership is
/// decided by the stopping margin `M`.
pub fn classify_c2(
    eval: &BarrierEvaluation,
    envelope: &EnvelopeFunction,
    tol: f64,
) -> Result<SafeSetLabel> {
    let b = eval.b;
    let bdot = eval.bdot_drift;
    if bdot < 0.0 {
        return Ok(if b < -tol {
            SafeSetLabel::InteriorC2
        } else if b <= tol {
            SafeSetLabel::BoundaryC2
        } else {
            SafeSetLabel::OutsideC1
        });
    }
    if b > tol {
        // I(b) would be positive for b > 0, so M > 0 regardless.
        return Ok(SafeSetLabel::OutsideC1);
    }
    let m = stopping_margin(envelope, b, bdot)?;
    Ok(if m < -tol {
        SafeSetLabel::InteriorC2
    } else if m <= tol {
        SafeSetLabel::BoundaryC2
    } else if b <= 0.0 {
        SafeSetLabel::OutsideC2WithinC1
    } else {
        SafeSetLabel::OutsideC1
    })
}

/// Reduce the square-root barrier to a half-space on the control.
///
/// The first-order constraint `h = b_dot - alpha(b) <= 0` enforced with
/// linear slope `c1` requires `h_dot <= -c1 h`, i.e.
///
/// `bddot_ctrl * u <= -c1 (b_dot - alpha(b)) + alpha'(b) b_dot - bddot_drift`.
///
/// On the stopping manifold (`b_dot = alpha(b)`) the right-hand side
/// degenerates to `envelope(b) - bddot_drift`: exactly the extremal
/// braking demanded there.
pub fn reduced_constraint(
    eval: &BarrierEvaluation,
    cfg: &OptimalCbfConfig,
) -> Result<HalfSpaceConstraint> {
    if eval.order != ConstraintOrder::Second {
        return Err(Error::OrderMismatch {
            expected: 2,
            actual: eval.order.as_u8(),
        });
    }
    if eval.b > -cfg.b_floor {
        if eval.b > 0.0 {
            return Err(Error::PositiveBarrier { b: eval.b });
        }
        return Err(Error::SingularityGuard {
            b_abs: eval.b.abs(),
            floor: cfg.b_floor,
        });
    }
    let second = eval.second_terms()?;
    if second.ctrl == 0.0 {
        return Err(Error::DegenerateConstraint);
    }
    let a = alpha_with_tol(&cfg.envelope, eval.b, cfg.quad_tol)?;
    let slope = alpha_slope_with_tol(&cfg.envelope, eval.b, cfg.b_floor, cfg.quad_tol)?;
    let bdot = eval.bdot_drift;
    let offset = -cfg.c1 * (bdot - a) + slope * bdot - second.drift;
    Ok(HalfSpaceConstraint::new(vec![second.ctrl], offset))
}

/// Optimal policy: clamp the nominal control inside the set, apply the
/// extremal braking primitive on its boundary (and inside the singularity
/// guard band while the constraint value is still rising).
pub fn switching_control(
    eval: &BarrierEvaluation,
    cfg: &OptimalCbfConfig,
    bounds: &ControlBounds,
    nominal_u: f64,
) -> Result<f64> {
    let second = eval.second_terms()?;
    let label = classify_c2(eval, &cfg.envelope, DEFAULT_CLASSIFY_TOL)?;
    match label {
        SafeSetLabel::OutsideC2WithinC1 | SafeSetLabel::OutsideC1 => {
            Err(Error::SafetyViolation { label })
        }
        SafeSetLabel::BoundaryC2 => Ok(braking_control(second.ctrl, bounds)),
        SafeSetLabel::InteriorC2 => {
            if eval.bdot_drift > 0.0 && eval.b > -cfg.b_floor {
                return Ok(braking_control(second.ctrl, bounds));
            }
            let constraints = if eval.bdot_drift > 0.0 {
                vec![reduced_constraint(eval, cfg)?]
            } else {
                Vec::new()
            };
            match feasible_interval(&constraints, bounds)? {
                FeasibleInterval::NonEmpty { lower, upper } => Ok(nominal_u.clamp(lower, upper)),
                FeasibleInterval::Empty => Err(Error::EmptyFeasibleInterval),
            }
        }
    }
}

/// The control minimizing `b_ddot`: `-sign(bddot_ctrl) * u_max`.
pub fn braking_control(bddot_ctrl: f64, bounds: &ControlBounds) -> f64 {
    -bddot_ctrl.signum() * bounds.u_max()
}

/// Adaptive Simpson quadrature of the envelope over `[a, b]`, rejecting
/// positive integrand values along the way.
fn adaptive_simpson(
    envelope: &EnvelopeFunction,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64> {
    let fa = envelope_value(envelope, a)?;
    let fm = envelope_value(envelope, 0.5 * (a + b))?;
    let fb = envelope_value(envelope, b)?;
    let whole = simpson(a, b, fa, fm, fb);
    let eps = (rel_tol * whole.abs()).max(QUAD_ABS_FLOOR);
    simpson_recurse(envelope, a, b, fa, fm, fb, whole, eps, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    envelope: &EnvelopeFunction,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = envelope_value(envelope, lm)?;
    let frm = envelope_value(envelope, rm)?;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return Ok(left + right + delta / 15.0);
    }
    let half_eps = 0.5 * eps;
    Ok(
        simpson_recurse(envelope, a, m, fa, flm, fm, left, half_eps, depth - 1)?
            + simpson_recurse(envelope, m, b, fm, frm, fb, right, half_eps, depth - 1)?,
    )
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn envelope_value(envelope: &EnvelopeFunction, b: f64) -> Result<f64> {
    let v = envelope.value(b);
    if v > 0.0 {
        return Err(Error::EnvelopeViolation { b, value: v });
    }
    if !v.is_finite() {
        return Err(Error::NonFiniteEvaluation {
            field: "envelope",
            value: v,
            t: b,
        });
    }
    Ok(v)
}
