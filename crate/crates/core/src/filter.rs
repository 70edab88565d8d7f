//! Scalar quadratic-program safety filter.
//!
//! The tracking objective `(v + u dt - v_star)^2` over an interval of
//! admissible accelerations has the closed-form minimizer
//! `clamp((v_star - v) / dt, lower, upper)`. A generic interval QP over
//! `a u^2 + b_lin u` ships alongside purely as a testing oracle.

use crate::error::{Error, Result};

/// One filter instance: current speed, target speed, step, and the
/// admissible control interval (control bounds intersected with the
/// active barrier half-space; `lower` is the `-u_max` bound).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSetup {
    pub v: f64,
    pub v_star: f64,
    pub dt: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Outcome of one filter solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterResult {
    pub u_applied: f64,
    /// The barrier half-space was the binding upper end.
    pub cbf_active: bool,
    /// A control bound was binding.
    pub saturated: bool,
    /// The interval was empty; `u_applied` is the maximal-braking fallback.
    pub infeasible: bool,
}

/// Minimize `(v + u dt - v_star)^2` over `[lower, upper]`.
///
/// An empty interval cannot arise from inside the recursively feasible set
/// under exact arithmetic and a correct exogenous model, so it is flagged
/// rather than fatal: the filter falls back to maximal braking and the
/// caller records the event.
pub fn solve_acc_qp(setup: QpSetup) -> Result<FilterResult> {
    if !(setup.dt > 0.0) || !setup.dt.is_finite() {
        return Err(Error::NonPositiveParameter {
            name: "dt",
            value: setup.dt,
        });
    }
    if !setup.lower.is_finite() {
        return Err(Error::InvalidParameter {
            name: "lower",
            reason: format!("must be finite, got {}", setup.lower),
        });
    }
    if setup.upper.is_nan() || setup.upper == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter {
            name: "upper",
            reason: format!("must be finite or +inf, got {}", setup.upper),
        });
    }

    if setup.upper < setup.lower {
        return Ok(FilterResult {
            u_applied: setup.lower,
            cbf_active: false,
            saturated: false,
            infeasible: true,
        });
    }

    let unconstrained = (setup.v_star - setup.v) / setup.dt;
    let u = unconstrained.clamp(setup.lower, setup.upper);

    // `lower` is -u_max by construction, so an upper end strictly below
    // +u_max can only come from the barrier half-space.
    let u_max = -setup.lower;
    let cbf_active = u == setup.upper && setup.upper < u_max;
    let saturated = u == setup.lower || (u == setup.upper && setup.upper == u_max);

    Ok(FilterResult {
        u_applied: u,
        cbf_active,
        saturated,
        infeasible: false,
    })
}

/// Minimize `a u^2 + b_lin u` over `[lower, upper]` (testing oracle for
/// [`solve_acc_qp`]; requires strict convexity).
pub fn solve_generic_scalar_qp(a: f64, b_lin: f64, lower: f64, upper: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::NonPositiveParameter { name: "a", value: a });
    }
    if lower > upper {
        return Err(Error::EmptyFeasibleInterval);
    }
    Ok((-b_lin / (2.0 * a)).clamp(lower, upper))
}
