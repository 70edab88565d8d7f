//! Order-1 barrier constructions: the feasibility-maximizing zeroing
//! barrier, the linear barrier approximation, the slope that brings the
//! linear barrier within any tolerance of the optimal one, and scalar
//! feasible-interval arithmetic.
//!
//! Every construction produces a [`HalfSpaceConstraint`] on the control,
//! the common currency of the whole crate.

use crate::error::{Error, Result};
use crate::model::{
    eval_barrier, extremal_rate, BarrierEvaluation, BarrierSpec, ConstraintOrder, ControlBounds,
    Extremum,
};

/// Linear inequality `normal . u <= offset` on the control.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceConstraint {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl HalfSpaceConstraint {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    /// A zero normal with a negative offset can never be satisfied.
    pub fn is_infeasible(&self) -> bool {
        self.normal.iter().all(|&a| a == 0.0) && self.offset < 0.0
    }

    pub fn satisfied_by(&self, u: &[f64]) -> bool {
        let lhs: f64 = self.normal.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
        lhs <= self.offset
    }
}

/// Band around `b = 0` inside which a state counts as on-boundary.
///
/// The set boundary is exact mathematics; floating point needs a strictly
/// positive band far below scenario length scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTolerance {
    tol_b: f64,
}

impl BoundaryTolerance {
    pub fn new(tol_b: f64) -> Result<Self> {
        if !(tol_b > 0.0) || !tol_b.is_finite() {
            return Err(Error::NonPositiveParameter {
                name: "tol_b",
                value: tol_b,
            });
        }
        Ok(Self { tol_b })
    }

    /// Band for analytic checks.
    pub fn analytic() -> Self {
        Self { tol_b: 1e-9 }
    }

    /// Wider band for use inside discrete-time simulations.
    pub fn simulation() -> Self {
        Self { tol_b: 1e-6 }
    }

    pub fn value(&self) -> f64 {
        self.tol_b
    }
}

impl Default for BoundaryTolerance {
    fn default() -> Self {
        Self::analytic()
    }
}

/// The zeroing barrier that maximizes the feasible action space.
///
/// Interior (`b < -tol`): `lg_b . u <= ||lg_b|| u_max`, which admits every
/// control in the norm ball. Boundary (`|b| <= tol`): `lg_b . u <= -lf_b`,
/// which pins `b_dot <= 0`.
pub fn optimal_zbf(
    eval: &BarrierEvaluation,
    bounds: &ControlBounds,
    tol: BoundaryTolerance,
) -> Result<HalfSpaceConstraint> {
    require_first_order(eval)?;
    if eval.b > tol.value() {
        return Err(Error::OutsideConstraintSet {
            b: eval.b,
            tol: tol.value(),
        });
    }
    let offset = if eval.b < -tol.value() {
        eval.bdot_ctrl_norm() * bounds.u_max()
    } else {
        -eval.bdot_drift
    };
    Ok(HalfSpaceConstraint::new(eval.bdot_ctrl.clone(), offset))
}

/// Linear barrier constraint `lg_b . u <= -c1 b - lf_b`.
pub fn linear_cbf(eval: &BarrierEvaluation, c1: f64) -> Result<HalfSpaceConstraint> {
    require_first_order(eval)?;
    if !(c1 > 0.0) || !c1.is_finite() {
        return Err(Error::NonPositiveParameter {
            name: "c1",
            value: c1,
        });
    }
    Ok(HalfSpaceConstraint::new(
        eval.bdot_ctrl.clone(),
        -c1 * eval.b - eval.bdot_drift,
    ))
}

/// Slope estimate for the linear barrier, with a notice when the
/// constraint can never bind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeEstimate {
    pub c1: f64,
    /// True when every sampled state had `max b_dot <= 0`: the constraint
    /// rate can never become positive, so no slope is needed.
    pub non_binding: bool,
}

/// Slope `c1 = (1/eps) max over samples of max_u b_dot` that makes the
/// linear barrier non-binding relative to the optimal one whenever
/// `b <= -eps` at the sampled states.
pub fn linear_cbf_slope(
    spec: &BarrierSpec,
    bounds: &ControlBounds,
    eps: f64,
    samples: &[(Vec<f64>, f64)],
) -> Result<SlopeEstimate> {
    if spec.order() != ConstraintOrder::First {
        return Err(Error::OrderMismatch {
            expected: 1,
            actual: spec.order().as_u8(),
        });
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::NonPositiveParameter {
            name: "eps",
            value: eps,
        });
    }
    if samples.is_empty() {
        return Err(Error::Precondition("sample list must be nonempty".into()));
    }
    let mut max_rate = f64::NEG_INFINITY;
    for (x, t) in samples {
        let eval = eval_barrier(spec, x, *t)?;
        let rate = extremal_rate(&eval, bounds, Extremum::Max, ConstraintOrder::First)?;
        max_rate = max_rate.max(rate);
    }
    if max_rate <= 0.0 {
        Ok(SlopeEstimate {
            c1: 0.0,
            non_binding: true,
        })
    } else {
        Ok(SlopeEstimate {
            c1: max_rate / eps,
            non_binding: false,
        })
    }
}

/// Intersection of `[-u_max, u_max]` with a set of half-space constraints
/// on a scalar control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeasibleInterval {
    NonEmpty { lower: f64, upper: f64 },
    Empty,
}

impl FeasibleInterval {
    pub fn is_empty(&self) -> bool {
        matches!(self, FeasibleInterval::Empty)
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            FeasibleInterval::NonEmpty { lower, upper } => Some((lower, upper)),
            FeasibleInterval::Empty => None,
        }
    }

    /// Clamp a scalar into the interval; `None` when empty.
    pub fn clamp(&self, u: f64) -> Option<f64> {
        self.bounds().map(|(lo, hi)| u.clamp(lo, hi))
    }
}

/// Intersect the control bounds with every half-space (scalar control).
///
/// Constraints are normalized by the sign of their normal; a zero normal
/// with negative offset flags the result empty.
pub fn feasible_interval(
    constraints: &[HalfSpaceConstraint],
    bounds: &ControlBounds,
) -> Result<FeasibleInterval> {
    let mut lower = -bounds.u_max();
    let mut upper = bounds.u_max();
    for c in constraints {
        if c.normal.len() != 1 {
            return Err(Error::ScalarControlRequired {
                dim: c.normal.len(),
            });
        }
        let a = c.normal[0];
        if a == 0.0 {
            if c.offset < 0.0 {
                return Ok(FeasibleInterval::Empty);
            }
            continue;
        }
        let bound = c.offset / a;
        if a > 0.0 {
            upper = upper.min(bound);
        } else {
            lower = lower.max(bound);
        }
    }
    if lower > upper {
        Ok(FeasibleInterval::Empty)
    } else {
        Ok(FeasibleInterval::NonEmpty { lower, upper })
    }
}

fn require_first_order(eval: &BarrierEvaluation) -> Result<()> {
    if eval.order != ConstraintOrder::First {
        return Err(Error::OrderMismatch {
            expected: 1,
            actual: eval.order.as_u8(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(b: f64, lf: f64, lg: Vec<f64>) -> BarrierEvaluation {
        BarrierEvaluation {
            order: ConstraintOrder::First,
            b,
            bdot_drift: lf,
            bdot_ctrl: lg,
            second: None,
        }
    }

    fn bounds5() -> ControlBounds {
        ControlBounds::new(5.0).unwrap()
    }

    #[test]
    fn zbf_interior_admits_full_ball() {
        let c = optimal_zbf(&eval(-2.0, 3.0, vec![1.0]), &bounds5(), Default::default()).unwrap();
        assert_eq!(c.normal, vec![1.0]);
        assert_eq!(c.offset, 5.0);
    }

    #[test]
    fn zbf_boundary_pins_rate() {
        let c = optimal_zbf(&eval(0.0, 3.0, vec![1.0]), &bounds5(), Default::default()).unwrap();
        assert_eq!(c.offset, -3.0);
    }

    #[test]
    fn zbf_zero_row_is_trivial() {
        let c = optimal_zbf(&eval(-1.0, 3.0, vec![0.0]), &bounds5(), Default::default()).unwrap();
        assert_eq!(c.normal, vec![0.0]);
        assert_eq!(c.offset, 0.0);
        assert!(!c.is_infeasible());
    }

    #[test]
    fn zbf_vector_control_uses_the_gain_norm() {
        let c = optimal_zbf(
            &eval(-2.0, 1.0, vec![3.0, 4.0]),
            &bounds5(),
            Default::default(),
        )
        .unwrap();
        // ||(3, 4)|| = 5, so the interior offset is 25
        assert_eq!(c.offset, 25.0);
        // the norm-ball extremum u = u_max * normal/||normal|| attains it
        assert!(c.satisfied_by(&[3.0, 4.0]));
        assert!(!c.satisfied_by(&[3.1, 4.1]));
    }

    #[test]
    fn zbf_rejects_states_outside_the_set() {
        let err =
            optimal_zbf(&eval(0.5, 3.0, vec![1.0]), &bounds5(), Default::default()).unwrap_err();
        assert!(matches!(err, Error::OutsideConstraintSet { .. }));
    }

    #[test]
    fn linear_cbf_offsets() {
        let c = linear_cbf(&eval(-2.0, 3.0, vec![1.0]), 10.0).unwrap();
        assert_eq!(c.offset, 17.0);
        let c = linear_cbf(&eval(0.0, 3.0, vec![1.0]), 10.0).unwrap();
        assert_eq!(c.offset, -3.0);
        let c = linear_cbf(&eval(-0.1, 3.0, vec![1.0]), 80.0).unwrap();
        assert!((c.offset - 5.0).abs() < 1e-12);
    }

    #[test]
    fn linear_cbf_rejects_bad_slope() {
        assert!(linear_cbf(&eval(-1.0, 0.0, vec![1.0]), 0.0).is_err());
        assert!(linear_cbf(&eval(-1.0, 0.0, vec![1.0]), -3.0).is_err());
    }

    #[test]
    fn intervals() {
        let b = bounds5();
        let i = feasible_interval(&[HalfSpaceConstraint::new(vec![1.0], 5.0)], &b).unwrap();
        assert_eq!(i.bounds(), Some((-5.0, 5.0)));
        let i = feasible_interval(&[HalfSpaceConstraint::new(vec![1.0], -3.0)], &b).unwrap();
        assert_eq!(i.bounds(), Some((-5.0, -3.0)));
        let i = feasible_interval(&[HalfSpaceConstraint::new(vec![1.0], -6.0)], &b).unwrap();
        assert!(i.is_empty());
    }

    #[test]
    fn interval_normalizes_negative_normals() {
        let b = bounds5();
        // -2 u <= 4  =>  u >= -2
        let i = feasible_interval(&[HalfSpaceConstraint::new(vec![-2.0], 4.0)], &b).unwrap();
        assert_eq!(i.bounds(), Some((-2.0, 5.0)));
    }

    #[test]
    fn interval_intersects_several_constraints() {
        let b = bounds5();
        let constraints = [
            HalfSpaceConstraint::new(vec![1.0], 2.0),   // u <= 2
            HalfSpaceConstraint::new(vec![-1.0], 1.0),  // u >= -1
            HalfSpaceConstraint::new(vec![2.0], 8.0),   // u <= 4 (slack)
        ];
        let i = feasible_interval(&constraints, &b).unwrap();
        assert_eq!(i.bounds(), Some((-1.0, 2.0)));
        assert_eq!(i.clamp(10.0), Some(2.0));
        assert_eq!(i.clamp(-10.0), Some(-1.0));
    }

    #[test]
    fn interval_flags_zero_normal_negative_offset() {
        let b = bounds5();
        let i = feasible_interval(&[HalfSpaceConstraint::new(vec![0.0], -1.0)], &b).unwrap();
        assert!(i.is_empty());
    }

    #[test]
    fn interval_requires_scalar_control() {
        let b = bounds5();
        let err = feasible_interval(&[HalfSpaceConstraint::new(vec![1.0, 0.0], 1.0)], &b);
        assert!(matches!(
            err.unwrap_err(),
            Error::ScalarControlRequired { dim: 2 }
        ));
    }

    fn drifting_first_order_spec(lf: f64) -> BarrierSpec {
        use crate::model::ControlAffineDynamics;
        let dynamics = ControlAffineDynamics::new(
            1,
            1,
            |_, out| out[0] = 0.0,
            |_, out| out[0] = 1.0,
        );
        BarrierSpec::first_order(
            dynamics,
            move |x, _| x[0],
            move |_, _| lf,
            |_, _| vec![1.0],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn slope_scales_inversely_with_eps() {
        let spec = drifting_first_order_spec(3.0);
        let samples = vec![(vec![-0.05], 0.0), (vec![-0.02], 0.0)];
        let s = linear_cbf_slope(&spec, &bounds5(), 0.1, &samples).unwrap();
        assert!((s.c1 - 80.0).abs() < 1e-9);
        assert!(!s.non_binding);
        let s = linear_cbf_slope(&spec, &bounds5(), 1.0, &samples).unwrap();
        assert!((s.c1 - 8.0).abs() < 1e-9);
    }

    #[test]
    fn slope_notices_never_binding_constraints() {
        let spec = drifting_first_order_spec(-10.0);
        let samples = vec![(vec![-0.05], 0.0)];
        let s = linear_cbf_slope(&spec, &bounds5(), 0.1, &samples).unwrap();
        assert_eq!(s.c1, 0.0);
        assert!(s.non_binding);
    }
}
