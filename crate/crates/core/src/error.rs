use crate::second_order::SafeSetLabel;

/// Crate-wide error type.
///
/// Most operations are pure numerics; errors encode violated preconditions
/// (wrong constraint order, states outside the admissible region) or
/// ill-posed inputs (envelopes that break the sign assumption, empty
/// feasible intervals).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("evaluator produced non-finite {field} = {value} at t = {t}")]
    NonFiniteEvaluation {
        field: &'static str,
        value: f64,
        t: f64,
    },

    #[error("constraint order mismatch: operation requires order {expected}, barrier has order {actual}")]
    OrderMismatch { expected: u8, actual: u8 },

    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state lies outside the constraint set: b = {b} exceeds tolerance {tol}")]
    OutsideConstraintSet { b: f64, tol: f64 },

    #[error("barrier value must satisfy b <= 0, got b = {b}")]
    PositiveBarrier { b: f64 },

    #[error("second-derivative lower envelope is positive ({value}) at b = {b}")]
    EnvelopeViolation { b: f64, value: f64 },

    #[error("singularity guard: |b| = {b_abs:e} is below the floor {floor:e}; use the boundary branch")]
    SingularityGuard { b_abs: f64, floor: f64 },

    #[error("degenerate constraint: control coefficient of the second derivative is zero")]
    DegenerateConstraint,

    #[error("scalar control required, control dimension is {dim}")]
    ScalarControlRequired { dim: usize },

    #[error("state is outside the recursively feasible set ({label:?})")]
    SafetyViolation { label: SafeSetLabel },

    #[error("feasible control interval is empty")]
    EmptyFeasibleInterval,

    #[error("rollout horizon {horizon} s exhausted with b_dot = {bdot} still positive")]
    HorizonExhausted { horizon: f64, bdot: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("scenario configs differ in {field}; comparison requires identical physical parameters")]
    ConfigMismatch { field: &'static str },

    #[error("invalid scenario configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
