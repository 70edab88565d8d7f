//! Barrier-function safety filtering under control bounds.
//!
//! The crate constructs the feasibility-maximizing barrier for first- and
//! second-order constraints, classifies the recursively feasible safe set,
//! filters controls through a closed-form tracking QP, and verifies every
//! analytic construction against brute-force rollout oracles.
//!
//! Module map:
//! - [`model`]: dynamics, constraint decompositions, exogenous signals.
//! - [`first_order`]: order-1 barrier half-spaces and interval arithmetic.
//! - [`second_order`]: line integral, safe-set geometry, the square-root
//!   barrier and its reduction, the switching policy.
//! - [`filter`]: the scalar tracking QP and its generic oracle.
//! - [`oracle`]: extremal braking rollouts, grid sweeps, sampled
//!   minimality, finite-difference checks.
//! - [`sim`]: the vehicle-following closed loop with CSV logs and metrics.
//! - [`verification`]: the executable pass/fail check suite.

// `!(x > 0.0)` rejects NaN where `x <= 0.0` would let it through; the
// positivity checks rely on that.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod filter;
pub mod first_order;
pub mod model;
pub mod oracle;
pub mod second_order;
pub mod sim;
pub mod verification;

pub use error::{Error, Result};
