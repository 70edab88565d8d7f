//! Brute-force ground truth for the analytic constructions: extremal
//! braking rollouts, grid labeling of the safe set, sampled minimality of
//! the braking primitive, and finite-difference checks of the declared
//! derivative decomposition.
//!
//! Everything here integrates the actual dynamics with explicit Euler and
//! never consults the closed-form geometry it is used to verify.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{eval_barrier, BarrierSpec, ControlBounds, EnvelopeFunction};
use crate::second_order::{classify_c2, SafeSetLabel, DEFAULT_CLASSIFY_TOL};

/// Fixed-step rollout configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutConfig {
    /// Integration step.
    pub dt: f64,
    /// Maximum rollout duration.
    pub horizon: f64,
    /// Stop early once the barrier exceeds this value (the state is
    /// already conclusively unsafe).
    pub violation_threshold: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            horizon: 10.0,
            violation_threshold: 1e3,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::NonPositiveParameter {
                name: "dt",
                value: self.dt,
            });
        }
        if !(self.horizon > 0.0) {
            return Err(Error::NonPositiveParameter {
                name: "horizon",
                value: self.horizon,
            });
        }
        Ok(())
    }
}

/// Outcome of one extremal braking rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOutcome {
    /// Peak barrier value along the trajectory.
    pub max_b: f64,
    /// Barrier rate at the stopping sample.
    pub terminal_bdot: f64,
    /// Time of the stopping sample.
    pub terminal_t: f64,
    pub steps: usize,
}

/// Integrate the dynamics under the extremal braking control
/// `u = -sign(bddot_ctrl) * u_max` until the barrier rate drops to zero,
/// the barrier passes the violation threshold, or the horizon runs out.
///
/// Scalar control only. Errors if the horizon is exhausted while the rate
/// is still positive (the control-authority assumption precludes this).
pub fn full_braking_rollout(
    spec: &BarrierSpec,
    bounds: &ControlBounds,
    state: &[f64],
    t0: f64,
    cfg: &RolloutConfig,
) -> Result<RolloutOutcome> {
    cfg.validate()?;
    let n_u = spec.dynamics().control_dim();
    if n_u != 1 {
        return Err(Error::ScalarControlRequired { dim: n_u });
    }

    let mut x = state.to_vec();
    let mut scratch = spec.dynamics().scratch();
    let mut t = t0;
    let mut max_b = f64::NEG_INFINITY;
    let mut steps = 0usize;
    let max_steps = (cfg.horizon / cfg.dt).ceil() as usize;

    loop {
        let b = spec.barrier(&x, t);
        let bdot = spec.bdot_drift(&x, t);
        if !b.is_finite() || !bdot.is_finite() {
            return Err(Error::NonFiniteState { t });
        }
        max_b = max_b.max(b);
        if bdot <= 0.0 || b > cfg.violation_threshold {
            return Ok(RolloutOutcome {
                max_b,
                terminal_bdot: bdot,
                terminal_t: t,
                steps,
            });
        }
        if steps >= max_steps {
            return Err(Error::HorizonExhausted {
                horizon: cfg.horizon,
                bdot,
            });
        }
        let u = [-spec.bddot_ctrl(&x, t)?.signum() * bounds.u_max()];
        spec.dynamics().euler_step(&mut x, &u, cfg.dt, &mut scratch);
        t += cfg.dt;
        steps += 1;
    }
}

/// Rectangular grid in the `(b, b_dot)` phase plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub b_range: (f64, f64),
    pub bdot_range: (f64, f64),
    pub b_count: usize,
    pub bdot_count: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.b_count < 2 || self.bdot_count < 2 {
            return Err(Error::InvalidParameter {
                name: "grid counts",
                reason: "need at least 2 samples per axis".into(),
            });
        }
        if !(self.b_range.0 < self.b_range.1) || !(self.bdot_range.0 < self.bdot_range.1) {
            return Err(Error::InvalidParameter {
                name: "grid ranges",
                reason: "ranges must be nonempty".into(),
            });
        }
        Ok(())
    }

    fn b_at(&self, i: usize) -> f64 {
        lerp(self.b_range, i, self.b_count)
    }

    fn bdot_at(&self, j: usize) -> f64 {
        lerp(self.bdot_range, j, self.bdot_count)
    }
}

fn lerp(range: (f64, f64), i: usize, count: usize) -> f64 {
    range.0 + (range.1 - range.0) * i as f64 / (count - 1) as f64
}

/// One labeled grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub b: f64,
    pub bdot: f64,
    /// Stopping-manifold value at the cell.
    pub margin: f64,
    pub label: SafeSetLabel,
    pub classified_safe: bool,
    /// Peak barrier from the braking rollout; `None` when the rollout
    /// errored (recorded, not fatal).
    pub rollout_peak: Option<f64>,
    pub rollout_safe: Option<bool>,
    pub error: Option<String>,
}

impl GridCell {
    pub fn agrees(&self) -> bool {
        self.rollout_safe == Some(self.classified_safe)
    }
}

/// Agreement statistics between the analytic classifier and the rollout
/// labels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GridAgreement {
    pub total: usize,
    pub agreements: usize,
    pub disagreements: usize,
    pub errors: usize,
    /// Largest |margin| over disagreeing cells.
    pub max_abs_margin_disagreement: f64,
}

impl GridAgreement {
    pub fn agreement_fraction(&self) -> f64 {
        if self.total == 0 {
            return 1.0;
        }
        self.agreements as f64 / self.total as f64
    }
}

/// Full grid report.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub cells: Vec<GridCell>,
    pub agreement: GridAgreement,
    /// Rollout tolerance used to call a peak "safe".
    pub safe_tol: f64,
}

impl GridReport {
    /// Serialize as CSV: coordinates, both labels, margin, rollout peak.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("b,b_dot,margin,label,classified_safe,rollout_peak,rollout_safe,agree\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{:?},{},{},{},{}",
                fmt_sig(c.b),
                fmt_sig(c.bdot),
                fmt_sig(c.margin),
                c.label,
                c.classified_safe,
                c.rollout_peak.map_or("error".into(), fmt_sig),
                c.rollout_safe.map_or("error".into(), |s| s.to_string()),
                c.agrees(),
            );
        }
        out
    }
}

fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}

/// Label every grid cell twice: by the analytic classifier and by an
/// extremal braking rollout. A cell counts rollout-safe when its peak
/// stays below `10 u_max dt` (the first-order integrator's ride error is
/// a few times smaller).
///
/// `to_state` maps phase-plane coordinates `(b, b_dot)` to a state at `t0`.
pub fn grid_safe_set(
    spec: &BarrierSpec,
    bounds: &ControlBounds,
    envelope: &EnvelopeFunction,
    grid: &GridSpec,
    to_state: &dyn Fn(f64, f64) -> Vec<f64>,
    t0: f64,
    cfg: &RolloutConfig,
) -> Result<GridReport> {
    grid.validate()?;
    cfg.validate()?;
    let safe_tol = 10.0 * bounds.u_max() * cfg.dt;

    let mut cells = Vec::with_capacity(grid.b_count * grid.bdot_count);
    let mut agreement = GridAgreement::default();

    for i in 0..grid.b_count {
        for j in 0..grid.bdot_count {
            let b = grid.b_at(i);
            let bdot = grid.bdot_at(j);
            let state = to_state(b, bdot);

            let eval = eval_barrier(spec, &state, t0)?;
            let label = classify_c2(&eval, envelope, DEFAULT_CLASSIFY_TOL)?;
            let margin = crate::second_order::stopping_margin(envelope, eval.b, eval.bdot_drift)?;
            let classified_safe = label.is_safe();

            let (rollout_peak, rollout_safe, error) =
                match full_braking_rollout(spec, bounds, &state, t0, cfg) {
                    Ok(outcome) => (
                        Some(outcome.max_b),
                        Some(outcome.max_b <= safe_tol),
                        None,
                    ),
                    Err(e) => (None, None, Some(e.to_string())),
                };

            agreement.total += 1;
            match rollout_safe {
                Some(safe) if safe == classified_safe => agreement.agreements += 1,
                Some(_) => {
                    agreement.disagreements += 1;
                    agreement.max_abs_margin_disagreement =
                        agreement.max_abs_margin_disagreement.max(margin.abs());
                }
                None => agreement.errors += 1,
            }

            cells.push(GridCell {
                b,
                bdot,
                margin,
                label,
                classified_safe,
                rollout_peak,
                rollout_safe,
                error,
            });
        }
    }

    Ok(GridReport {
        cells,
        agreement,
        safe_tol,
    })
}

/// Number of constant segments in a random control profile.
pub const PROFILE_SEGMENTS: usize = 10;

/// Result of the sampled-minimality experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimalityReport {
    /// Peak barrier of the extremal braking rollout.
    pub braking_peak: f64,
    /// Peak barrier of every sampled profile.
    pub profile_peaks: Vec<f64>,
    /// `braking_peak <= min(profile peaks) + tolerance`.
    pub holds: bool,
    /// Worst margin `braking_peak - profile_peak` (negative is good).
    pub worst_margin: f64,
    pub tolerance: f64,
    pub seed: u64,
}

/// Roll out `n_profiles` random admissible piecewise-constant control
/// profiles from `state` and check that the extremal braking rollout's
/// peak barrier value is minimal among them (up to a `10 dt` tolerance).
///
/// Profiles split the horizon into [`PROFILE_SEGMENTS`] constant segments
/// with values uniform in `[-u_max, u_max]`; the seed is recorded in the
/// report for reproducibility.
pub fn sample_profile_minimality(
    spec: &BarrierSpec,
    bounds: &ControlBounds,
    state: &[f64],
    t0: f64,
    n_profiles: usize,
    cfg: &RolloutConfig,
    seed: u64,
) -> Result<MinimalityReport> {
    cfg.validate()?;
    if spec.bdot_drift(state, t0) <= 0.0 {
        return Err(Error::Precondition(
            "minimality sampling requires b_dot > 0 at the initial state".into(),
        ));
    }
    let braking = full_braking_rollout(spec, bounds, state, t0, cfg)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tolerance = 10.0 * cfg.dt;
    let mut profile_peaks = Vec::with_capacity(n_profiles);
    let mut worst_margin = f64::NEG_INFINITY;
    let mut holds = true;

    let mut profile = [0.0f64; PROFILE_SEGMENTS];
    for _ in 0..n_profiles {
        for seg in profile.iter_mut() {
            *seg = rng.gen_range(-bounds.u_max()..=bounds.u_max());
        }
        let peak = profile_rollout(spec, state, t0, &profile, cfg)?;
        let margin = braking.max_b - peak;
        worst_margin = worst_margin.max(margin);
        if margin > tolerance {
            holds = false;
        }
        profile_peaks.push(peak);
    }
    if n_profiles == 0 {
        worst_margin = f64::NEG_INFINITY;
    }

    Ok(MinimalityReport {
        braking_peak: braking.max_b,
        profile_peaks,
        holds,
        worst_margin,
        tolerance,
        seed,
    })
}

/// Peak barrier value along a piecewise-constant profile, rolled out until
/// the barrier rate drops to zero or the horizon ends.
fn profile_rollout(
    spec: &BarrierSpec,
    state: &[f64],
    t0: f64,
    profile: &[f64],
    cfg: &RolloutConfig,
) -> Result<f64> {
    let mut x = state.to_vec();
    let mut scratch = spec.dynamics().scratch();
    let mut t = t0;
    let mut max_b = f64::NEG_INFINITY;
    let max_steps = (cfg.horizon / cfg.dt).ceil() as usize;
    let seg_len = cfg.horizon / profile.len() as f64;

    for step in 0..=max_steps {
        let b = spec.barrier(&x, t);
        let bdot = spec.bdot_drift(&x, t);
        if !b.is_finite() || !bdot.is_finite() {
            return Err(Error::NonFiniteState { t });
        }
        max_b = max_b.max(b);
        if bdot <= 0.0 || step == max_steps {
            break;
        }
        let seg = (((t - t0) / seg_len).floor() as usize).min(profile.len() - 1);
        let u = [profile[seg]];
        spec.dynamics().euler_step(&mut x, &u, cfg.dt, &mut scratch);
        t += cfg.dt;
    }
    Ok(max_b)
}

/// Finite-difference check of the declared decomposition at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDifferenceReport {
    pub fd_first: f64,
    pub analytic_first: f64,
    pub first_rel_err: f64,
    pub fd_second: Option<f64>,
    pub analytic_second: Option<f64>,
    pub second_rel_err: Option<f64>,
}

/// Compare `(b(t+h) - b(t)) / h` against the declared `b_dot` and the
/// central second difference against the declared `b_ddot`, along the true
/// flow under constant scalar control `u`.
pub fn finite_difference_check(
    spec: &BarrierSpec,
    state: &[f64],
    t: f64,
    u: f64,
    h: f64,
) -> Result<FiniteDifferenceReport> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::NonPositiveParameter { name: "h", value: h });
    }
    if spec.dynamics().control_dim() != 1 {
        return Err(Error::ScalarControlRequired {
            dim: spec.dynamics().control_dim(),
        });
    }
    let control = [u];
    let mut rk4 = spec.dynamics().rk4_scratch();

    let mut x_fwd = state.to_vec();
    spec.dynamics().rk4_step(&mut x_fwd, &control, h, &mut rk4);
    let mut x_bwd = state.to_vec();
    spec.dynamics().rk4_step(&mut x_bwd, &control, -h, &mut rk4);

    let eval = eval_barrier(spec, state, t)?;
    let b0 = eval.b;
    let b_fwd = spec.barrier(&x_fwd, t + h);
    let b_bwd = spec.barrier(&x_bwd, t - h);

    let fd_first = (b_fwd - b0) / h;
    let analytic_first = eval.bdot(&control);
    let first_rel_err = rel_err(fd_first, analytic_first);

    let (fd_second, analytic_second, second_rel_err) = match eval.second {
        Some(terms) => {
            let fd = (b_fwd - 2.0 * b0 + b_bwd) / (h * h);
            let analytic = terms.drift + terms.ctrl * u;
            (Some(fd), Some(analytic), Some(rel_err(fd, analytic)))
        }
        None => (None, None, None),
    };

    Ok(FiniteDifferenceReport {
        fd_first,
        analytic_first,
        first_rel_err,
        fd_second,
        analytic_second,
        second_rel_err,
    })
}

fn rel_err(measured: f64, reference: f64) -> f64 {
    (measured - reference).abs() / reference.abs().max(1.0)
}
