//! Periodic ground states, level-0 gap detection, heteroclinic solves at
//! every level, gap probing and the rational lift.

mod assembly;
mod hetero;
mod periodic;
mod probe;

pub use hetero::{force_gap, linear_guess, recenter, solve_hetero, solve_window, translate_pair, Direction, WindowSolve};
pub use periodic::{detect_gaps0, lift_alpha, minimize_periodic, unlift_alpha, GapDetection};
pub use probe::{gap_probe, GapReport, ProbeOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::optimize::StepRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Sup-norm threshold on the projected gradient.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Half-widths of the heteroclinic windows, increasing.
    pub window_schedule: Vec<i64>,
    /// Threshold on the boundary slab deviation from the clamp references.
    pub asymptotic_tol: f64,
    pub step_rule: StepRule,
    pub seed: u64,
    /// Amplitude of the seeded perturbation added to initial guesses.
    pub jitter: f64,
    /// Periods of the axes after the heteroclinic ones (missing entries
    /// default to 1).
    pub periods: Vec<i64>,
    /// Stop the schedule once the critical value and the boundary
    /// deviation have settled.
    pub early_stop: bool,
    /// Energy resolution for "attains the critical value".
    pub value_tol: f64,
    /// Number of base offsets tried by the periodic solver.
    pub starts: usize,
}

impl Default for SolveOptions {
    fn default() -> SolveOptions {
        SolveOptions {
            grad_tol: 1e-10,
            max_iters: 200_000,
            window_schedule: vec![10, 20, 40, 80],
            asymptotic_tol: 1e-6,
            step_rule: StepRule::default(),
            seed: 0,
            jitter: 1e-3,
            periods: Vec::new(),
            early_stop: true,
            value_tol: 1e-8,
            starts: 8,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("grad_tol", self.grad_tol),
            ("asymptotic_tol", self.asymptotic_tol),
            ("value_tol", self.value_tol),
        ] {
            if !(x > 0.0) {
                return Err(Error::InvalidArgument(format!("{} must be positive", name)));
            }
        }
        if self.jitter < 0.0 {
            return Err(Error::InvalidArgument("jitter must be nonnegative".into()));
        }
        if self.max_iters == 0 || self.starts == 0 {
            return Err(Error::InvalidArgument("max_iters and starts must be positive".into()));
        }
        if self.window_schedule.is_empty()
            || self.window_schedule[0] < 1
            || self.window_schedule.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidArgument("window schedule must be positive and increasing".into()));
        }
        if self.periods.iter().any(|&p| p < 1) {
            return Err(Error::InvalidArgument("periods must be at least 1".into()));
        }
        Ok(())
    }

    /// Periods for `count` trailing axes.
    pub(crate) fn transverse_periods(&self, count: usize) -> Vec<i64> {
        (0..count).map(|k| self.periods.get(k).copied().unwrap_or(1)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveFlags {
    pub monotone_ok: bool,
    pub birkhoff_ok: bool,
    pub asymptotics_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Optimizer iterations per window (or per start).
    pub iterations: Vec<usize>,
    /// Objective values sampled along the final optimizer run.
    pub energy_trace: Vec<f64>,
    /// Critical-value estimate after each window.
    pub critical_values: Vec<f64>,
    /// Boundary slab deviation after each window.
    pub boundary_deviation: Vec<f64>,
    pub grad_tol: f64,
    pub asymptotic_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub minimizer: Configuration,
    pub critical_value: f64,
    pub residual_sup: f64,
    pub converged: bool,
    pub level: usize,
    /// Critical value of the level below (the one the gap pair belongs to).
    pub lower_value: f64,
    pub windows_used: Vec<i64>,
    pub flags: SolveFlags,
    pub diagnostics: Diagnostics,
}
