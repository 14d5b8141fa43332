use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hetero::{level_value, solve_window};
use super::periodic::detect_gaps0;
use super::{SolveOptions, SolveResult};
use crate::error::{Error, Result};
use crate::potential::LocalPotential;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    /// Pinned value of `u(0)`.
    pub value: f64,
    pub constrained_value: f64,
    /// `constrained_value - c_level`.
    pub excess: f64,
    pub converged: bool,
}

/// Finite-probe evidence about the gap condition at one level: `gap` is
/// true when no probe attains the critical value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub probes: Vec<ProbeOutcome>,
    pub gap: bool,
    pub c_level: f64,
    pub value_tol: f64,
}

pub fn gap_probe(
    p: &LocalPotential,
    level: usize,
    base: &SolveResult,
    probe_values: &[f64],
    opts: &SolveOptions,
) -> Result<GapReport> {
    opts.validate()?;
    if !base.converged {
        return Err(Error::InvalidArgument("the base solution is not converged".into()));
    }
    if level == 0 || base.level != level {
        return Err(Error::InvalidArgument(format!("base solution has level {}, probing level {}", base.level, level)));
    }
    if probe_values.is_empty() {
        return Err(Error::InvalidArgument("no probe values".into()));
    }
    let ground = detect_gaps0(p, 256, 1e-12, opts.value_tol)?;
    if ground.foliation {
        return Err(Error::Foliation);
    }
    let u = &base.minimizer;
    let n = u.dim();
    let origin = vec![0; n];
    let mut next = origin.clone();
    next[level - 1] = 1;
    let (a, b) = (u.lookup(&origin), u.lookup(&next));
    let (lo, hi) = (a.min(b), a.max(b));
    if let Some(m) = probe_values.iter().find(|&&m| !(m >= lo && m <= hi)) {
        return Err(Error::InvalidArgument(format!("probe {} outside [{}, {}]", m, lo, hi)));
    }

    let probes = probe_values
        .par_iter()
        .map(|&m| {
            let solved = solve_window(p, u, &[(origin.clone(), m)], opts)?;
            let value = level_value(p, &solved.configuration, level, base.lower_value)?;
            Ok(ProbeOutcome {
                value: m,
                constrained_value: value,
                excess: value - base.critical_value,
                converged: solved.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gap = probes.iter().all(|o| o.excess > opts.value_tol);
    Ok(GapReport { probes, gap, c_level: base.critical_value, value_tol: opts.value_tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Configuration, GapPair};
    use crate::potential::{make_fk_potential, CustomOnsite, Onsite, PotentialSpec};
    use crate::solve::{solve_hetero, Direction};

    fn opts() -> SolveOptions {
        SolveOptions { window_schedule: vec![10, 20], ..Default::default() }
    }

    #[test]
    fn probe_at_base_value_is_free() {
        let p = make_fk_potential(&PotentialSpec::sine_gordon(1, 1.0)).unwrap();
        let gap = GapPair { v: Configuration::constant(1, 0.0), w: Configuration::constant(1, 1.0), level: 0, c_level: 0.0 };
        let base = solve_hetero(&p, &gap, 1, Direction::Forward, &opts()).unwrap();
        let u0 = base.minimizer.lookup(&[0]);
        let u1 = base.minimizer.lookup(&[1]);
        let report = gap_probe(&p, 1, &base, &[u0, 0.5 * (u0 + u1)], &opts()).unwrap();
        assert!(report.probes[0].excess.abs() < 1e-8);
        assert!(report.probes[1].excess > 0.0);
        assert!(!report.gap);
        assert!(gap_probe(&p, 1, &base, &[u1 + 0.1], &opts()).is_err());
    }

    #[test]
    fn flat_potential_is_refused() {
        let p = make_fk_potential(&PotentialSpec::sine_gordon(1, 1.0)).unwrap();
        let gap = GapPair { v: Configuration::constant(1, 0.0), w: Configuration::constant(1, 1.0), level: 0, c_level: 0.0 };
        let base = solve_hetero(&p, &gap, 1, Direction::Forward, &opts()).unwrap();
        let flat = LocalPotential::raw(1, 1, Onsite::Custom(CustomOnsite::new(|_| (0.0, 0.0))), 1.0, vec![]);
        let m = base.minimizer.lookup(&[0]);
        assert!(matches!(gap_probe(&flat, 1, &base, &[m], &opts()), Err(Error::Foliation)));
    }
}
