use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assembly::Assembly;
use super::{Diagnostics, SolveFlags, SolveOptions, SolveResult};
use crate::energy::{el_residual, sum_w};
use crate::error::{Error, Result};
use crate::lattice::{birkhoff_check, Axis, Configuration, Domain, GapPair, Ratio};
use crate::optimize::minimize_box;
use crate::potential::LocalPotential;

/// Minimizes the cell energy `J_0^l` over `l`-periodic configurations, or
/// over `u* = u + alpha . i` with `u` periodic in rational mode.
pub fn minimize_periodic(
    p: &LocalPotential,
    periods: &[i64],
    alpha: Option<&[Ratio]>,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    if periods.len() != p.dimension() {
        return Err(Error::InvalidArgument(format!(
            "{} periods for dimension {}",
            periods.len(),
            p.dimension()
        )));
    }
    let axes = periods.iter().map(|&period| Axis::Periodic { period }).collect();
    let domain = Domain::new(axes, alpha.map(|a| a.to_vec()))?;
    let template = Configuration::periodic(domain.clone(), vec![0.0; domain.len()])?;
    let assembly = Assembly::new(p, &template, &[])?;

    let runs: Vec<_> = (0..opts.starts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
            let base = k as f64 / opts.starts as f64;
            let x0: Vec<f64> = (0..assembly.x0.len())
                .map(|_| base + opts.jitter * rng.gen_range(-1.0..1.0))
                .collect();
            minimize_box(&assembly, &assembly.lower, &assembly.upper, &x0, opts.grad_tol, opts.max_iters, &opts.step_rule)
        })
        .collect();

    let iterations = runs.iter().map(|r| r.iterations).collect();
    let best = runs
        .iter()
        .filter(|r| r.converged)
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| {
            let pg = runs.iter().map(|r| r.pg_sup).fold(f64::INFINITY, f64::min);
            Error::NonConvergence(format!("no start converged; best projected gradient {:e}", pg))
        })?;

    // bring u(0) into [0, 1)
    let shift = best.x[0].floor();
    let values: Vec<f64> = best.x.iter().map(|x| x - shift).collect();
    let minimizer = assembly.configuration(&values);

    let cell = domain.sites();
    let critical_value = sum_w(p, &minimizer, &cell);
    let (_, residual_sup) = el_residual(p, &minimizer, &cell);
    let birkhoff_ok = birkhoff_check(&minimizer, 2, None)?.is_birkhoff;
    Ok(SolveResult {
        minimizer,
        critical_value,
        residual_sup,
        converged: residual_sup <= opts.grad_tol,
        level: 0,
        lower_value: 0.0,
        windows_used: Vec::new(),
        flags: SolveFlags { monotone_ok: true, birkhoff_ok, asymptotics_ok: true },
        diagnostics: Diagnostics {
            iterations,
            energy_trace: best.trace.clone(),
            critical_values: vec![critical_value],
            boundary_deviation: Vec::new(),
            grad_tol: opts.grad_tol,
            asymptotic_tol: opts.asymptotic_tol,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapDetection {
    /// Consecutive minimizers, cyclically; empty under foliation.
    pub pairs: Vec<GapPair>,
    /// Minimizers of `t -> s(t 1)` in `[0, 1)`.
    pub minimizers: Vec<f64>,
    pub c0: f64,
    pub foliation: bool,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Minimizers of `phi(t) = s(t 1)` on one period and the gap pairs they
/// bound.
pub fn detect_gaps0(p: &LocalPotential, grid_size: usize, refine_tol: f64, value_tol: f64) -> Result<GapDetection> {
    if grid_size < 16 {
        return Err(Error::InvalidArgument("grid_size must be at least 16".into()));
    }
    if !(refine_tol > 0.0) || !(value_tol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    let card = p.window_size();
    let n = p.dimension();
    let mut window = vec![0.0; card];
    let mut grad = vec![0.0; card];
    let mut phi = |t: f64| {
        window.iter_mut().for_each(|w| *w = t);
        p.eval_unchecked(&window)
    };
    let h = 1.0 / grid_size as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| phi(i as f64 * h)).collect();
    let grid_min = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let near = grid.iter().filter(|&&x| x <= grid_min + value_tol).count();
    if 2 * near > grid_size {
        return Ok(GapDetection { pairs: Vec::new(), minimizers: Vec::new(), c0: grid_min, foliation: true });
    }

    let mut candidates = Vec::new();
    for i in 0..grid_size {
        let prev = grid[(i + grid_size - 1) % grid_size];
        let next = grid[(i + 1) % grid_size];
        if grid[i] <= prev && grid[i] <= next {
            let center = i as f64 * h;
            // golden section on [center - h, center + h]
            let (mut a, mut b) = (center - h, center + h);
            let mut c = b - GOLDEN * (b - a);
            let mut d = a + GOLDEN * (b - a);
            let (mut fc, mut fd) = (phi(c), phi(d));
            while b - a > refine_tol {
                if fc <= fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - GOLDEN * (b - a);
                    fc = phi(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + GOLDEN * (b - a);
                    fd = phi(d);
                }
            }
            let mut t = 0.5 * (a + b);
            // polish on the derivative: bisection across a sign change
            let mut dphi = |t: f64| {
                let w = vec![t; card];
                p.eval_grad_unchecked(&w, &mut grad);
                grad.iter().sum::<f64>()
            };
            let span = (16.0 * refine_tol).max(1e-7);
            let (mut lo, mut hi) = (t - span, t + span);
            if dphi(lo) < 0.0 && dphi(hi) > 0.0 {
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let g = dphi(mid);
                    if g == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if g < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let polished = 0.5 * (lo + hi);
                if phi(polished) <= phi(t) {
                    t = polished;
                }
            }
            let t = t - t.floor();
            let t = if t >= 1.0 - f64::EPSILON || t <= f64::EPSILON { 0.0 } else { t };
            candidates.push((t, phi(t)));
        }
    }
    let c0 = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let mut minimizers: Vec<f64> = candidates.iter().filter(|c| c.1 <= c0 + value_tol).map(|c| c.0).collect();
    minimizers.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::new();
    for t in minimizers {
        if merged.last().map_or(true, |&last| t - last > 1e-9) {
            merged.push(t);
        }
    }
    if merged.len() > 1 && merged[0] + 1.0 - merged[merged.len() - 1] <= 1e-9 {
        merged.pop();
    }
    let mut pairs = Vec::with_capacity(merged.len());
    for (k, &t) in merged.iter().enumerate() {
        let next = if k + 1 < merged.len() { merged[k + 1] } else { merged[0] + 1.0 };
        pairs.push(GapPair {
            v: Configuration::constant(n, t),
            w: Configuration::constant(n, next),
            level: 0,
            c_level: c0,
        });
    }
    Ok(GapDetection { pairs, minimizers: merged, c0, foliation: false })
}

/// `u*(i) = u(i) + alpha . i`.
pub fn lift_alpha(u: &Configuration, alpha: &[Ratio]) -> Result<Configuration> {
    u.lift_alpha(alpha)
}

/// Exact inverse of [`lift_alpha`].
pub fn unlift_alpha(u: &Configuration) -> Configuration {
    u.unlift_alpha()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_fk_potential, CustomOnsite, Onsite, OnsiteSpec, PotentialSpec};

    fn with_onsite(onsite: OnsiteSpec) -> LocalPotential {
        make_fk_potential(&PotentialSpec { onsite, ..PotentialSpec::sine_gordon(1, 1.0) }).unwrap()
    }

    #[test]
    fn sine_gordon_single_gap() {
        let p = with_onsite(OnsiteSpec::sine_gordon(1.0));
        let g = detect_gaps0(&p, 64, 1e-12, 1e-10).unwrap();
        assert!(!g.foliation);
        assert_eq!(g.minimizers.len(), 1);
        assert!(g.minimizers[0].abs() < 1e-9);
        assert_eq!(g.pairs.len(), 1);
    }

    #[test]
    fn double_frequency_two_gaps() {
        let p = with_onsite(OnsiteSpec { sin2: vec![0.0, 1.0], ..Default::default() });
        let g = detect_gaps0(&p, 64, 1e-12, 1e-10).unwrap();
        assert_eq!(g.minimizers.len(), 2);
        assert!((g.minimizers[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn flat_potential_foliates() {
        let p = LocalPotential::raw(1, 1, Onsite::Custom(CustomOnsite::new(|_| (0.0, 0.0))), 1.0, vec![]);
        let g = detect_gaps0(&p, 32, 1e-12, 1e-10).unwrap();
        assert!(g.foliation);
        assert!(g.pairs.is_empty());
        assert!(detect_gaps0(&p, 8, 1e-12, 1e-10).is_err());
    }

    #[test]
    fn ground_state_is_integer() {
        let p = with_onsite(OnsiteSpec::sine_gordon(1.0));
        let r = minimize_periodic(&p, &[3], None, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.critical_value.abs() < 1e-12);
        for v in r.minimizer.values() {
            assert!(v.abs() < 1e-10 || (v - 1.0).abs() < 1e-10);
        }
        assert!(minimize_periodic(&p, &[1, 1], None, &SolveOptions::default()).is_err());
    }
}
