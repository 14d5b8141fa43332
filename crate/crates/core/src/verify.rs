//! Property checks on computed objects. Every check can falsify; none can
//! prove.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{bound_constants, el_residual, j1_window, jk_window, sum_w};
use crate::error::{Error, Result};
use crate::lattice::{
    birkhoff_check, norm_slab, rotation_vector, Configuration, Field, GapPair, STRICT_TOL,
};
use crate::potential::{perturb_phase, LocalPotential};
use crate::solve::{detect_gaps0, SolveResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
    pub witness: Option<String>,
}

impl Check {
    fn new(name: &str, pass: bool, measured: f64, threshold: f64, witness: Option<String>) -> Check {
        Check { name: name.to_string(), pass, measured, threshold, witness }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub overall: bool,
}

impl VerifyReport {
    pub fn from_checks(checks: Vec<Check>) -> VerifyReport {
        let overall = checks.iter().all(|c| c.pass);
        VerifyReport { checks, overall }
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Compactly supported displacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub support: Vec<Vec<i64>>,
    pub values: Vec<f64>,
}

impl Perturbation {
    pub fn single(site: Vec<i64>, value: f64) -> Perturbation {
        Perturbation { support: vec![site], values: vec![value] }
    }

    pub fn scaled(&self, factor: f64) -> Perturbation {
        Perturbation { support: self.support.clone(), values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// `u + self`, read lazily.
    pub fn apply<'a>(&'a self, u: &'a Configuration) -> Perturbed<'a> {
        let delta = self.support.iter().cloned().zip(self.values.iter().copied()).collect();
        Perturbed { base: u, delta }
    }
}

pub struct Perturbed<'a> {
    base: &'a Configuration,
    delta: HashMap<Vec<i64>, f64>,
}

impl Field for Perturbed<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn at(&self, i: &[i64]) -> f64 {
        self.base.lookup(i) + self.delta.get(i).copied().unwrap_or(0.0)
    }
}

/// `int_r(B)`: sites whose whole interaction ball lies in `B`.
pub fn interior(p: &LocalPotential, sites: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let set: BTreeSet<&Vec<i64>> = sites.iter().collect();
    let mut probe = vec![0; p.dimension()];
    set.iter()
        .filter(|i| {
            p.ball().offsets().iter().all(|k| {
                for a in 0..probe.len() {
                    probe[a] = i[a] + k[a];
                }
                set.contains(&probe)
            })
        })
        .map(|i| (*i).clone())
        .collect()
}

const MIN_DECREASE: f64 = -1e-10;
const FIRST_ORDER_TOL: f64 = 1e-8;
const CURVATURE_STEP: f64 = 1e-4;
const CURVATURE_TOL: f64 = -1e-6;

/// Sampled test of `W_B(u + phi) - W_B(u) >= 0` over perturbations `phi`
/// supported in `int_r(B)`.
pub fn check_minimality(
    p: &LocalPotential,
    u: &Configuration,
    sites: &[Vec<i64>],
    trials: usize,
    amplitude: f64,
    seed: u64,
) -> Result<VerifyReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if !(amplitude > 0.0) {
        return Err(Error::InvalidArgument("amplitude must be positive".into()));
    }
    if u.dim() != p.dimension() {
        return Err(Error::MismatchedDomains("configuration and potential dimensions differ".into()));
    }
    let inner = interior(p, sites);
    if inner.is_empty() {
        return Err(Error::InvalidArgument("int_r(B) is empty".into()));
    }
    let base = sum_w(p, u, sites);
    let delta = |phi: &Perturbation| sum_w(p, &phi.apply(u), sites) - base;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut record = |d: f64, phi: &Perturbation| {
        if d < worst {
            worst = d;
            witness = Some(format!("{:?} by {:?}", phi.support, phi.values));
        }
    };
    for site in &inner {
        for sign in [-1.0, 1.0] {
            let phi = Perturbation::single(site.clone(), sign * amplitude);
            record(delta(&phi), &phi);
        }
    }
    let mut curvature = f64::INFINITY;
    for _ in 0..trials {
        let values = inner.iter().map(|_| rng.gen_range(-amplitude..=amplitude)).collect();
        let phi = Perturbation { support: inner.clone(), values };
        record(delta(&phi), &phi);
        let small = phi.scaled(CURVATURE_STEP / amplitude);
        let norm2: f64 = small.values.iter().map(|v| v * v).sum();
        if norm2 > 0.0 {
            let second = (delta(&small) + delta(&small.scaled(-1.0))) / norm2;
            curvature = curvature.min(second);
        }
    }
    let (_, residual) = el_residual(p, u, &inner);
    Ok(VerifyReport::from_checks(vec![
        Check::new("minimality", worst >= MIN_DECREASE, worst, MIN_DECREASE, witness),
        Check::new("first_order", residual <= FIRST_ORDER_TOL, residual, FIRST_ORDER_TOL, None),
        Check::new("second_order", curvature >= CURVATURE_TOL, curvature, CURVATURE_TOL, None),
    ]))
}

/// Window sites, with every axis range of the configuration window.
fn window_sites(u: &Configuration) -> Vec<Vec<i64>> {
    u.domain().sites()
}

fn direction_sign(u: &Configuration, axis: usize) -> f64 {
    let mut total = 0.0;
    for s in window_sites(u) {
        let mut t = s.clone();
        t[axis] += 1;
        total += u.lookup(&t) - u.lookup(&s);
    }
    if total < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Monotonicity along `axis` on window pairs `(i, i + e_axis)`, oriented by
/// the net change. Passes when no pair decreases beyond the tolerance and
/// at least one pair increases beyond it; for solutions the strong
/// comparison principle then makes every pair strict.
pub fn monotonicity(u: &Configuration, axis: usize) -> Check {
    let name = format!("monotone_axis_{}", axis);
    if axis >= u.dim() || !u.domain().axis(axis).is_hetero() {
        return Check::new(&name, false, f64::NAN, -STRICT_TOL, Some("not a heteroclinic axis".into()));
    }
    let sign = direction_sign(u, axis);
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut resolved = 0usize;
    let mut total = 0usize;
    let (_, hi) = u.domain().axis(axis).range();
    for s in window_sites(u) {
        if s[axis] == hi {
            continue;
        }
        let mut t = s.clone();
        t[axis] += 1;
        let d = sign * (u.lookup(&t) - u.lookup(&s));
        total += 1;
        if d > STRICT_TOL {
            resolved += 1;
        }
        if d < worst {
            worst = d;
            witness = Some(format!("{:?}", s));
        }
    }
    let pass = worst >= -STRICT_TOL && resolved > 0;
    let note = format!("{} of {} steps resolved; worst at {}", resolved, total, witness.unwrap_or_default());
    Check::new(&name, pass, worst, -STRICT_TOL, Some(note))
}

/// Box membership `v <= u <= w` with the strong comparison dichotomy: on
/// each side `u` either coincides with the bound or is strictly away from
/// it somewhere.
fn box_membership(u: &Configuration, v: &Configuration, w: &Configuration) -> Check {
    let sites = window_sites(u);
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut apart_v = 0usize;
    let mut apart_w = 0usize;
    for s in &sites {
        let x = u.lookup(s);
        let (dv, dw) = (x - v.lookup(s), w.lookup(s) - x);
        let d = dv.min(dw);
        if d < worst {
            worst = d;
            witness = Some(format!("{:?}", s));
        }
        apart_v += (dv > STRICT_TOL) as usize;
        apart_w += (dw > STRICT_TOL) as usize;
    }
    let note = format!(
        "{} of {} sites resolved above v, {} below w; tightest at {}",
        apart_v,
        sites.len(),
        apart_w,
        witness.unwrap_or_default()
    );
    Check::new("box_membership", worst >= -STRICT_TOL, worst, -STRICT_TOL, Some(note))
}

const J_PAIRS: usize = 20;
const ROTATION_RADIUS: i64 = 20;

pub fn check_solution_suite(p: &LocalPotential, result: &SolveResult, gap: &GapPair) -> Result<VerifyReport> {
    let u = &result.minimizer;
    let level = result.level;
    if level == 0 {
        return Err(Error::InvalidArgument("the suite checks heteroclinic results".into()));
    }
    let k = u.domain().hetero_count();
    if k != level {
        return Err(Error::InvalidArgument(format!("level {} result has {} heteroclinic axes", level, k)));
    }
    let diag = &result.diagnostics;
    let mut checks = Vec::new();

    let sites = window_sites(u);
    let (res, sup) = el_residual(p, u, &sites);
    let worst = res.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).map(|(i, _)| format!("{:?}", sites[i]));
    checks.push(Check::new("residual", sup <= diag.grad_tol, sup, diag.grad_tol, worst));

    for a in 0..k {
        checks.push(monotonicity(u, a));
    }

    let b = birkhoff_check(u, 5, None)?;
    let witness = b.witness.map(|w| format!("axis {} shift {}: below at {:?}, above at {:?}", w.axis, w.shift, w.below, w.above));
    checks.push(Check::new("birkhoff", b.is_birkhoff, if b.is_birkhoff { 0.0 } else { 1.0 }, 0.0, witness));

    let (lo, hi) = u.domain().axis(k - 1).range();
    let radius = ROTATION_RADIUS.min((hi - lo) / 2).max(1);
    let rot = rotation_vector(u, radius)?;
    checks.push(Check::new("rotation_bound", rot.bound_ok, rot.max_deviation, 1.0, None));

    let mut ends = 0.0f64;
    for index in [lo, hi] {
        let d = norm_slab(u, &gap.v, k - 1, index)?.min(norm_slab(u, &gap.w, k - 1, index)?);
        ends = ends.max(d);
    }
    checks.push(Check::new("asymptotics", ends <= diag.asymptotic_tol, ends, diag.asymptotic_tol, None));

    let bounds = bound_constants(p, &gap.v, &gap.w, level)?;
    let kk = if level == 1 { bounds.k1 } else { bounds.k2 };
    let r = p.range() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a6b);
    let mut margin = f64::INFINITY;
    let mut witness = None;
    for _ in 0..J_PAIRS {
        let a = rng.gen_range(lo - r - 5..=hi + r + 5);
        let b = rng.gen_range(lo - r - 5..=hi + r + 5);
        let (pp, qq) = (a.min(b), a.max(b));
        let j = if level == 1 {
            j1_window(p, u, pp, qq, gap.c_level)?.value
        } else {
            jk_window(p, u, level, pp, qq, &[(gap.c_level, gap.v.clone())])?.value
        };
        let m = (j + kk).min(result.critical_value + 2.0 * kk - j);
        if m < margin {
            margin = m;
            witness = Some(format!("p = {}, q = {}, J = {:e}", pp, qq, j));
        }
    }
    checks.push(Check::new("j_bounds", margin >= 0.0, margin, 0.0, witness));

    checks.push(box_membership(u, &gap.v, &gap.w));
    Ok(VerifyReport::from_checks(checks))
}

const LOCATION_TOL: f64 = 1e-9;

fn circular_distance(x: f64, y: f64) -> f64 {
    let d = x - y;
    (d - d.round()).abs()
}

/// Perturbs the potential by `(eps / 4 pi) sin^2(pi (u(0) - v0 - 1/4))` and
/// checks that the level-0 gap survives with endpoints inside the margin
/// `delta = min(2 eps, (w0 - v0) / 8)`, floored at the location tolerance.
pub fn check_gap_stability(p: &LocalPotential, gap: &GapPair, epsilon: f64, probes: usize) -> Result<VerifyReport> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {}", epsilon)));
    }
    if gap.level != 0 {
        return Err(Error::InvalidArgument("gap stability concerns level-0 pairs".into()));
    }
    let origin = vec![0; gap.v.dim()];
    let (alpha, beta) = (gap.v.lookup(&origin), gap.w.lookup(&origin));
    if !(beta > alpha) {
        return Err(Error::NotOrdered("gap pair needs v < w".into()));
    }
    let perturbed = perturb_phase(p, alpha + 0.25, epsilon / (4.0 * std::f64::consts::PI))?;
    let axioms = perturbed.verify_axioms(256, 0x57ab)?;
    if !axioms.overall {
        return Err(Error::InvalidPotential("the perturbed potential fails the axioms".into()));
    }
    let detection = detect_gaps0(&perturbed, probes.max(16), 1e-12, 1e-10)?;
    let delta = (2.0 * epsilon).min((beta - alpha) / 8.0).max(LOCATION_TOL);
    let mut checks = vec![Check::new(
        "gap_persists",
        !detection.pairs.is_empty(),
        detection.pairs.len() as f64,
        1.0,
        None,
    )];

    let mut endpoint = f64::INFINITY;
    let mut witness = None;
    for pair in &detection.pairs {
        let (a, b) = (pair.v.lookup(&origin), pair.w.lookup(&origin));
        let d = circular_distance(a, alpha).max(circular_distance(b, beta));
        if d < endpoint {
            endpoint = d;
            witness = Some(format!("({}, {})", a, b));
        }
    }
    checks.push(Check::new("endpoints_within_margin", endpoint <= delta, endpoint, delta, witness));

    let width = beta - alpha;
    let inside: Vec<f64> = detection
        .minimizers
        .iter()
        .copied()
        .filter(|&t| {
            let x = (t - alpha).rem_euclid(1.0);
            x > delta && x < width - delta
        })
        .collect();
    let witness = inside.first().map(|t| format!("minimizer at {}", t));
    checks.push(Check::new("interval_clear", inside.is_empty(), inside.len() as f64, 0.0, witness));
    Ok(VerifyReport::from_checks(checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{make_fk_potential, PotentialSpec};
    use crate::solve::{solve_hetero, Direction, SolveOptions};

    fn sg() -> LocalPotential {
        make_fk_potential(&PotentialSpec::sine_gordon(1, 1.0)).unwrap()
    }

    fn unit_gap() -> GapPair {
        GapPair { v: Configuration::constant(1, 0.0), w: Configuration::constant(1, 1.0), level: 0, c_level: 0.0 }
    }

    fn block(lo: i64, hi: i64) -> Vec<Vec<i64>> {
        (lo..=hi).map(|i| vec![i]).collect()
    }

    #[test]
    fn ground_state_is_minimal() {
        let r = check_minimality(&sg(), &Configuration::constant(1, 0.0), &block(-3, 3), 200, 0.2, 1).unwrap();
        assert!(r.overall, "{:?}", r);
    }

    #[test]
    fn maximum_is_not_minimal() {
        let r = check_minimality(&sg(), &Configuration::constant(1, 0.5), &block(-3, 3), 50, 0.1, 1).unwrap();
        assert!(!r.overall);
        assert!(!r.get("minimality").unwrap().pass);
        assert!(r.get("minimality").unwrap().witness.is_some());
    }

    #[test]
    fn empty_interior_is_an_error() {
        assert!(check_minimality(&sg(), &Configuration::constant(1, 0.0), &block(0, 1), 5, 0.1, 1).is_err());
        assert_eq!(interior(&sg(), &block(0, 4)), block(1, 3));
    }

    #[test]
    fn suite_distinguishes_kinks_from_constants() {
        let p = sg();
        let opts = SolveOptions { window_schedule: vec![10, 20, 40], ..Default::default() };
        let result = solve_hetero(&p, &unit_gap(), 1, Direction::Forward, &opts).unwrap();
        let report = check_solution_suite(&p, &result, &unit_gap()).unwrap();
        assert!(report.overall, "{:#?}", report);
        assert_eq!(report, check_solution_suite(&p, &result, &unit_gap()).unwrap());

        let gap = unit_gap();
        let refs = crate::lattice::ClampRefs { minus: gap.v.clone(), plus: gap.v.clone(), lower: gap.v.clone(), upper: gap.w.clone() };
        let flat = Configuration::clamped(result.minimizer.domain().clone(), vec![0.0; result.minimizer.values().len()], refs).unwrap();
        let degenerate = SolveResult { minimizer: flat, critical_value: 0.0, ..result.clone() };
        let report = check_solution_suite(&p, &degenerate, &unit_gap()).unwrap();
        for c in &report.checks {
            assert_eq!(c.pass, c.name != "monotone_axis_0", "{:?}", c);
        }

        let mut bumped = result.minimizer.values().to_vec();
        bumped[7] += 0.1;
        let bumped = SolveResult { minimizer: result.minimizer.with_values(bumped).unwrap(), ..result };
        let report = check_solution_suite(&p, &bumped, &unit_gap()).unwrap();
        let residual = report.get("residual").unwrap();
        assert!(!residual.pass);
        assert!(residual.witness.is_some());
    }

    #[test]
    fn gap_stability() {
        let p = sg();
        let r = check_gap_stability(&p, &unit_gap(), 0.0, 64).unwrap();
        assert!(r.overall, "{:#?}", r);
        assert!(r.get("endpoints_within_margin").unwrap().measured < 1e-12);
        assert!(check_gap_stability(&p, &unit_gap(), 0.01, 64).unwrap().overall);
        let huge = check_gap_stability(&p, &unit_gap(), 1e3, 64).unwrap();
        assert!(!huge.overall);
        assert!(check_gap_stability(&p, &unit_gap(), -1.0, 64).is_err());
    }
}
