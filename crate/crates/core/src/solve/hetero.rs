use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assembly::Assembly;
use super::{Diagnostics, SolveFlags, SolveOptions, SolveResult};
use crate::energy::{el_residual, j1_window, jk_window};
use crate::error::{Error, Result};
use crate::lattice::{
    birkhoff_check, box_sites, compare_tol, norm_slab, probe_ranges, ClampRefs, Configuration, Domain, GapPair,
    Relation, STRICT_TOL,
};
use crate::optimize::minimize_box;
use crate::potential::{perturb_level1, LocalPotential, OrbitLattice};
use crate::verify::monotonicity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// From `v` at `-inf` to `w` at `+inf`.
    Forward,
    /// From `w` at `-inf` to `v` at `+inf`.
    Reverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSolve {
    pub configuration: Configuration,
    pub objective: f64,
    pub pg_sup: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

/// Minimizes the energy of every site that sees a free window value, over
/// the window values inside the closure box, with `pinned` sites held at
/// the given (lifted) values. The template supplies the starting point.
pub fn solve_window(
    p: &LocalPotential,
    template: &Configuration,
    pinned: &[(Vec<i64>, f64)],
    opts: &SolveOptions,
) -> Result<WindowSolve> {
    let assembly = Assembly::new(p, template, pinned)?;
    let out = minimize_box(
        &assembly,
        &assembly.lower,
        &assembly.upper,
        &assembly.x0,
        opts.grad_tol,
        opts.max_iters,
        &opts.step_rule,
    );
    Ok(WindowSolve {
        configuration: assembly.configuration(&out.x),
        objective: out.value,
        pg_sup: out.pg_sup,
        iterations: out.iterations,
        converged: out.converged,
        trace: out.trace,
    })
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded jitter in `[-1, 1]` keyed by the heteroclinic coordinates, so
/// transverse periodic copies receive the same value.
fn jitter_at(seed: u64, hetero: &[i64]) -> f64 {
    let mut h = splitmix(seed);
    for &c in hetero {
        h = splitmix(h ^ c as u64);
    }
    ChaCha8Rng::seed_from_u64(h).gen_range(-1.0..1.0)
}

fn refs_for(gap: &GapPair, direction: Direction) -> ClampRefs {
    match direction {
        Direction::Forward => ClampRefs::between(&gap.v, &gap.w),
        Direction::Reverse => ClampRefs::reversed(&gap.v, &gap.w),
    }
}

/// The starting point of [`solve_hetero`] on the window of half-width
/// `half_width`: linear interpolation from `minus` to `plus` along the
/// newest heteroclinic axis, jittered and clamped to the box.
pub fn linear_guess(
    gap: &GapPair,
    level: usize,
    direction: Direction,
    half_width: i64,
    opts: &SolveOptions,
) -> Result<Configuration> {
    let n = gap.v.dim();
    if level == 0 || level > n {
        return Err(Error::InvalidArgument(format!("level {} outside 1..={}", level, n)));
    }
    let domain = level_domain(n, level, half_width, opts)?;
    initial_guess(&domain, refs_for(gap, direction), opts)
}

fn initial_guess(domain: &Domain, refs: ClampRefs, opts: &SolveOptions) -> Result<Configuration> {
    let k = domain.hetero_count();
    let (lo, hi) = domain.axis(k - 1).range();
    let span = (hi - lo + 2) as f64;
    let values = domain
        .sites()
        .iter()
        .map(|s| {
            let t = (s[k - 1] - lo + 1) as f64 / span;
            let a = refs.minus.raw(s);
            let b = refs.plus.raw(s);
            let x = a + t * (b - a) + opts.jitter * jitter_at(opts.seed, &s[..k]);
            x.max(refs.lower.raw(s)).min(refs.upper.raw(s))
        })
        .collect();
    Configuration::clamped(domain.clone(), values, refs)
}

/// Critical-value estimate of `u` at `level` over its window widened by
/// the interaction range.
pub(crate) fn level_value(p: &LocalPotential, u: &Configuration, level: usize, c_lower: f64) -> Result<f64> {
    let r = p.range() as i64;
    let (lo, hi) = u.domain().axis(level - 1).range();
    if level == 1 {
        Ok(j1_window(p, u, lo - r, hi + r, c_lower)?.value)
    } else {
        let refs = u.refs().ok_or_else(|| Error::MissingLowerLevel("no clamp references".into()))?;
        Ok(jk_window(p, u, level, lo - r, hi + r, &[(c_lower, refs.lower.clone())])?.value)
    }
}

/// Largest slab deviation of the two boundary slabs of the newest axis
/// from the tail they should approach.
pub(crate) fn boundary_deviation(u: &Configuration) -> Result<f64> {
    let refs = u.refs().ok_or_else(|| Error::InvalidArgument("boundary deviation needs a clamp closure".into()))?;
    let k = u.domain().hetero_count();
    let (lo, hi) = u.domain().axis(k - 1).range();
    Ok(norm_slab(u, &refs.minus, k - 1, lo)?.max(norm_slab(u, &refs.plus, k - 1, hi)?))
}

/// Domain of a level-`level` heteroclinic problem of half-width `h`.
fn level_domain(n: usize, level: usize, h: i64, opts: &SolveOptions) -> Result<Domain> {
    Domain::hetero(level, h, &opts.transverse_periods(n - level))
}

pub fn solve_hetero(
    p: &LocalPotential,
    gap: &GapPair,
    level: usize,
    direction: Direction,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    let n = p.dimension();
    if level == 0 || level > n {
        return Err(Error::InvalidArgument(format!("level {} outside 1..={}", level, n)));
    }
    if gap.level + 1 != level {
        return Err(Error::InvalidArgument(format!(
            "a level-{} solve needs a level-{} gap pair, got level {}",
            level,
            level - 1,
            gap.level
        )));
    }
    if gap.v.dim() != n || gap.w.dim() != n {
        return Err(Error::MismatchedDomains("gap pair dimension differs from the potential".into()));
    }
    if gap.v.domain().alpha().is_some() {
        return Err(Error::InvalidArgument("heteroclinic solves take unlifted gap pairs".into()));
    }
    if compare_tol(&gap.v, &gap.w, None, STRICT_TOL)?.relation != Relation::Less {
        return Err(Error::NotOrdered("gap pair needs v < w".into()));
    }
    let refs = refs_for(gap, direction);

    let mut current: Option<Configuration> = None;
    let mut iterations = Vec::new();
    let mut critical_values = Vec::new();
    let mut deviations = Vec::new();
    let mut windows_used = Vec::new();
    let mut trace = Vec::new();
    let mut last_converged = false;
    for &h in &opts.window_schedule {
        let domain = level_domain(n, level, h, opts)?;
        let template = match &current {
            None => initial_guess(&domain, refs.clone(), opts)?,
            Some(u) => u.reembed(&domain)?,
        };
        let solved = solve_window(p, &template, &[], opts)?;
        let u = recenter(&solved.configuration, gap)?;
        let value = level_value(p, &u, level, gap.c_level)?;
        let deviation = boundary_deviation(&u)?;
        iterations.push(solved.iterations);
        critical_values.push(value);
        deviations.push(deviation);
        windows_used.push(h);
        trace = solved.trace;
        last_converged = solved.converged;
        current = Some(u);
        let settled = critical_values.len() >= 2
            && (value - critical_values[critical_values.len() - 2]).abs() < opts.grad_tol
            && deviation < opts.asymptotic_tol;
        if opts.early_stop && settled {
            break;
        }
    }
    let u = current.expect("nonempty schedule");
    if !last_converged {
        return Err(Error::NonConvergence(format!(
            "projected gradient above {:e} after {} iterations on the final window",
            opts.grad_tol,
            iterations.last().unwrap()
        )));
    }
    let deviation = *deviations.last().unwrap();
    if deviation > opts.asymptotic_tol && deviations.len() >= 2 && deviation > 0.5 * deviations[0] {
        return Err(Error::BoundaryNotShrinking(format!(
            "boundary slab deviation went from {:e} to {:e}",
            deviations[0], deviation
        )));
    }

    let sites = u.domain().sites();
    let (_, residual_sup) = el_residual(p, &u, &sites);
    let flags = SolveFlags {
        monotone_ok: (0..level).all(|a| monotonicity(&u, a).pass),
        birkhoff_ok: birkhoff_check(&u, 5, None)?.is_birkhoff,
        asymptotics_ok: deviation <= opts.asymptotic_tol,
    };
    Ok(SolveResult {
        critical_value: *critical_values.last().unwrap(),
        minimizer: u,
        residual_sup,
        converged: residual_sup <= opts.grad_tol,
        level,
        lower_value: gap.c_level,
        windows_used,
        flags,
        diagnostics: Diagnostics {
            iterations,
            energy_trace: trace,
            critical_values,
            boundary_deviation: deviations,
            grad_tol: opts.grad_tol,
            asymptotic_tol: opts.asymptotic_tol,
        },
    })
}

/// The ordered pair `(U, tau U)` of a heteroclinic result and its
/// translate by one site along the newest axis.
pub fn translate_pair(base: &SolveResult) -> Result<GapPair> {
    let u = &base.minimizer;
    let k = u.domain().hetero_count();
    if k == 0 {
        return Err(Error::InvalidArgument("translate pairs need a heteroclinic result".into()));
    }
    let s = u.shift(1, k - 1);
    let (v, w) = match compare_tol(u, &s, None, STRICT_TOL)?.relation {
        Relation::Less => (u.clone(), s),
        Relation::Greater => (s, u.clone()),
        _ => return Err(Error::NotOrdered("the result is not ordered with its translate".into())),
    };
    Ok(GapPair { v, w, level: base.level, c_level: base.critical_value })
}

/// Adds the quartic forcing term vanishing on the values of a level-1
/// profile along its heteroclinic axis, which isolates the translates of
/// that profile among the level-1 minimizers.
pub fn force_gap(p: &LocalPotential, base: &SolveResult, delta2: f64) -> Result<LocalPotential> {
    if base.level != 1 {
        return Err(Error::InvalidArgument("gap forcing takes a level-1 result".into()));
    }
    let u = &base.minimizer;
    let refs = u.refs().ok_or_else(|| Error::InvalidArgument("level-1 results are clamped".into()))?;
    let mut site = vec![0; u.dim()];
    let anchor = refs.lower.lookup(&site);
    let (lo, hi) = u.domain().axis(0).range();
    let mut profile = Vec::with_capacity((hi - lo + 1) as usize);
    for i in lo..=hi {
        site[0] = i;
        profile.push(u.lookup(&site));
    }
    profile.sort_by(f64::total_cmp);
    perturb_level1(p, OrbitLattice::from_profile(anchor, &profile)?, delta2)
}

/// Shifts `u` along its newest heteroclinic axis so that the first slab
/// that has covered at least half of the way from the `minus` tail to the
/// `plus` tail sits at index 0.
pub fn recenter(u: &Configuration, gap: &GapPair) -> Result<Configuration> {
    let refs = u
        .refs()
        .ok_or_else(|| Error::NoTransition("recentering needs a clamped configuration".into()))?;
    if u.dim() != gap.v.dim() {
        return Err(Error::MismatchedDomains("gap pair dimension differs".into()));
    }
    let k = u.domain().hetero_count();
    let axis = k - 1;
    let (lo, hi) = u.domain().axis(axis).range();
    let ranges = probe_ranges(&refs.minus, &refs.plus, 1)?;
    let mut outer = probe_ranges(u, u, 1)?;
    for a in 0..u.dim() {
        if a != axis {
            outer[a].0 = outer[a].0.min(ranges[a].0);
            outer[a].1 = outer[a].1.max(ranges[a].1);
        }
    }
    let mut crossing = None;
    for i in lo..=hi {
        let mut slab = outer.clone();
        slab[axis] = (i, i);
        let mut progress = 0.0;
        let mut total = 0.0;
        for s in box_sites(&slab) {
            let m = refs.minus.raw(&s);
            progress += u.raw(&s) - m;
            total += refs.plus.raw(&s) - m;
        }
        if total == 0.0 {
            return Err(Error::NoTransition("the clamp tails coincide".into()));
        }
        if progress / total >= 0.5 {
            crossing = Some(i);
            break;
        }
    }
    match crossing {
        Some(i) => Ok(u.shift(i, axis)),
        None => Err(Error::NoTransition("no slab reaches the midpoint".into())),
    }
}
