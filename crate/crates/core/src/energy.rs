//! Local energies, finite sums, the renormalized slab functionals and the
//! explicit lower-bound constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{box_sites, compare_tol, norm_slab, probe_ranges, Axis, Configuration, Field, Relation, STRICT_TOL};
use crate::potential::LocalPotential;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub value: f64,
    pub converged: bool,
    /// `(p, q)` slab ranges that were evaluated, in order.
    pub window: Vec<(i64, i64)>,
    pub per_slab: Vec<f64>,
    pub tail_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub lipschitz: f64,
    pub action: f64,
    pub k1: f64,
    pub k2: f64,
    pub m2: f64,
    pub lower_bound: f64,
    pub card_b: usize,
}

fn gather<F: Field + ?Sized>(p: &LocalPotential, u: &F, j: &[i64], buf: &mut Vec<f64>, site: &mut [i64]) {
    buf.clear();
    for k in p.ball().offsets() {
        for (a, s) in site.iter_mut().enumerate() {
            *s = j[a] + k[a];
        }
        buf.push(u.at(site));
    }
}

/// `S_j(u)`: the potential on the window of `u` centred at `j`.
pub fn local_energy<F: Field + ?Sized>(p: &LocalPotential, u: &F, j: &[i64]) -> f64 {
    let mut buf = Vec::with_capacity(p.window_size());
    let mut site = vec![0; j.len()];
    gather(p, u, j, &mut buf, &mut site);
    p.eval_unchecked(&buf)
}

/// `W_B(u)`, summed in lexicographic order over `sites`.
pub fn sum_w<F: Field + ?Sized>(p: &LocalPotential, u: &F, sites: &[Vec<i64>]) -> f64 {
    let mut sorted: Vec<&Vec<i64>> = sites.iter().collect();
    sorted.sort();
    sorted.dedup();
    let mut buf = Vec::with_capacity(p.window_size());
    let mut site = vec![0; u.dim()];
    let mut total = 0.0;
    for j in sorted {
        gather(p, u, j, &mut buf, &mut site);
        total += p.eval_unchecked(&buf);
    }
    total
}

/// Euler-Lagrange residual `sum_{|j - i| <= r} d_i S_j(u)` at each site of
/// `region`, and its sup norm.
pub fn el_residual<F: Field + ?Sized>(p: &LocalPotential, u: &F, region: &[Vec<i64>]) -> (Vec<f64>, f64) {
    let mut buf = Vec::with_capacity(p.window_size());
    let mut grad = vec![0.0; p.window_size()];
    let mut site = vec![0; u.dim()];
    let mut center = vec![0; u.dim()];
    let mut out = Vec::with_capacity(region.len());
    let mut sup = 0.0f64;
    for i in region {
        let mut r = 0.0;
        for (slot, k) in p.ball().offsets().iter().enumerate() {
            for a in 0..center.len() {
                center[a] = i[a] - k[a];
            }
            gather(p, u, &center, &mut buf, &mut site);
            p.eval_grad_unchecked(&buf, &mut grad);
            r += grad[slot];
        }
        sup = sup.max(r.abs());
        out.push(r);
    }
    (out, sup)
}

/// Sites of the level-1 slab `T_i`: first coordinate `i`, one period of
/// every other axis.
fn level1_slab(u: &Configuration, i: i64) -> Result<Vec<Vec<i64>>> {
    let mut ranges = Vec::with_capacity(u.dim());
    for (a, axis) in u.domain().axes().iter().enumerate() {
        match *axis {
            _ if a == 0 => ranges.push((i, i)),
            Axis::Periodic { period } => ranges.push((0, period - 1)),
            Axis::Hetero { .. } => {
                return Err(Error::InvalidArgument(
                    "the level-1 functional needs periodic transverse axes".into(),
                ))
            }
        }
    }
    Ok(box_sites(&ranges))
}

/// `J_{1;p,q}(u) = sum_{i=p}^{q} (S_{T_i}(u) - c0 #T_i)` with `c0` the ground
/// energy per site.
pub fn j1_window(p: &LocalPotential, u: &Configuration, lo: i64, hi: i64, c0: f64) -> Result<EnergyReport> {
    if lo > hi {
        return Err(Error::InvalidArgument(format!("p = {} > q = {}", lo, hi)));
    }
    let mut per_slab = Vec::with_capacity((hi - lo + 1) as usize);
    for i in lo..=hi {
        let slab = level1_slab(u, i)?;
        per_slab.push(sum_w(p, u, &slab) - c0 * slab.len() as f64);
    }
    Ok(EnergyReport {
        value: per_slab.iter().sum(),
        converged: true,
        window: vec![(lo, hi)],
        per_slab,
        tail_estimate: 0.0,
    })
}

/// Expanding-window limit of `J_{1;p,q}` with a Cauchy test on the last two
/// windows.
pub fn j1_limit(
    p: &LocalPotential,
    u: &Configuration,
    c0: f64,
    schedule: &[(i64, i64)],
    tol: f64,
) -> Result<EnergyReport> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty window schedule".into()));
    }
    for w in schedule.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.0 > a.0 || b.1 < a.1 || b == a {
            return Err(Error::InvalidArgument("window schedule must be strictly expanding".into()));
        }
    }
    let mut values = Vec::with_capacity(schedule.len());
    let mut last = None;
    for &(lo, hi) in schedule {
        let report = j1_window(p, u, lo, hi, c0)?;
        values.push(report.value);
        last = Some(report);
    }
    let last = last.unwrap();
    let oscillation = if values.len() >= 2 {
        (values[values.len() - 1] - values[values.len() - 2]).abs()
    } else {
        f64::INFINITY
    };
    Ok(EnergyReport {
        value: last.value,
        converged: oscillation < tol,
        window: schedule.to_vec(),
        per_slab: last.per_slab,
        tail_estimate: oscillation,
    })
}

/// Relative slab sum `sum_{j in slab} [S_j(u) - S_j(v)]` for the slab
/// `{i_axis = index}`, in the given order along `outer` axis values.
fn relative_slab(
    p: &LocalPotential,
    u: &Configuration,
    v: &Configuration,
    axis: usize,
    index: i64,
    outward: bool,
) -> Result<(f64, f64)> {
    let r = p.range() as i64;
    let mut ranges = probe_ranges(u, v, r + 1)?;
    ranges[axis] = (index, index);
    let sites = box_sites(&ranges);
    let mut buf = Vec::with_capacity(p.window_size());
    let mut site = vec![0; u.dim()];
    let mut term = |j: &[i64]| {
        gather(p, u, j, &mut buf, &mut site);
        let a = p.eval_unchecked(&buf);
        gather(p, v, j, &mut buf, &mut site);
        a - p.eval_unchecked(&buf)
    };
    let mut total = 0.0;
    if outward && axis != 0 {
        // group by the first coordinate, visiting 0, -1, 1, -2, 2, ...
        let (lo, hi) = ranges[0];
        let stride = sites.len() / (hi - lo + 1) as usize;
        let mut order: Vec<i64> = (lo..=hi).collect();
        order.sort_by_key(|&c| (c.abs(), c > 0));
        for c in order {
            let start = (c - lo) as usize * stride;
            for j in &sites[start..start + stride] {
                total += term(j);
            }
        }
    } else {
        for j in &sites {
            total += term(j);
        }
    }
    // mismatch on the outermost layers of the first axis
    let (lo, hi) = ranges[0];
    let mut tail = 0.0;
    if axis != 0 {
        for j in sites.iter().filter(|s| s[0] == lo || s[0] == hi) {
            tail += (u.lookup(j) - v.lookup(j)).abs();
        }
    }
    Ok((total, tail))
}

const TAIL_TOL: f64 = 1e-9;

/// `J_1(u) = c1 + sum_{j in E_0} [S_j(u) - S_j(v_ref)]` with `E_0` the slab
/// `{i_2 = 0}`, summed outward from `i_1 = 0`.
pub fn j1_extended(p: &LocalPotential, u: &Configuration, v_ref: &Configuration, c1: f64) -> Result<EnergyReport> {
    if u.dim() < 2 {
        return Err(Error::InvalidArgument("the extended functional needs dimension at least 2".into()));
    }
    let (sum, tail) = relative_slab(p, u, v_ref, 1, 0, true)?;
    if !(tail <= TAIL_TOL) {
        return Err(Error::TailNotShrinking(format!("slab mismatch {:e} at the outermost layers", tail)));
    }
    Ok(EnergyReport {
        value: c1 + sum,
        converged: true,
        window: vec![(0, 0)],
        per_slab: vec![sum],
        tail_estimate: tail,
    })
}

/// `J_{k;p,q}(u)` for `k >= 2`: slab terms `J_{k,i}` relative to the last
/// entry of `lower_levels`, a minimizer of level `k - 1`.
pub fn jk_window(
    p: &LocalPotential,
    u: &Configuration,
    level: usize,
    lo: i64,
    hi: i64,
    lower_levels: &[(f64, Configuration)],
) -> Result<EnergyReport> {
    if level < 2 || level > u.dim() {
        return Err(Error::InvalidArgument(format!("level {} outside 2..={}", level, u.dim())));
    }
    if lo > hi {
        return Err(Error::InvalidArgument(format!("p = {} > q = {}", lo, hi)));
    }
    let (_, v) = lower_levels
        .last()
        .ok_or_else(|| Error::MissingLowerLevel(format!("level {} needs the level-{} minimizer", level, level - 1)))?;
    let mut per_slab = Vec::with_capacity((hi - lo + 1) as usize);
    let mut tail = 0.0f64;
    for i in lo..=hi {
        let (s, t) = relative_slab(p, u, v, level - 1, i, false)?;
        per_slab.push(s);
        tail = tail.max(t);
    }
    Ok(EnergyReport {
        value: per_slab.iter().sum(),
        converged: tail <= TAIL_TOL,
        window: vec![(lo, hi)],
        per_slab,
        tail_estimate: tail,
    })
}

const L_SAFETY: f64 = 1.5;
const L_SAMPLES: usize = 8192;

/// Explicit constants `L`, `C`, `K1`, `K2` for the box `[v, w]` at the
/// given level (`v`, `w` are minimizers of level `level - 1`).
pub fn bound_constants(p: &LocalPotential, v: &Configuration, w: &Configuration, level: usize) -> Result<BoundConstants> {
    if level == 0 {
        return Err(Error::InvalidArgument("level must be at least 1".into()));
    }
    if compare_tol(v, w, None, STRICT_TOL)?.relation != Relation::Less {
        return Err(Error::NotOrdered("bound constants need v < w".into()));
    }
    let n = v.dim();
    let r = p.range() as i64;
    let probe = box_sites(&probe_ranges(v, w, r + 1)?);

    let mut action = 0.0f64;
    let mut e = vec![0; n];
    for i in &probe {
        for a in 0..n {
            for sign in [-1, 1] {
                e.copy_from_slice(i);
                e[a] += sign;
                action = action.max(w.lookup(&e) - v.lookup(i)).max(w.lookup(i) - v.lookup(&e));
            }
        }
    }

    // componentwise sup of |d_k s| over windows inside the widened box
    let card = p.window_size();
    let mut sup = vec![0.0f64; card];
    let mut rng = ChaCha8Rng::seed_from_u64(0x1ab5);
    let mut window = vec![0.0; card];
    let mut grad = vec![0.0; card];
    let mut site = vec![0; n];
    for t in 0..L_SAMPLES + 2 * probe.len() {
        let j = &probe[if t < L_SAMPLES { rng.gen_range(0..probe.len()) } else { (t - L_SAMPLES) / 2 }];
        for (slot, k) in p.ball().offsets().iter().enumerate() {
            for a in 0..n {
                site[a] = j[a] + k[a];
            }
            let lo = v.lookup(&site) - 1.0;
            let hi = w.lookup(&site) + 1.0;
            window[slot] = if t < L_SAMPLES {
                rng.gen_range(lo..=hi)
            } else if (t - L_SAMPLES) % 2 == 0 {
                lo
            } else {
                hi
            };
        }
        p.eval_grad_unchecked(&window, &mut grad);
        for (s, g) in sup.iter_mut().zip(&grad) {
            *s = s.max(g.abs());
        }
    }
    let lipschitz = L_SAFETY * sup.iter().sum::<f64>();
    let lower_bound = p.lower_bound();
    let origin = vec![0; n];

    let (k1, k2, m2) = if level == 1 {
        let c0 = local_energy(p, v, &origin);
        let gap = w.lookup(&origin) - v.lookup(&origin);
        let k1 = (2 * r + 2) as f64 * (c0.abs() + lower_bound + lipschitz * card as f64 * gap);
        (k1, 0.0, 0.0)
    } else {
        let m2 = lipschitz * card as f64 * norm_slab(w, v, level - 1, 0)?;
        let k2 = ((2 * r + 3) as f64 * m2).max((4 * r + 4) as f64 * m2);
        (0.0, k2, m2)
    };
    Ok(BoundConstants { lipschitz, action, k1, k2, m2, lower_bound, card_b: card })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{ClampRefs, Domain};
    use crate::potential::{make_fk_potential, CustomOnsite, Onsite, PotentialSpec};

    fn sg(n: usize) -> LocalPotential {
        make_fk_potential(&PotentialSpec::sine_gordon(n, 1.0)).unwrap()
    }

    fn ramp(h: i64) -> Configuration {
        let domain = Domain::hetero(1, h, &[]).unwrap();
        let values = domain
            .sites()
            .iter()
            .map(|s| (s[0] + h + 1) as f64 / (2 * h + 2) as f64)
            .collect();
        let refs = ClampRefs::between(&Configuration::constant(1, 0.0), &Configuration::constant(1, 1.0));
        Configuration::clamped(domain, values, refs).unwrap()
    }

    #[test]
    fn integer_constant_has_zero_energy() {
        let p = sg(2);
        let u = Configuration::constant(2, 3.0);
        assert_eq!(local_energy(&p, &u, &[4, -1]), 0.0);
        assert_eq!(sum_w(&p, &u, &[vec![0, 0]]), 0.0);
        let (res, sup) = el_residual(&p, &u, &[vec![0, 0], vec![1, 2]]);
        assert_eq!(res, vec![0.0, 0.0]);
        assert_eq!(sup, 0.0);
    }

    #[test]
    fn translation_covariance() {
        let p = sg(1);
        let u = ramp(4);
        for j in -6..6 {
            assert_eq!(local_energy(&p, &u, &[j + 1]), local_energy(&p, &u.shift(1, 0), &[j]));
        }
    }

    #[test]
    fn sum_is_additive() {
        let p = sg(1);
        let u = ramp(3);
        let a: Vec<Vec<i64>> = (-3..0).map(|i| vec![i]).collect();
        let b: Vec<Vec<i64>> = (0..4).map(|i| vec![i]).collect();
        let all: Vec<Vec<i64>> = a.iter().chain(&b).cloned().collect();
        let lhs = sum_w(&p, &u, &all);
        let rhs = sum_w(&p, &u, &a) + sum_w(&p, &u, &b);
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn harmonic_line_has_no_residual() {
        let flat = LocalPotential::raw(1, 1, Onsite::Custom(CustomOnsite::new(|_| (0.0, 0.0))), 1.0, vec![]);
        let domain = Domain::periodic(&[2]).unwrap();
        let u = Configuration::periodic(domain, vec![0.0, 0.0])
            .unwrap()
            .lift_alpha(&[crate::lattice::Ratio::new(1, 2).unwrap()])
            .unwrap();
        let region: Vec<Vec<i64>> = (-5..5).map(|i| vec![i]).collect();
        assert_eq!(el_residual(&flat, &u, &region).1, 0.0);
    }

    #[test]
    fn j1_of_ground_state_vanishes() {
        let p = sg(1);
        let v = Configuration::constant(1, 0.0);
        let domain = Domain::hetero(1, 5, &[]).unwrap();
        let refs = ClampRefs { minus: v.clone(), plus: v.clone(), lower: v.clone(), upper: Configuration::constant(1, 1.0) };
        let u = Configuration::clamped(domain, vec![0.0; 11], refs).unwrap();
        assert_eq!(j1_window(&p, &u, -8, 8, 0.0).unwrap().value, 0.0);
        let single = j1_window(&p, &ramp(3), 0, 0, 0.0).unwrap();
        assert_eq!(single.value, local_energy(&p, &ramp(3), &[0]));
        assert!(j1_window(&p, &u, 2, 1, 0.0).is_err());
        let lim = j1_limit(&p, &u, 0.0, &[(-2, 2), (-4, 4)], 1e-12).unwrap();
        assert!(lim.converged);
        assert!(j1_limit(&p, &u, 0.0, &[], 1e-12).is_err());
    }

    #[test]
    fn non_minimal_constant_diverges() {
        let p = sg(1);
        let v = Configuration::constant(1, 0.0);
        let w = Configuration::constant(1, 1.0);
        let domain = Domain::hetero(1, 2, &[]).unwrap();
        let refs = ClampRefs { minus: Configuration::constant(1, 0.3), plus: Configuration::constant(1, 0.3), lower: v, upper: w };
        let u = Configuration::clamped(domain, vec![0.3; 5], refs).unwrap();
        let rep = j1_limit(&p, &u, 0.0, &[(-5, 5), (-10, 10), (-20, 20)], 1e-8).unwrap();
        assert!(!rep.converged);
        let s = local_energy(&p, &u, &[0]);
        assert!((rep.value - 41.0 * s).abs() < 1e-12);
    }

    #[test]
    fn k1_formula_for_unit_gap() {
        let p = sg(1);
        let v = Configuration::constant(1, 0.0);
        let w = Configuration::constant(1, 1.0);
        let b = bound_constants(&p, &v, &w, 1).unwrap();
        assert_eq!(b.card_b, 3);
        assert_eq!(b.lower_bound, 0.0);
        assert!((b.k1 - 12.0 * b.lipschitz).abs() < 1e-12);
        assert!(b.lipschitz > 0.0);
        assert!(bound_constants(&p, &w, &v, 1).is_err());
    }

    #[test]
    fn jk_requires_lower_level() {
        let p = sg(2);
        let v = Configuration::constant(2, 0.0);
        let domain = Domain::hetero(2, 2, &[]).unwrap();
        let refs = ClampRefs { minus: v.clone(), plus: v.clone(), lower: v.clone(), upper: Configuration::constant(2, 1.0) };
        let u = Configuration::clamped(domain, vec![0.0; 25], refs).unwrap();
        assert!(matches!(jk_window(&p, &u, 2, 0, 1, &[]), Err(Error::MissingLowerLevel(_))));
        let rep = jk_window(&p, &u, 2, -3, 3, &[(0.0, v)]).unwrap();
        assert_eq!(rep.value, 0.0);
    }
}
