use num_integer::Integer;
use serde::{Deserialize, Serialize};

use super::config::{Closure, Configuration};
use super::domain::{box_sites, Axis, Domain};
use crate::error::{Error, Result};

/// Differences at or below this size count as equality in tolerant
/// comparisons.
pub const STRICT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Less,
    Equal,
    Greater,
    Incomparable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub relation: Relation,
    /// `<` (or `>`) holds at every probed site.
    pub strict_everywhere: bool,
    /// Sites where the difference exceeds the tolerance.
    pub strict_count: usize,
    pub probed: usize,
    /// First sites with `u < v` and `u > v`.
    pub first_below: Option<Vec<i64>>,
    pub first_above: Option<Vec<i64>>,
}

/// Per-axis probe ranges covering both configurations plus `ring` extra
/// sites on heteroclinic axes.
pub fn probe_ranges(u: &Configuration, v: &Configuration, ring: i64) -> Result<Vec<(i64, i64)>> {
    if u.dim() != v.dim() {
        return Err(Error::MismatchedDomains(format!("dimensions {} and {}", u.dim(), v.dim())));
    }
    let (ru, rv) = (u.reach(), v.reach());
    let mut out = Vec::with_capacity(u.dim());
    for a in 0..u.dim() {
        let range = match (u.domain().axis(a), v.domain().axis(a)) {
            (Axis::Periodic { period: p }, Axis::Periodic { period: q }) => (0, p.lcm(&q) - 1),
            (Axis::Hetero { .. }, Axis::Periodic { .. }) => (ru[a].0 - ring, ru[a].1 + ring),
            (Axis::Periodic { .. }, Axis::Hetero { .. }) => (rv[a].0 - ring, rv[a].1 + ring),
            (Axis::Hetero { .. }, Axis::Hetero { .. }) => {
                (ru[a].0.min(rv[a].0) - ring, ru[a].1.max(rv[a].1) + ring)
            }
        };
        out.push(range);
    }
    Ok(out)
}

/// Exact comparison of `u` and `v` over `sites`, defaulting to both
/// windows plus one closure ring.
pub fn compare(u: &Configuration, v: &Configuration, sites: Option<&[Vec<i64>]>) -> Result<Comparison> {
    compare_tol(u, v, sites, 0.0)
}

/// Comparison in which differences of size at most `tol` count as equal.
pub fn compare_tol(
    u: &Configuration,
    v: &Configuration,
    sites: Option<&[Vec<i64>]>,
    tol: f64,
) -> Result<Comparison> {
    let owned;
    let sites = match sites {
        Some(s) => {
            if u.dim() != v.dim() {
                return Err(Error::MismatchedDomains(format!("dimensions {} and {}", u.dim(), v.dim())));
            }
            s
        }
        None => {
            owned = box_sites(&probe_ranges(u, v, 1)?);
            &owned[..]
        }
    };
    let mut below = 0usize;
    let mut above = 0usize;
    let mut first_below = None;
    let mut first_above = None;
    for s in sites {
        let d = u.lookup(s) - v.lookup(s);
        if d < -tol {
            below += 1;
            first_below.get_or_insert_with(|| s.clone());
        } else if d > tol {
            above += 1;
            first_above.get_or_insert_with(|| s.clone());
        }
    }
    let relation = match (below > 0, above > 0) {
        (false, false) => Relation::Equal,
        (true, false) => Relation::Less,
        (false, true) => Relation::Greater,
        (true, true) => Relation::Incomparable,
    };
    let strict_count = below.max(above);
    Ok(Comparison {
        relation,
        strict_everywhere: relation != Relation::Equal
            && relation != Relation::Incomparable
            && strict_count == sites.len(),
        strict_count,
        probed: sites.len(),
        first_below,
        first_above,
    })
}

/// Pointwise `(max(u, v), min(u, v))`.
///
/// Periodic inputs must share their domain. Clamped inputs must share
/// their closure references; the results live on the union window.
pub fn lattice_max_min(u: &Configuration, v: &Configuration) -> Result<(Configuration, Configuration)> {
    if u.dim() != v.dim() {
        return Err(Error::MismatchedDomains(format!("dimensions {} and {}", u.dim(), v.dim())));
    }
    match (u.closure(), v.closure()) {
        (Closure::Periodic, Closure::Periodic) => {
            if u.domain() != v.domain() {
                return Err(Error::MismatchedDomains("periodic domains differ".into()));
            }
            let hi = u.values().iter().zip(v.values()).map(|(a, b)| a.max(*b)).collect();
            let lo = u.values().iter().zip(v.values()).map(|(a, b)| a.min(*b)).collect();
            Ok((u.with_values_unchecked(hi), u.with_values_unchecked(lo)))
        }
        (Closure::Clamp(a), Closure::Clamp(b)) => {
            if a != b {
                return Err(Error::MismatchedDomains("closure references differ".into()));
            }
            if u.domain().alpha().is_some() || v.domain().alpha().is_some() {
                return Err(Error::MismatchedDomains("lifted clamped configurations".into()));
            }
            let mut axes = u.domain().axes().to_vec();
            for (k, axis) in axes.iter_mut().enumerate() {
                match (*axis, v.domain().axis(k)) {
                    (Axis::Hetero { lo: a, hi: b }, Axis::Hetero { lo: c, hi: d }) => {
                        *axis = Axis::Hetero { lo: a.min(c), hi: b.max(d) };
                    }
                    (x, y) if x == y => {}
                    _ => return Err(Error::MismatchedDomains(format!("axis {} differs", k))),
                }
            }
            let domain = Domain::new(axes, None)?;
            let uu = u.reembed(&domain)?;
            let vv = v.reembed(&domain)?;
            let hi = uu.values().iter().zip(vv.values()).map(|(a, b)| a.max(*b)).collect();
            let lo = uu.values().iter().zip(vv.values()).map(|(a, b)| a.min(*b)).collect();
            Ok((uu.with_values_unchecked(hi), uu.with_values_unchecked(lo)))
        }
        _ => Err(Error::MismatchedDomains("closure kinds differ".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationEstimate {
    /// The rotation vector: the lift for rational configurations, zero for
    /// bounded ones.
    pub alpha: Vec<f64>,
    /// Finite-radius slope `(u(R e_a) - u(-R e_a)) / 2R`, a diagnostic.
    pub slope: Vec<f64>,
    /// Largest `|u(i) - u(0) - <alpha, i>|` over `|i|_1 <= R`.
    pub max_deviation: f64,
    pub bound_ok: bool,
}

pub fn rotation_vector(u: &Configuration, radius: i64) -> Result<RotationEstimate> {
    if radius < 1 {
        return Err(Error::InvalidArgument("radius must be at least 1".into()));
    }
    let n = u.dim();
    let alpha: Vec<f64> = match u.domain().alpha() {
        Some(a) => a.iter().map(|r| r.to_f64()).collect(),
        None => vec![0.0; n],
    };
    let mut slope = Vec::with_capacity(n);
    for a in 0..n {
        let mut plus = vec![0; n];
        let mut minus = vec![0; n];
        plus[a] = radius;
        minus[a] = -radius;
        slope.push((u.lookup(&plus) - u.lookup(&minus)) / (2 * radius) as f64);
    }
    let origin = vec![0; n];
    let u0 = u.lookup(&origin);
    let mut max_deviation = 0.0f64;
    for s in box_sites(&vec![(-radius, radius); n]) {
        if s.iter().map(|c| c.abs()).sum::<i64>() > radius {
            continue;
        }
        let linear = u.domain().lift(&s);
        max_deviation = max_deviation.max((u.lookup(&s) - u0 - linear).abs());
    }
    Ok(RotationEstimate { alpha, slope, max_deviation, bound_ok: max_deviation <= 1.0 + STRICT_TOL })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffWitness {
    pub axis: usize,
    pub shift: i64,
    /// A site where the shifted configuration lies below, and one where it
    /// lies above.
    pub below: Vec<i64>,
    pub above: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffReport {
    pub is_birkhoff: bool,
    pub witness: Option<BirkhoffWitness>,
}

/// Checks that every translate `tau_j^k u` with `|j| <= j_range` is
/// comparable with `u`, using the tolerant order.
pub fn birkhoff_check(u: &Configuration, j_range: i64, probe: Option<&[Vec<i64>]>) -> Result<BirkhoffReport> {
    if j_range < 1 {
        return Err(Error::InvalidArgument("j_range must be at least 1".into()));
    }
    let owned;
    let probe = match probe {
        Some(p) => p,
        None => {
            owned = box_sites(&probe_ranges(u, u, 1 + j_range)?);
            &owned[..]
        }
    };
    for axis in 0..u.dim() {
        for j in -j_range..=j_range {
            if j == 0 {
                continue;
            }
            let shifted = u.shift(j, axis);
            let c = compare_tol(&shifted, u, Some(probe), STRICT_TOL)?;
            if c.relation == Relation::Incomparable {
                return Ok(BirkhoffReport {
                    is_birkhoff: false,
                    witness: Some(BirkhoffWitness {
                        axis,
                        shift: j,
                        below: c.first_below.unwrap(),
                        above: c.first_above.unwrap(),
                    }),
                });
            }
        }
    }
    Ok(BirkhoffReport { is_birkhoff: true, witness: None })
}

/// `sum |u(i) - v(i)|` over the slab `{i : i_axis = index}`, restricted to
/// the sites where either configuration can leave its constant tails.
pub fn norm_slab(u: &Configuration, v: &Configuration, axis: usize, index: i64) -> Result<f64> {
    if axis >= u.dim() {
        return Err(Error::InvalidArgument(format!("axis {} out of range for dimension {}", axis, u.dim())));
    }
    let mut ranges = probe_ranges(u, v, 1)?;
    ranges[axis] = (index, index);
    Ok(box_sites(&ranges).iter().map(|s| (u.lookup(s) - v.lookup(s)).abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::config::ClampRefs;

    fn profile(values: &[f64]) -> Configuration {
        let h = (values.len() / 2) as i64;
        let domain = Domain::hetero(1, h, &[]).unwrap();
        let refs = ClampRefs {
            minus: Configuration::constant(1, 0.0),
            plus: Configuration::constant(1, 1.0),
            lower: Configuration::constant(1, -1.0),
            upper: Configuration::constant(1, 2.0),
        };
        Configuration::clamped(domain, values.to_vec(), refs).unwrap()
    }

    fn periodic(values: &[f64]) -> Configuration {
        Configuration::periodic(Domain::periodic(&[values.len() as i64]).unwrap(), values.to_vec()).unwrap()
    }

    #[test]
    fn basic_relations() {
        let zero = Configuration::constant(1, 0.0);
        let one = Configuration::constant(1, 1.0);
        let c = compare(&zero, &one, None).unwrap();
        assert_eq!(c.relation, Relation::Less);
        assert!(c.strict_everywhere);
        assert_eq!(compare(&zero, &zero, None).unwrap().relation, Relation::Equal);
        let a = periodic(&[0.0, 1.0]);
        let b = periodic(&[1.0, 0.0]);
        assert_eq!(compare(&a, &b, None).unwrap().relation, Relation::Incomparable);
        assert!(compare(&zero, &Configuration::constant(2, 0.0), None).is_err());
    }

    #[test]
    fn max_min_of_constants() {
        let (hi, lo) = lattice_max_min(&Configuration::constant(1, 0.0), &Configuration::constant(1, 1.0)).unwrap();
        assert_eq!(hi.values(), &[1.0]);
        assert_eq!(lo.values(), &[0.0]);
    }

    #[test]
    fn birkhoff_examples() {
        let inc = profile(&[0.1, 0.2, 0.5, 0.8, 0.9]);
        assert!(birkhoff_check(&inc, 3, None).unwrap().is_birkhoff);
        let bad = profile(&[0.05, 0.9, 0.1, 0.95, 0.97]);
        let report = birkhoff_check(&bad, 3, None).unwrap();
        assert!(!report.is_birkhoff);
        assert!(report.witness.is_some());
        assert!(birkhoff_check(&Configuration::constant(2, 0.3), 2, None).unwrap().is_birkhoff);
    }

    #[test]
    fn rotation_of_bounded_and_lifted() {
        let r = rotation_vector(&Configuration::constant(1, 0.5), 10).unwrap();
        assert_eq!(r.alpha, vec![0.0]);
        assert!(r.bound_ok);
        let half = crate::lattice::domain::Ratio::new(1, 2).unwrap();
        let lifted = periodic(&[0.0, 0.0]).lift_alpha(&[half]).unwrap();
        let r = rotation_vector(&lifted, 10).unwrap();
        assert_eq!(r.alpha, vec![0.5]);
        assert_eq!(r.slope, vec![0.5]);
        assert!(r.bound_ok);
    }

    #[test]
    fn slab_norm() {
        let u = profile(&[0.1, 0.2, 0.5, 0.8, 0.9]);
        assert_eq!(norm_slab(&u, &u, 0, 0).unwrap(), 0.0);
        let mut bumped = u.values().to_vec();
        bumped[2] += 0.25;
        let w = u.with_values(bumped).unwrap();
        assert_eq!(norm_slab(&w, &u, 0, 0).unwrap(), 0.25);
        assert_eq!(norm_slab(&w, &u, 0, 1).unwrap(), 0.0);
        assert!(norm_slab(&w, &u, 3, 0).is_err());
    }
}
