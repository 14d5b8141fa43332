use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One lattice axis: either a finite heteroclinic window with clamped
/// tails, or a periodic axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Axis {
    Hetero { lo: i64, hi: i64 },
    Periodic { period: i64 },
}

impl Axis {
    pub fn len(&self) -> usize {
        match *self {
            Axis::Hetero { lo, hi } => (hi - lo + 1) as usize,
            Axis::Periodic { period } => period as usize,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_hetero(&self) -> bool {
        matches!(self, Axis::Hetero { .. })
    }

    /// Inclusive coordinate range of the fundamental window.
    pub fn range(&self) -> (i64, i64) {
        match *self {
            Axis::Hetero { lo, hi } => (lo, hi),
            Axis::Periodic { period } => (0, period - 1),
        }
    }
}

/// A reduced rational `num / den` with `den >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "[i64; 2]", from = "[i64; 2]")]
pub struct Ratio {
    pub num: i64,
    pub den: i64,
}

impl Ratio {
    pub fn new(num: i64, den: i64) -> Result<Ratio> {
        if den < 1 {
            return Err(Error::InvalidDomain(format!("denominator must be positive, got {}", den)));
        }
        if num.gcd(&den) != 1 {
            return Err(Error::InvalidDomain(format!("{}/{} is not in lowest terms", num, den)));
        }
        Ok(Ratio { num, den })
    }

    pub fn zero() -> Ratio {
        Ratio { num: 0, den: 1 }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `num * i / den`, correctly rounded.
    #[inline]
    pub fn times(self, i: i64) -> f64 {
        (self.num * i) as f64 / self.den as f64
    }
}

impl From<Ratio> for [i64; 2] {
    fn from(r: Ratio) -> [i64; 2] {
        [r.num, r.den]
    }
}

impl From<[i64; 2]> for Ratio {
    fn from(p: [i64; 2]) -> Ratio {
        Ratio { num: p[0], den: p[1] }
    }
}

/// Lattice geometry of a configuration window.
///
/// Heteroclinic axes form a prefix; the last of them is the newest one,
/// along which the clamp references switch from `minus` to `plus`. A
/// rotation vector, when present, lifts lookups by `alpha . i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    axes: Vec<Axis>,
    #[serde(default)]
    alpha: Option<Vec<Ratio>>,
}

impl Domain {
    pub fn new(axes: Vec<Axis>, alpha: Option<Vec<Ratio>>) -> Result<Domain> {
        if axes.is_empty() {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        let mut seen_periodic = false;
        for (a, axis) in axes.iter().enumerate() {
            match *axis {
                Axis::Hetero { lo, hi } => {
                    if seen_periodic {
                        return Err(Error::InvalidDomain(format!(
                            "axis {} is heteroclinic after a periodic axis",
                            a
                        )));
                    }
                    if lo > hi {
                        return Err(Error::InvalidDomain(format!("axis {}: lo {} > hi {}", a, lo, hi)));
                    }
                }
                Axis::Periodic { period } => {
                    seen_periodic = true;
                    if period < 1 {
                        return Err(Error::InvalidDomain(format!("axis {}: period {} < 1", a, period)));
                    }
                }
            }
        }
        if let Some(alpha) = &alpha {
            if alpha.len() != axes.len() {
                return Err(Error::InvalidDomain(format!(
                    "rotation vector has {} entries for {} axes",
                    alpha.len(),
                    axes.len()
                )));
            }
            for (a, (axis, ratio)) in axes.iter().zip(alpha).enumerate() {
                match *axis {
                    Axis::Periodic { period } => {
                        if period % ratio.den != 0 {
                            return Err(Error::InvalidDomain(format!(
                                "axis {}: period {} is not a multiple of the denominator {}",
                                a, period, ratio.den
                            )));
                        }
                    }
                    Axis::Hetero { .. } => {
                        return Err(Error::InvalidDomain(
                            "a rotation vector requires every axis to be periodic".into(),
                        ))
                    }
                }
            }
        }
        Ok(Domain { axes, alpha })
    }

    /// Fully periodic domain with the given periods.
    pub fn periodic(periods: &[i64]) -> Result<Domain> {
        Domain::new(periods.iter().map(|&period| Axis::Periodic { period }).collect(), None)
    }

    /// `n` periodic axes of period one: the domain of a constant.
    pub fn unit(dim: usize) -> Domain {
        Domain { axes: vec![Axis::Periodic { period: 1 }; dim], alpha: None }
    }

    /// `k` heteroclinic axes of half-width `h` followed by periodic axes.
    pub fn hetero(k: usize, half_width: i64, periods: &[i64]) -> Result<Domain> {
        let mut axes = vec![Axis::Hetero { lo: -half_width, hi: half_width }; k];
        axes.extend(periods.iter().map(|&period| Axis::Periodic { period }));
        Domain::new(axes, None)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> Axis {
        self.axes[a]
    }

    pub fn alpha(&self) -> Option<&[Ratio]> {
        self.alpha.as_deref()
    }

    /// Number of heteroclinic axes.
    pub fn hetero_count(&self) -> usize {
        self.axes.iter().take_while(|a| a.is_hetero()).count()
    }

    /// Number of sites in the fundamental window.
    pub fn len(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ranges(&self) -> Vec<(i64, i64)> {
        self.axes.iter().map(Axis::range).collect()
    }

    /// Row-major index of `i` after periodic reduction, or `None` when a
    /// heteroclinic coordinate falls outside the window.
    #[inline]
    pub fn local_index(&self, i: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for (axis, &c) in self.axes.iter().zip(i) {
            let (offset, len) = match *axis {
                Axis::Hetero { lo, hi } => {
                    if c < lo || c > hi {
                        return None;
                    }
                    (c - lo, hi - lo + 1)
                }
                Axis::Periodic { period } => (c.rem_euclid(period), period),
            };
            idx = idx * len as usize + offset as usize;
        }
        Some(idx)
    }

    /// Coordinates of the window site with row-major index `idx`.
    pub fn site(&self, mut idx: usize) -> Vec<i64> {
        let mut out = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            let len = self.axes[a].len();
            let (lo, _) = self.axes[a].range();
            out[a] = lo + (idx % len) as i64;
            idx /= len;
        }
        out
    }

    pub fn sites(&self) -> Vec<Vec<i64>> {
        box_sites(&self.ranges())
    }

    /// `alpha . i`, or zero outside rational mode.
    #[inline]
    pub fn lift(&self, i: &[i64]) -> f64 {
        match &self.alpha {
            None => 0.0,
            Some(alpha) => alpha.iter().zip(i).map(|(r, &c)| r.times(c)).sum(),
        }
    }

    pub(crate) fn with_axis(&self, a: usize, axis: Axis) -> Domain {
        let mut out = self.clone();
        out.axes[a] = axis;
        out
    }

    pub(crate) fn with_alpha(&self, alpha: Option<Vec<Ratio>>) -> Domain {
        Domain { axes: self.axes.clone(), alpha }
    }
}

/// All sites of an axis-aligned box, lexicographic with the last axis
/// fastest.
pub fn box_sites(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    if ranges.iter().any(|&(lo, hi)| lo > hi) {
        return out;
    }
    let mut current: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        out.push(current.clone());
        let mut a = ranges.len();
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            if current[a] < ranges[a].1 {
                current[a] += 1;
                break;
            }
            current[a] = ranges[a].0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_layouts() {
        assert!(Domain::new(vec![], None).is_err());
        assert!(Domain::new(vec![Axis::Periodic { period: 1 }, Axis::Hetero { lo: 0, hi: 1 }], None).is_err());
        assert!(Domain::new(vec![Axis::Hetero { lo: 2, hi: 1 }], None).is_err());
        assert!(Domain::periodic(&[0]).is_err());
        assert!(Ratio::new(2, 4).is_err());
        assert!(Ratio::new(1, 0).is_err());
        let half = Ratio::new(1, 2).unwrap();
        assert!(Domain::new(vec![Axis::Periodic { period: 3 }], Some(vec![half])).is_err());
        assert!(Domain::new(vec![Axis::Periodic { period: 4 }], Some(vec![half])).is_ok());
    }

    #[test]
    fn index_round_trip() {
        let d = Domain::hetero(1, 3, &[2, 3]).unwrap();
        assert_eq!(d.len(), 7 * 6);
        for idx in 0..d.len() {
            assert_eq!(d.local_index(&d.site(idx)), Some(idx));
        }
        assert_eq!(d.local_index(&[4, 0, 0]), None);
        assert_eq!(d.local_index(&[0, 2, -1]), d.local_index(&[0, 0, 2]));
    }

    #[test]
    fn lift_is_exact_for_halves() {
        let d = Domain::new(vec![Axis::Periodic { period: 2 }], Some(vec![Ratio::new(1, 2).unwrap()])).unwrap();
        assert_eq!(d.lift(&[5]), 2.5);
        assert_eq!(d.lift(&[-3]), -1.5);
    }

    #[test]
    fn box_sites_order() {
        let s = box_sites(&[(0, 1), (-1, 0)]);
        assert_eq!(s, vec![vec![0, -1], vec![0, 0], vec![1, -1], vec![1, 0]]);
        assert!(box_sites(&[(1, 0)]).is_empty());
    }
}
