use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::domain::{Axis, Domain, Ratio};
use crate::error::{Error, Result};

/// Anything that can be read at every lattice site.
pub trait Field {
    fn dim(&self) -> usize;
    fn at(&self, i: &[i64]) -> f64;
}

/// Reference configurations used outside the window.
///
/// `minus` and `plus` are read below and above the window on the newest
/// heteroclinic axis; reads that leave the window on an older axis use
/// `minus`. `lower` and `upper` bound the window values pointwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampRefs {
    pub minus: Configuration,
    pub plus: Configuration,
    pub lower: Configuration,
    pub upper: Configuration,
}

impl ClampRefs {
    /// Forward closure: tails `v` then `w`, box `[v, w]`.
    pub fn between(v: &Configuration, w: &Configuration) -> ClampRefs {
        ClampRefs { minus: v.clone(), plus: w.clone(), lower: v.clone(), upper: w.clone() }
    }

    /// Reverse closure: tails `w` then `v`, box `[v, w]`.
    pub fn reversed(v: &Configuration, w: &Configuration) -> ClampRefs {
        ClampRefs { minus: w.clone(), plus: v.clone(), lower: v.clone(), upper: w.clone() }
    }

    fn shifted(&self, j: i64, axis: usize) -> ClampRefs {
        ClampRefs {
            minus: self.minus.shift(j, axis),
            plus: self.plus.shift(j, axis),
            lower: self.lower.shift(j, axis),
            upper: self.upper.shift(j, axis),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Closure {
    Periodic,
    Clamp(Arc<ClampRefs>),
}

/// A lattice configuration: values on the fundamental window plus the rule
/// for reading everywhere else. Values are stored without the rotation
/// lift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    domain: Domain,
    values: Vec<f64>,
    closure: Closure,
}

const BOX_TOL: f64 = 1e-12;

impl Configuration {
    /// A fully periodic configuration.
    pub fn periodic(domain: Domain, values: Vec<f64>) -> Result<Configuration> {
        if domain.hetero_count() > 0 {
            return Err(Error::InvalidDomain("periodic closure needs a fully periodic domain".into()));
        }
        check_values(&domain, &values)?;
        Ok(Configuration { domain, values, closure: Closure::Periodic })
    }

    /// The constant configuration `c` on `Z^n`.
    pub fn constant(dim: usize, c: f64) -> Configuration {
        Configuration { domain: Domain::unit(dim), values: vec![c], closure: Closure::Periodic }
    }

    /// A window configuration clamped to reference configurations.
    pub fn clamped(domain: Domain, values: Vec<f64>, refs: ClampRefs) -> Result<Configuration> {
        if domain.hetero_count() == 0 {
            return Err(Error::InvalidDomain("clamp closure needs a heteroclinic axis".into()));
        }
        check_values(&domain, &values)?;
        for r in [&refs.minus, &refs.plus, &refs.lower, &refs.upper] {
            if r.dim() != domain.dim() {
                return Err(Error::MismatchedDomains(format!(
                    "reference has dimension {}, window has {}",
                    r.dim(),
                    domain.dim()
                )));
            }
        }
        let out = Configuration { domain, values, closure: Closure::Clamp(Arc::new(refs)) };
        if let Some((site, lo, x, hi)) = out.box_violation() {
            return Err(Error::NotOrdered(format!(
                "value {} at {:?} outside the box [{}, {}]",
                x, site, lo, hi
            )));
        }
        Ok(out)
    }

    /// Same domain and closure with new window values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Configuration> {
        match &self.closure {
            Closure::Periodic => Configuration::periodic(self.domain.clone(), values),
            Closure::Clamp(refs) => Configuration::clamped(self.domain.clone(), values, (**refs).clone()),
        }
    }

    /// Like [`with_values`](Self::with_values) without the box check.
    pub(crate) fn with_values_unchecked(&self, values: Vec<f64>) -> Configuration {
        debug_assert_eq!(values.len(), self.values.len());
        Configuration { domain: self.domain.clone(), values, closure: self.closure.clone() }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn closure(&self) -> &Closure {
        &self.closure
    }

    pub fn refs(&self) -> Option<&ClampRefs> {
        match &self.closure {
            Closure::Clamp(r) => Some(r),
            Closure::Periodic => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Value before the rotation lift.
    pub fn raw(&self, i: &[i64]) -> f64 {
        if let Closure::Clamp(refs) = &self.closure {
            let h = self.domain.hetero_count();
            if let Axis::Hetero { lo, hi } = self.domain.axis(h - 1) {
                let c = i[h - 1];
                if c < lo {
                    return refs.minus.raw(i);
                }
                if c > hi {
                    return refs.plus.raw(i);
                }
            }
            for a in 0..h - 1 {
                if let Axis::Hetero { lo, hi } = self.domain.axis(a) {
                    if i[a] < lo || i[a] > hi {
                        return refs.minus.raw(i);
                    }
                }
            }
        }
        let idx = self.domain.local_index(i).expect("window lookup");
        self.values[idx]
    }

    /// Total lookup, including the rotation lift.
    #[inline]
    pub fn lookup(&self, i: &[i64]) -> f64 {
        self.raw(i) + self.domain.lift(i)
    }

    /// Lower and upper box bounds at `i` (infinite for periodic closure).
    pub fn bounds(&self, i: &[i64]) -> (f64, f64) {
        match &self.closure {
            Closure::Periodic => (f64::NEG_INFINITY, f64::INFINITY),
            Closure::Clamp(refs) => (refs.lower.raw(i), refs.upper.raw(i)),
        }
    }

    fn box_violation(&self) -> Option<(Vec<i64>, f64, f64, f64)> {
        let refs = self.refs()?;
        for (idx, &x) in self.values.iter().enumerate() {
            let site = self.domain.site(idx);
            let lo = refs.lower.raw(&site);
            let hi = refs.upper.raw(&site);
            if x < lo - BOX_TOL || x > hi + BOX_TOL || x.is_nan() {
                return Some((site, lo, x, hi));
            }
        }
        None
    }

    /// `tau_{-j}` along `axis` (zero based): the result reads `u(i + j e_axis)`.
    pub fn shift(&self, j: i64, axis: usize) -> Configuration {
        let closure = match &self.closure {
            Closure::Periodic => Closure::Periodic,
            Closure::Clamp(refs) => Closure::Clamp(Arc::new(refs.shifted(j, axis))),
        };
        let lift = self.domain.alpha().map_or(0.0, |a| a[axis].times(j));
        match self.domain.axis(axis) {
            Axis::Hetero { lo, hi } => {
                let domain = self.domain.with_axis(axis, Axis::Hetero { lo: lo - j, hi: hi - j });
                let values = if lift == 0.0 { self.values.clone() } else { self.values.iter().map(|x| x + lift).collect() };
                Configuration { domain, values, closure }
            }
            Axis::Periodic { .. } => {
                let mut values = Vec::with_capacity(self.values.len());
                for idx in 0..self.values.len() {
                    let mut site = self.domain.site(idx);
                    site[axis] += j;
                    let src = self.domain.local_index(&site).expect("periodic axis");
                    values.push(self.values[src] + lift);
                }
                Configuration { domain: self.domain.clone(), values, closure }
            }
        }
    }

    /// The same configuration seen through a different window. Every
    /// heteroclinic axis may change its bounds; periodic axes must match.
    pub fn reembed(&self, domain: &Domain) -> Result<Configuration> {
        if domain.dim() != self.dim() {
            return Err(Error::MismatchedDomains("dimension differs".into()));
        }
        for (a, (x, y)) in self.domain.axes().iter().zip(domain.axes()).enumerate() {
            if x.is_hetero() != y.is_hetero() || (!x.is_hetero() && x != y) {
                return Err(Error::MismatchedDomains(format!("axis {} differs in kind or period", a)));
            }
        }
        let values = domain.sites().iter().map(|s| self.raw(s)).collect();
        Ok(Configuration { domain: domain.clone(), values, closure: self.closure.clone() })
    }

    /// Inclusive coordinate ranges that cover every site where this
    /// configuration or its references can differ from their constant
    /// tails. Periodic axes give one period.
    pub fn reach(&self) -> Vec<(i64, i64)> {
        let mut out = self.domain.ranges();
        if let Some(refs) = self.refs() {
            for r in [&refs.minus, &refs.plus, &refs.lower, &refs.upper] {
                let inner = r.reach();
                for a in 0..out.len() {
                    if self.domain.axis(a).is_hetero() && r.domain.axis(a).is_hetero() {
                        out[a].0 = out[a].0.min(inner[a].0);
                        out[a].1 = out[a].1.max(inner[a].1);
                    }
                }
            }
        }
        out
    }

    /// Marks the configuration as lifted by the rotation vector `alpha`.
    pub fn lift_alpha(&self, alpha: &[Ratio]) -> Result<Configuration> {
        if self.domain.alpha().is_some() {
            return Err(Error::InvalidArgument("configuration is already lifted".into()));
        }
        let domain = Domain::new(self.domain.axes().to_vec(), Some(alpha.to_vec()))?;
        Ok(Configuration { domain, values: self.values.clone(), closure: self.closure.clone() })
    }

    /// Drops the rotation lift. Window values are untouched, so this is an
    /// exact inverse of [`lift_alpha`](Self::lift_alpha).
    pub fn unlift_alpha(&self) -> Configuration {
        Configuration {
            domain: self.domain.with_alpha(None),
            values: self.values.clone(),
            closure: self.closure.clone(),
        }
    }
}

impl Field for Configuration {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn at(&self, i: &[i64]) -> f64 {
        self.lookup(i)
    }
}

fn check_values(domain: &Domain, values: &[f64]) -> Result<()> {
    if values.len() != domain.len() {
        return Err(Error::InvalidDomain(format!(
            "{} values for a window of {} sites",
            values.len(),
            domain.len()
        )));
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidDomain("values must be finite".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kink(h: i64) -> Configuration {
        let domain = Domain::hetero(1, h, &[]).unwrap();
        let values = domain.sites().iter().map(|s| 0.5 + 0.5 * (s[0] as f64 / 2.0).tanh()).collect();
        let refs = ClampRefs::between(&Configuration::constant(1, 0.0), &Configuration::constant(1, 1.0));
        Configuration::clamped(domain, values, refs).unwrap()
    }

    #[test]
    fn lookup_is_total() {
        let u = kink(3);
        assert_eq!(u.lookup(&[-100]), 0.0);
        assert_eq!(u.lookup(&[100]), 1.0);
        assert!((u.lookup(&[0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn box_is_enforced() {
        let u = kink(2);
        let mut bad = u.values().to_vec();
        bad[0] = -0.5;
        assert!(matches!(u.with_values(bad), Err(Error::NotOrdered(_))));
    }

    #[test]
    fn shift_reads_forward() {
        let u = kink(5);
        let s = u.shift(1, 0);
        for i in -8..8 {
            assert_eq!(s.lookup(&[i]), u.lookup(&[i + 1]));
        }
        let back = s.shift(-1, 0);
        assert_eq!(back, u);
    }

    #[test]
    fn periodic_shift_rotates() {
        let d = Domain::periodic(&[3]).unwrap();
        let u = Configuration::periodic(d, vec![1.0, 2.0, 3.0]).unwrap();
        let s = u.shift(1, 0);
        assert_eq!(s.values(), &[2.0, 3.0, 1.0]);
        assert_eq!(s.shift(2, 0), u);
    }

    #[test]
    fn lifted_lookup_and_period() {
        let d = Domain::periodic(&[2]).unwrap();
        let u = Configuration::periodic(d, vec![0.1, 0.3]).unwrap();
        let half = Ratio::new(1, 2).unwrap();
        let lifted = u.lift_alpha(&[half]).unwrap();
        for i in -6..6 {
            assert!((lifted.lookup(&[i + 2]) - lifted.lookup(&[i]) - 1.0).abs() < 1e-14);
        }
        assert_eq!(lifted.unlift_alpha(), u);
        let shifted = lifted.shift(1, 0);
        for i in -4..4 {
            assert!((shifted.lookup(&[i]) - lifted.lookup(&[i + 1])).abs() < 1e-15);
        }
    }

    #[test]
    fn reembed_keeps_lookups() {
        let u = kink(3);
        let wide = u.reembed(&Domain::hetero(1, 6, &[]).unwrap()).unwrap();
        for i in -10..10 {
            assert_eq!(wide.lookup(&[i]), u.lookup(&[i]));
        }
        assert_eq!(wide.reach(), vec![(-6, 6)]);
    }
}
