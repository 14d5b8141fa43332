//! Compiles a window configuration into a flat objective over its free
//! values: every energy site that can see a free value, with each window
//! slot resolved to either a free variable or a frozen number.

use crate::error::{Error, Result};
use crate::lattice::{box_sites, Axis, Configuration};
use crate::optimize::Objective;
use crate::potential::LocalPotential;

#[derive(Debug, Clone, Copy)]
enum Slot {
    /// Free variable plus the rotation lift at that site.
    Free(usize, f64),
    Fixed(f64),
}

pub(crate) struct Assembly<'a> {
    potential: &'a LocalPotential,
    card: usize,
    slots: Vec<Slot>,
    n_free: usize,
    /// Window index of each free variable.
    pub free_window: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub x0: Vec<f64>,
    template: Configuration,
    pinned: Vec<(usize, f64)>,
}

impl<'a> Assembly<'a> {
    pub fn new(potential: &'a LocalPotential, template: &Configuration, pinned: &[(Vec<i64>, f64)]) -> Result<Assembly<'a>> {
        let domain = template.domain();
        if domain.dim() != potential.dimension() {
            return Err(Error::MismatchedDomains(format!(
                "potential has dimension {}, configuration {}",
                potential.dimension(),
                domain.dim()
            )));
        }
        let mut pin_at = vec![None; domain.len()];
        let mut pinned_idx = Vec::with_capacity(pinned.len());
        for (site, value) in pinned {
            let idx = domain
                .local_index(site)
                .ok_or_else(|| Error::InvalidArgument(format!("pinned site {:?} outside the window", site)))?;
            let raw = value - domain.lift(site);
            pin_at[idx] = Some(raw);
            pinned_idx.push((idx, raw));
        }

        let mut var_of = vec![usize::MAX; domain.len()];
        let mut free_window = Vec::new();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut x0 = Vec::new();
        for idx in 0..domain.len() {
            if pin_at[idx].is_some() {
                continue;
            }
            let site = domain.site(idx);
            let (lo, hi) = template.bounds(&site);
            var_of[idx] = free_window.len();
            free_window.push(idx);
            lower.push(lo);
            upper.push(hi);
            x0.push(template.values()[idx]);
        }

        let r = potential.range() as i64;
        let ranges: Vec<(i64, i64)> = domain
            .axes()
            .iter()
            .map(|a| match *a {
                Axis::Hetero { lo, hi } => (lo - r, hi + r),
                Axis::Periodic { period } => (0, period - 1),
            })
            .collect();
        let card = potential.window_size();
        let mut slots = Vec::new();
        let mut site = vec![0; domain.dim()];
        for j in box_sites(&ranges) {
            let start = slots.len();
            let mut touches_free = false;
            for k in potential.ball().offsets() {
                for a in 0..site.len() {
                    site[a] = j[a] + k[a];
                }
                let slot = match domain.local_index(&site) {
                    Some(idx) => match pin_at[idx] {
                        Some(raw) => Slot::Fixed(raw + domain.lift(&site)),
                        None => {
                            touches_free = true;
                            Slot::Free(var_of[idx], domain.lift(&site))
                        }
                    },
                    None => Slot::Fixed(template.lookup(&site)),
                };
                slots.push(slot);
            }
            if !touches_free {
                slots.truncate(start);
            }
        }
        Ok(Assembly {
            potential,
            card,
            slots,
            n_free: free_window.len(),
            free_window,
            lower,
            upper,
            x0,
            template: template.clone(),
            pinned: pinned_idx,
        })
    }

    /// Rebuilds the window configuration from free values.
    pub fn configuration(&self, x: &[f64]) -> Configuration {
        let mut values = self.template.values().to_vec();
        for (v, &idx) in self.free_window.iter().enumerate() {
            values[idx] = x[v];
        }
        for &(idx, raw) in &self.pinned {
            values[idx] = raw;
        }
        self.template.with_values_unchecked(values)
    }
}

impl Objective for Assembly<'_> {
    fn dim(&self) -> usize {
        self.n_free
    }

    fn eval_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut window = vec![0.0; self.card];
        let mut local = vec![0.0; self.card];
        let mut total = 0.0;
        for chunk in self.slots.chunks_exact(self.card) {
            for (w, slot) in window.iter_mut().zip(chunk) {
                *w = match *slot {
                    Slot::Free(v, lift) => x[v] + lift,
                    Slot::Fixed(value) => value,
                };
            }
            total += self.potential.eval_grad_unchecked(&window, &mut local);
            for (g, slot) in local.iter().zip(chunk) {
                if let Slot::Free(v, _) = *slot {
                    grad[v] += g;
                }
            }
        }
        total
    }
}
