//! Spectral projected gradient on a box.
//!
//! Barzilai-Borwein steps with a nonmonotone backtracking line search. The
//! stopping measure is the sup norm of the projected gradient step
//! `P(x - g) - x`, which equals the plain gradient sup on free coordinates.

use serde::{Deserialize, Serialize};

pub trait Objective {
    fn dim(&self) -> usize;
    /// Writes the gradient into `grad` and returns the value.
    fn eval_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepRule {
    /// Length of the nonmonotone reference window.
    pub memory: usize,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Backtracking contraction factor.
    pub shrink: f64,
    pub min_spectral: f64,
    pub max_spectral: f64,
    /// Largest sup-norm displacement of a trial step.
    pub max_move: f64,
}

impl Default for StepRule {
    fn default() -> StepRule {
        StepRule { memory: 10, armijo: 1e-4, shrink: 0.5, min_spectral: 1e-12, max_spectral: 1e12, max_move: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub pg_sup: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value every 100 iterations, plus the final one.
    pub trace: Vec<f64>,
}

#[inline]
fn project(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

fn pg_sup(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut sup = 0.0f64;
    for i in 0..x.len() {
        sup = sup.max((project(x[i] - g[i], lower[i], upper[i]) - x[i]).abs());
    }
    sup
}

pub fn minimize_box<O: Objective + ?Sized>(
    obj: &O,
    lower: &[f64],
    upper: &[f64],
    x0: &[f64],
    tol: f64,
    max_iters: usize,
    rule: &StepRule,
) -> Outcome {
    let n = obj.dim();
    assert_eq!(lower.len(), n);
    assert_eq!(upper.len(), n);
    assert_eq!(x0.len(), n);
    let mut x: Vec<f64> = (0..n).map(|i| project(x0[i], lower[i], upper[i])).collect();
    let mut g = vec![0.0; n];
    let mut f = obj.eval_grad(&x, &mut g);
    let mut trace = vec![f];
    let mut history = vec![f];
    let mut pg = pg_sup(&x, &g, lower, upper);
    let mut lambda = if pg > 0.0 { (1.0 / pg).clamp(rule.min_spectral, rule.max_spectral) } else { 1.0 };

    let mut d = vec![0.0; n];
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut iterations = 0;
    while iterations < max_iters {
        if pg <= tol {
            break;
        }
        iterations += 1;
        let gsup = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if gsup > 0.0 {
            lambda = lambda.min(rule.max_move / gsup);
        }
        let mut gtd = 0.0;
        for i in 0..n {
            d[i] = project(x[i] - lambda * g[i], lower[i], upper[i]) - x[i];
            gtd += g[i] * d[i];
        }
        let fmax = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // energies stop resolving decrease below the rounding floor
        let slack = 1e-14 * (1.0 + f.abs());
        let mut t = 1.0;
        let mut fnew;
        loop {
            for i in 0..n {
                xn[i] = x[i] + t * d[i];
            }
            fnew = obj.eval_grad(&xn, &mut gn);
            if fnew <= fmax + rule.armijo * t * gtd + slack || t < 1e-20 {
                break;
            }
            t *= rule.shrink;
        }
        let mut sts = 0.0;
        let mut sty = 0.0;
        for i in 0..n {
            let s = xn[i] - x[i];
            let y = gn[i] - g[i];
            sts += s * s;
            sty += s * y;
        }
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut g, &mut gn);
        f = fnew;
        lambda = if sty > 0.0 { (sts / sty).clamp(rule.min_spectral, rule.max_spectral) } else { rule.max_spectral.min(1e3) };
        history.push(f);
        if history.len() > rule.memory {
            history.remove(0);
        }
        pg = pg_sup(&x, &g, lower, upper);
        if iterations % 100 == 0 {
            trace.push(f);
        }
    }
    trace.push(f);
    Outcome { x, value: f, pg_sup: pg, iterations, converged: pg <= tol, trace }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        diag: Vec<f64>,
        target: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.diag.len()
        }
        fn eval_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            let mut f = 0.0;
            for i in 0..x.len() {
                let d = x[i] - self.target[i];
                f += 0.5 * self.diag[i] * d * d;
                g[i] = self.diag[i] * d;
            }
            f
        }
    }

    #[test]
    fn unconstrained_quadratic() {
        let q = Quadratic { diag: vec![1.0, 10.0, 100.0], target: vec![1.0, -2.0, 3.0] };
        let inf = vec![f64::INFINITY; 3];
        let ninf = vec![f64::NEG_INFINITY; 3];
        let out = minimize_box(&q, &ninf, &inf, &[0.0; 3], 1e-12, 10_000, &StepRule::default());
        assert!(out.converged);
        for (x, t) in out.x.iter().zip(&q.target) {
            assert!((x - t).abs() < 1e-11);
        }
    }

    #[test]
    fn active_bounds() {
        let q = Quadratic { diag: vec![1.0, 1.0], target: vec![5.0, -5.0] };
        let out = minimize_box(&q, &[0.0, -1.0], &[1.0, 1.0], &[0.5, 0.5], 1e-12, 1000, &StepRule::default());
        assert!(out.converged);
        assert_eq!(out.x, vec![1.0, -1.0]);
    }

    #[test]
    fn stops_at_max_iters() {
        let q = Quadratic { diag: vec![1.0, 3.0, 9.0, 27.0], target: vec![1.0; 4] };
        let inf = vec![f64::INFINITY; 4];
        let ninf = vec![f64::NEG_INFINITY; 4];
        let out = minimize_box(&q, &ninf, &inf, &[0.0; 4], 0.0, 3, &StepRule::default());
        assert_eq!(out.iterations, 3);
    }
}
