//! The local interaction potential `s` on the ball `B_0^r`.
//!
//! The built-in family is the Frenkel-Kontorova form
//!
//! ```text
//! s(w) = V(w(0)) + coupling / (8n) * sum_{|k| = 1} (w(k) - w(0))^2 + perturbations(w(0))
//! ```
//!
//! where `V` is a finite trigonometric series with integer frequencies.
//! Outer sites of the ball (`|k| > 1`) enter with zero coefficient.
//!
//! Every periodic ingredient is evaluated on the fractional part of its
//! argument, so `s(w + c) == s(w)` holds bit for bit whenever `w + c` is
//! itself exactly representable.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The ball `B_0^r = { k in Z^n : |k|_1 <= r }` in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ball {
    dim: usize,
    range: usize,
    offsets: Vec<Vec<i64>>,
    center: usize,
    neighbors: Vec<usize>,
}

impl Ball {
    pub fn new(dim: usize, range: usize) -> Ball {
        let r = range as i64;
        let mut offsets = Vec::new();
        let mut current = vec![-r; dim];
        loop {
            if current.iter().map(|c| c.abs()).sum::<i64>() <= r {
                offsets.push(current.clone());
            }
            // odometer increment, last axis fastest
            let mut axis = dim;
            loop {
                if axis == 0 {
                    let center = offsets.iter().position(|k| k.iter().all(|&c| c == 0)).unwrap();
                    let neighbors = offsets
                        .iter()
                        .enumerate()
                        .filter(|(_, k)| k.iter().map(|c| c.abs()).sum::<i64>() == 1)
                        .map(|(idx, _)| idx)
                        .collect();
                    return Ball { dim, range, offsets, center, neighbors };
                }
                axis -= 1;
                if current[axis] < r {
                    current[axis] += 1;
                    break;
                }
                current[axis] = -r;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn range(&self) -> usize {
        self.range
    }

    /// `#B_0^r`.
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    /// Index of the origin in the window ordering.
    pub fn center(&self) -> usize {
        self.center
    }

    /// Indices of the `2n` nearest neighbours of the origin.
    pub fn neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn index_of(&self, offset: &[i64]) -> Option<usize> {
        self.offsets.iter().position(|k| k.as_slice() == offset)
    }
}

/// One term of the on-site series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnsiteKind {
    /// `amplitude * sin^2(k pi u)`
    Sin2,
    /// `amplitude * cos(2 k pi u)`
    Cos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsiteTerm {
    pub kind: OnsiteKind,
    pub frequency: f64,
    pub amplitude: f64,
}

/// Declarative on-site series. `sin2[k-1]` multiplies `sin^2(k pi u)` and
/// `cos[k-1]` multiplies `cos(2 k pi u)`; `terms` admits explicit
/// frequencies, which must still be integers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OnsiteSpec {
    pub constant: f64,
    pub sin2: Vec<f64>,
    pub cos: Vec<f64>,
    pub terms: Vec<OnsiteTerm>,
}

impl OnsiteSpec {
    /// `V(u) = amplitude * sin^2(pi u)`.
    pub fn sine_gordon(amplitude: f64) -> OnsiteSpec {
        OnsiteSpec { sin2: vec![amplitude], ..Default::default() }
    }

    fn expand(&self) -> Vec<OnsiteTerm> {
        let mut out = Vec::new();
        for (k, &a) in self.sin2.iter().enumerate() {
            out.push(OnsiteTerm { kind: OnsiteKind::Sin2, frequency: (k + 1) as f64, amplitude: a });
        }
        for (k, &a) in self.cos.iter().enumerate() {
            out.push(OnsiteTerm { kind: OnsiteKind::Cos, frequency: (k + 1) as f64, amplitude: a });
        }
        out.extend(self.terms.iter().copied());
        out
    }
}

/// Sorted zero set `{base + k} ∪ {orbit_j + k}` of the level-1 forcing
/// term. Lattice points outside the supplied range are integer translates
/// of the supplied period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitLattice {
    base: f64,
    orbit: Vec<f64>,
}

impl OrbitLattice {
    /// `orbit` must be strictly increasing and lie in `(base, base + 1)`.
    pub fn new(base: f64, orbit: Vec<f64>) -> Result<OrbitLattice> {
        if orbit.is_empty() {
            return Err(Error::InvalidPotential("empty orbit".into()));
        }
        if !base.is_finite() || orbit.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPotential("orbit values must be finite".into()));
        }
        if let Some(j) = orbit.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPotential(format!(
                "orbit is not strictly increasing at index {}: {} then {}",
                j,
                orbit[j],
                orbit[j + 1]
            )));
        }
        if orbit[0] <= base || *orbit.last().unwrap() >= base + 1.0 {
            return Err(Error::InvalidPotential(format!(
                "orbit must lie strictly between {} and {}",
                base,
                base + 1.0
            )));
        }
        Ok(OrbitLattice { base, orbit })
    }

    /// Builds the lattice from a sampled monotone profile, keeping only the
    /// values that are resolved strictly inside `(base, base + 1)`.
    pub fn from_profile(base: f64, profile: &[f64]) -> Result<OrbitLattice> {
        let mut orbit: Vec<f64> = Vec::new();
        for &x in profile {
            if x > base && x < base + 1.0 && orbit.last().map_or(true, |&last| x > last) {
                orbit.push(x);
            }
        }
        OrbitLattice::new(base, orbit)
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn orbit(&self) -> &[f64] {
        &self.orbit
    }

    /// Bracketing pair `(a, b)` with `a <= x < b`, both lattice points.
    pub fn bracket(&self, x: f64) -> (f64, f64) {
        let shift = (x - self.base).floor();
        let y = x - shift;
        // points of one period: base, orbit..., base + 1
        let idx = self.orbit.partition_point(|&p| p <= y);
        let lo = if idx == 0 { self.base } else { self.orbit[idx - 1] };
        let hi = if idx == self.orbit.len() { self.base + 1.0 } else { self.orbit[idx] };
        (lo + shift, hi + shift)
    }

    /// Value and derivative of the quartic-product forcing term at `x`.
    fn eval(&self, x: f64) -> (f64, f64) {
        let shift = (x - self.base).floor();
        let y = x - shift;
        let idx = self.orbit.partition_point(|&p| p <= y);
        let a = if idx == 0 { self.base } else { self.orbit[idx - 1] };
        let b = if idx == self.orbit.len() { self.base + 1.0 } else { self.orbit[idx] };
        if y == a {
            return (0.0, 0.0);
        }
        let da = y - a;
        let db = y - b;
        let da3 = da * da * da;
        let db3 = db * db * db;
        let value = da3 * da * db3 * db;
        let deriv = 4.0 * da3 * db3 * (db + da);
        (value, deriv)
    }
}

/// Perturbation terms appended to a potential. All act on `w(0)` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationSpec {
    /// `epsilon / (4 pi) * sin^2(pi (u(0) - v0))`
    Level0 { v0: f64, epsilon: f64 },
    /// `amplitude * sin^2(pi (u(0) - phase))`
    Phase { phase: f64, amplitude: f64 },
    /// `delta2 * |u(0) - a|^4 |u(0) - b|^4` with `(a, b)` the bracketing
    /// orbit-lattice pair.
    Level1 { lattice: OrbitLattice, delta2: f64 },
}

impl PerturbationSpec {
    fn amplitude(&self) -> f64 {
        match self {
            PerturbationSpec::Level0 { epsilon, .. } => *epsilon,
            PerturbationSpec::Phase { amplitude, .. } => *amplitude,
            PerturbationSpec::Level1 { delta2, .. } => *delta2,
        }
    }

    fn eval(&self, u0: f64) -> (f64, f64) {
        match self {
            PerturbationSpec::Level0 { v0, epsilon } => {
                let (v, d) = sin2_shifted(u0, *v0);
                let a = epsilon / (4.0 * PI);
                (a * v, a * d)
            }
            PerturbationSpec::Phase { phase, amplitude } => {
                let (v, d) = sin2_shifted(u0, *phase);
                (amplitude * v, amplitude * d)
            }
            PerturbationSpec::Level1 { lattice, delta2 } => {
                let (v, d) = lattice.eval(u0);
                (delta2 * v, delta2 * d)
            }
        }
    }
}

/// `sin^2(pi (u - phase))` and its derivative, reduced modulo one first.
fn sin2_shifted(u: f64, phase: f64) -> (f64, f64) {
    let t = frac(frac(u) - phase);
    let (s, c) = (PI * t).sin_cos();
    (s * s, 2.0 * PI * s * c)
}

#[inline]
fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// Declarative description of a potential, as read from a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub dimension: usize,
    pub range: usize,
    pub onsite: OnsiteSpec,
    pub coupling: f64,
    #[serde(default)]
    pub perturbations: Vec<PerturbationSpec>,
}

impl PotentialSpec {
    /// `V(u) = sin^2(pi u)` with the given coupling and range 1.
    pub fn sine_gordon(dimension: usize, coupling: f64) -> PotentialSpec {
        PotentialSpec {
            dimension,
            range: 1,
            onsite: OnsiteSpec::sine_gordon(1.0),
            coupling,
            perturbations: Vec::new(),
        }
    }
}

/// A user-supplied on-site function returning `(V(u), V'(u))`. Only
/// reachable through [`LocalPotential::raw`]; nothing checks it is periodic.
#[derive(Clone)]
pub struct CustomOnsite(Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>);

impl CustomOnsite {
    pub fn new(f: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> CustomOnsite {
        CustomOnsite(Arc::new(f))
    }
}

impl fmt::Debug for CustomOnsite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomOnsite(..)")
    }
}

#[derive(Debug, Clone)]
pub enum Onsite {
    Series { constant: f64, terms: Vec<OnsiteTerm> },
    Custom(CustomOnsite),
}

impl Onsite {
    #[inline]
    fn eval(&self, u: f64) -> (f64, f64) {
        match self {
            Onsite::Series { constant, terms } => {
                let t = frac(u);
                let mut value = *constant;
                let mut deriv = 0.0;
                for term in terms {
                    let k = term.frequency;
                    match term.kind {
                        OnsiteKind::Sin2 => {
                            let (s, c) = (k * PI * t).sin_cos();
                            value += term.amplitude * s * s;
                            deriv += term.amplitude * 2.0 * k * PI * s * c;
                        }
                        OnsiteKind::Cos => {
                            let (s, c) = (2.0 * k * PI * t).sin_cos();
                            value += term.amplitude * c;
                            deriv -= term.amplitude * 2.0 * k * PI * s;
                        }
                    }
                }
                (value, deriv)
            }
            Onsite::Custom(f) => (f.0)(u),
        }
    }

    /// Term-wise lower bound of the series, if known in closed form.
    fn lower_bound(&self) -> Option<f64> {
        match self {
            Onsite::Series { constant, terms } => Some(
                constant
                    + terms
                        .iter()
                        .map(|t| match t.kind {
                            OnsiteKind::Sin2 => t.amplitude.min(0.0),
                            OnsiteKind::Cos => -t.amplitude.abs(),
                        })
                        .sum::<f64>(),
            ),
            Onsite::Custom(_) => None,
        }
    }
}

/// An evaluable potential `s` together with its gradient.
///
/// Immutable after construction; evaluation is pure.
#[derive(Debug, Clone)]
pub struct LocalPotential {
    ball: Arc<Ball>,
    onsite: Onsite,
    coupling: f64,
    perturbations: Vec<PerturbationSpec>,
    lower_bound: f64,
}

impl LocalPotential {
    /// Builds a potential without checking any axiom. Used to construct
    /// deliberately inadmissible potentials.
    pub fn raw(
        dimension: usize,
        range: usize,
        onsite: Onsite,
        coupling: f64,
        perturbations: Vec<PerturbationSpec>,
    ) -> LocalPotential {
        let ball = Arc::new(Ball::new(dimension, range));
        let mut potential = LocalPotential {
            ball,
            onsite,
            coupling,
            perturbations,
            lower_bound: 0.0,
        };
        potential.lower_bound = potential.estimate_lower_bound();
        potential
    }

    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    pub fn shared_ball(&self) -> Arc<Ball> {
        self.ball.clone()
    }

    pub fn dimension(&self) -> usize {
        self.ball.dim()
    }

    pub fn range(&self) -> usize {
        self.ball.range()
    }

    /// `#B_0^r`.
    pub fn window_size(&self) -> usize {
        self.ball.len()
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn perturbations(&self) -> &[PerturbationSpec] {
        &self.perturbations
    }

    /// `M` with `s >= -M`.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    fn estimate_lower_bound(&self) -> f64 {
        if let Some(v_min) = self.onsite.lower_bound() {
            // coupling >= 0 and every perturbation term is nonnegative
            if self.coupling >= 0.0 && self.perturbations.iter().all(|p| p.amplitude() >= 0.0) {
                return (-v_min).max(0.0);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut window = vec![0.0; self.window_size()];
        let mut inf = f64::INFINITY;
        for _ in 0..4096 {
            for w in window.iter_mut() {
                *w = rng.gen_range(-1.0..2.0);
            }
            inf = inf.min(self.eval_unchecked(&window));
        }
        (-inf).max(0.0)
    }

    fn check_len(&self, window: &[f64]) -> Result<()> {
        if window.len() != self.window_size() {
            return Err(Error::WindowSize { expected: self.window_size(), got: window.len() });
        }
        Ok(())
    }

    pub fn eval(&self, window: &[f64]) -> Result<f64> {
        self.check_len(window)?;
        Ok(self.eval_unchecked(window))
    }

    pub fn grad(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.check_len(window)?;
        let mut out = vec![0.0; window.len()];
        self.eval_grad_unchecked(window, &mut out);
        Ok(out)
    }

    /// Caller guarantees `window.len() == self.window_size()`.
    #[inline]
    pub fn eval_unchecked(&self, window: &[f64]) -> f64 {
        let center = self.ball.center();
        let u0 = window[center];
        let (mut value, _) = self.onsite.eval(u0);
        let weight = self.coupling / (8.0 * self.ball.dim() as f64);
        let mut bonds = 0.0;
        for &k in self.ball.neighbors() {
            let d = window[k] - u0;
            bonds += d * d;
        }
        value += weight * bonds;
        for p in &self.perturbations {
            value += p.eval(u0).0;
        }
        value
    }

    /// Writes the gradient into `grad` (overwriting it) and returns `s`.
    #[inline]
    pub fn eval_grad_unchecked(&self, window: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let center = self.ball.center();
        let u0 = window[center];
        let (mut value, mut d0) = self.onsite.eval(u0);
        let weight = self.coupling / (8.0 * self.ball.dim() as f64);
        let mut bonds = 0.0;
        for &k in self.ball.neighbors() {
            let d = window[k] - u0;
            bonds += d * d;
            grad[k] = 2.0 * weight * d;
            d0 -= 2.0 * weight * d;
        }
        value += weight * bonds;
        for p in &self.perturbations {
            let (v, d) = p.eval(u0);
            value += v;
            d0 += d;
        }
        grad[center] = d0;
        value
    }

    /// Sampled check of the three admissibility axioms.
    pub fn verify_axioms(&self, sample_count: usize, seed: u64) -> Result<AxiomReport> {
        if sample_count == 0 {
            return Err(Error::InvalidArgument("sample_count must be at least 1".into()));
        }
        let n = self.window_size();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // dyadic samples keep w + 1 exact, so the periodicity residual is
        // not polluted by rounding of the input
        let quantum = (2.0f64).powi(-24);
        let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| (rng.gen_range(-2.0..2.0) / quantum).round() * quantum).collect()
        };

        let mut periodicity = 0.0f64;
        let mut coercive = true;
        let mut coercive_min_growth = f64::INFINITY;
        let mut mixed_max = f64::NEG_INFINITY;
        let mut strict_max = f64::NEG_INFINITY;
        let mut witness_mixed = None;
        let mut witness_strict = None;
        let mut witness_coercive = None;

        let pairs: Vec<(usize, usize)> = {
            let offs = self.ball.offsets();
            let mut v = Vec::new();
            for k in 0..n {
                for j in 0..n {
                    let d: i64 = offs[k].iter().zip(&offs[j]).map(|(a, b)| (a - b).abs()).sum();
                    if d == 1 {
                        v.push((k, j));
                    }
                }
            }
            v
        };

        let h = 1e-4;
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        for _ in 0..sample_count {
            let w = sample(&mut rng);
            let s0 = self.eval_unchecked(&w);

            let shifted: Vec<f64> = w.iter().map(|x| x + 1.0).collect();
            periodicity = periodicity.max((self.eval_unchecked(&shifted) - s0).abs());

            // coercivity: push one end of each bond out along a ray
            for &(k, _) in &pairs {
                let mut ray = w.clone();
                let mut last = s0;
                let mut grows = true;
                for t in [10.0, 100.0, 1000.0] {
                    ray[k] = w[k] + t;
                    let s = self.eval_unchecked(&ray);
                    if !(s > last) {
                        grows = false;
                    }
                    last = s;
                }
                let growth = last - s0;
                coercive_min_growth = coercive_min_growth.min(growth);
                if !grows || growth < COERCIVE_GROWTH {
                    coercive = false;
                    witness_coercive.get_or_insert(format!("site index {}", k));
                }
            }

            // mixed partials by central differences of the gradient
            for j in 0..n {
                plus.copy_from_slice(&w);
                minus.copy_from_slice(&w);
                plus[j] += h;
                minus[j] -= h;
                self.eval_grad_unchecked(&plus, &mut gp);
                self.eval_grad_unchecked(&minus, &mut gm);
                for k in 0..n {
                    if k == j {
                        continue;
                    }
                    let mixed = (gp[k] - gm[k]) / (2.0 * h);
                    if mixed > mixed_max {
                        mixed_max = mixed;
                        witness_mixed = Some(format!("d_{}{} = {:e}", k, j, mixed));
                    }
                    if k == self.ball.center() && self.ball.neighbors().contains(&j) && mixed > strict_max {
                        strict_max = mixed;
                        witness_strict = Some(format!("d_0{} = {:e}", j, mixed));
                    }
                }
            }
        }

        let checks = vec![
            AxiomCheck {
                axiom: Axiom::Periodicity,
                pass: periodicity <= AXIOM_TOL,
                measured: periodicity,
                threshold: AXIOM_TOL,
                witness: None,
            },
            AxiomCheck {
                axiom: Axiom::Coercivity,
                pass: coercive,
                measured: coercive_min_growth,
                threshold: COERCIVE_GROWTH,
                witness: if coercive { None } else { witness_coercive },
            },
            AxiomCheck {
                axiom: Axiom::Submodularity,
                pass: mixed_max <= AXIOM_TOL,
                measured: mixed_max,
                threshold: AXIOM_TOL,
                witness: if mixed_max <= AXIOM_TOL { None } else { witness_mixed },
            },
            AxiomCheck {
                axiom: Axiom::StrictCoupling,
                pass: strict_max < -AXIOM_TOL,
                measured: strict_max,
                threshold: -AXIOM_TOL,
                witness: if strict_max < -AXIOM_TOL { None } else { witness_strict },
            },
        ];
        let overall = checks.iter().all(|c| c.pass);
        Ok(AxiomReport { checks, overall })
    }
}

const AXIOM_TOL: f64 = 1e-12;
const COERCIVE_GROWTH: f64 = 1.0;

/// Builds the built-in potential from a validated spec.
pub fn make_fk_potential(spec: &PotentialSpec) -> Result<LocalPotential> {
    if spec.dimension == 0 {
        return Err(Error::InvalidPotential("dimension must be at least 1".into()));
    }
    if spec.range == 0 {
        return Err(Error::InvalidPotential("range must be at least 1".into()));
    }
    if !(spec.coupling > 0.0) || !spec.coupling.is_finite() {
        return Err(Error::InvalidPotential(format!(
            "coupling must be positive, got {}",
            spec.coupling
        )));
    }
    if !spec.onsite.constant.is_finite() {
        return Err(Error::InvalidPotential("onsite constant must be finite".into()));
    }
    let terms = spec.onsite.expand();
    for t in &terms {
        if !t.amplitude.is_finite() {
            return Err(Error::InvalidPotential("onsite amplitudes must be finite".into()));
        }
        if !t.frequency.is_finite() || t.frequency.fract() != 0.0 || t.frequency < 0.0 {
            return Err(Error::InvalidPotential(format!(
                "onsite frequency {} is not a nonnegative integer; V would not be 1-periodic",
                t.frequency
            )));
        }
    }
    for p in &spec.perturbations {
        let a = p.amplitude();
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::InvalidPotential(format!(
                "perturbation amplitude must be nonnegative, got {}",
                a
            )));
        }
    }
    Ok(LocalPotential::raw(
        spec.dimension,
        spec.range,
        Onsite::Series { constant: spec.onsite.constant, terms },
        spec.coupling,
        spec.perturbations.clone(),
    ))
}

/// Appends `epsilon / (4 pi) sin^2(pi (u(0) - v0))`. Zero epsilon returns
/// the potential unchanged.
pub fn perturb_level0(potential: &LocalPotential, v0: f64, epsilon: f64) -> Result<LocalPotential> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {}", epsilon)));
    }
    Ok(push_term(potential, epsilon, PerturbationSpec::Level0 { v0, epsilon }))
}

/// Appends `amplitude sin^2(pi (u(0) - phase))`, a perturbation of sup-norm
/// `amplitude`.
pub fn perturb_phase(potential: &LocalPotential, phase: f64, amplitude: f64) -> Result<LocalPotential> {
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "amplitude must be nonnegative, got {}",
            amplitude
        )));
    }
    Ok(push_term(potential, amplitude, PerturbationSpec::Phase { phase, amplitude }))
}

/// Appends the quartic-product term that vanishes on the orbit lattice of a
/// level-1 minimizer.
pub fn perturb_level1(
    potential: &LocalPotential,
    lattice: OrbitLattice,
    delta2: f64,
) -> Result<LocalPotential> {
    if !(delta2 >= 0.0) || !delta2.is_finite() {
        return Err(Error::InvalidArgument(format!("delta2 must be nonnegative, got {}", delta2)));
    }
    Ok(push_term(potential, delta2, PerturbationSpec::Level1 { lattice, delta2 }))
}

fn push_term(potential: &LocalPotential, amplitude: f64, term: PerturbationSpec) -> LocalPotential {
    let mut out = potential.clone();
    if amplitude > 0.0 {
        out.perturbations.push(term);
        out.lower_bound = out.estimate_lower_bound();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axiom {
    /// (S1) `s(u + 1) = s(u)`
    Periodicity,
    /// (S2) growth along nearest-neighbour difference rays
    Coercivity,
    /// (S3) mixed partials nonpositive
    Submodularity,
    /// (S3) strict part: `d_0j s < 0` for `|j| = 1`
    StrictCoupling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub axiom: Axiom,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub checks: Vec<AxiomCheck>,
    pub overall: bool,
}

impl AxiomReport {
    pub fn get(&self, axiom: Axiom) -> &AxiomCheck {
        self.checks.iter().find(|c| c.axiom == axiom).expect("every axiom is checked")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sg(n: usize) -> LocalPotential {
        make_fk_potential(&PotentialSpec::sine_gordon(n, 1.0)).unwrap()
    }

    #[test]
    fn ball_cardinality() {
        assert_eq!(Ball::new(1, 1).len(), 3);
        assert_eq!(Ball::new(2, 1).len(), 5);
        assert_eq!(Ball::new(2, 2).len(), 13);
        assert_eq!(Ball::new(3, 1).len(), 7);
        let b = Ball::new(2, 1);
        assert_eq!(b.offsets()[b.center()], vec![0, 0]);
        assert_eq!(b.neighbors().len(), 4);
    }

    #[test]
    fn integer_constant_window_is_zero() {
        let p = sg(1);
        assert_eq!(p.eval(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(p.eval(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert!(p.grad(&[0.0, 0.0, 0.0]).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn hand_value_at_half() {
        let p = sg(1);
        let s = p.eval(&[0.0, 0.5, 1.0]).unwrap();
        assert!((s - 1.0625).abs() < 1e-15, "{}", s);
    }

    #[test]
    fn additive_constant() {
        let spec = PotentialSpec {
            onsite: OnsiteSpec { constant: 1.0, sin2: vec![1.0], ..Default::default() },
            ..PotentialSpec::sine_gordon(1, 1.0)
        };
        let p = make_fk_potential(&spec).unwrap();
        assert_eq!(p.eval(&[2.0, 2.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = PotentialSpec::sine_gordon(1, 0.0);
        assert!(matches!(make_fk_potential(&spec), Err(Error::InvalidPotential(_))));
        spec.coupling = 1.0;
        spec.onsite.terms.push(OnsiteTerm { kind: OnsiteKind::Sin2, frequency: 1.5, amplitude: 1.0 });
        assert!(matches!(make_fk_potential(&spec), Err(Error::InvalidPotential(_))));
    }

    #[test]
    fn wrong_window_length() {
        let p = sg(2);
        assert!(matches!(p.eval(&[0.0; 3]), Err(Error::WindowSize { expected: 5, got: 3 })));
        assert!(p.grad(&[0.0; 6]).is_err());
    }

    #[test]
    fn mixed_partial_sign() {
        // d^2 s / du(0) du(j) = -coupling / (4n) for nearest neighbours
        let coupling = 1.7;
        let p = make_fk_potential(&PotentialSpec::sine_gordon(2, coupling)).unwrap();
        let w = [0.1, 0.3, -0.2, 0.7, 0.4];
        let h = 1e-5;
        let c = p.ball().center();
        for &j in p.ball().neighbors() {
            let mut a = w;
            let mut b = w;
            a[j] += h;
            b[j] -= h;
            let d = (p.grad(&a).unwrap()[c] - p.grad(&b).unwrap()[c]) / (2.0 * h);
            assert!((d + coupling / 8.0).abs() < 1e-8, "{}", d);
        }
    }

    #[test]
    fn built_in_passes_axioms() {
        let report = sg(2).verify_axioms(50, 7).unwrap();
        assert!(report.overall, "{:?}", report);
    }

    #[test]
    fn zero_coupling_fails_strict_part() {
        let p = LocalPotential::raw(
            1,
            1,
            Onsite::Series { constant: 0.0, terms: OnsiteSpec::sine_gordon(1.0).expand() },
            0.0,
            vec![],
        );
        let report = p.verify_axioms(20, 1).unwrap();
        assert!(!report.get(Axiom::StrictCoupling).pass);
        assert!(report.get(Axiom::Periodicity).pass);
    }

    #[test]
    fn quadratic_onsite_fails_periodicity() {
        let p = LocalPotential::raw(1, 1, Onsite::Custom(CustomOnsite::new(|u| (u * u, 2.0 * u))), 1.0, vec![]);
        let report = p.verify_axioms(20, 1).unwrap();
        assert!(!report.get(Axiom::Periodicity).pass);
    }

    #[test]
    fn level0_perturbation() {
        let p = sg(1);
        assert!(perturb_level0(&p, 0.0, -1.0).is_err());
        let same = perturb_level0(&p, 0.0, 0.0).unwrap();
        assert!(same.perturbations().is_empty());
        let q = perturb_level0(&p, 0.3, 0.1).unwrap();
        let w = [0.3, 0.3, 0.3];
        assert_eq!(q.eval(&w).unwrap(), p.eval(&w).unwrap());
    }

    #[test]
    fn orbit_lattice_rejects_bad_input() {
        assert!(OrbitLattice::new(0.0, vec![]).is_err());
        assert!(OrbitLattice::new(0.0, vec![0.3, 0.2]).is_err());
        assert!(OrbitLattice::new(0.0, vec![0.3, 1.2]).is_err());
    }

    #[test]
    fn orbit_term_on_lattice_and_midpoint() {
        let lattice = OrbitLattice::new(0.0, vec![0.1, 0.25, 0.5, 0.75, 0.9]).unwrap();
        let delta2 = 0.01;
        let p = perturb_level1(&sg(1), lattice.clone(), delta2).unwrap();
        let base = sg(1);
        // on the lattice (translated by an integer) the term vanishes
        let on = 0.75 + 2.0;
        assert_eq!(p.eval(&[on, on, on]).unwrap(), base.eval(&[on, on, on]).unwrap());
        // midpoint of the bracket (0.25, 0.5): width 0.25
        let m = 0.375;
        let extra = p.eval(&[m, m, m]).unwrap() - base.eval(&[m, m, m]).unwrap();
        let expected = delta2 * (0.125f64).powi(8);
        assert!((extra - expected).abs() <= 1e-15, "{} vs {}", extra, expected);
        assert_eq!(lattice.bracket(-0.8), (-1.0 + 0.1, -1.0 + 0.25));
        assert_eq!(lattice.bracket(0.95), (0.9, 1.0));
    }
}
