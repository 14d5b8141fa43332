use std::fs;
use std::path::{Path, PathBuf};

use fk_hetero::lattice::Ratio;
use fk_hetero::potential::{OnsiteSpec, OrbitLattice, PerturbationSpec};
use fk_hetero::{make_fk_potential, LocalPotential, PotentialSpec, SolveOptions};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialBlock,
    #[serde(default)]
    pub domain: DomainBlock,
    #[serde(default)]
    pub solve: SolveOptions,
    #[serde(default)]
    pub gaps: GapsBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialBlock {
    pub dimension: usize,
    #[serde(default = "one")]
    pub range: usize,
    pub coupling: f64,
    pub onsite: OnsiteSpec,
    pub perturb0: Option<Perturb0>,
    pub perturb1: Option<Perturb1>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturb0 {
    pub v0: f64,
    pub epsilon: f64,
}

/// Orbit values are read from a text file, one number per line.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturb1 {
    pub orbit_file: PathBuf,
    #[serde(default)]
    pub base: f64,
    pub delta2: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub periods: Option<Vec<i64>>,
    /// Rotation vector as `[numerator, denominator]` pairs.
    pub alpha: Option<Vec<[i64; 2]>>,
    /// Half-widths of the heteroclinic windows.
    pub windows: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapsBlock {
    pub grid_size: usize,
    pub refine_tol: f64,
}

impl Default for GapsBlock {
    fn default() -> GapsBlock {
        GapsBlock { grid_size: 256, refine_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
}

impl Default for OutputBlock {
    fn default() -> OutputBlock {
        OutputBlock { dir: PathBuf::from("out") }
    }
}

/// A validated run: everything a command needs, checked before any solve.
#[derive(Debug, Clone)]
pub struct Run {
    pub spec: PotentialSpec,
    pub potential: LocalPotential,
    pub periods: Vec<i64>,
    pub alpha: Option<Vec<Ratio>>,
    pub opts: SolveOptions,
    pub gaps: GapsBlock,
    pub out_dir: PathBuf,
}

impl Run {
    /// Solve options for a level-`level` problem: the configured periods of
    /// the axes after the heteroclinic ones.
    pub fn opts_for(&self, level: usize) -> SolveOptions {
        let mut opts = self.opts.clone();
        opts.periods = self.periods.iter().skip(level).copied().collect();
        opts
    }
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::config(msg)
}

pub fn load(path: &Path) -> Result<Run, CliError> {
    let text = fs::read_to_string(path).map_err(|e| schema(format!("cannot read {}: {}", path.display(), e)))?;
    let cfg: RunConfig = toml::from_str(&text).map_err(|e| schema(format!("{}: {}", path.display(), e)))?;
    let base_dir = path.parent().unwrap_or(Path::new("."));
    build(cfg, base_dir)
}

pub fn build(cfg: RunConfig, base_dir: &Path) -> Result<Run, CliError> {
    let p = &cfg.potential;
    let mut perturbations = Vec::new();
    if let Some(q) = &p.perturb0 {
        perturbations.push(PerturbationSpec::Level0 { v0: q.v0, epsilon: q.epsilon });
    }
    if let Some(q) = &p.perturb1 {
        let file = if q.orbit_file.is_absolute() { q.orbit_file.clone() } else { base_dir.join(&q.orbit_file) };
        let text = fs::read_to_string(&file)
            .map_err(|e| schema(format!("orbit_file {}: {}", file.display(), e)))?;
        let mut orbit = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let x: f64 = line
                .parse()
                .map_err(|_| schema(format!("orbit_file {} line {}: not a number", file.display(), k + 1)))?;
            orbit.push(x);
        }
        let lattice = OrbitLattice::new(q.base, orbit).map_err(|e| schema(e.to_string()))?;
        perturbations.push(PerturbationSpec::Level1 { lattice, delta2: q.delta2 });
    }
    let spec = PotentialSpec {
        dimension: p.dimension,
        range: p.range,
        onsite: p.onsite.clone(),
        coupling: p.coupling,
        perturbations,
    };
    let potential = make_fk_potential(&spec).map_err(|e| schema(e.to_string()))?;

    let periods = match &cfg.domain.periods {
        Some(v) => {
            if v.len() != p.dimension {
                return Err(schema(format!("domain.periods has {} entries for dimension {}", v.len(), p.dimension)));
            }
            if v.iter().any(|&x| x < 1) {
                return Err(schema("domain.periods must be at least 1"));
            }
            v.clone()
        }
        None => vec![1; p.dimension],
    };
    let alpha = match &cfg.domain.alpha {
        Some(v) => {
            if v.len() != p.dimension {
                return Err(schema(format!("domain.alpha has {} entries for dimension {}", v.len(), p.dimension)));
            }
            let ratios = v
                .iter()
                .map(|[s, r]| Ratio::new(*s, *r))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| schema(e.to_string()))?;
            Some(ratios)
        }
        None => None,
    };
    let mut opts = cfg.solve.clone();
    if let Some(w) = &cfg.domain.windows {
        opts.window_schedule = w.clone();
    }
    opts.validate().map_err(|e| schema(e.to_string()))?;
    if cfg.gaps.grid_size < 16 || !(cfg.gaps.refine_tol > 0.0) {
        return Err(schema("gaps.grid_size must be at least 16 and gaps.refine_tol positive"));
    }
    Ok(Run { spec, potential, periods, alpha, opts, gaps: cfg.gaps, out_dir: cfg.output.dir })
}
