//! Lattice domains, configurations with boundary closure, and the order
//! structure on them.

mod config;
mod domain;
pub mod io;
mod order;

pub use config::{ClampRefs, Closure, Configuration, Field};
pub use domain::{box_sites, Axis, Domain, Ratio};
pub use order::{
    birkhoff_check, compare, compare_tol, lattice_max_min, norm_slab, probe_ranges, rotation_vector,
    BirkhoffReport, BirkhoffWitness, Comparison, Relation, RotationEstimate, STRICT_TOL,
};

use serde::{Deserialize, Serialize};

/// Two adjacent minimizers of one level together with its critical value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapPair {
    pub v: Configuration,
    pub w: Configuration,
    pub level: usize,
    pub c_level: f64,
}
