//! Heteroclinic minimizers of lattice energies in the Frenkel-Kontorova
//! class: admissible local potentials, lattice configurations, renormalized
//! energies, box-constrained solvers and property checks.

pub mod energy;
pub mod error;
pub mod lattice;
pub mod optimize;
pub mod potential;
pub mod solve;
pub mod verify;

pub use error::{Error, Result};
pub use lattice::{ClampRefs, Configuration, Domain, GapPair, Ratio};
pub use potential::{make_fk_potential, LocalPotential, PotentialSpec};
pub use solve::{SolveOptions, SolveResult};
