//! Desk-scale toolkit for a random copolymer in an emulsion of random blocks.
//!
//! The crate computes every ingredient of the mesoscopic ratio formula for
//! the quenched free energy per monomer: directed-path entropies in columns
//! ([`lattice`]), the free energy near a single flat interface
//! ([`interface`]), single-column free energies both by direct dynamic
//! programming and by their variational characterizations ([`mod@column`],
//! [`psi_var`]), sampled block fields and empirical column-type frequencies
//! ([`field`]), the ratio maximization over per-type step budgets
//! ([`solver`]), and a direct small-scale partition function of the full
//! model for cross-validation ([`simulate`]).

pub mod brute;
pub mod check;
pub mod column;
pub mod disorder;
pub mod error;
pub mod field;
pub mod interface;
pub mod lattice;
pub mod oracle;
pub mod psi_var;
pub mod rng;
pub mod simulate;
pub mod solver;

pub use column::{ColumnDisorder, ColumnGeometry, ColumnType};
pub use disorder::{Letter, MicroDisorder};
pub use error::{Error, Result};
pub use field::{BlockField, CoarseTrajectory, FrequencyMeasure};
pub use interface::InterfaceSpec;
pub use lattice::{CrossingSpec, LatticePath, PathCount, StepDirection, VerticalCorridor};
pub use oracle::{KappaTable, PhiTable};
pub use psi_var::Allocation;
pub use solver::{PsiTable, SolverResult};
