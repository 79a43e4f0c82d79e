//! Nonlinear fine potential theory on weighted uniform grids.
//!
//! Sets and functions live on a [`GridDomain`]; energies, capacities,
//! Wiener-type thinness, obstacle problems and fine-limit diagnostics are
//! all computed with the same nodal p-energy.

pub mod capacity;
pub mod energy;
pub mod error;
pub mod fine_analysis;
pub mod fine_topology;
pub mod grid;
pub mod io;
mod solver;
pub mod variational;

pub use error::{FinepotError, Result};
pub use grid::{GridDomain, NodeSet, Point, ScalarField, WeightSpec};
pub use solver::SolverOptions;
