//! Uniform-grid D2Q9 lattice Boltzmann solver: BGK collision, Guo forcing,
//! inlet/outflow/wall edges and half-way bounce-back obstacles.
//!
//! Collision and macroscopics are cell-local and run data-parallel over
//! rows; streaming pulls from a separate post-collision buffer.

mod boundary;
mod field;
pub mod lattice;
pub mod snapshot;
mod solver;

pub use boundary::{apply_boundaries, Edge, Edges, FlowConfig, Geometry};
pub use field::{vorticity, DistributionField, ForceField, MacroField};
pub use lattice::{equilibrium, CS2, Q};
pub use solver::FlowSolver;
