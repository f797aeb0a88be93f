//! Optimal local-hidden-variable colorings of the sphere for the spherical
//! grasshopper problem.
//!
//! A lawn is an antipodal binary coloring of an antipodal spherical grid.
//! For a jump angle `theta` its success probability is a fixed-range,
//! conserved-spin Ising energy (with `H = -P`) evaluated through a sparse
//! [`kernel::InteractionTable`]. The [`anneal`] module searches for ground
//! states by simulated annealing, and [`analysis`] compares the optimized
//! classical probabilities with the quantum singlet value `cos^2(theta/2)`.

pub mod analysis;
pub mod anneal;
pub mod error;
pub mod format;
pub mod grid;
pub mod kernel;
pub mod lawn;
pub mod oracle;
pub mod spatial;

pub use error::{Error, Result};
