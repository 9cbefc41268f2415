//! Numerical laboratory for entangled bipartite dynamics: composite-space
//! linear algebra, no-signalling audits, EPR/CHSH statistics and
//! quantum-potential grids.

pub mod audit;
pub mod bohm;
pub mod epr;
pub mod error;
pub mod evolution;
pub mod hamiltonian;
pub mod random;
pub mod state;
pub mod tensor;

pub use error::{LabError, Result};
