//! Linear stability of periodic 1½-dimensional Vlasov–Maxwell equilibria through a
//! separable Hamiltonian formulation.

pub mod config;
pub mod equilibrium;
pub mod evolution;
pub mod hamiltonian;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod phase_space;
pub mod profiles;
pub mod report;
pub mod run;
pub mod velocity;
pub mod xspace;

pub use error::{Error, Result};
