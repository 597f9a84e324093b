//! Phase-space discretization: weighted grids, the transport operator, particle
//! characteristics, orbit classification and the projector onto ker D.

pub mod characteristics;
pub mod chi;
pub mod grid;
pub mod orbits;
pub mod projector;
pub mod transport;

pub use characteristics::{integrate_characteristics, Flow, Trajectory};
pub use chi::{build_chi, chi_report, ChiOptions, ChiReport};
pub use grid::{Node, PhaseSpaceGrid};
pub use orbits::{classify_orbit, OrbitClass};
pub use projector::{build_projector, KernelProjector, ProjectorDiagnostics, ProjectorMethod, ProjectorOptions};
pub use transport::{apply_transport, Transport};
