//! Statevector simulation of a variational imaginary-time optimizer for
//! weighted MAXCUT, with a fully connected ZY ansatz, an energy-landscape
//! sigmoid filter, pruning of small-angle rotations, and an ADAM baseline.

pub mod adam;
pub mod analysis;
pub mod ansatz;
pub mod error;
pub mod graph;
mod halfspace;
pub mod hamiltonian;
pub mod statevector;
pub mod trajectory;
pub mod varit;

pub use adam::{AdamConfig, Objective};
pub use ansatz::{Ansatz, RankOrder};
pub use error::{Error, Result};
pub use graph::{Ensemble, WeightedGraph};
pub use hamiltonian::{Convention, CostHamiltonian, SpectralStats};
pub use statevector::StateVector;
pub use trajectory::{IterationRecord, Phase, StopReason, Trajectory, TrajectoryMeta};
pub use varit::VarItConfig;
