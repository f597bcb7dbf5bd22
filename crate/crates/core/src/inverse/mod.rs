pub mod entangle;
pub mod moments;
pub mod reconstruct;
pub mod runge;

pub use entangle::{entanglement_probe, resonant_counterexample};
pub use moments::{moment_functional, MomentTestCase, Profile};
pub use reconstruct::{reconstruct_potential, ReconstructionConfig, ReconstructionResult, Regularizer};
pub use runge::{runge_approximate, RungeRequest, RungeResult};
