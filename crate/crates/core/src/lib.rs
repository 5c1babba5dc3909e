//! Simulation of dynamically corrected nonadiabatic holonomic quantum gates.
//!
//! The crate builds pulse schedules for single-loop NHQC and its dynamically
//! corrected variant (DCNHQC), evolves them on a three-level system or on
//! physical qubits encoded in a decoherence-free subspace, and evaluates gate
//! fidelities under systematic control errors and Lindblad decoherence.

pub mod config;
pub mod dfs;
pub mod dynamics;
pub mod error;
pub mod figures;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod pulses;
pub mod scans;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, StateVector, C64};
pub use model::{ErrorModel, GateSpec, TwoQubitGateSpec};
pub use pulses::{Envelope, Protocol, Register, Schedule};
