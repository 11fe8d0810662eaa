//! Exact-diagonalization toolkit for quantum state transfer through a
//! Heisenberg "spin bus": a strongly coupled antiferromagnetic spin-1/2
//! chain or ring mediating transfer between two weakly attached qubits.
//!
//! The crate is organized around the transfer protocol:
//!
//! - [`basis`] — spin-1/2 product bases, total-Sz sectors, partial traces.
//! - [`model`] — chain/ring Hamiltonians with uniform or disordered couplings.
//! - [`eigen`] — sector-blocked dense eigendecomposition and ground states.
//! - [`dynamics`] — initial-state preparation and exact unitary propagation
//!   (spectral and Krylov).
//! - [`observables`] — transfer fidelity traces and optimal-time extraction.
//! - [`effective`] — low-energy effective models of the bus and their
//!   closed-form fidelities.
//! - [`experiments`] — seeded, reproducible scan pipelines (coupling-strength
//!   scaling, state independence, position scans, disorder ensembles).
//!
//! Energies are measured in units of the intra-bus coupling and ħ = 1
//! throughout; spin operators are s = σ/2.

pub mod basis;
pub mod dynamics;
pub mod effective;
pub mod eigen;
mod error;
pub mod experiments;
mod krylov;
pub mod model;
pub mod observables;
pub mod report;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Absolute tolerance (units of the bus coupling) below which two energies
/// are treated as degenerate. Double-precision symmetric solvers resolve
/// spectra of these sizes to ~1e-13, so 1e-9 cleanly separates true
/// degeneracy from numerical splitting.
pub const TOL_DEG: f64 = 1e-9;
