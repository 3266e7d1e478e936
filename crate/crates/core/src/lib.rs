//! Thermodynamics of coherently driven qubits.
//!
//! The crate simulates single-qubit precession `dP/dt = H × P` under a
//! time-dependent Hamiltonian field, builds the cascade of superadiabatic
//! frames for that field, and measures coarse-grained entropy production in
//! any frame of the cascade. The Landau-Zener linear sweep is the canonical
//! drive.
//!
//! Units are dimensionless throughout: `ħ = k_B = 1` and energies are
//! measured in units of the off-diagonal Hamiltonian element `H_12 = 1`.
//! Entropies are in nats.
//!
//! Module map:
//!
//! - [`bloch`]: Bloch-vector state algebra (entropy, equilibria, fidelity).
//! - [`schedule`]: drive schedules and Landau-Zener closed forms.
//! - [`integrator`]: adaptive Dormand-Prince 5(4) precession integrator.
//! - [`frames`]: superadiabatic frame cascade and adiabaticity factors.
//! - [`analysis`]: entropy traces, monotonicity, entropy maps.
//! - [`config`] and [`cli`]: scenario configuration and the command-line runner.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bloch;
pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod frames;
pub mod integrator;
pub mod output;
pub mod schedule;
pub mod spline;

pub use bloch::{BlochVector, QubitState, ThermalParams};
pub use error::{Error, Result};
pub use exec::Execution;
pub use frames::{CascadeConfig, FrameCascade};
pub use integrator::{IntegratorConfig, OutputGrid, Trajectory};
pub use schedule::{DriveSchedule, LZParams, LzSchedule};
