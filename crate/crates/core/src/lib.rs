//! Phasor-domain simulation of power-network dynamics.
//!
//! The crate couples nodal electric-angle dynamics with first-order voltage
//! dynamics and adds the electromagnetic momentum carried by transmission
//! lines to the inertial momentum of generators. The classical swing equation
//! is available as a baseline over the same network data.
//!
//! Module map:
//!
//! * [`network`]: buses, branches, admittance matrices, Newton power flow,
//!   load folding and Kron reduction.
//! * [`electromagnetics`]: line field energy, power-flow terms, line
//!   momentum, nodal momentum budgets, polarization.
//! * [`dynamics`]: generator models, right-hand sides, events, RK4 integration.
//! * [`scenarios`]: embedded benchmarks and the experiment harnesses.
//! * [`modal`]: Prony least-squares identification and eigenvalue migration.
//! * [`io`]: case files, PMU CSV ingestion and result emission.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod dynamics;
pub mod electromagnetics;
pub mod error;
pub mod io;
pub mod modal;
pub mod network;
pub mod scenarios;

pub use error::{Error, ErrorClass, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type C64 = num_complex::Complex64;
