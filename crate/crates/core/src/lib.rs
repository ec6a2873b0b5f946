//! Controlled open-qubit dynamics, Krotov pulse optimisation and quantum
//! Fisher information for Hamiltonian parameter estimation.

pub mod dynamics;
pub mod error;
pub mod krotov;
pub mod linalg;
pub mod metrology;
pub mod pulses;
pub mod scenarios;
pub mod state;

pub use error::{Error, Result};
