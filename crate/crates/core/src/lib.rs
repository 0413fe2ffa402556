//! Simulation kernels for adaptive monitored circuits with an absorbing state.
//!
//! * [`tableau`] and [`qubit`]: mixed stabilizer states of prime-dimension
//!   qudits (a generic engine and a bit-packed qubit engine).
//! * [`circuit`]: the flagged brickwork circuit and its per-trajectory
//!   observables.
//! * [`dp`] and [`appendix`]: classical bond directed percolation, the
//!   correlated Haar-channel process and the partial-measurement process.
//! * [`etn`]: the effective tensor network of active bonds, min-cut and red
//!   bonds.
//! * [`scaling`]: finite-size scaling transforms, fits and collapse quality.
//!
//! The crate is `no_std` with `alloc`; the `std` feature only enables
//! `std::error::Error` through `thiserror`.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod appendix;
pub mod circuit;
pub mod clifford;
pub mod dp;
pub mod etn;
pub mod field;
pub mod pauli;
pub mod qubit;
pub mod scaling;
pub mod seed;
pub mod tableau;

pub use clifford::CliffordGate;
pub use field::PrimeField;
pub use pauli::PauliWord;
pub use qubit::QubitTableau;
pub use tableau::{InitKind, Ratio, StabilizerState, StabilizerTableau};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension {0} is not prime")]
    NotPrime(u32),
    #[error("dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: u32, max: u32 },
    #[error("site {site} out of range for {len} sites")]
    SiteOutOfRange { site: usize, len: usize },
    #[error("gate sites coincide ({0})")]
    SiteCollision(usize),
    #[error("gate dimension {gate} does not match state dimension {state}")]
    DimensionMismatch { gate: u32, state: u32 },
    #[error("invalid gate: {0}")]
    InvalidGate(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("underdetermined fit: {0}")]
    Underdetermined(&'static str),
    #[error("curves do not overlap")]
    NoOverlap,
    #[error("observable mismatch: {0}")]
    ObservableMismatch(alloc::string::String),
}
