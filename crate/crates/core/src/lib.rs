//! Kinetic equations for spin-selective radical-pair recombination.
//!
//! The crate implements the one-pair Haberkorn equation, the family of
//! measurement-like equations, and the multi-pair Lindblad equation on a
//! truncated bosonic Fock space whose bilinear moments reproduce the
//! Haberkorn equation. A Born-Markov module turns bath correlation functions
//! into rate constants and checks them against a pseudomode simulation.
//!
//! Basis order is `(S, T+, T0, T-)` throughout; `hbar = 1`.

pub mod bath;
pub mod error;
pub mod fock;
pub mod integrate;
pub mod linalg;
pub mod models;
pub mod observables;
pub mod random;
pub mod spin;

pub use error::{Error, Result};
pub use integrate::{haberkorn_exact, integrate, superoperator_matrix, TimeGrid, Trajectory};
pub use models::{Generator, GeneratorKind, MeasurementParams};
pub use spin::{
    make_hamiltonian, projectors, validate_state, Hamiltonian4, HamiltonianKind, OnePairState, RateParams,
    SpinBasisIndex,
};
