//! Seeded random matrices for randomized checks and scenario suites.

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spin::{Hamiltonian4, Mat4, OnePairState};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_like<R: Rng>(rng: &mut R) -> f64 {
    // uniform on [-1, 1); adequate for generic test matrices
    rng.random_range(-1.0..1.0)
}

pub fn complex<R: Rng>(rng: &mut R) -> C64 {
    C64::new(gaussian_like(rng), gaussian_like(rng))
}

/// Random Hermitian 4x4 matrix with entries of modulus at most `scale * sqrt(2)`.
pub fn hermitian4<R: Rng>(rng: &mut R, scale: f64) -> Mat4 {
    let m = Matrix4::from_fn(|_, _| complex(rng) * scale);
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn hamiltonian<R: Rng>(rng: &mut R, scale: f64) -> Hamiltonian4 {
    Hamiltonian4::new(hermitian4(rng, scale)).expect("symmetrized matrix is Hermitian")
}

/// Random positive semidefinite one-pair state with the given trace.
pub fn physical_state<R: Rng>(rng: &mut R, trace: f64) -> OnePairState {
    let g = Matrix4::from_fn(|_, _| complex(rng));
    let m = g * g.adjoint();
    let tr = m.trace().re;
    OnePairState::from_matrix(m * C64::new(trace / tr, 0.0))
}

/// Random pure one-pair state.
pub fn pure_state<R: Rng>(rng: &mut R) -> OnePairState {
    let amps = [complex(rng), complex(rng), complex(rng), complex(rng)];
    OnePairState::pure(amps).expect("random amplitudes are nonzero")
}

pub fn hermitian<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> DMatrix<C64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| complex(rng) * scale);
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Random density matrix (trace one, positive) of the given dimension.
pub fn density_matrix<R: Rng>(rng: &mut R, dim: usize) -> DMatrix<C64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| complex(rng));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    m * C64::new(1.0 / tr, 0.0)
}
