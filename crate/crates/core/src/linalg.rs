//! Small dense helpers shared by the one-pair and multi-pair code.

use nalgebra::{Dim, Matrix, RawStorage};
use num_complex::Complex64 as C64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Largest entrywise modulus of `m - m†`.
pub fn hermiticity_defect<R: Dim, S: RawStorage<C64, R, R>>(m: &Matrix<C64, R, R, S>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff<R: Dim, Cc: Dim, S1, S2>(a: &Matrix<C64, R, Cc, S1>, b: &Matrix<C64, R, Cc, S2>) -> f64
where
    S1: RawStorage<C64, R, Cc>,
    S2: RawStorage<C64, R, Cc>,
{
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of the Hermitian part of `m`.
///
/// Uses faer's self-adjoint solver: nalgebra's occasionally returns `-inf`
/// for finite states with large exact null spaces.
pub fn min_eigenvalue<R: Dim, S: RawStorage<C64, R, R>>(m: &Matrix<C64, R, R, S>) -> f64 {
    let n = m.nrows();
    let herm = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| {
        let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
        faer::c64::new(z.re, z.im)
    });
    match herm.self_adjoint_eigenvalues(faer::Side::Lower) {
        Ok(ev) => ev.into_iter().fold(f64::INFINITY, f64::min),
        Err(_) => f64::NAN,
    }
}

/// Induced infinity norm (max absolute row sum); bounds the spectral norm of a
/// Hermitian matrix from above.
pub fn inf_norm<R: Dim, Cc: Dim, S: RawStorage<C64, R, Cc>>(m: &Matrix<C64, R, Cc, S>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Ordinary least squares fit `y = intercept + slope * x`.
/// Returns `(intercept, slope, rms_residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "linear fit needs at least two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (intercept, slope, rms)
}

/// Removes 2π jumps from a sequence of phases in (-π, π].
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (k, &p) in phases.iter().enumerate() {
        if k > 0 {
            let prev = phases[k - 1];
            let d = p - prev;
            if d > std::f64::consts::PI {
                offset -= tau;
            } else if d < -std::f64::consts::PI {
                offset += tau;
            }
        }
        out.push(p + offset);
    }
    out
}
