//! Fixed-step RK4 propagation, the closed-form Haberkorn propagator and
//! column-stacked superoperator matrices.

use nalgebra::{DMatrix, SMatrix, SVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::I;
use crate::models::{Generator, INPUT_HERMITIAN_TOL};
use crate::spin::{projectors, Hamiltonian4, Mat4, OnePairState, RateParams};

pub type Superoperator = SMatrix<C64, 16, 16>;
pub type VecState = SVector<C64, 16>;

/// `h * scale` above this is accepted with a warning.
pub const STEP_WARN: f64 = 0.1;
/// `h * scale` above this is an error.
pub const STEP_MAX: f64 = 1.0;

/// Uniform time grid with `n_steps + 1` points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !t0.is_finite() || !t_end.is_finite() || t_end <= t0 {
            return Err(Error::Grid(format!("need finite t_end > t0, got [{t0}, {t_end}]")));
        }
        if n_steps == 0 {
            return Err(Error::Grid("n_steps must be at least 1".into()));
        }
        Ok(Self { t0, t_end, n_steps })
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t0) / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            self.t0 + k as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// States sampled on every grid point.
#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub grid: TimeGrid,
    pub states: Vec<S>,
}

impl<S> Trajectory<S> {
    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn last(&self) -> &S {
        self.states.last().expect("trajectory holds n_steps + 1 states")
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &S)> {
        self.grid.times().into_iter().zip(self.states.iter())
    }
}

/// Minimal vector-space interface needed by the RK4 stepper.
pub trait OdeState: Clone {
    /// `self + a * other`
    fn add_scaled(&self, other: &Self, a: f64) -> Self;
}

impl<const R: usize, const C: usize> OdeState for SMatrix<C64, R, C> {
    fn add_scaled(&self, other: &Self, a: f64) -> Self {
        self + other * C64::new(a, 0.0)
    }
}

impl OdeState for DMatrix<C64> {
    fn add_scaled(&self, other: &Self, a: f64) -> Self {
        self + other * C64::new(a, 0.0)
    }
}

/// Classic fourth-order Runge-Kutta step.
pub fn rk4_step<S: OdeState>(f: &impl Fn(&S) -> S, y: &S, h: f64) -> S {
    let k1 = f(y);
    let k2 = f(&y.add_scaled(&k1, 0.5 * h));
    let k3 = f(&y.add_scaled(&k2, 0.5 * h));
    let k4 = f(&y.add_scaled(&k3, h));
    y.add_scaled(&k1, h / 6.0)
        .add_scaled(&k2, h / 3.0)
        .add_scaled(&k3, h / 3.0)
        .add_scaled(&k4, h / 6.0)
}

/// Propagates `dy/dt = f(y)` over the grid, returning every grid point.
pub fn rk4<S: OdeState>(f: impl Fn(&S) -> S, y0: S, grid: &TimeGrid) -> Vec<S> {
    let h = grid.step();
    let mut states = Vec::with_capacity(grid.len());
    states.push(y0);
    for _ in 0..grid.n_steps {
        let next = rk4_step(&f, states.last().unwrap(), h);
        states.push(next);
    }
    states
}

/// Rejects `h * scale > 1` and warns above 0.1.
pub fn check_step(h: f64, scale: f64) -> Result<()> {
    let product = h * scale;
    if product > STEP_MAX {
        return Err(Error::StepTooLarge { product });
    }
    if product > STEP_WARN {
        log::warn!("step size h = {h:.3e} gives h * scale = {product:.3} > {STEP_WARN}; accuracy may suffer");
    }
    Ok(())
}

/// RK4 propagation of a one-pair generator.
pub fn integrate(generator: &Generator, rho0: &OnePairState, grid: &TimeGrid) -> Result<Trajectory<OnePairState>> {
    let defect = rho0.hermiticity_defect();
    if defect > INPUT_HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            defect,
            tol: INPUT_HERMITIAN_TOL,
        });
    }
    check_step(grid.step(), generator.rate_scale())?;
    let states = rk4(|m: &Mat4| generator.apply(m), *rho0.matrix(), grid)
        .into_iter()
        .map(OnePairState::from_matrix)
        .collect();
    Ok(Trajectory { grid: *grid, states })
}

/// Non-Hermitian propagator `W = exp(-(iH + kS QS + kT QT) t)`.
pub fn haberkorn_propagator(h: &Hamiltonian4, rates: RateParams, t: f64) -> Mat4 {
    let (qs, qt) = projectors();
    let effective = h.matrix() * I + qs * C64::new(rates.k_s, 0.0) + qt * C64::new(rates.k_t, 0.0);
    (effective * C64::new(-t, 0.0)).exp()
}

/// Closed-form Haberkorn solution `W rho0 W†`.
pub fn haberkorn_exact(rho0: &OnePairState, h: &Hamiltonian4, rates: RateParams, t: f64) -> OnePairState {
    assert!(t >= 0.0, "propagation time must be nonnegative");
    if t == 0.0 {
        return rho0.clone();
    }
    let w = haberkorn_propagator(h, rates, t);
    OnePairState::from_matrix(w * rho0.matrix() * w.adjoint())
}

/// Column-stacking vectorization: `vec(rho)[i + 4 j] = rho[(i, j)]`.
pub fn vectorize(rho: &Mat4) -> VecState {
    VecState::from_fn(|k, _| rho[(k % 4, k / 4)])
}

pub fn unvectorize(v: &VecState) -> Mat4 {
    Mat4::from_fn(|i, j| v[i + 4 * j])
}

/// Matrix of the generator in the column-stacked representation.
pub fn superoperator_matrix(generator: &Generator) -> Superoperator {
    let mut out = Superoperator::zeros();
    for col in 0..16 {
        let mut e = Mat4::zeros();
        e[(col % 4, col / 4)] = C64::new(1.0, 0.0);
        let image = vectorize(&generator.apply(&e));
        out.set_column(col, &image);
    }
    out
}

/// Eigenvalues of a superoperator via complex Schur decomposition.
pub fn spectrum(l: &Superoperator) -> Vec<C64> {
    let dynamic = DMatrix::from_iterator(16, 16, l.iter().copied());
    let schur = nalgebra::linalg::Schur::new(dynamic);
    let (_, t) = schur.unpack();
    (0..16).map(|i| t[(i, i)]).collect()
}

/// Largest real part in the spectrum.
pub fn spectral_abscissa(l: &Superoperator) -> f64 {
    spectrum(l).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Dimension of the numerical null space (singular values below `tol`).
pub fn nullity(l: &Superoperator, tol: f64) -> usize {
    l.singular_values().iter().filter(|s| **s < tol).count()
}

/// Exact propagation `exp(L t) vec(rho0)` for any one-pair generator.
pub fn propagate_exact(generator: &Generator, rho0: &OnePairState, t: f64) -> OnePairState {
    let l = superoperator_matrix(generator) * C64::new(t, 0.0);
    OnePairState::from_matrix(unvectorize(&(l.exp() * vectorize(rho0.matrix()))))
}
