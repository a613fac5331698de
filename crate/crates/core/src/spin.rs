//! One-pair spin space: basis, projectors, states and Hamiltonians.
//!
//! The basis order is `(S, T+, T0, T-)` everywhere, including the Fock mode
//! order used by [`crate::fock`].

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix4;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_defect, max_abs_diff};

pub type Mat4 = Matrix4<C64>;

/// Hermiticity tolerance applied to constructed Hamiltonians and states.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalue floor for a physical state.
pub const POSITIVITY_FLOOR: f64 = -1e-10;

/// One of the four pair spin states, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpinBasisIndex {
    S = 0,
    TPlus = 1,
    T0 = 2,
    TMinus = 3,
}

impl SpinBasisIndex {
    pub const ALL: [SpinBasisIndex; 4] = [Self::S, Self::TPlus, Self::T0, Self::TMinus];
    pub const TRIPLETS: [SpinBasisIndex; 3] = [Self::TPlus, Self::T0, Self::TMinus];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Name used in observable and file column labels.
    pub fn label(self) -> &'static str {
        match self {
            Self::S => "S",
            Self::TPlus => "Tplus",
            Self::T0 => "T0",
            Self::TMinus => "Tminus",
        }
    }

    pub fn is_singlet(self) -> bool {
        self == Self::S
    }
}

impl fmt::Display for SpinBasisIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SpinBasisIndex {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|b| b.label() == s)
            .ok_or_else(|| format!("unknown spin state `{s}`"))
    }
}

/// Singlet and triplet projectors `(QS, QT)`.
pub fn projectors() -> (Mat4, Mat4) {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let qs = Mat4::from_diagonal(&nalgebra::Vector4::new(one, zero, zero, zero));
    let qt = Mat4::from_diagonal(&nalgebra::Vector4::new(zero, one, one, one));
    (qs, qt)
}

/// `|a><b|` in the one-pair basis.
pub fn ket_bra(a: SpinBasisIndex, b: SpinBasisIndex) -> Mat4 {
    let mut m = Mat4::zeros();
    m[(a.index(), b.index())] = C64::new(1.0, 0.0);
    m
}

/// One-pair density matrix. The trace is the mean number of surviving pairs
/// and is not renormalized.
///
/// The wrapper does not enforce Hermiticity so that [`validate_state`] can
/// report on arbitrary input; the generators reject non-Hermitian states.
#[derive(Clone, Debug, PartialEq)]
pub struct OnePairState(Mat4);

impl OnePairState {
    pub fn from_matrix(m: Mat4) -> Self {
        Self(m)
    }

    pub fn zero() -> Self {
        Self(Mat4::zeros())
    }

    /// Pure basis state `|b><b|`.
    pub fn basis(b: SpinBasisIndex) -> Self {
        Self(ket_bra(b, b))
    }

    pub fn singlet() -> Self {
        Self::basis(SpinBasisIndex::S)
    }

    /// `I/4`, the spin-uncorrelated pair.
    pub fn maximally_mixed() -> Self {
        Self(Mat4::identity() * C64::new(0.25, 0.0))
    }

    /// Normalized pure state built from (unnormalized) amplitudes.
    pub fn pure(amplitudes: [C64; 4]) -> Result<Self> {
        let v = nalgebra::Vector4::from(amplitudes);
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Preparation("pure state amplitudes have zero norm".into()));
        }
        let v = v / C64::new(norm, 0.0);
        Ok(Self(v * v.adjoint()))
    }

    /// Normalized `alpha|S> + beta|T0>`.
    pub fn coherent_s_t0(alpha: C64, beta: C64) -> Result<Self> {
        let z = C64::new(0.0, 0.0);
        Self::pure([alpha, z, beta, z])
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat4 {
        self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn population(&self, b: SpinBasisIndex) -> f64 {
        self.0[(b.index(), b.index())].re
    }

    /// Matrix element `<a|rho|b>`.
    pub fn element(&self, a: SpinBasisIndex, b: SpinBasisIndex) -> C64 {
        self.0[(a.index(), b.index())]
    }

    pub fn singlet_population(&self) -> f64 {
        self.population(SpinBasisIndex::S)
    }

    pub fn triplet_population(&self) -> f64 {
        SpinBasisIndex::TRIPLETS
            .iter()
            .map(|&b| self.population(b))
            .sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.0)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        crate::linalg::min_eigenvalue(&self.0)
    }

    pub fn max_abs_diff(&self, other: &OnePairState) -> f64 {
        max_abs_diff(&self.0, &other.0)
    }
}

/// Pair spin Hamiltonian (angular-frequency units, hbar = 1).
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian4(Mat4);

impl Hamiltonian4 {
    pub fn new(m: Mat4) -> Result<Self> {
        let defect = hermiticity_defect(&m);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                defect,
                tol: HERMITIAN_TOL,
            });
        }
        Ok(Self(m))
    }

    pub fn zero() -> Self {
        Self(Mat4::zeros())
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    /// Max absolute row sum; an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        crate::linalg::inf_norm(&self.0)
    }
}

/// Haberkorn rate constants `kS`, `kT`. The full recombination rate constants
/// are `2 kS` and `2 kT`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateParams {
    pub k_s: f64,
    pub k_t: f64,
}

impl RateParams {
    pub fn new(k_s: f64, k_t: f64) -> Result<Self> {
        check_rate("kS", k_s)?;
        check_rate("kT", k_t)?;
        Ok(Self { k_s, k_t })
    }

    pub fn zero() -> Self {
        Self { k_s: 0.0, k_t: 0.0 }
    }

    pub fn max(&self) -> f64 {
        self.k_s.max(self.k_t)
    }
}

pub(crate) fn check_rate(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "rate must be finite and nonnegative",
        });
    }
    Ok(())
}

/// Built-in Hamiltonian constructors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HamiltonianKind {
    /// No coherent dynamics.
    Zero,
    /// `omega (|S><T0| + |T0><S|)`.
    St0Mixing,
    /// `J * QT`.
    Exchange,
    /// Explicit Hermitian matrix, see [`make_hamiltonian`].
    Custom,
}

impl HamiltonianKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::St0Mixing => "st0-mixing",
            Self::Exchange => "exchange",
            Self::Custom => "custom",
        }
    }
}

impl FromStr for HamiltonianKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "zero" => Ok(Self::Zero),
            "st0-mixing" => Ok(Self::St0Mixing),
            "exchange" => Ok(Self::Exchange),
            "custom" => Ok(Self::Custom),
            _ => Err(format!(
                "unknown hamiltonian kind `{s}` (expected zero, st0-mixing, exchange or custom)"
            )),
        }
    }
}

/// Builds a Hamiltonian from a kind and its real parameters.
///
/// `custom` accepts either 16 values, the lower triangle in row-major order
/// with one real number per diagonal entry and a `(re, im)` pair per
/// off-diagonal entry, or 32 values, the full matrix in row-major order as
/// `(re, im)` pairs. The 32-value form is checked for Hermiticity.
pub fn make_hamiltonian(kind: HamiltonianKind, params: &[f64]) -> Result<Hamiltonian4> {
    if let Some(bad) = params.iter().find(|p| !p.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "hamiltonian.params",
            value: *bad,
            reason: "parameters must be finite",
        });
    }
    let expect = |n: usize| -> Result<()> {
        if params.len() != n {
            Err(Error::ParamCount {
                kind: kind.name(),
                expected: n,
                got: params.len(),
            })
        } else {
            Ok(())
        }
    };
    match kind {
        HamiltonianKind::Zero => {
            expect(0)?;
            Ok(Hamiltonian4::zero())
        }
        HamiltonianKind::St0Mixing => {
            expect(1)?;
            let w = C64::new(params[0], 0.0);
            let (s, t0) = (SpinBasisIndex::S.index(), SpinBasisIndex::T0.index());
            let mut m = Mat4::zeros();
            m[(s, t0)] = w;
            m[(t0, s)] = w;
            Ok(Hamiltonian4(m))
        }
        HamiltonianKind::Exchange => {
            expect(1)?;
            let (_, qt) = projectors();
            Ok(Hamiltonian4(qt * C64::new(params[0], 0.0)))
        }
        HamiltonianKind::Custom => match params.len() {
            16 => {
                let mut m = Mat4::zeros();
                let mut it = params.iter().copied();
                for i in 0..4 {
                    for j in 0..=i {
                        if i == j {
                            m[(i, i)] = C64::new(it.next().unwrap(), 0.0);
                        } else {
                            let z = C64::new(it.next().unwrap(), it.next().unwrap());
                            m[(i, j)] = z;
                            m[(j, i)] = z.conj();
                        }
                    }
                }
                Ok(Hamiltonian4(m))
            }
            32 => {
                let m = Mat4::from_fn(|i, j| {
                    let k = 2 * (4 * i + j);
                    C64::new(params[k], params[k + 1])
                });
                Hamiltonian4::new(m)
            }
            got => Err(Error::ParamCount {
                kind: "custom",
                expected: 16,
                got,
            }),
        },
    }
}

/// Outcome of [`validate_state`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationReport {
    pub hermiticity_defect: f64,
    pub trace_imag: f64,
    pub trace_real: f64,
    pub min_eigenvalue: f64,
    pub hermitian_ok: bool,
    pub trace_ok: bool,
    pub positive_ok: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.hermitian_ok && self.trace_ok && self.positive_ok
    }
}

pub fn validate_state(rho: &OnePairState, tol: f64) -> ValidationReport {
    assert!(tol > 0.0, "validation tolerance must be positive");
    let hermiticity_defect = rho.hermiticity_defect();
    let tr = rho.trace();
    let min_eigenvalue = rho.min_eigenvalue();
    ValidationReport {
        hermiticity_defect,
        trace_imag: tr.im,
        trace_real: tr.re,
        min_eigenvalue,
        hermitian_ok: hermiticity_defect <= tol,
        trace_ok: tr.im.abs() <= tol && tr.re >= -tol,
        positive_ok: min_eigenvalue >= -tol,
    }
}
