//! Truncated bosonic Fock space over the pair modes and the multi-pair
//! Lindblad equation.
//!
//! Each pair spin state is a bosonic mode; `a_i` removes one pair in state
//! `i`. Recombination is the three-term Lindblad structure
//! `k (2 a rho a† - a†a rho - rho a†a)` per mode, and the one-pair density
//! matrix is recovered from bilinear moments, `rho(i, j) = <a_j† a_i>`.
//!
//! Truncation at `n_max` pairs per mode is exact for these dynamics as long
//! as the initial state holds at most `n_max` pairs in total: the dissipator
//! only lowers the pair number and the lifted Hamiltonian conserves it, so the
//! truncated ladder operators never act on a state whose image would leave
//! the space.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::integrate::{check_step, rk4, TimeGrid, Trajectory};
use crate::linalg::{hermiticity_defect, min_eigenvalue, I};
use crate::models::INPUT_HERMITIAN_TOL;
use crate::spin::{Hamiltonian4, Mat4, OnePairState, RateParams, SpinBasisIndex};

/// Default upper bound on the Fock dimension, `(2 + 1)^4`.
pub const DEFAULT_DIM_CAP: usize = 81;

pub const PAIR_MODES: usize = 4;

/// Product Fock space of `n_modes` bosonic modes, each holding at most
/// `n_max` quanta. Basis states are ordered lexicographically in the
/// occupation tuple, first mode most significant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockSpace {
    n_modes: usize,
    n_max: usize,
    dim: usize,
}

impl FockSpace {
    pub fn new(n_modes: usize, n_max: usize) -> Self {
        assert!(n_modes >= 1, "Fock space needs at least one mode");
        let dim = (n_max + 1).pow(n_modes as u32);
        Self { n_modes, n_max, dim }
    }

    /// The four pair modes `(S, T+, T0, T-)`.
    pub fn pairs(n_max: usize) -> Self {
        Self::new(PAIR_MODES, n_max)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index(&self, occupations: &[usize]) -> Option<usize> {
        if occupations.len() != self.n_modes || occupations.iter().any(|&n| n > self.n_max) {
            return None;
        }
        Some(occupations.iter().fold(0, |acc, &n| acc * (self.n_max + 1) + n))
    }

    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        assert!(index < self.dim);
        let mut occ = vec![0; self.n_modes];
        for slot in occ.iter_mut().rev() {
            *slot = index % (self.n_max + 1);
            index /= self.n_max + 1;
        }
        occ
    }

    pub fn basis(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.dim).map(|i| self.occupations(i))
    }

    pub fn vacuum_index(&self) -> usize {
        0
    }

    /// Index of the state with a single quantum in `mode`.
    pub fn single_index(&self, mode: usize) -> usize {
        let mut occ = vec![0; self.n_modes];
        occ[mode] = 1;
        self.index(&occ).expect("n_max >= 1 for single-quantum states")
    }

    pub fn check_cap(&self, cap: usize) -> Result<()> {
        if self.dim > cap {
            return Err(Error::DimensionCap { dim: self.dim, cap });
        }
        Ok(())
    }
}

/// Row-compressed sparse complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

pub type FockOperator = SparseOp;

impl SparseOp {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            rows: vec![Vec::new(); dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            rows: (0..dim).map(|i| vec![(i, C64::new(1.0, 0.0))]).collect(),
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut op = Self::zeros(dim);
        for (r, c, v) in triplets {
            op.push(r, c, v);
        }
        op.compress();
        op
    }

    fn push(&mut self, r: usize, c: usize, v: C64) {
        assert!(r < self.dim && c < self.dim);
        self.rows[r].push((c, v));
    }

    fn compress(&mut self) {
        for row in &mut self.rows {
            row.sort_by_key(|(c, _)| *c);
            let mut merged: Vec<(usize, C64)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match merged.last_mut() {
                    Some((lc, lv)) if *lc == c => *lv += v,
                    _ => merged.push((c, v)),
                }
            }
            merged.retain(|(_, v)| v.norm() != 0.0);
            *row = merged;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.rows[r]
            .iter()
            .find(|(cc, _)| *cc == c)
            .map(|(_, v)| *v)
            .unwrap_or_default()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.entries().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_triplets(self.dim, self.entries().map(|(r, c, v)| (r, c, v * s)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(self.dim, self.entries().chain(other.entries()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut triplets = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                for &(c, w) in &other.rows[k] {
                    triplets.push((r, c, v * w));
                }
            }
        }
        Self::from_triplets(self.dim, triplets)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.entries() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        DVector::from_fn(self.dim, |r, _| self.rows[r].iter().map(|&(c, x)| x * v[c]).sum())
    }

    /// `self * m`
    pub fn mul_dense(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.dim, m.ncols());
        for col in 0..m.ncols() {
            let src = m.column(col);
            for (r, row) in self.rows.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &(c, v) in row {
                    acc += v * src[c];
                }
                out[(r, col)] = acc;
            }
        }
        out
    }

    /// `m * self`
    pub fn dense_mul(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(m.nrows(), self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            let src = m.column(r);
            for &(c, v) in row {
                let mut dst = out.column_mut(c);
                dst.axpy(v, &src, C64::new(1.0, 0.0));
            }
        }
        out
    }

    /// `Tr(rho * self)`, the expectation value in state `rho`.
    pub fn expectation(&self, rho: &DMatrix<C64>) -> C64 {
        self.entries().map(|(r, c, v)| v * rho[(c, r)]).sum()
    }

    pub fn norm_bound(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.nnz() == 0
    }
}

/// Annihilation and creation operators of one mode.
#[derive(Clone, Debug)]
pub struct Ladder {
    pub a: SparseOp,
    pub a_dag: SparseOp,
}

impl Ladder {
    pub fn number(&self) -> SparseOp {
        self.a_dag.matmul(&self.a)
    }
}

/// Truncated ladder operators for every mode:
/// `a_i |.., n_i, ..> = sqrt(n_i) |.., n_i - 1, ..>`.
pub fn ladder_operators(space: &FockSpace) -> Result<Vec<Ladder>> {
    if space.n_max() < 1 {
        return Err(Error::InvalidParameter {
            name: "n_max",
            value: space.n_max() as f64,
            reason: "ladder operators need n_max >= 1",
        });
    }
    let ladders = (0..space.n_modes())
        .map(|mode| {
            let triplets = space.basis().enumerate().filter_map(|(col, occ)| {
                let n = occ[mode];
                if n == 0 {
                    return None;
                }
                let mut lowered = occ.clone();
                lowered[mode] -= 1;
                let row = space.index(&lowered).unwrap();
                Some((row, col, C64::new((n as f64).sqrt(), 0.0)))
            });
            let a = SparseOp::from_triplets(space.dim(), triplets);
            let a_dag = a.adjoint();
            Ladder { a, a_dag }
        })
        .collect();
    Ok(ladders)
}

pub fn total_number(ladders: &[Ladder]) -> SparseOp {
    let dim = ladders[0].a.dim();
    ladders
        .iter()
        .fold(SparseOp::zeros(dim), |acc, l| acc.add(&l.number()))
}

/// One-body lift `sum_ij H_ij a_i† a_j` of a pair Hamiltonian.
pub fn second_quantize(h: &Hamiltonian4, space: &FockSpace) -> Result<SparseOp> {
    if space.n_modes() != PAIR_MODES {
        return Err(Error::ModeCount {
            expected: PAIR_MODES,
            got: space.n_modes(),
        });
    }
    let ladders = ladder_operators(space)?;
    let m = h.matrix();
    let mut out = SparseOp::zeros(space.dim());
    for i in 0..4 {
        for j in 0..4 {
            if m[(i, j)].norm() != 0.0 {
                let term = ladders[i].a_dag.matmul(&ladders[j].a).scale(m[(i, j)]);
                out = out.add(&term);
            }
        }
    }
    Ok(out)
}

/// Matrix elements `<1_i| op |1_j>` between single-pair states.
pub fn one_pair_sector(op: &SparseOp, space: &FockSpace) -> Mat4 {
    assert_eq!(space.n_modes(), PAIR_MODES);
    let idx: Vec<usize> = (0..4).map(|m| space.single_index(m)).collect();
    Mat4::from_fn(|i, j| op.get(idx[i], idx[j]))
}

/// Multi-pair density matrix: normalized, Hermitian and positive.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPairState {
    space: FockSpace,
    m: DMatrix<C64>,
}

impl MultiPairState {
    /// Wraps a matrix without checks; see [`MultiPairState::validate`].
    pub fn from_matrix(space: FockSpace, m: DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), space.dim());
        assert_eq!(m.ncols(), space.dim());
        Self { space, m }
    }

    pub fn vacuum(space: &FockSpace) -> Self {
        Self::fock_state(space, &vec![0; space.n_modes()]).expect("vacuum is always in the space")
    }

    /// Projector on a single occupation-number state.
    pub fn fock_state(space: &FockSpace, occupations: &[usize]) -> Result<Self> {
        let idx = space
            .index(occupations)
            .ok_or_else(|| Error::Preparation(format!("occupations {occupations:?} outside the truncated space")))?;
        let mut m = DMatrix::zeros(space.dim(), space.dim());
        m[(idx, idx)] = C64::new(1.0, 0.0);
        Ok(Self::from_matrix(space.clone(), m))
    }

    /// `|psi><psi|` for a normalized state vector.
    pub fn pure(space: &FockSpace, psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Preparation(format!("state vector norm {norm} is not 1")));
        }
        Ok(Self::from_matrix(space.clone(), psi * psi.adjoint()))
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.m)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.m)
    }

    pub fn expectation(&self, op: &SparseOp) -> C64 {
        op.expectation(&self.m)
    }

    /// Checks Hermiticity (1e-12), unit trace (1e-10) and positivity (-1e-10).
    pub fn validate(&self) -> Result<()> {
        let defect = self.hermiticity_defect();
        if defect > 1e-12 {
            return Err(Error::NotHermitian { defect, tol: 1e-12 });
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::Unphysical(format!("multi-pair trace {tr} is not 1")));
        }
        let low = self.min_eigenvalue();
        if low < -1e-10 {
            return Err(Error::Unphysical(format!("multi-pair state has eigenvalue {low:.3e}")));
        }
        Ok(())
    }

    /// Population of basis states satisfying `pred`.
    pub fn population_where(&self, pred: impl Fn(&[usize]) -> bool) -> f64 {
        self.space
            .basis()
            .enumerate()
            .filter(|(_, occ)| pred(occ))
            .map(|(i, _)| self.m[(i, i)].re)
            .sum()
    }
}

/// Lindblad equation in the convention
/// `d rho/dt = -i[H, rho] + sum_j k_j (2 L_j rho L_j† - L_j†L_j rho - rho L_j†L_j)`.
#[derive(Clone, Debug)]
pub struct LindbladSystem {
    dim: usize,
    hamiltonian: SparseOp,
    jumps: Vec<(f64, SparseOp, SparseOp)>,
    /// `H - i sum_j k_j L_j†L_j`
    effective: SparseOp,
    effective_dag: SparseOp,
    scale: f64,
}

impl LindbladSystem {
    pub fn new(hamiltonian: SparseOp, jumps: Vec<(f64, SparseOp)>) -> Self {
        let dim = hamiltonian.dim();
        let mut effective = hamiltonian.clone();
        let mut scale = hamiltonian.norm_bound();
        let mut stored = Vec::with_capacity(jumps.len());
        for (rate, l) in jumps {
            assert_eq!(l.dim(), dim);
            if rate == 0.0 {
                continue;
            }
            let l_dag = l.adjoint();
            let ldl = l_dag.matmul(&l);
            scale += 2.0 * rate * ldl.norm_bound();
            effective = effective.sub(&ldl.scale(I * rate));
            stored.push((rate, l, l_dag));
        }
        let effective_dag = effective.adjoint();
        Self {
            dim,
            hamiltonian,
            jumps: stored,
            effective,
            effective_dag,
            scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &SparseOp {
        &self.hamiltonian
    }

    /// Bound on `||H|| + sum 2 k ||L†L||` used for step-size checks.
    pub fn rate_scale(&self) -> f64 {
        self.scale
    }

    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = (self.effective.mul_dense(rho) - self.effective_dag.dense_mul(rho)) * (-I);
        for (rate, l, l_dag) in &self.jumps {
            let sandwich = l_dag.dense_mul(&l.mul_dense(rho));
            out += sandwich * C64::new(2.0 * rate, 0.0);
        }
        out
    }

    /// Heisenberg-picture generator applied to an observable,
    /// `i[H, O] + sum k (L†[O, L] + [L†, O] L)`, so that
    /// `d<O>/dt = Tr(rho * adjoint_apply(O))`.
    pub fn adjoint_apply(&self, o: &SparseOp) -> SparseOp {
        let mut out = o.commutator(&self.hamiltonian).scale(-I);
        for (rate, l, l_dag) in &self.jumps {
            let gain = l_dag.matmul(&o.commutator(l));
            let loss = l_dag.commutator(o).matmul(l);
            out = out.add(&gain.add(&loss).scale(C64::new(*rate, 0.0)));
        }
        out
    }

    pub fn integrate(&self, rho0: &DMatrix<C64>, grid: &TimeGrid) -> Result<Vec<DMatrix<C64>>> {
        check_step(grid.step(), self.scale)?;
        Ok(rk4(|m: &DMatrix<C64>| self.apply(m), rho0.clone(), grid))
    }
}

/// Multi-pair recombination model on the four pair modes.
#[derive(Clone, Debug)]
pub struct MultiPairModel {
    space: FockSpace,
    ladders: Vec<Ladder>,
    rates: RateParams,
    system: LindbladSystem,
}

impl MultiPairModel {
    pub fn new(space: &FockSpace, h_hat: SparseOp, rates: RateParams) -> Result<Self> {
        if space.n_modes() != PAIR_MODES {
            return Err(Error::ModeCount {
                expected: PAIR_MODES,
                got: space.n_modes(),
            });
        }
        assert_eq!(h_hat.dim(), space.dim());
        let ladders = ladder_operators(space)?;
        let jumps = SpinBasisIndex::ALL
            .iter()
            .map(|b| {
                let rate = if b.is_singlet() { rates.k_s } else { rates.k_t };
                (rate, ladders[b.index()].a.clone())
            })
            .collect();
        let system = LindbladSystem::new(h_hat, jumps);
        Ok(Self {
            space: space.clone(),
            ladders,
            rates,
            system,
        })
    }

    /// Builds the model from a one-pair Hamiltonian via [`second_quantize`].
    pub fn from_hamiltonian(space: &FockSpace, h: &Hamiltonian4, rates: RateParams) -> Result<Self> {
        Self::new(space, second_quantize(h, space)?, rates)
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn ladders(&self) -> &[Ladder] {
        &self.ladders
    }

    pub fn rates(&self) -> RateParams {
        self.rates
    }

    pub fn system(&self) -> &LindbladSystem {
        &self.system
    }

    pub fn rhs(&self, rho: &MultiPairState) -> Result<DMatrix<C64>> {
        check_multipair_hermitian(rho)?;
        Ok(self.system.apply(rho.matrix()))
    }

    /// `d<O>/dt` from the mean-value equation.
    pub fn mean_value_rhs(&self, o: &SparseOp, rho: &MultiPairState) -> C64 {
        let h = self.system.hamiltonian();
        let mut out = -I * o.commutator(h).expectation(rho.matrix());
        for b in SpinBasisIndex::ALL {
            let rate = if b.is_singlet() { self.rates.k_s } else { self.rates.k_t };
            if rate == 0.0 {
                continue;
            }
            let l = &self.ladders[b.index()];
            let gain = l.a_dag.matmul(&o.commutator(&l.a)).expectation(rho.matrix());
            let loss = l.a_dag.commutator(o).matmul(&l.a).expectation(rho.matrix());
            out += (gain + loss) * rate;
        }
        out
    }

    pub fn integrate(&self, rho0: &MultiPairState, grid: &TimeGrid, dim_cap: usize) -> Result<Trajectory<MultiPairState>> {
        self.space.check_cap(dim_cap)?;
        check_multipair_hermitian(rho0)?;
        let states = self
            .system
            .integrate(rho0.matrix(), grid)?
            .into_iter()
            .map(|m| MultiPairState::from_matrix(self.space.clone(), m))
            .collect();
        Ok(Trajectory { grid: *grid, states })
    }

    pub fn reduce(&self, rho: &MultiPairState) -> OnePairState {
        reduce_with(&self.ladders, rho)
    }

    /// `a_i† a_j`
    pub fn bilinear(&self, i: SpinBasisIndex, j: SpinBasisIndex) -> SparseOp {
        self.ladders[i.index()].a_dag.matmul(&self.ladders[j.index()].a)
    }
}

fn check_multipair_hermitian(rho: &MultiPairState) -> Result<()> {
    let defect = rho.hermiticity_defect();
    if defect > INPUT_HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            defect,
            tol: INPUT_HERMITIAN_TOL,
        });
    }
    Ok(())
}

/// Right-hand side of the multi-pair Lindblad equation.
pub fn multipair_rhs(rho: &MultiPairState, h_hat: &SparseOp, rates: RateParams, space: &FockSpace) -> Result<DMatrix<C64>> {
    MultiPairModel::new(space, h_hat.clone(), rates)?.rhs(rho)
}

/// Mean-value equation `d<O>/dt` for an arbitrary multi-pair operator.
pub fn mean_value_rhs(o: &SparseOp, rho: &MultiPairState, h_hat: &SparseOp, rates: RateParams, space: &FockSpace) -> Result<C64> {
    Ok(MultiPairModel::new(space, h_hat.clone(), rates)?.mean_value_rhs(o, rho))
}

fn reduce_with(ladders: &[Ladder], rho: &MultiPairState) -> OnePairState {
    let m = rho.matrix();
    let mut out = Mat4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            // rho(i, j) = <a_j† a_i>
            out[(i, j)] = ladders[j].a_dag.matmul(&ladders[i].a).expectation(m);
        }
    }
    OnePairState::from_matrix(out)
}

/// One-pair density matrix from bilinear moments, `rho(i, j) = <a_j† a_i>`.
pub fn reduce_to_one_pair(rho: &MultiPairState, space: &FockSpace) -> Result<OnePairState> {
    if space.n_modes() != PAIR_MODES {
        return Err(Error::ModeCount {
            expected: PAIR_MODES,
            got: space.n_modes(),
        });
    }
    Ok(reduce_with(&ladder_operators(space)?, rho))
}

/// RK4 propagation of the multi-pair equation.
pub fn integrate_multipair(
    rho0: &MultiPairState,
    h_hat: &SparseOp,
    rates: RateParams,
    grid: &TimeGrid,
    dim_cap: usize,
) -> Result<Trajectory<MultiPairState>> {
    rho0.space().check_cap(dim_cap)?;
    MultiPairModel::new(rho0.space(), h_hat.clone(), rates)?.integrate(rho0, grid, dim_cap)
}

/// Lifts a one-pair state with trace at most one into the Fock space as a
/// mixture of single-pair states plus vacuum, using its eigendecomposition.
pub fn lift_one_pair_state(rho: &OnePairState, space: &FockSpace) -> Result<MultiPairState> {
    if space.n_modes() != PAIR_MODES {
        return Err(Error::ModeCount {
            expected: PAIR_MODES,
            got: space.n_modes(),
        });
    }
    if space.n_max() < 1 {
        return Err(Error::Preparation("n_max must be at least 1".into()));
    }
    let defect = rho.hermiticity_defect();
    if defect > INPUT_HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            defect,
            tol: INPUT_HERMITIAN_TOL,
        });
    }
    let herm = (rho.matrix() + rho.matrix().adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut weights = Vec::with_capacity(4);
    for (k, &p) in eig.eigenvalues.iter().enumerate() {
        if p < -1e-10 {
            return Err(Error::Preparation(format!("one-pair state has negative eigenvalue {p:.3e}")));
        }
        weights.push((p.max(0.0), k));
    }
    let total: f64 = weights.iter().map(|(p, _)| p).sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::Preparation(format!(
            "one-pair trace {total} exceeds 1; prepare multi-pair states explicitly"
        )));
    }
    let dim = space.dim();
    let mut m = DMatrix::zeros(dim, dim);
    let singles: Vec<usize> = (0..4).map(|mode| space.single_index(mode)).collect();
    for (p, k) in weights {
        if p == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let mut psi = DVector::zeros(dim);
        for mode in 0..4 {
            psi[singles[mode]] = v[mode];
        }
        m += (&psi * psi.adjoint()) * C64::new(p, 0.0);
    }
    m[(space.vacuum_index(), space.vacuum_index())] += C64::new((1.0 - total).max(0.0), 0.0);
    Ok(MultiPairState::from_matrix(space.clone(), m))
}

/// Deviations between the Haberkorn trajectory and the reduced multi-pair
/// trajectory on a shared grid.
#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub times: Vec<f64>,
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    pub haberkorn: Trajectory<OnePairState>,
    pub reduced: Vec<OnePairState>,
}

/// Runs both the one-pair Haberkorn equation and the multi-pair equation
/// (with `n_max = 1`) from the same initial state.
pub fn equivalence_report(rho0: &OnePairState, h: &Hamiltonian4, rates: RateParams, grid: &TimeGrid) -> Result<EquivalenceReport> {
    equivalence_report_in(&FockSpace::pairs(1), rho0, h, rates, grid)
}

pub fn equivalence_report_in(
    space: &FockSpace,
    rho0: &OnePairState,
    h: &Hamiltonian4,
    rates: RateParams,
    grid: &TimeGrid,
) -> Result<EquivalenceReport> {
    let generator = crate::models::Generator::haberkorn(h.clone(), rates);
    let haberkorn = crate::integrate::integrate(&generator, rho0, grid)?;
    let model = MultiPairModel::from_hamiltonian(space, h, rates)?;
    let lifted = lift_one_pair_state(rho0, space)?;
    let multi = model.integrate(&lifted, grid, space.dim().max(DEFAULT_DIM_CAP))?;
    let reduced: Vec<OnePairState> = multi.states.iter().map(|s| model.reduce(s)).collect();
    let deviations: Vec<f64> = haberkorn
        .states
        .iter()
        .zip(&reduced)
        .map(|(a, b)| a.max_abs_diff(b))
        .collect();
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    Ok(EquivalenceReport {
        times: grid.times(),
        deviations,
        max_deviation,
        haberkorn,
        reduced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::random;
    use crate::spin::{make_hamiltonian, HamiltonianKind, SpinBasisIndex::*};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn basis_enumeration() {
        let space = FockSpace::pairs(2);
        assert_eq!(space.dim(), 81);
        assert_eq!(space.occupations(0), vec![0, 0, 0, 0]);
        assert_eq!(space.occupations(1), vec![0, 0, 0, 1]);
        assert_eq!(space.occupations(80), vec![2, 2, 2, 2]);
        for (i, occ) in space.basis().enumerate() {
            assert_eq!(space.index(&occ), Some(i));
        }
        assert_eq!(space.index(&[3, 0, 0, 0]), None);
    }

    #[test]
    fn ladder_action() {
        let space = FockSpace::pairs(2);
        let ladders = ladder_operators(&space).unwrap();
        let a_s = &ladders[S.index()];
        let vac = space.vacuum_index();
        let one_s = space.index(&[1, 0, 0, 0]).unwrap();
        let one_tp = space.index(&[0, 1, 0, 0]).unwrap();
        let two_s = space.index(&[2, 0, 0, 0]).unwrap();

        let mut v = DVector::zeros(space.dim());
        v[one_s] = c(1.0);
        let out = a_s.a.apply(&v);
        assert_eq!(out[vac], c(1.0));
        assert_eq!(out.iter().filter(|z| z.norm() > 0.0).count(), 1);

        let mut v = DVector::zeros(space.dim());
        v[one_tp] = c(1.0);
        assert!(a_s.a.apply(&v).iter().all(|z| z.norm() == 0.0));

        assert!((a_s.a.get(one_s, two_s) - c(2f64.sqrt())).norm() < 1e-15);
        assert_eq!(a_s.a_dag, a_s.a.adjoint());
        for l in &ladders {
            assert!(l.a.nnz() <= space.dim());
        }

        // <vac| a_S a_S† |vac> = 1
        let aad = a_s.a.matmul(&a_s.a_dag);
        assert_eq!(aad.get(vac, vac), c(1.0));
        assert!(ladder_operators(&FockSpace::pairs(0)).is_err());
    }

    #[test]
    fn canonical_commutators_below_cutoff() {
        let space = FockSpace::pairs(2);
        let ladders = ladder_operators(&space).unwrap();
        let interior: Vec<usize> = space
            .basis()
            .enumerate()
            .filter(|(_, occ)| occ.iter().all(|&n| n < space.n_max()))
            .map(|(i, _)| i)
            .collect();
        for i in 0..4 {
            for j in 0..4 {
                let ca = ladders[i].a.commutator(&ladders[j].a_dag).to_dense();
                let caa = ladders[i].a.commutator(&ladders[j].a).to_dense();
                for &col in &interior {
                    for row in 0..space.dim() {
                        let expected = if i == j && row == col { c(1.0) } else { c(0.0) };
                        assert!((ca[(row, col)] - expected).norm() < 1e-14, "[a{i}, a{j}†]");
                        assert!(caa[(row, col)].norm() < 1e-14, "[a{i}, a{j}]");
                    }
                }
            }
        }
        // distinct modes commute everywhere, including the edge
        let cross = ladders[S.index()].a.commutator(&ladders[T0.index()].a_dag);
        assert!(cross.is_zero());
    }

    #[test]
    fn second_quantization() {
        let space = FockSpace::pairs(2);
        assert!(second_quantize(&Hamiltonian4::zero(), &space).unwrap().is_zero());

        let h = make_hamiltonian(HamiltonianKind::Exchange, &[1.7]).unwrap();
        let hh = second_quantize(&h, &space).unwrap();
        assert_eq!(&one_pair_sector(&hh, &space), h.matrix());

        let mut rng = random::rng(4);
        let h = random::hamiltonian(&mut rng, 1.0);
        let hh = second_quantize(&h, &space).unwrap();
        assert!(max_abs_diff(&one_pair_sector(&hh, &space), h.matrix()) < 1e-15);
        assert!(hermiticity_defect(&hh.to_dense()) < 1e-15);

        let n = total_number(&ladder_operators(&space).unwrap());
        let comm = hh.commutator(&n).to_dense();
        for (col, occ) in space.basis().enumerate() {
            if occ.iter().all(|&k| k < space.n_max()) {
                for row in 0..space.dim() {
                    assert!(comm[(row, col)].norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn multipair_rhs_examples() {
        let space = FockSpace::pairs(1);
        let zero_h = SparseOp::zeros(space.dim());
        let r = RateParams::new(1.0, 0.0).unwrap();

        let vac = MultiPairState::vacuum(&space);
        let out = multipair_rhs(&vac, &zero_h, RateParams::new(1.0, 2.0).unwrap(), &space).unwrap();
        assert!(out.iter().all(|z| z.norm() == 0.0));

        let one_s = MultiPairState::fock_state(&space, &[1, 0, 0, 0]).unwrap();
        let out = multipair_rhs(&one_s, &zero_h, r, &space).unwrap();
        let expected = (vac.matrix() - one_s.matrix()) * c(2.0);
        assert!(max_abs_diff(&out, &expected) < 1e-15);

        let space = FockSpace::pairs(2);
        let mut rng = random::rng(12);
        let h = random::hamiltonian(&mut rng, 1.0);
        let hh = second_quantize(&h, &space).unwrap();
        for _ in 0..5 {
            let rho = MultiPairState::from_matrix(space.clone(), random::hermitian(&mut rng, space.dim(), 1.0));
            let out = multipair_rhs(&rho, &hh, RateParams::new(0.7, 1.3).unwrap(), &space).unwrap();
            assert!(out.trace().norm() < 1e-12);
            assert!(hermiticity_defect(&out) < 1e-12);
        }
    }

    #[test]
    fn reduction_examples() {
        let space = FockSpace::pairs(1);
        let one_s = MultiPairState::fock_state(&space, &[1, 0, 0, 0]).unwrap();
        assert_eq!(reduce_to_one_pair(&one_s, &space).unwrap(), OnePairState::singlet());
        let vac = MultiPairState::vacuum(&space);
        assert_eq!(reduce_to_one_pair(&vac, &space).unwrap(), OnePairState::zero());

        let (alpha, beta) = (C64::new(0.6, 0.0), C64::new(0.0, 0.8));
        let mut psi = DVector::zeros(space.dim());
        psi[space.single_index(S.index())] = alpha;
        psi[space.single_index(T0.index())] = beta;
        let rho = MultiPairState::pure(&space, &psi).unwrap();
        let reduced = reduce_to_one_pair(&rho, &space).unwrap();
        let expected = OnePairState::coherent_s_t0(alpha, beta).unwrap();
        assert!(reduced.max_abs_diff(&expected) < 1e-15);
        // <a_S† a_T0> = alpha* beta sits in entry (T0, S)
        assert!((reduced.element(T0, S) - alpha.conj() * beta).norm() < 1e-15);
    }

    #[test]
    fn mean_value_examples() {
        let space = FockSpace::pairs(1);
        let mut rng = random::rng(21);
        let rates = RateParams::new(0.9, 0.4).unwrap();
        let model = MultiPairModel::new(&space, SparseOp::zeros(space.dim()), rates).unwrap();
        let lifted = lift_one_pair_state(&random::physical_state(&mut rng, 1.0), &space).unwrap();

        let o = model.bilinear(S, S);
        let lhs = model.mean_value_rhs(&o, &lifted);
        assert!((lhs - lifted.expectation(&o) * (-2.0 * rates.k_s)).norm() < 1e-14);

        let o = model.bilinear(S, T0);
        let lhs = model.mean_value_rhs(&o, &lifted);
        assert!((lhs - lifted.expectation(&o) * (-(rates.k_s + rates.k_t))).norm() < 1e-14);

        let o = model.bilinear(TPlus, TMinus);
        let lhs = model.mean_value_rhs(&o, &lifted);
        assert!((lhs - lifted.expectation(&o) * (-2.0 * rates.k_t)).norm() < 1e-14);
    }

    #[test]
    fn mean_value_is_adjoint_of_rhs() {
        let space = FockSpace::pairs(2);
        let mut rng = random::rng(50);
        for _ in 0..50 {
            let h = random::hamiltonian(&mut rng, 1.0);
            use rand::Rng;
            let rates = RateParams::new(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)).unwrap();
            let model = MultiPairModel::from_hamiltonian(&space, &h, rates).unwrap();
            let rho = MultiPairState::from_matrix(space.clone(), random::hermitian(&mut rng, space.dim(), 1.0));
            let dense_o = random::hermitian(&mut rng, space.dim(), 1.0);
            let o = SparseOp::from_triplets(
                space.dim(),
                (0..space.dim()).flat_map(|r| (0..space.dim()).map(move |c| (r, c))).map(|(r, c)| (r, c, dense_o[(r, c)])),
            );
            let lhs = model.mean_value_rhs(&o, &rho);
            let rhs = o.expectation(&model.rhs(&rho).unwrap());
            assert!((lhs - rhs).norm() < 1e-11);
            let via_adjoint = model.system().adjoint_apply(&o).expectation(rho.matrix());
            assert!((lhs - via_adjoint).norm() < 1e-11);
        }
    }

    #[test]
    fn multipair_propagation_examples() {
        let space = FockSpace::pairs(2);
        let zero_h = SparseOp::zeros(space.dim());
        let r = RateParams::new(1.0, 0.0).unwrap();
        let n = total_number(&ladder_operators(&space).unwrap());

        let one_s = MultiPairState::fock_state(&space, &[1, 0, 0, 0]).unwrap();
        let traj = integrate_multipair(&one_s, &zero_h, r, &TimeGrid::new(0.0, 1.0, 1000).unwrap(), DEFAULT_DIM_CAP).unwrap();
        assert!((traj.last().expectation(&n).re - (-2.0f64).exp()).abs() < 1e-8);

        let two_s = MultiPairState::fock_state(&space, &[2, 0, 0, 0]).unwrap();
        let traj = integrate_multipair(&two_s, &zero_h, r, &TimeGrid::new(0.0, 0.5, 1000).unwrap(), DEFAULT_DIM_CAP).unwrap();
        assert!((traj.last().expectation(&n).re - 2.0 * (-1.0f64).exp()).abs() < 1e-8);
        for s in &traj.states {
            assert!((s.trace().re - 1.0).abs() < 1e-9);
            assert!(s.min_eigenvalue() >= -1e-8);
        }

        let vac = MultiPairState::vacuum(&space);
        let traj = integrate_multipair(&vac, &zero_h, r, &TimeGrid::new(0.0, 1.0, 100).unwrap(), DEFAULT_DIM_CAP).unwrap();
        assert!(traj.states.iter().all(|s| s == &vac));
    }

    #[test]
    fn dimension_cap_enforced() {
        let space = FockSpace::pairs(3);
        let vac = MultiPairState::vacuum(&space);
        let res = integrate_multipair(
            &vac,
            &SparseOp::zeros(space.dim()),
            RateParams::zero(),
            &TimeGrid::new(0.0, 1.0, 10).unwrap(),
            DEFAULT_DIM_CAP,
        );
        assert!(matches!(res, Err(Error::DimensionCap { dim: 256, cap: 81 })));
    }

    #[test]
    fn edge_population_never_grows_without_hamiltonian() {
        let space = FockSpace::pairs(2);
        let mut rng = random::rng(77);
        let rho0 = MultiPairState::from_matrix(space.clone(), random::density_matrix(&mut rng, space.dim()));
        let model = MultiPairModel::new(&space, SparseOp::zeros(space.dim()), RateParams::new(0.8, 0.5).unwrap()).unwrap();
        let traj = model.integrate(&rho0, &TimeGrid::new(0.0, 2.0, 400).unwrap(), DEFAULT_DIM_CAP).unwrap();
        let edge = |s: &MultiPairState| s.population_where(|occ| occ.contains(&2));
        for w in traj.states.windows(2) {
            assert!(edge(&w[1]) <= edge(&w[0]) + 1e-12);
        }
    }

    #[test]
    fn truncation_is_exact_for_bounded_pair_number() {
        // two pairs in a superposition, evolved with mixing at n_max = 2 and 3
        let h = make_hamiltonian(HamiltonianKind::St0Mixing, &[1.1]).unwrap();
        let rates = RateParams::new(0.6, 0.2).unwrap();
        let grid = TimeGrid::new(0.0, 1.5, 600).unwrap();
        let reduced = |n_max: usize| {
            let space = FockSpace::pairs(n_max);
            let mut psi = DVector::zeros(space.dim());
            psi[space.index(&[2, 0, 0, 0]).unwrap()] = c(0.6);
            psi[space.index(&[1, 0, 1, 0]).unwrap()] = c(0.8);
            let rho0 = MultiPairState::pure(&space, &psi).unwrap();
            let model = MultiPairModel::from_hamiltonian(&space, &h, rates).unwrap();
            let traj = model.integrate(&rho0, &grid, 256).unwrap();
            let above = traj
                .states
                .iter()
                .map(|s| s.population_where(|occ| occ.iter().sum::<usize>() > 2))
                .fold(0.0, f64::max);
            assert!(above.abs() < 1e-14);
            traj.states.iter().map(|s| model.reduce(s)).collect::<Vec<_>>()
        };
        let small = reduced(2);
        let large = reduced(3);
        for (a, b) in small.iter().zip(&large) {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
    }

    #[test]
    fn lifting_preserves_one_pair_state() {
        let space = FockSpace::pairs(1);
        let mut rng = random::rng(9);
        for tr in [1.0, 0.6] {
            let rho = random::physical_state(&mut rng, tr);
            let lifted = lift_one_pair_state(&rho, &space).unwrap();
            lifted.validate().unwrap();
            assert!(reduce_to_one_pair(&lifted, &space).unwrap().max_abs_diff(&rho) < 1e-14);
        }
        let too_many = random::physical_state(&mut rng, 1.5);
        assert!(matches!(lift_one_pair_state(&too_many, &space), Err(Error::Preparation(_))));
    }

    #[test]
    fn equivalence_examples() {
        let h = make_hamiltonian(HamiltonianKind::St0Mixing, &[1.0]).unwrap();
        let rates = RateParams::new(1.0, 0.3).unwrap();
        let grid = TimeGrid::new(0.0, 3.0, 3000).unwrap();
        let rep = equivalence_report(&OnePairState::singlet(), &h, rates, &grid).unwrap();
        assert!(rep.max_deviation <= 1e-7, "{}", rep.max_deviation);

        let rep = equivalence_report(&OnePairState::singlet(), &h, RateParams::zero(), &grid).unwrap();
        assert!(rep.max_deviation <= 1e-9);

        let mut rng = random::rng(1234);
        let h = random::hamiltonian(&mut rng, 1.0);
        let rep = equivalence_report(&OnePairState::maximally_mixed(), &h, RateParams::new(0.3, 1.0).unwrap(), &grid).unwrap();
        assert!(rep.max_deviation <= 1e-7);

        // the same holds in a larger truncation
        let rep = equivalence_report_in(&FockSpace::pairs(2), &OnePairState::singlet(), &h, rates, &TimeGrid::new(0.0, 1.0, 500).unwrap()).unwrap();
        assert!(rep.max_deviation <= 1e-7);
    }
}
