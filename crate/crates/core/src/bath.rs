//! Rate constants from bath correlation functions and a pseudomode check of
//! the weak-coupling result.
//!
//! For a correlation function `g(tau)` and coupling `|lambda|^2`,
//! `kS = |lambda|^2 Re int_0^inf g` and `kappaS = |lambda|^2 Im int_0^inf g`;
//! `kappaS` renormalizes the pair Hamiltonian by `kappaS a_S† a_S`.

use nalgebra::DVector;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{FockSpace, LindbladSystem, MultiPairState, SparseOp, ladder_operators};
use crate::integrate::TimeGrid;
use crate::linalg::{linear_fit, unwrap_phases};
use crate::spin::SpinBasisIndex;

/// Largest `lambda / gamma` accepted by [`pseudomode_validation`].
pub const MAX_COUPLING_RATIO: f64 = 0.2;
/// Largest rms residual of the log-linear fit accepted as exponential decay.
pub const FIT_RMS_TOL: f64 = 1e-3;
/// A tabulated function must fall to this fraction of its peak by the last point.
pub const TAIL_TOL: f64 = 1e-8;

/// Bath correlation function on `tau >= 0`, extended by `g(-tau) = g(tau)*`.
#[derive(Clone, Debug, PartialEq)]
pub enum CorrelationFunction {
    /// `g0 exp(-(gamma + i delta) tau)`
    Exponential { g0: C64, gamma: f64, delta: f64 },
    /// Values on an increasing grid starting at zero; linear interpolation
    /// inside, exponential extrapolation from the last two points beyond.
    Tabulated { taus: Vec<f64>, values: Vec<C64> },
}

impl CorrelationFunction {
    pub fn exponential(g0: C64, gamma: f64, delta: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: gamma,
                reason: "decay rate must be positive",
            });
        }
        if !delta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: delta,
                reason: "detuning must be finite",
            });
        }
        Ok(Self::Exponential { g0, gamma, delta })
    }

    pub fn tabulated(taus: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        if taus.len() != values.len() || taus.len() < 2 {
            return Err(Error::Grid("tabulated correlation needs matching grids with >= 2 points".into()));
        }
        if taus[0] != 0.0 || taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid("tau grid must start at 0 and increase strictly".into()));
        }
        Ok(Self::Tabulated { taus, values })
    }

    pub fn eval(&self, tau: f64) -> C64 {
        if tau < 0.0 {
            return self.eval(-tau).conj();
        }
        match self {
            Self::Exponential { g0, gamma, delta } => g0 * (-C64::new(*gamma, *delta) * tau).exp(),
            Self::Tabulated { taus, values } => {
                let n = taus.len();
                if tau >= taus[n - 1] {
                    return match tail_rate(taus, values) {
                        Some(c) => values[n - 1] * (-c * (tau - taus[n - 1])).exp(),
                        None => C64::new(0.0, 0.0),
                    };
                }
                let k = taus.partition_point(|&t| t <= tau) - 1;
                let w = (tau - taus[k]) / (taus[k + 1] - taus[k]);
                values[k] * (1.0 - w) + values[k + 1] * w
            }
        }
    }

    /// `int_0^inf g(tau) dtau`: closed form for the exponential, trapezoid
    /// plus exponential tail for tabulated data.
    pub fn half_line_integral(&self) -> Result<C64> {
        match self {
            Self::Exponential { g0, gamma, delta } => Ok(g0 / C64::new(*gamma, *delta)),
            Self::Tabulated { taus, values } => {
                let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
                let last = values[values.len() - 1];
                if peak > 0.0 && last.norm() > TAIL_TOL * peak {
                    return Err(Error::NonConvergentTail {
                        ratio: last.norm() / peak,
                    });
                }
                let body: C64 = taus
                    .windows(2)
                    .zip(values.windows(2))
                    .map(|(t, v)| (v[0] + v[1]) * (0.5 * (t[1] - t[0])))
                    .sum();
                let tail = if last.norm() == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    match tail_rate(taus, values) {
                        Some(c) => last / c,
                        None => {
                            return Err(Error::NonConvergentTail {
                                ratio: last.norm() / peak,
                            })
                        }
                    }
                };
                Ok(body + tail)
            }
        }
    }

    /// `int_0^inf g(tau) dtau` by adaptive Gauss-Kronrod quadrature after the
    /// substitution `tau = u / (1 - u)`.
    pub fn half_line_quadrature(&self, tol: f64) -> C64 {
        let f = |u: f64| {
            let one_minus = 1.0 - u;
            self.eval(u / one_minus) / (one_minus * one_minus)
        };
        adaptive_gauss_kronrod(&f, 0.0, 1.0, tol, 0)
    }

    /// Correlation time `1 / gamma` of the exponential form.
    pub fn correlation_time(&self) -> Option<f64> {
        match self {
            Self::Exponential { gamma, .. } => Some(1.0 / gamma),
            Self::Tabulated { .. } => None,
        }
    }
}

/// Complex decay constant `c` with `g(t_n + s) = g(t_n) exp(-c s)` fitted to
/// the last two samples; `None` if it does not decay.
fn tail_rate(taus: &[f64], values: &[C64]) -> Option<C64> {
    let n = taus.len();
    let (a, b) = (values[n - 2], values[n - 1]);
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return None;
    }
    let c = -(b / a).ln() / (taus[n - 1] - taus[n - 2]);
    (c.re > 0.0).then_some(c)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gauss_kronrod_15(f: &impl Fn(f64) -> C64, a: f64, b: f64) -> (C64, C64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let dx = half * XGK[k];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * WGK[k];
        if k % 2 == 1 {
            gauss += pair * WG[k / 2];
        }
    }
    (kronrod * half, gauss * half)
}

fn adaptive_gauss_kronrod(f: &impl Fn(f64) -> C64, a: f64, b: f64, tol: f64, depth: u32) -> C64 {
    let (k, g) = gauss_kronrod_15(f, a, b);
    if (k - g).norm() <= tol.max(1e-15 * k.norm()) || depth >= 40 {
        return k;
    }
    let mid = 0.5 * (a + b);
    adaptive_gauss_kronrod(f, a, mid, 0.5 * tol, depth + 1) + adaptive_gauss_kronrod(f, mid, b, 0.5 * tol, depth + 1)
}

/// Squared modulus of the pair-bath coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathCouplingParams {
    pub lambda_abs2: f64,
}

impl BathCouplingParams {
    pub fn new(lambda_abs2: f64) -> Result<Self> {
        if !(lambda_abs2 >= 0.0) || !lambda_abs2.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lambda_abs2",
                value: lambda_abs2,
                reason: "coupling strength must be finite and nonnegative",
            });
        }
        Ok(Self { lambda_abs2 })
    }
}

fn rates_from_integral(integral: C64, coupling: BathCouplingParams) -> Result<(f64, f64)> {
    let k_s = coupling.lambda_abs2 * integral.re;
    let kappa_s = coupling.lambda_abs2 * integral.im;
    if k_s < 0.0 {
        return Err(Error::NegativeRate(k_s));
    }
    Ok((k_s, kappa_s))
}

/// `(kS, kappaS)` from the half-line integral of `g`.
pub fn rates_from_correlation(g: &CorrelationFunction, coupling: BathCouplingParams) -> Result<(f64, f64)> {
    rates_from_integral(g.half_line_integral()?, coupling)
}

/// Same as [`rates_from_correlation`] with the integral done by quadrature.
pub fn rates_by_quadrature(g: &CorrelationFunction, coupling: BathCouplingParams, tol: f64) -> Result<(f64, f64)> {
    rates_from_integral(g.half_line_quadrature(tol), coupling)
}

/// `H + kappaS a_S† a_S` on the pair Fock space.
pub fn renormalize_hamiltonian(h_hat: &SparseOp, kappa_s: f64, space: &FockSpace) -> Result<SparseOp> {
    if space.n_modes() != crate::fock::PAIR_MODES {
        return Err(Error::ModeCount {
            expected: crate::fock::PAIR_MODES,
            got: space.n_modes(),
        });
    }
    if kappa_s == 0.0 {
        return Ok(h_hat.clone());
    }
    let ladders = ladder_operators(space)?;
    let n_s = ladders[SpinBasisIndex::S.index()].number();
    Ok(h_hat.add(&n_s.scale(C64::new(kappa_s, 0.0))))
}

/// Inputs of the pair + damped auxiliary mode simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PseudomodeParams {
    /// Real coupling `lambda` in `lambda (a b† + b a†)`.
    pub lambda: f64,
    /// Damping of the auxiliary mode (amplitude decay rate).
    pub gamma: f64,
    /// Detuning of the auxiliary mode.
    pub delta: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl PseudomodeParams {
    /// Weak-coupling predictions `(kS, kappaS)` for the exponential bath
    /// `g(tau) = exp(-(gamma + i delta) tau)`.
    pub fn predicted_rates(&self) -> (f64, f64) {
        let d = self.gamma * self.gamma + self.delta * self.delta;
        let l2 = self.lambda * self.lambda;
        (l2 * self.gamma / d, -l2 * self.delta / d)
    }

    pub fn correlation_function(&self) -> Result<CorrelationFunction> {
        CorrelationFunction::exponential(C64::new(1.0, 0.0), self.gamma, self.delta)
    }
}

/// Fitted versus predicted rate constants from a pseudomode run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PseudomodeFit {
    pub fitted_rate: f64,
    pub fitted_shift: f64,
    pub predicted_k_s: f64,
    pub predicted_kappa_s: f64,
    pub fit_rms: f64,
}

impl PseudomodeFit {
    /// `|r - kS| / kS`, or the absolute difference when `kS = 0`.
    pub fn relative_error(&self) -> f64 {
        let diff = (self.fitted_rate - self.predicted_k_s).abs();
        if self.predicted_k_s > 0.0 {
            diff / self.predicted_k_s
        } else {
            diff
        }
    }
}

/// Pair mode and pseudomode as a two-mode Lindblad system (one quantum each).
pub fn pseudomode_system(p: &PseudomodeParams) -> Result<(FockSpace, LindbladSystem, SparseOp, SparseOp)> {
    let space = FockSpace::new(2, 1);
    let ladders = ladder_operators(&space)?;
    let (a, b) = (&ladders[0], &ladders[1]);
    let coupling = a.a.matmul(&b.a_dag).add(&b.a.matmul(&a.a_dag));
    let h = b.number().scale(C64::new(p.delta, 0.0)).add(&coupling.scale(C64::new(p.lambda, 0.0)));
    let system = LindbladSystem::new(h, vec![(p.gamma, b.a.clone())]);
    Ok((space, system, a.number(), a.a.clone()))
}

/// Simulates the pair mode coupled to a damped auxiliary mode, fits
/// `<a† a>(t) = A exp(-2 r t)` on `t in [0.5, 3] / kS`, and extracts the
/// frequency shift from the phase of `<a>` in a vacuum superposition run.
pub fn pseudomode_validation(p: &PseudomodeParams) -> Result<PseudomodeFit> {
    if !(p.gamma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            value: p.gamma,
            reason: "pseudomode damping must be positive",
        });
    }
    if !(p.lambda >= 0.0) || p.lambda / p.gamma > MAX_COUPLING_RATIO {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: p.lambda,
            reason: "coupling must satisfy 0 <= lambda / gamma <= 0.2",
        });
    }
    let (k_s, kappa_s) = p.predicted_rates();
    if k_s > 0.0 && p.t_end < 3.0 / k_s {
        return Err(Error::InvalidParameter {
            name: "t_end",
            value: p.t_end,
            reason: "simulation must cover at least 3 / kS",
        });
    }
    let grid = TimeGrid::new(0.0, p.t_end, p.n_steps)?;
    let (space, system, n_pair, a_pair) = pseudomode_system(p)?;
    let (lo, hi) = if k_s > 0.0 { (0.5 / k_s, 3.0 / k_s) } else { (0.0, p.t_end) };
    let times = grid.times();
    let window: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= lo && times[k] <= hi).collect();

    let excited = MultiPairState::fock_state(&space, &[1, 0])?;
    let states = system.integrate(excited.matrix(), &grid)?;
    let xs: Vec<f64> = window.iter().map(|&k| times[k]).collect();
    let mut log_pop = Vec::with_capacity(window.len());
    for &k in &window {
        let pop = n_pair.expectation(&states[k]).re;
        if !(pop > 0.0) {
            return Err(Error::Unphysical(format!("pair population {pop:.3e} at t = {}", times[k])));
        }
        log_pop.push(pop.ln());
    }
    let (_, slope, rms) = linear_fit(&xs, &log_pop);
    if rms > FIT_RMS_TOL {
        return Err(Error::FitResidual { rms, tol: FIT_RMS_TOL });
    }
    let fitted_rate = -0.5 * slope + 0.0;

    let mut psi = DVector::zeros(space.dim());
    let amp = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    psi[space.index(&[0, 0]).unwrap()] = amp;
    psi[space.index(&[1, 0]).unwrap()] = amp;
    let superposed = MultiPairState::pure(&space, &psi)?;
    let states = system.integrate(superposed.matrix(), &grid)?;
    let phases: Vec<f64> = states.iter().map(|m| a_pair.expectation(m).arg()).collect();
    let phases = unwrap_phases(&phases);
    let ys: Vec<f64> = window.iter().map(|&k| phases[k]).collect();
    let (_, phase_slope, _) = linear_fit(&xs, &ys);

    Ok(PseudomodeFit {
        fitted_rate,
        fitted_shift: -phase_slope + 0.0,
        predicted_k_s: k_s,
        predicted_kappa_s: kappa_s,
        fit_rms: rms,
    })
}
