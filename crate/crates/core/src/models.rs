//! Right-hand sides of the one-pair kinetic equations.
//!
//! * Haberkorn: `-i[H,rho] - kS{QS,rho} - kT{QT,rho}`
//! * measurement only: `-i[H,rho] + k(QS rho QS + QT rho QT - rho)`
//! * measurement with recombination:
//!   `-i[H,rho] + k((1-pS) QS rho QS + (1-pT) QT rho QT - rho)`
//! * the same generator rewritten with `QT = 1 - QS`:
//!   `-i[H,rho] + (2k - k~S - k~T) QS rho QS - (k - k~T){QS,rho} - k~T rho`
//!
//! Every generator is complex-linear, so it may be applied to any 4x4 matrix;
//! the checked entry points only accept Hermitian states.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{max_abs_diff, I};
use crate::random;
use crate::spin::{check_rate, projectors, Hamiltonian4, Mat4, OnePairState, RateParams};

/// Hermiticity defect above which a state is rejected by the generators.
pub const INPUT_HERMITIAN_TOL: f64 = 1e-10;

/// Measurement frequency and per-outcome recombination probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementParams {
    k: f64,
    p_s: f64,
    p_t: f64,
}

impl MeasurementParams {
    pub fn new(k: f64, p_s: f64, p_t: f64) -> Result<Self> {
        check_rate("k", k)?;
        check_probability("pS", p_s)?;
        check_probability("pT", p_t)?;
        Ok(Self { k, p_s, p_t })
    }

    /// Parameters with `k = k~S + k~T`, i.e. `pS + pT = 1`.
    pub fn jones_hore(k_tilde_s: f64, k_tilde_t: f64) -> Result<Self> {
        check_rate("k~S", k_tilde_s)?;
        check_rate("k~T", k_tilde_t)?;
        let k = k_tilde_s + k_tilde_t;
        if k == 0.0 {
            return Ok(Self { k, p_s: 1.0, p_t: 0.0 });
        }
        Ok(Self {
            k,
            p_s: k_tilde_s / k,
            p_t: 1.0 - k_tilde_s / k,
        })
    }

    /// Jones-Hore parameters whose channel loss rates match a Haberkorn model:
    /// `k~S = 2 kS`, `k~T = 2 kT`.
    pub fn jones_hore_matching(rates: RateParams) -> Self {
        Self::jones_hore(2.0 * rates.k_s, 2.0 * rates.k_t)
            .expect("validated rates give valid parameters")
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn p_s(&self) -> f64 {
        self.p_s
    }

    pub fn p_t(&self) -> f64 {
        self.p_t
    }

    pub fn k_tilde_s(&self) -> f64 {
        self.p_s * self.k
    }

    pub fn k_tilde_t(&self) -> f64 {
        self.p_t * self.k
    }

    pub fn is_jones_hore(&self) -> bool {
        (self.p_s + self.p_t - 1.0).abs() <= 1e-12
    }

    /// Haberkorn-convention rates with the same channel loss: `k~ / 2`.
    pub fn equivalent_rates(&self) -> RateParams {
        RateParams {
            k_s: 0.5 * self.k_tilde_s(),
            k_t: 0.5 * self.k_tilde_t(),
        }
    }
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter {
            name,
            value: p,
            reason: "probability must lie in [0, 1]",
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    Haberkorn,
    MeasurementOnly,
    MeasurementRecombination,
    MeasurementRecombinationRewritten,
    JonesHore,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 5] = [
        Self::Haberkorn,
        Self::MeasurementOnly,
        Self::MeasurementRecombination,
        Self::MeasurementRecombinationRewritten,
        Self::JonesHore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Haberkorn => "haberkorn",
            Self::MeasurementOnly => "measurement-only",
            Self::MeasurementRecombination => "measurement-recombination",
            Self::MeasurementRecombinationRewritten => "measurement-recombination-rewritten",
            Self::JonesHore => "jones-hore",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown generator kind `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Dissipation {
    Haberkorn(RateParams),
    MeasurementOnly { k: f64 },
    MeasurementRecombination(MeasurementParams),
    Rewritten(MeasurementParams),
    JonesHore(MeasurementParams),
}

/// A one-pair kinetic equation: Hamiltonian plus model-specific loss terms.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    hamiltonian: Hamiltonian4,
    dissipation: Dissipation,
}

impl Generator {
    pub fn haberkorn(hamiltonian: Hamiltonian4, rates: RateParams) -> Self {
        Self {
            hamiltonian,
            dissipation: Dissipation::Haberkorn(rates),
        }
    }

    pub fn measurement_only(hamiltonian: Hamiltonian4, k: f64) -> Result<Self> {
        check_rate("k", k)?;
        Ok(Self {
            hamiltonian,
            dissipation: Dissipation::MeasurementOnly { k },
        })
    }

    pub fn measurement_recombination(hamiltonian: Hamiltonian4, params: MeasurementParams) -> Self {
        Self {
            hamiltonian,
            dissipation: Dissipation::MeasurementRecombination(params),
        }
    }

    pub fn measurement_recombination_rewritten(
        hamiltonian: Hamiltonian4,
        params: MeasurementParams,
    ) -> Self {
        Self {
            hamiltonian,
            dissipation: Dissipation::Rewritten(params),
        }
    }

    pub fn jones_hore(hamiltonian: Hamiltonian4, params: MeasurementParams) -> Result<Self> {
        if !params.is_jones_hore() {
            return Err(Error::InvalidParameter {
                name: "pS + pT",
                value: params.p_s + params.p_t,
                reason: "the Jones-Hore case requires pS + pT = 1",
            });
        }
        Ok(Self {
            hamiltonian,
            dissipation: Dissipation::JonesHore(params),
        })
    }

    pub fn kind(&self) -> GeneratorKind {
        match self.dissipation {
            Dissipation::Haberkorn(_) => GeneratorKind::Haberkorn,
            Dissipation::MeasurementOnly { .. } => GeneratorKind::MeasurementOnly,
            Dissipation::MeasurementRecombination(_) => GeneratorKind::MeasurementRecombination,
            Dissipation::Rewritten(_) => GeneratorKind::MeasurementRecombinationRewritten,
            Dissipation::JonesHore(_) => GeneratorKind::JonesHore,
        }
    }

    pub fn hamiltonian(&self) -> &Hamiltonian4 {
        &self.hamiltonian
    }

    /// Rates feeding the recombination fluxes `(2kS Tr QS rho, 2kT Tr QT rho)`.
    /// For the measurement family these are `k~ / 2`, so that
    /// `d Tr rho / dt = -(flux_S + flux_T)` holds for every model.
    pub fn flux_rates(&self) -> RateParams {
        match self.dissipation {
            Dissipation::Haberkorn(r) => r,
            Dissipation::MeasurementOnly { .. } => RateParams::zero(),
            Dissipation::MeasurementRecombination(mp)
            | Dissipation::Rewritten(mp)
            | Dissipation::JonesHore(mp) => mp.equivalent_rates(),
        }
    }

    /// Largest dissipative rate appearing in the generator.
    pub fn max_rate(&self) -> f64 {
        match self.dissipation {
            Dissipation::Haberkorn(r) => 2.0 * r.max(),
            Dissipation::MeasurementOnly { k } => k,
            Dissipation::MeasurementRecombination(mp)
            | Dissipation::Rewritten(mp)
            | Dissipation::JonesHore(mp) => mp.k,
        }
    }

    /// `||H|| + max rate`, the scale used for step-size checks.
    pub fn rate_scale(&self) -> f64 {
        self.hamiltonian.norm_bound() + self.max_rate()
    }

    /// Applies the generator to an arbitrary 4x4 matrix.
    pub fn apply(&self, rho: &Mat4) -> Mat4 {
        let h = self.hamiltonian.matrix();
        let coherent = (h * rho - rho * h) * (-I);
        let (qs, qt) = projectors();
        let c = |x: f64| C64::new(x, 0.0);
        let dissipative = match self.dissipation {
            Dissipation::Haberkorn(r) => {
                -((qs * rho + rho * qs) * c(r.k_s)) - (qt * rho + rho * qt) * c(r.k_t)
            }
            Dissipation::MeasurementOnly { k } => (qs * rho * qs + qt * rho * qt - rho) * c(k),
            Dissipation::MeasurementRecombination(mp) | Dissipation::JonesHore(mp) => {
                (qs * rho * qs * c(1.0 - mp.p_s) + qt * rho * qt * c(1.0 - mp.p_t) - rho) * c(mp.k)
            }
            Dissipation::Rewritten(mp) => {
                let (ks, kt) = (mp.k_tilde_s(), mp.k_tilde_t());
                qs * rho * qs * c(2.0 * mp.k - ks - kt)
                    - (qs * rho + rho * qs) * c(mp.k - kt)
                    - rho * c(kt)
            }
        };
        coherent + dissipative
    }

    /// Checked evaluation on a Hermitian state.
    pub fn rhs(&self, rho: &OnePairState) -> Result<OnePairState> {
        check_hermitian(rho)?;
        Ok(OnePairState::from_matrix(self.apply(rho.matrix())))
    }
}

fn check_hermitian(rho: &OnePairState) -> Result<()> {
    let defect = rho.hermiticity_defect();
    if defect > INPUT_HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            defect,
            tol: INPUT_HERMITIAN_TOL,
        });
    }
    Ok(())
}

pub fn haberkorn_rhs(rho: &OnePairState, h: &Hamiltonian4, rates: RateParams) -> Result<OnePairState> {
    Generator::haberkorn(h.clone(), rates).rhs(rho)
}

pub fn measurement_only_rhs(rho: &OnePairState, h: &Hamiltonian4, k: f64) -> Result<OnePairState> {
    Generator::measurement_only(h.clone(), k)?.rhs(rho)
}

pub fn measurement_recombination_rhs(
    rho: &OnePairState,
    h: &Hamiltonian4,
    params: MeasurementParams,
) -> Result<OnePairState> {
    Generator::measurement_recombination(h.clone(), params).rhs(rho)
}

pub fn measurement_recombination_rewritten_rhs(
    rho: &OnePairState,
    h: &Hamiltonian4,
    params: MeasurementParams,
) -> Result<OnePairState> {
    Generator::measurement_recombination_rewritten(h.clone(), params).rhs(rho)
}

/// `2 Q rho Q - Q rho - rho Q` summed over both projectors.
pub fn full_dephasing_lindblad(rho: &Mat4) -> Mat4 {
    let (qs, qt) = projectors();
    let two = C64::new(2.0, 0.0);
    let term = |q: &Mat4| q * rho * q * two - q * rho - rho * q;
    term(&qs) + term(&qt)
}

/// Pure-measurement dissipator at unit rate: `QS rho QS + QT rho QT - rho`.
pub fn measurement_dissipator(rho: &Mat4) -> Mat4 {
    let (qs, qt) = projectors();
    qs * rho * qs + qt * rho * qt - rho
}

/// Deviation between half the summed full Lindblad dephasing structures and
/// the pure-measurement dissipator for one matrix.
pub fn dephasing_identity_deviation(rho: &Mat4) -> f64 {
    let half_sum = full_dephasing_lindblad(rho) * C64::new(0.5, 0.0);
    max_abs_diff(&half_sum, &measurement_dissipator(rho))
}

/// Checks the dephasing identity on `n_trials` seeded random Hermitian
/// matrices and returns the largest entry deviation.
pub fn dephasing_lindblad_identity_check(n_trials: usize, seed: u64) -> f64 {
    assert!(n_trials >= 1, "need at least one trial");
    let mut rng = random::rng(seed);
    (0..n_trials)
        .map(|_| dephasing_identity_deviation(&random::hermitian4(&mut rng, 1.0)))
        .fold(0.0, f64::max)
}

/// Instantaneous recombination fluxes `(2kS Tr QS rho, 2kT Tr QT rho)`.
pub fn recombination_yield_rates(rho: &OnePairState, rates: RateParams) -> Result<(f64, f64)> {
    let singlet = 2.0 * rates.k_s * rho.singlet_population();
    let triplet = 2.0 * rates.k_t * rho.triplet_population();
    if singlet < -1e-10 || triplet < -1e-10 {
        return Err(Error::Unphysical(format!(
            "negative recombination flux ({singlet:.3e}, {triplet:.3e})"
        )));
    }
    Ok((singlet, triplet))
}
