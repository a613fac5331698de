//! Named scalar observables of one-pair states.

use std::fmt;
use std::str::FromStr;

use crate::spin::{OnePairState, RateParams, SpinBasisIndex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Observable {
    Trace,
    Population(SpinBasisIndex),
    CoherenceRe(SpinBasisIndex, SpinBasisIndex),
    CoherenceIm(SpinBasisIndex, SpinBasisIndex),
    FluxS,
    FluxT,
    /// Mean pair number; only meaningful for multi-pair runs, where it is the
    /// trace of the reduced state.
    MeanN,
}

impl Observable {
    /// Every observable in a fixed order.
    pub fn all() -> Vec<Observable> {
        let mut out = vec![Observable::Trace];
        out.extend(SpinBasisIndex::ALL.iter().map(|&b| Observable::Population(b)));
        for (a, b) in coherence_pairs() {
            out.push(Observable::CoherenceRe(a, b));
            out.push(Observable::CoherenceIm(a, b));
        }
        out.extend([Observable::FluxS, Observable::FluxT, Observable::MeanN]);
        out
    }

    pub fn name(&self) -> String {
        match self {
            Self::Trace => "trace".into(),
            Self::Population(b) => format!("pop_{b}"),
            Self::CoherenceRe(a, b) => format!("coh_{a}_{b}_re"),
            Self::CoherenceIm(a, b) => format!("coh_{a}_{b}_im"),
            Self::FluxS => "flux_S".into(),
            Self::FluxT => "flux_T".into(),
            Self::MeanN => "mean_N".into(),
        }
    }

    pub fn multipair_only(&self) -> bool {
        matches!(self, Self::MeanN)
    }

    /// Value on a state; fluxes use `(2kS Tr QS rho, 2kT Tr QT rho)`.
    pub fn evaluate(&self, rho: &OnePairState, flux_rates: RateParams) -> f64 {
        match *self {
            Self::Trace | Self::MeanN => rho.trace().re,
            Self::Population(b) => rho.population(b),
            Self::CoherenceRe(a, b) => rho.element(a, b).re,
            Self::CoherenceIm(a, b) => rho.element(a, b).im,
            Self::FluxS => 2.0 * flux_rates.k_s * rho.singlet_population(),
            Self::FluxT => 2.0 * flux_rates.k_t * rho.triplet_population(),
        }
    }
}

/// The six unordered basis pairs `(a, b)` with `a` before `b`.
pub fn coherence_pairs() -> Vec<(SpinBasisIndex, SpinBasisIndex)> {
    let all = SpinBasisIndex::ALL;
    let mut out = Vec::with_capacity(6);
    for i in 0..4 {
        for j in i + 1..4 {
            out.push((all[i], all[j]));
        }
    }
    out
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Observable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::all()
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| format!("unknown observable `{s}`"))
    }
}
