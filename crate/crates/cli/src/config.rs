//! TOML scenario files and their translation into simulation inputs.
//!
//! Unknown keys are rejected. Every semantic check reports the offending
//! field by its dotted path, e.g. ``field `rates.k_s` ``.

use std::fs;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Deserialize;

use radpair::fock::{FockSpace, DEFAULT_DIM_CAP};
use radpair::observables::Observable;
use radpair::{
    make_hamiltonian, random, validate_state, Generator, GeneratorKind, Hamiltonian4, HamiltonianKind,
    MeasurementParams, OnePairState, RateParams, TimeGrid,
};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSection {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub k_s: f64,
    pub k_t: f64,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    pub k: f64,
    #[serde(default)]
    pub p_s: f64,
    #[serde(default)]
    pub p_t: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub preset: String,
    pub alpha: Option<[f64; 2]>,
    pub beta: Option<[f64; 2]>,
    /// Row-major `(re, im)` pairs, 32 numbers.
    pub matrix: Option<Vec<f64>>,
    /// Occupations `(nS, nT+, nT0, nT-)` for the `fock` preset.
    pub occupations: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MultipairSection {
    pub n_max: Option<usize>,
    pub dim_cap: Option<usize>,
}

/// Configuration of `run`.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub model: String,
    pub seed: Option<u64>,
    pub observables: Option<Vec<String>>,
    pub hamiltonian: Option<HamiltonianSection>,
    pub rates: Option<RatesSection>,
    pub measurement: Option<MeasurementSection>,
    pub initial: InitialSection,
    pub grid: GridSection,
    pub multipair: Option<MultipairSection>,
}

/// One side of a comparison; optional sections override the shared ones.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub model: String,
    pub rates: Option<RatesSection>,
    pub measurement: Option<MeasurementSection>,
    pub grid: Option<GridSection>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExpectSection {
    pub max_below: Option<f64>,
    pub max_above: Option<f64>,
}

/// Configuration of `compare`.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub name: String,
    /// `trajectory` (default) or `generator`.
    pub mode: Option<String>,
    pub seed: Option<u64>,
    /// Random inputs evaluated in `generator` mode.
    pub samples: Option<usize>,
    pub observables: Option<Vec<String>>,
    pub hamiltonian: Option<HamiltonianSection>,
    pub rates: Option<RatesSection>,
    pub measurement: Option<MeasurementSection>,
    pub initial: Option<InitialSection>,
    pub grid: Option<GridSection>,
    pub multipair: Option<MultipairSection>,
    pub models: Vec<ModelEntry>,
    pub expect: Option<ExpectSection>,
}

/// Configuration of `bornmarkov`.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BornMarkovConfig {
    pub name: String,
    pub gamma: f64,
    #[serde(default)]
    pub delta: f64,
    /// Ladder of `lambda / gamma` values.
    pub ratios: Vec<f64>,
    /// Target for `h * (||H|| + rates)`; default 0.1.
    pub step_product: Option<f64>,
    /// Simulated time in units of `1 / kS`; default 3.2 (must be >= 3).
    pub t_end_factor: Option<f64>,
    /// Simulated time when `lambda = 0`; default 20.
    pub t_end_uncoupled: Option<f64>,
}

pub fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_config<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
}

/// Model selected for a simulation.
#[derive(Clone, Debug)]
pub enum ModelSpec {
    OnePair(Generator),
    MultiPair {
        hamiltonian: Hamiltonian4,
        rates: RateParams,
        n_max: Option<usize>,
        dim_cap: usize,
    },
}

impl ModelSpec {
    pub fn name(&self) -> String {
        match self {
            ModelSpec::OnePair(g) => g.kind().name().to_string(),
            ModelSpec::MultiPair { .. } => "multipair".to_string(),
        }
    }

    pub fn is_multipair(&self) -> bool {
        matches!(self, ModelSpec::MultiPair { .. })
    }
}

#[derive(Clone, Debug)]
pub enum InitialSpec {
    OnePair(Box<OnePairState>),
    Fock(Vec<usize>),
}

/// Fully resolved simulation request.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub model: ModelSpec,
    pub initial: InitialSpec,
    pub grid: TimeGrid,
    pub observables: Vec<Observable>,
    pub seed: Option<u64>,
    pub parameters: Vec<(String, String)>,
}

/// Shared sections from which scenarios are resolved.
pub struct Sections<'a> {
    pub seed: Option<u64>,
    pub observables: Option<&'a [String]>,
    pub hamiltonian: Option<&'a HamiltonianSection>,
    pub rates: Option<&'a RatesSection>,
    pub measurement: Option<&'a MeasurementSection>,
    pub initial: Option<&'a InitialSection>,
    pub grid: Option<&'a GridSection>,
    pub multipair: Option<&'a MultipairSection>,
}

impl RunConfig {
    pub fn sections(&self) -> Sections<'_> {
        Sections {
            seed: self.seed,
            observables: self.observables.as_deref(),
            hamiltonian: self.hamiltonian.as_ref(),
            rates: self.rates.as_ref(),
            measurement: self.measurement.as_ref(),
            initial: Some(&self.initial),
            grid: Some(&self.grid),
            multipair: self.multipair.as_ref(),
        }
    }

    pub fn resolve(&self, seed_override: Option<u64>) -> Result<Scenario> {
        let mut s = self.sections();
        if seed_override.is_some() {
            s.seed = seed_override;
        }
        resolve_scenario(&self.name, &self.model, &s)
    }
}

pub fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.') {
        return Err(CliError::field("name", "must be non-empty and use only [A-Za-z0-9._-]"));
    }
    Ok(())
}

fn require_seed(seed: Option<u64>, field: &str) -> Result<u64> {
    seed.ok_or_else(|| CliError::field(field, "randomized element requires a top-level `seed`"))
}

pub fn resolve_hamiltonian(section: Option<&HamiltonianSection>, seed: Option<u64>) -> Result<Hamiltonian4> {
    let Some(h) = section else {
        return Ok(Hamiltonian4::zero());
    };
    if h.kind == "random" {
        let seed = require_seed(seed, "hamiltonian.kind")?;
        let scale = match h.params.as_slice() {
            [] => 1.0,
            [s] if s.is_finite() && *s >= 0.0 => *s,
            _ => return Err(CliError::field("hamiltonian.params", "`random` takes at most one nonnegative scale")),
        };
        let mut rng = random::rng(seed);
        return Ok(random::hamiltonian(&mut rng, scale));
    }
    let kind: HamiltonianKind = h.kind.parse().map_err(|e| CliError::field("hamiltonian.kind", e))?;
    make_hamiltonian(kind, &h.params).map_err(|e| CliError::field("hamiltonian.params", e))
}

fn resolve_rates(section: Option<&RatesSection>) -> Result<RateParams> {
    let r = section.ok_or_else(|| CliError::field("rates", "section required by this model"))?;
    if !(r.k_s.is_finite() && r.k_s >= 0.0) {
        return Err(CliError::field("rates.k_s", format!("must be finite and >= 0, got {}", r.k_s)));
    }
    if !(r.k_t.is_finite() && r.k_t >= 0.0) {
        return Err(CliError::field("rates.k_t", format!("must be finite and >= 0, got {}", r.k_t)));
    }
    Ok(RateParams { k_s: r.k_s, k_t: r.k_t })
}

fn resolve_measurement(section: Option<&MeasurementSection>) -> Result<MeasurementParams> {
    let m = section.ok_or_else(|| CliError::field("measurement", "section required by this model"))?;
    if !(m.k.is_finite() && m.k >= 0.0) {
        return Err(CliError::field("measurement.k", format!("must be finite and >= 0, got {}", m.k)));
    }
    for (name, p) in [("measurement.p_s", m.p_s), ("measurement.p_t", m.p_t)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::field(name, format!("must lie in [0, 1], got {p}")));
        }
    }
    Ok(MeasurementParams::new(m.k, m.p_s, m.p_t)?)
}

pub fn resolve_model(
    model: &str,
    hamiltonian: Hamiltonian4,
    s: &Sections<'_>,
    field: &str,
) -> Result<(ModelSpec, Vec<(String, String)>)> {
    let mut params = vec![("model".to_string(), model.to_string())];
    if model == "multipair" {
        let rates = resolve_rates(s.rates)?;
        params.push(("k_s".into(), crate::output::format_number(rates.k_s)));
        params.push(("k_t".into(), crate::output::format_number(rates.k_t)));
        let dim_cap = s.multipair.and_then(|m| m.dim_cap).unwrap_or(DEFAULT_DIM_CAP);
        return Ok((
            ModelSpec::MultiPair {
                hamiltonian,
                rates,
                n_max: s.multipair.and_then(|m| m.n_max),
                dim_cap,
            },
            params,
        ));
    }
    let kind: GeneratorKind = model.parse().map_err(|e| CliError::field(field, e))?;
    let generator = match kind {
        GeneratorKind::Haberkorn => Generator::haberkorn(hamiltonian, resolve_rates(s.rates)?),
        GeneratorKind::MeasurementOnly => {
            let m = s.measurement.ok_or_else(|| CliError::field("measurement", "section required by this model"))?;
            if !(m.k.is_finite() && m.k >= 0.0) {
                return Err(CliError::field("measurement.k", format!("must be finite and >= 0, got {}", m.k)));
            }
            Generator::measurement_only(hamiltonian, m.k)?
        }
        GeneratorKind::MeasurementRecombination => {
            Generator::measurement_recombination(hamiltonian, resolve_measurement(s.measurement)?)
        }
        GeneratorKind::MeasurementRecombinationRewritten => {
            Generator::measurement_recombination_rewritten(hamiltonian, resolve_measurement(s.measurement)?)
        }
        GeneratorKind::JonesHore => {
            let mp = if s.measurement.is_some() {
                let mp = resolve_measurement(s.measurement)?;
                if !mp.is_jones_hore() {
                    return Err(CliError::field("measurement.p_s", "jones-hore requires p_s + p_t = 1"));
                }
                mp
            } else {
                MeasurementParams::jones_hore_matching(resolve_rates(s.rates)?)
            };
            Generator::jones_hore(hamiltonian, mp)?
        }
    };
    if kind == GeneratorKind::Haberkorn {
        let r = generator.flux_rates();
        params.push(("k_s".into(), crate::output::format_number(r.k_s)));
        params.push(("k_t".into(), crate::output::format_number(r.k_t)));
    }
    Ok((ModelSpec::OnePair(generator), params))
}

fn complex_pair(v: Option<[f64; 2]>, field: &str) -> Result<C64> {
    let [re, im] = v.ok_or_else(|| CliError::field(field, "required by the `coherent` preset"))?;
    Ok(C64::new(re, im))
}

pub fn resolve_initial(section: &InitialSection, seed: Option<u64>) -> Result<InitialSpec> {
    use radpair::SpinBasisIndex as B;
    let state = match section.preset.as_str() {
        "singlet" => OnePairState::basis(B::S),
        "t0" => OnePairState::basis(B::T0),
        "tplus" => OnePairState::basis(B::TPlus),
        "tminus" => OnePairState::basis(B::TMinus),
        "mixed" => OnePairState::maximally_mixed(),
        "coherent" => {
            let alpha = complex_pair(section.alpha, "initial.alpha")?;
            let beta = complex_pair(section.beta, "initial.beta")?;
            OnePairState::coherent_s_t0(alpha, beta).map_err(|e| CliError::field("initial.alpha", e))?
        }
        "matrix" => {
            let v = section
                .matrix
                .as_ref()
                .ok_or_else(|| CliError::field("initial.matrix", "required by the `matrix` preset"))?;
            if v.len() != 32 {
                return Err(CliError::field(
                    "initial.matrix",
                    format!("expected 32 numbers (row-major re, im pairs), got {}", v.len()),
                ));
            }
            let m = radpair::spin::Mat4::from_fn(|i, j| {
                let k = 2 * (4 * i + j);
                C64::new(v[k], v[k + 1])
            });
            OnePairState::from_matrix(m)
        }
        "random" => {
            let seed = require_seed(seed, "initial.preset")?;
            // offset keeps the state independent of a random Hamiltonian drawn from the same seed
            let mut rng = random::rng(seed.wrapping_add(1));
            random::physical_state(&mut rng, 1.0)
        }
        "fock" => {
            let occ = section
                .occupations
                .clone()
                .ok_or_else(|| CliError::field("initial.occupations", "required by the `fock` preset"))?;
            if occ.len() != 4 {
                return Err(CliError::field("initial.occupations", "expected four occupations (nS, nT+, nT0, nT-)"));
            }
            return Ok(InitialSpec::Fock(occ));
        }
        other => {
            return Err(CliError::field(
                "initial.preset",
                format!("unknown preset `{other}` (singlet, t0, tplus, tminus, mixed, coherent, matrix, random, fock)"),
            ))
        }
    };
    let report = validate_state(&state, 1e-10);
    if !report.passed() {
        return Err(CliError::field(
            "initial",
            format!(
                "state is not physical (hermiticity defect {:.3e}, min eigenvalue {:.3e}, trace {} + {}i)",
                report.hermiticity_defect, report.min_eigenvalue, report.trace_real, report.trace_imag
            ),
        ));
    }
    Ok(InitialSpec::OnePair(Box::new(state)))
}

pub fn resolve_grid(g: &GridSection, field: &str) -> Result<TimeGrid> {
    TimeGrid::new(g.t0, g.t_end, g.n_steps).map_err(|e| CliError::field(field, e))
}

pub fn resolve_observables(names: Option<&[String]>, multipair: bool) -> Result<Vec<Observable>> {
    let Some(names) = names else {
        let mut out: Vec<Observable> = Observable::all()
            .into_iter()
            .filter(|o| {
                matches!(o, Observable::Trace | Observable::Population(_) | Observable::FluxS | Observable::FluxT)
            })
            .collect();
        if multipair {
            out.push(Observable::MeanN);
        }
        return Ok(out);
    };
    if names.is_empty() {
        return Err(CliError::field("observables", "list must not be empty"));
    }
    names
        .iter()
        .map(|n| {
            let o: Observable = n.parse().map_err(|e| CliError::field("observables", e))?;
            if o.multipair_only() && !multipair {
                return Err(CliError::field("observables", format!("`{n}` is only available for the multipair model")));
            }
            Ok(o)
        })
        .collect()
}

pub fn resolve_scenario(name: &str, model: &str, s: &Sections<'_>) -> Result<Scenario> {
    check_name(name)?;
    let hamiltonian = resolve_hamiltonian(s.hamiltonian, s.seed)?;
    let (model_spec, mut parameters) = resolve_model(model, hamiltonian, s, "model")?;
    let initial_section = s.initial.ok_or_else(|| CliError::field("initial", "section required"))?;
    let initial = resolve_initial(initial_section, s.seed)?;
    if let InitialSpec::Fock(occ) = &initial {
        let ModelSpec::MultiPair { n_max, dim_cap, .. } = &model_spec else {
            return Err(CliError::field("initial.preset", "`fock` states require the multipair model"));
        };
        let needed = occ.iter().copied().max().unwrap_or(0).max(1);
        let space = FockSpace::pairs(n_max.unwrap_or(needed));
        if space.index(occ).is_none() {
            return Err(CliError::field("initial.occupations", "exceeds multipair.n_max"));
        }
        if space.dim() > *dim_cap {
            return Err(CliError::field("multipair.n_max", format!("dimension {} exceeds dim_cap {dim_cap}", space.dim())));
        }
    }
    if let ModelSpec::MultiPair { n_max: Some(0), .. } = &model_spec {
        return Err(CliError::field("multipair.n_max", "must be at least 1"));
    }
    let grid_section = s.grid.ok_or_else(|| CliError::field("grid", "section required"))?;
    let grid = resolve_grid(grid_section, "grid")?;
    let observables = resolve_observables(s.observables, model_spec.is_multipair())?;
    parameters.push(("initial".into(), initial_section.preset.clone()));
    if let Some(h) = s.hamiltonian {
        parameters.push(("hamiltonian".into(), h.kind.clone()));
    }
    if let Some(seed) = s.seed {
        parameters.push(("seed".into(), seed.to_string()));
    }
    Ok(Scenario {
        name: name.to_string(),
        model: model_spec,
        initial,
        grid,
        observables,
        seed: s.seed,
        parameters,
    })
}
