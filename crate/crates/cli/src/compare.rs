//! `compare`: deviations between two models on a shared scenario.

use std::path::Path;

use radpair::observables::Observable;
use radpair::random;

use crate::config::{
    check_name, read_config, resolve_grid, resolve_hamiltonian, resolve_model, resolve_observables, resolve_scenario,
    CompareConfig, ModelEntry, ModelSpec, Sections,
};
use crate::error::{CliError, Result};
use crate::output::{format_number, write_file, Metadata, Table};
use crate::run::{grid_metadata, simulate};

/// Bound applied to the Haberkorn versus multi-pair comparison when the
/// config sets no explicit expectation.
pub const EQUIVALENCE_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompareMode {
    Trajectory,
    Generator,
}

/// Per-point deviations and their maxima.
#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub name: String,
    pub mode: CompareMode,
    pub models: [String; 2],
    pub table: Table,
    pub max_state_deviation: f64,
    pub max_observable_deviation: Vec<(String, f64)>,
    pub expectation: Option<(Option<f64>, Option<f64>)>,
}

impl ComparisonReport {
    pub fn summary(&self, reproducible: bool, extra: &Metadata) -> String {
        let mut meta = Metadata::new();
        meta.add("command", "compare");
        meta.add("scenario", &self.name);
        meta.add(
            "mode",
            match self.mode {
                CompareMode::Trajectory => "trajectory",
                CompareMode::Generator => "generator",
            },
        );
        meta.add("model_a", &self.models[0]);
        meta.add("model_b", &self.models[1]);
        meta.entries.extend(extra.entries.iter().cloned());
        meta.add_number("max_state_dev", self.max_state_deviation);
        for (name, v) in &self.max_observable_deviation {
            meta.add_number(&format!("max_dev_{name}"), *v);
        }
        if let Some((below, above)) = self.expectation {
            if let Some(b) = below {
                meta.add_number("expect.max_below", b);
            }
            if let Some(a) = above {
                meta.add_number("expect.max_above", a);
            }
        }
        meta.render(reproducible)
    }

    /// Checks the configured bounds on the summary maximum.
    pub fn check(&self) -> Result<()> {
        let Some((below, above)) = self.expectation else {
            return Ok(());
        };
        let max = self.max_state_deviation;
        if let Some(b) = below {
            if !(max <= b) {
                return Err(CliError::Numerical(format!(
                    "{} vs {}: max deviation {max:.3e} exceeds {b:e}",
                    self.models[0], self.models[1]
                )));
            }
        }
        if let Some(a) = above {
            if !(max > a) {
                return Err(CliError::Numerical(format!(
                    "{} vs {}: max deviation {max:.3e} is not above {a:e}",
                    self.models[0], self.models[1]
                )));
            }
        }
        Ok(())
    }
}

fn sections_for<'a>(cfg: &'a CompareConfig, entry: &'a ModelEntry, seed: Option<u64>) -> Sections<'a> {
    Sections {
        seed,
        observables: cfg.observables.as_deref(),
        hamiltonian: cfg.hamiltonian.as_ref(),
        rates: entry.rates.as_ref().or(cfg.rates.as_ref()),
        measurement: entry.measurement.as_ref().or(cfg.measurement.as_ref()),
        initial: cfg.initial.as_ref(),
        grid: entry.grid.as_ref().or(cfg.grid.as_ref()),
        multipair: cfg.multipair.as_ref(),
    }
}

fn default_observables(names: Option<&[String]>, multipair: bool) -> Result<Vec<Observable>> {
    match names {
        Some(_) => resolve_observables(names, multipair),
        None => Ok(Observable::all().into_iter().filter(|o| !o.multipair_only()).collect()),
    }
}

fn default_expectation(models: &[String; 2]) -> Option<(Option<f64>, Option<f64>)> {
    let pair = (models[0].as_str(), models[1].as_str());
    match pair {
        ("haberkorn", "multipair") | ("multipair", "haberkorn") => Some((Some(EQUIVALENCE_TOL), None)),
        _ => None,
    }
}

pub fn compare(cfg: &CompareConfig, seed_override: Option<u64>) -> Result<(ComparisonReport, Metadata)> {
    check_name(&cfg.name)?;
    if cfg.models.len() != 2 {
        return Err(CliError::field(
            "models",
            format!("exactly two [[models]] entries are required, got {}", cfg.models.len()),
        ));
    }
    let seed = seed_override.or(cfg.seed);
    let mode = match cfg.mode.as_deref() {
        None | Some("trajectory") => CompareMode::Trajectory,
        Some("generator") => CompareMode::Generator,
        Some(other) => return Err(CliError::field("mode", format!("unknown mode `{other}` (trajectory, generator)"))),
    };
    let models = [cfg.models[0].model.clone(), cfg.models[1].model.clone()];
    let expectation = match cfg.expect {
        Some(e) => Some((e.max_below, e.max_above)),
        None => default_expectation(&models),
    };
    let mut extra = Metadata::default();
    if let Some(s) = seed {
        extra.add("seed", s);
    }
    if let Some(h) = &cfg.hamiltonian {
        extra.add("hamiltonian", &h.kind);
    }
    let report = match mode {
        CompareMode::Trajectory => compare_trajectories(cfg, seed, models, expectation, &mut extra)?,
        CompareMode::Generator => compare_generators(cfg, seed, models, expectation, &mut extra)?,
    };
    Ok((report, extra))
}

fn compare_trajectories(
    cfg: &CompareConfig,
    seed: Option<u64>,
    models: [String; 2],
    expectation: Option<(Option<f64>, Option<f64>)>,
    extra: &mut Metadata,
) -> Result<ComparisonReport> {
    let mut scenarios = Vec::with_capacity(2);
    for (i, entry) in cfg.models.iter().enumerate() {
        let s = resolve_scenario(&cfg.name, &entry.model, &sections_for(cfg, entry, seed))
            .map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("models[{i}]: {msg}")),
                other => other,
            })?;
        scenarios.push(s);
    }
    let (ga, gb) = (scenarios[0].grid, scenarios[1].grid);
    if ga != gb {
        return Err(CliError::field(
            "models.grid",
            format!(
                "grids differ: [{}, {}] in {} steps vs [{}, {}] in {} steps",
                ga.t0, ga.t_end, ga.n_steps, gb.t0, gb.t_end, gb.n_steps
            ),
        ));
    }
    let both_multipair = scenarios.iter().all(|s| s.model.is_multipair());
    let observables = default_observables(cfg.observables.as_deref(), both_multipair)?;
    if let Some(p) = &cfg.initial {
        extra.add("initial", &p.preset);
    }
    grid_metadata(extra, &ga);

    let a = simulate(&scenarios[0])?;
    let b = simulate(&scenarios[1])?;
    let mut columns = vec!["t".to_string(), "max_state_dev".to_string()];
    columns.extend(observables.iter().map(|o| format!("dev_{}", o.name())));
    let mut table = Table::new(columns);
    let mut max_state = 0.0f64;
    let mut max_obs = vec![0.0f64; observables.len()];
    for (k, (x, y)) in a.states.iter().zip(&b.states).enumerate() {
        let dev = x.max_abs_diff(y);
        max_state = max_state.max(dev);
        let mut row = vec![ga.time(k), dev];
        for (j, o) in observables.iter().enumerate() {
            let d = (o.evaluate(x, a.flux_rates) - o.evaluate(y, b.flux_rates)).abs();
            max_obs[j] = max_obs[j].max(d);
            row.push(d);
        }
        table.push(row);
    }
    Ok(ComparisonReport {
        name: cfg.name.clone(),
        mode: CompareMode::Trajectory,
        models,
        table,
        max_state_deviation: max_state,
        max_observable_deviation: observables.iter().map(|o| o.name()).zip(max_obs).collect(),
        expectation,
    })
}

fn compare_generators(
    cfg: &CompareConfig,
    seed: Option<u64>,
    models: [String; 2],
    expectation: Option<(Option<f64>, Option<f64>)>,
    extra: &mut Metadata,
) -> Result<ComparisonReport> {
    let seed = seed.ok_or_else(|| CliError::field("seed", "generator mode draws random states and needs a seed"))?;
    let samples = cfg.samples.unwrap_or(100);
    if samples == 0 {
        return Err(CliError::field("samples", "must be positive"));
    }
    if let Some(g) = &cfg.grid {
        resolve_grid(g, "grid")?;
    }
    let hamiltonian = resolve_hamiltonian(cfg.hamiltonian.as_ref(), Some(seed))?;
    let mut generators = Vec::with_capacity(2);
    for (i, entry) in cfg.models.iter().enumerate() {
        let (spec, _) = resolve_model(&entry.model, hamiltonian.clone(), &sections_for(cfg, entry, Some(seed)), "models.model")
            .map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("models[{i}]: {msg}")),
                other => other,
            })?;
        match spec {
            ModelSpec::OnePair(g) => generators.push(g),
            ModelSpec::MultiPair { .. } => {
                return Err(CliError::field("models.model", "generator mode compares one-pair generators only"))
            }
        }
    }
    extra.add("samples", samples);

    let mut rng = random::rng(seed.wrapping_add(2));
    let mut table = Table::new(vec!["sample".into(), "max_state_dev".into()]);
    let mut max_state = 0.0f64;
    for k in 0..samples {
        let rho = random::physical_state(&mut rng, 1.0);
        let a = generators[0].rhs(&rho)?;
        let b = generators[1].rhs(&rho)?;
        let dev = a.max_abs_diff(&b);
        max_state = max_state.max(dev);
        table.push(vec![k as f64, dev]);
    }
    Ok(ComparisonReport {
        name: cfg.name.clone(),
        mode: CompareMode::Generator,
        models,
        table,
        max_state_deviation: max_state,
        max_observable_deviation: Vec::new(),
        expectation,
    })
}

pub fn compare_config(path: &Path, out_dir: &Path, reproducible: bool, seed: Option<u64>) -> Result<ComparisonReport> {
    let cfg: CompareConfig = read_config(path)?;
    let (report, extra) = compare(&cfg, seed)?;
    write_file(out_dir, &format!("{}.compare.csv", report.name), &report.table.to_csv())?;
    write_file(out_dir, &format!("{}.summary.txt", report.name), &report.summary(reproducible, &extra))?;
    log::info!(
        "{} vs {}: max deviation {}",
        report.models[0],
        report.models[1],
        format_number(report.max_state_deviation)
    );
    report.check()?;
    Ok(report)
}
