//! `run`: simulate one scenario and emit its observable time series.

use std::path::{Path, PathBuf};

use radpair::fock::{lift_one_pair_state, FockSpace, MultiPairModel, MultiPairState};
use radpair::observables::Observable;
use radpair::{integrate, GeneratorKind, OnePairState, RateParams, TimeGrid};

use crate::config::{read_config, InitialSpec, ModelSpec, RunConfig, Scenario};
use crate::error::{CliError, Result};
use crate::output::{write_file, Metadata, Table};

/// Tolerances applied to every emitted state.
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-9;

/// States of a finished simulation, reduced to one-pair form where needed.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub grid: TimeGrid,
    pub states: Vec<OnePairState>,
    pub flux_rates: RateParams,
    pub max_hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

impl Simulation {
    pub fn table(&self, observables: &[Observable]) -> Table {
        let mut columns = vec!["t".to_string()];
        columns.extend(observables.iter().map(|o| o.name()));
        let mut table = Table::new(columns);
        for (k, rho) in self.states.iter().enumerate() {
            let mut row = vec![self.grid.time(k)];
            row.extend(observables.iter().map(|o| o.evaluate(rho, self.flux_rates)));
            table.push(row);
        }
        table
    }
}

fn violation(grid: &TimeGrid, k: usize, what: String) -> CliError {
    CliError::Numerical(format!("grid point {k} (t = {}): {what}", grid.time(k)))
}

struct Tracker {
    max_defect: f64,
    min_eig: f64,
}

impl Tracker {
    fn new() -> Self {
        Self {
            max_defect: 0.0,
            min_eig: f64::INFINITY,
        }
    }

    fn check(&mut self, grid: &TimeGrid, k: usize, defect: f64, min_eig: f64) -> Result<()> {
        if !(defect <= HERMITIAN_TOL) {
            return Err(violation(grid, k, format!("hermiticity defect {defect:.3e} exceeds {HERMITIAN_TOL:e}")));
        }
        if !(min_eig >= -POSITIVITY_TOL) {
            return Err(violation(grid, k, format!("minimum eigenvalue {min_eig:.3e} below -{POSITIVITY_TOL:e}")));
        }
        self.max_defect = self.max_defect.max(defect);
        self.min_eig = self.min_eig.min(min_eig);
        Ok(())
    }
}

/// Runs a resolved scenario and validates every state on the grid.
pub fn simulate(scenario: &Scenario) -> Result<Simulation> {
    let grid = scenario.grid;
    let mut tracker = Tracker::new();
    match (&scenario.model, &scenario.initial) {
        (ModelSpec::OnePair(generator), InitialSpec::OnePair(rho0)) => {
            let traj = integrate(generator, rho0, &grid)?;
            let conserving = generator.kind() == GeneratorKind::MeasurementOnly;
            let tr0 = rho0.trace().re;
            let mut prev = tr0;
            for (k, rho) in traj.states.iter().enumerate() {
                tracker.check(&grid, k, rho.hermiticity_defect(), rho.min_eigenvalue())?;
                let tr = rho.trace().re;
                if conserving && (tr - tr0).abs() > TRACE_TOL {
                    return Err(violation(&grid, k, format!("trace drifted by {:.3e}", tr - tr0)));
                }
                if tr - prev > TRACE_TOL {
                    return Err(violation(&grid, k, format!("trace increased by {:.3e} in one step", tr - prev)));
                }
                prev = tr;
            }
            Ok(Simulation {
                grid,
                states: traj.states,
                flux_rates: generator.flux_rates(),
                max_hermiticity_defect: tracker.max_defect,
                min_eigenvalue: tracker.min_eig,
            })
        }
        (
            ModelSpec::MultiPair {
                hamiltonian,
                rates,
                n_max,
                dim_cap,
            },
            initial,
        ) => {
            let needed = match initial {
                InitialSpec::Fock(occ) => occ.iter().copied().max().unwrap_or(0).max(1),
                InitialSpec::OnePair(_) => 1,
            };
            let space = FockSpace::pairs(n_max.unwrap_or(needed));
            space.check_cap(*dim_cap)?;
            let model = MultiPairModel::from_hamiltonian(&space, hamiltonian, *rates)?;
            let rho0 = match initial {
                InitialSpec::Fock(occ) => MultiPairState::fock_state(&space, occ)?,
                InitialSpec::OnePair(rho) => lift_one_pair_state(rho, &space)?,
            };
            let traj = model.integrate(&rho0, &grid, *dim_cap)?;
            let mut states = Vec::with_capacity(traj.states.len());
            for (k, state) in traj.states.iter().enumerate() {
                tracker.check(&grid, k, state.hermiticity_defect(), state.min_eigenvalue())?;
                let tr = state.trace();
                if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
                    return Err(violation(&grid, k, format!("multi-pair trace {} + {}i is not 1", tr.re, tr.im)));
                }
                states.push(model.reduce(state));
            }
            Ok(Simulation {
                grid,
                states,
                flux_rates: *rates,
                max_hermiticity_defect: tracker.max_defect,
                min_eigenvalue: tracker.min_eig,
            })
        }
        (ModelSpec::OnePair(_), InitialSpec::Fock(_)) => Err(CliError::field(
            "initial.preset",
            "`fock` states require the multipair model",
        )),
    }
}

pub fn grid_metadata(meta: &mut Metadata, grid: &TimeGrid) {
    meta.add_number("grid.t0", grid.t0);
    meta.add_number("grid.t_end", grid.t_end);
    meta.add("grid.n_steps", grid.n_steps);
}

/// Files written by `run`.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub table: Table,
    pub csv_path: PathBuf,
    pub meta_path: PathBuf,
}

pub fn run_scenario(scenario: &Scenario, out_dir: &Path, reproducible: bool) -> Result<RunOutput> {
    let sim = simulate(scenario)?;
    let table = sim.table(&scenario.observables);

    let mut meta = Metadata::new();
    meta.add("command", "run");
    meta.add("scenario", &scenario.name);
    for (k, v) in &scenario.parameters {
        meta.add(k, v);
    }
    grid_metadata(&mut meta, &sim.grid);
    meta.add_number("max_hermiticity_defect", sim.max_hermiticity_defect);
    meta.add_number("min_eigenvalue", sim.min_eigenvalue);

    let csv_path = write_file(out_dir, &format!("{}.csv", scenario.name), &table.to_csv())?;
    let meta_path = write_file(out_dir, &format!("{}.meta.txt", scenario.name), &meta.render(reproducible))?;
    Ok(RunOutput {
        table,
        csv_path,
        meta_path,
    })
}

pub fn run_config(path: &Path, out_dir: &Path, reproducible: bool, seed: Option<u64>) -> Result<RunOutput> {
    let cfg: RunConfig = read_config(path)?;
    let scenario = cfg.resolve(seed)?;
    log::info!("running scenario `{}` with model {}", scenario.name, scenario.model.name());
    run_scenario(&scenario, out_dir, reproducible)
}
