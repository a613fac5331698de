//! `selftest`: seeded invariant checks with a pass/fail table.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64 as C64;
use rand::Rng;

use radpair::bath::{rates_by_quadrature, BathCouplingParams, CorrelationFunction, PseudomodeParams, pseudomode_validation};
use radpair::fock::{equivalence_report, lift_one_pair_state, FockSpace, MultiPairModel};
use radpair::linalg::linear_fit;
use radpair::models::{dephasing_lindblad_identity_check, measurement_recombination_rewritten_rhs, measurement_recombination_rhs};
use radpair::spin::{make_hamiltonian, HamiltonianKind};
use radpair::{haberkorn_exact, integrate, random, Generator, MeasurementParams, OnePairState, RateParams, TimeGrid};

use crate::bornmarkov::pseudomode_params;
use crate::error::{CliError, Result};
use crate::output::{format_number, write_file};

const SEED: u64 = 20240611;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Above(f64),
    Within(f64, f64),
}

impl Bound {
    fn holds(self, v: f64) -> bool {
        match self {
            Bound::AtMost(b) => v <= b,
            Bound::AtLeast(b) => v >= b,
            Bound::Above(b) => v > b,
            Bound::Within(lo, hi) => v >= lo && v <= hi,
        }
    }

    fn describe(self) -> String {
        match self {
            Bound::AtMost(b) => format!("<= {b:e}"),
            Bound::AtLeast(b) => format!(">= {b:e}"),
            Bound::Above(b) => format!("> {b:e}"),
            Bound::Within(lo, hi) => format!("in [{lo}, {hi}]"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub value: f64,
    pub bound: Bound,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.bound.holds(self.value)
    }
}

fn grid(t_end: f64, n: usize) -> TimeGrid {
    TimeGrid::new(0.0, t_end, n).expect("valid grid")
}

fn rates(k_s: f64, k_t: f64) -> RateParams {
    RateParams::new(k_s, k_t).expect("nonnegative rates")
}

fn recombination_forms() -> radpair::Result<f64> {
    let mut rng = random::rng(SEED);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let rho = random::physical_state(&mut rng, 1.0);
        let h = random::hamiltonian(&mut rng, 1.0);
        let mp = MeasurementParams::new(rng.random_range(0.0..5.0), rng.random(), rng.random())?;
        let a = measurement_recombination_rhs(&rho, &h, mp)?;
        let b = measurement_recombination_rewritten_rhs(&rho, &h, mp)?;
        worst = worst.max(a.max_abs_diff(&b));
    }
    Ok(worst)
}

fn equivalence() -> radpair::Result<f64> {
    let mut rng = random::rng(SEED + 1);
    let mut worst = 0.0f64;
    for (k_s, k_t) in [(1.0f64, 0.0f64), (0.3, 3.0), (0.0, 1.0), (3.0, 0.3), (0.0, 0.0), (1.0, 1.0)] {
        let h = random::hamiltonian(&mut rng, 1.0);
        let rho0 = random::physical_state(&mut rng, 1.0);
        let scale = k_s.max(k_t).max(h.norm_bound());
        let report = equivalence_report(&rho0, &h, rates(k_s, k_t), &grid(3.0 / scale, 300))?;
        worst = worst.max(report.max_deviation);
    }
    Ok(worst)
}

fn measurement_trace_drift() -> radpair::Result<f64> {
    let mut rng = random::rng(SEED + 2);
    let g = Generator::measurement_only(random::hamiltonian(&mut rng, 1.0), 2.0)?;
    let rho0 = random::physical_state(&mut rng, 1.0);
    let traj = integrate(&g, &rho0, &grid(5.0, 500))?;
    Ok(traj.states.iter().map(|s| (s.trace().re - 1.0).abs()).fold(0.0, f64::max))
}

fn trace_increase() -> radpair::Result<f64> {
    let mut rng = random::rng(SEED + 3);
    let h = random::hamiltonian(&mut rng, 1.0);
    let mp = MeasurementParams::new(1.5, 0.3, 0.6)?;
    let generators = [
        Generator::haberkorn(h.clone(), rates(1.0, 0.4)),
        Generator::measurement_recombination(h, mp),
    ];
    let rho0 = random::physical_state(&mut rng, 1.0);
    let mut worst = f64::NEG_INFINITY;
    for g in &generators {
        let traj = integrate(g, &rho0, &grid(5.0, 500))?;
        for w in traj.states.windows(2) {
            worst = worst.max(w[1].trace().re - w[0].trace().re);
        }
    }
    Ok(worst)
}

fn haberkorn_positivity() -> radpair::Result<f64> {
    let mut rng = random::rng(SEED + 4);
    let h = random::hamiltonian(&mut rng, 1.0);
    let r = rates(1.0, 0.2);
    let rho0 = random::pure_state(&mut rng);
    let g = grid(4.0, 1000);
    let traj = integrate(&Generator::haberkorn(h.clone(), r), &rho0, &g)?;
    let mut worst = f64::INFINITY;
    for (k, s) in traj.states.iter().enumerate() {
        worst = worst.min(s.min_eigenvalue());
        worst = worst.min(haberkorn_exact(&rho0, &h, r, g.time(k)).min_eigenvalue());
    }
    Ok(worst)
}

fn multipair_trace_drift() -> radpair::Result<f64> {
    let mut rng = random::rng(SEED + 5);
    let space = FockSpace::pairs(2);
    let h = random::hamiltonian(&mut rng, 1.0);
    let model = MultiPairModel::from_hamiltonian(&space, &h, rates(0.5, 0.2))?;
    let rho0 = lift_one_pair_state(&random::physical_state(&mut rng, 0.8), &space)?;
    let traj = model.integrate(&rho0, &grid(2.0, 200), space.dim())?;
    Ok(traj.states.iter().map(|s| (s.trace().re - 1.0).abs()).fold(0.0, f64::max))
}

fn haberkorn_vs_jones_hore() -> radpair::Result<f64> {
    let h = make_hamiltonian(HamiltonianKind::St0Mixing, &[1.0])?;
    let r = rates(1.0, 0.0);
    let g = grid(3.0, 300);
    let rho0 = OnePairState::singlet();
    let a = integrate(&Generator::haberkorn(h.clone(), r), &rho0, &g)?;
    let b = integrate(&Generator::jones_hore(h, MeasurementParams::jones_hore_matching(r))?, &rho0, &g)?;
    Ok(a.states.iter().zip(&b.states).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max))
}

fn quadrature_error() -> radpair::Result<f64> {
    let mut worst = 0.0f64;
    for delta in [0.0, 1.0] {
        let g = CorrelationFunction::exponential(C64::new(1.0, 0.0), 1.0, delta)?;
        let (k, kappa) = rates_by_quadrature(&g, BathCouplingParams::new(1.0)?, 1e-13)?;
        let d = 1.0 + delta * delta;
        worst = worst.max(((k - 1.0 / d) * d).abs());
        if delta != 0.0 {
            let exact = -delta / d;
            worst = worst.max(((kappa - exact) / exact).abs());
        } else {
            worst = worst.max(kappa.abs());
        }
    }
    Ok(worst)
}

fn pseudomode_error() -> Result<f64> {
    let p: PseudomodeParams = pseudomode_params(1.0, 0.0, 0.05, 0.1, 3.2, 20.0)?;
    Ok(pseudomode_validation(&p)?.relative_error())
}

fn rk4_order() -> radpair::Result<f64> {
    let mut rng = random::rng(SEED + 6);
    let h = random::hamiltonian(&mut rng, 1.0);
    let r = rates(0.7, 0.3);
    let rho0 = random::pure_state(&mut rng);
    let t = 2.0;
    let exact = haberkorn_exact(&rho0, &h, r, t);
    let g = Generator::haberkorn(h, r);
    let mut log_h = Vec::new();
    let mut log_err = Vec::new();
    for n in [20, 40, 80, 160] {
        let grid = grid(t, n);
        let traj = integrate(&g, &rho0, &grid)?;
        log_h.push(grid.step().ln());
        log_err.push(traj.last().max_abs_diff(&exact).ln());
    }
    Ok(linear_fit(&log_h, &log_err).1)
}

/// Runs every check; numerical failures inside a check are reported as errors.
pub fn run_checks() -> Result<Vec<CheckResult>> {
    Ok(vec![
        CheckResult {
            name: "dephasing_identity",
            value: dephasing_lindblad_identity_check(100, SEED),
            bound: Bound::AtMost(1e-13),
        },
        CheckResult {
            name: "recombination_forms_agree",
            value: recombination_forms()?,
            bound: Bound::AtMost(1e-12),
        },
        CheckResult {
            name: "multipair_reduction",
            value: equivalence()?,
            bound: Bound::AtMost(1e-7),
        },
        CheckResult {
            name: "measurement_trace_conserved",
            value: measurement_trace_drift()?,
            bound: Bound::AtMost(1e-9),
        },
        CheckResult {
            name: "trace_nonincreasing",
            value: trace_increase()?,
            bound: Bound::AtMost(1e-9),
        },
        CheckResult {
            name: "multipair_trace_conserved",
            value: multipair_trace_drift()?,
            bound: Bound::AtMost(1e-9),
        },
        CheckResult {
            name: "haberkorn_positivity",
            value: haberkorn_positivity()?,
            bound: Bound::AtLeast(-1e-9),
        },
        CheckResult {
            name: "haberkorn_vs_jones_hore",
            value: haberkorn_vs_jones_hore()?,
            bound: Bound::Above(1e-3),
        },
        CheckResult {
            name: "lorentzian_quadrature",
            value: quadrature_error()?,
            bound: Bound::AtMost(1e-8),
        },
        CheckResult {
            name: "pseudomode_rate",
            value: pseudomode_error()?,
            bound: Bound::AtMost(0.05),
        },
        CheckResult {
            name: "rk4_order",
            value: rk4_order()?,
            bound: Bound::Within(3.7, 4.3),
        },
    ])
}

pub fn render(results: &[CheckResult], reproducible: bool) -> String {
    let mut out = String::new();
    if !reproducible {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(out, "# generated_unix_time = {secs}").unwrap();
    }
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
    writeln!(out, "{:<width$}  {:<24}  {:<16}  status", "check", "value", "bound").unwrap();
    for r in results {
        writeln!(
            out,
            "{:<width$}  {:<24}  {:<16}  {}",
            r.name,
            format_number(r.value),
            r.bound.describe(),
            if r.passed() { "PASS" } else { "FAIL" }
        )
        .unwrap();
    }
    out
}

pub fn selftest(out_dir: &Path, reproducible: bool) -> Result<Vec<CheckResult>> {
    let results = run_checks()?;
    let text = render(&results, reproducible);
    print!("{text}");
    write_file(out_dir, "selftest.txt", &text)?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    if !failed.is_empty() {
        return Err(CliError::Numerical(format!("selftest failed: {}", failed.join(", "))));
    }
    Ok(results)
}
