//! `bornmarkov`: weak-coupling rate predictions against pseudomode fits.

use std::path::Path;

use num_complex::Complex64 as C64;
use radpair::bath::{
    pseudomode_system, pseudomode_validation, rates_by_quadrature, BathCouplingParams, CorrelationFunction,
    PseudomodeParams, MAX_COUPLING_RATIO,
};

use crate::config::{check_name, read_config, BornMarkovConfig};
use crate::error::{CliError, Result};
use crate::output::{write_file, Metadata, Table};

pub const QUADRATURE_TOL: f64 = 1e-13;
const DEFAULT_STEP_PRODUCT: f64 = 0.1;
const DEFAULT_T_END_FACTOR: f64 = 3.2;
const DEFAULT_T_END_UNCOUPLED: f64 = 20.0;

pub const COLUMNS: [&str; 10] = [
    "lambda_over_gamma",
    "lambda",
    "predicted_kS",
    "predicted_kappaS",
    "quadrature_kS",
    "quadrature_kappaS",
    "fitted_rate",
    "fitted_shift",
    "fit_rms",
    "relative_error",
];

#[derive(Clone, Debug)]
pub struct LadderReport {
    pub table: Table,
    pub metadata: Metadata,
}

impl LadderReport {
    pub fn relative_errors(&self) -> Vec<f64> {
        self.table.column("relative_error").unwrap_or_default()
    }
}

fn validated(cfg: &BornMarkovConfig) -> Result<(f64, f64, f64)> {
    check_name(&cfg.name)?;
    if !(cfg.gamma.is_finite() && cfg.gamma > 0.0) {
        return Err(CliError::field("gamma", format!("must be finite and > 0, got {}", cfg.gamma)));
    }
    if !cfg.delta.is_finite() {
        return Err(CliError::field("delta", "must be finite"));
    }
    if cfg.ratios.is_empty() {
        return Err(CliError::field("ratios", "ladder must not be empty"));
    }
    for (i, &r) in cfg.ratios.iter().enumerate() {
        if !(0.0..=MAX_COUPLING_RATIO).contains(&r) {
            return Err(CliError::field(
                &format!("ratios[{i}]"),
                format!("lambda / gamma = {r} violates the weak-coupling bound 0 <= lambda / gamma <= {MAX_COUPLING_RATIO}"),
            ));
        }
    }
    let step = cfg.step_product.unwrap_or(DEFAULT_STEP_PRODUCT);
    if !(step > 0.0 && step <= 0.5) {
        return Err(CliError::field("step_product", format!("must lie in (0, 0.5], got {step}")));
    }
    let factor = cfg.t_end_factor.unwrap_or(DEFAULT_T_END_FACTOR);
    if !(factor >= 3.0 && factor.is_finite()) {
        return Err(CliError::field("t_end_factor", format!("must be at least 3, got {factor}")));
    }
    let uncoupled = cfg.t_end_uncoupled.unwrap_or(DEFAULT_T_END_UNCOUPLED);
    if !(uncoupled > 0.0 && uncoupled.is_finite()) {
        return Err(CliError::field("t_end_uncoupled", format!("must be positive, got {uncoupled}")));
    }
    Ok((step, factor, uncoupled))
}

/// Builds pseudomode inputs for one coupling, sizing the grid so that
/// `h * rate_scale` stays at `step_product`.
pub fn pseudomode_params(gamma: f64, delta: f64, lambda: f64, step: f64, factor: f64, uncoupled: f64) -> Result<PseudomodeParams> {
    let mut p = PseudomodeParams {
        lambda,
        gamma,
        delta,
        t_end: 1.0,
        n_steps: 1,
    };
    let (k_s, _) = p.predicted_rates();
    p.t_end = if k_s > 0.0 { factor / k_s } else { uncoupled };
    let (_, system, _, _) = pseudomode_system(&p)?;
    p.n_steps = (p.t_end * system.rate_scale() / step).ceil().max(1.0) as usize;
    Ok(p)
}

pub fn bornmarkov(cfg: &BornMarkovConfig) -> Result<LadderReport> {
    let (step, factor, uncoupled) = validated(cfg)?;
    let g = CorrelationFunction::exponential(C64::new(1.0, 0.0), cfg.gamma, cfg.delta)?;
    let mut table = Table::new(COLUMNS.iter().map(|c| c.to_string()).collect());
    for &ratio in &cfg.ratios {
        let lambda = ratio * cfg.gamma;
        let p = pseudomode_params(cfg.gamma, cfg.delta, lambda, step, factor, uncoupled)?;
        let (k_q, kappa_q) = rates_by_quadrature(&g, BathCouplingParams::new(lambda * lambda)?, QUADRATURE_TOL)?;
        log::info!("pseudomode run lambda = {lambda}, {} steps", p.n_steps);
        let fit = pseudomode_validation(&p)?;
        table.push(vec![
            ratio,
            lambda,
            fit.predicted_k_s,
            fit.predicted_kappa_s,
            k_q,
            kappa_q,
            fit.fitted_rate,
            fit.fitted_shift,
            fit.fit_rms,
            fit.relative_error(),
        ]);
    }
    let mut metadata = Metadata::new();
    metadata.add("command", "bornmarkov");
    metadata.add("scenario", &cfg.name);
    metadata.add_number("gamma", cfg.gamma);
    metadata.add_number("delta", cfg.delta);
    metadata.add_number("step_product", step);
    metadata.add_number("t_end_factor", factor);
    metadata.add_number("t_end_uncoupled", uncoupled);
    Ok(LadderReport { table, metadata })
}

/// Errors must not grow as the ladder descends.
pub fn check_monotone(errors: &[f64]) -> Result<()> {
    for (i, w) in errors.windows(2).enumerate() {
        if w[1] > w[0] {
            return Err(CliError::Numerical(format!(
                "relative error increases down the ladder: row {} has {:.3e}, row {} has {:.3e}",
                i,
                w[0],
                i + 1,
                w[1]
            )));
        }
    }
    Ok(())
}

pub fn bornmarkov_config(path: &Path, out_dir: &Path, reproducible: bool) -> Result<LadderReport> {
    let cfg: BornMarkovConfig = read_config(path)?;
    let report = bornmarkov(&cfg)?;
    write_file(out_dir, &format!("{}.bornmarkov.csv", cfg.name), &report.table.to_csv())?;
    write_file(out_dir, &format!("{}.meta.txt", cfg.name), &report.metadata.render(reproducible))?;
    check_monotone(&report.relative_errors())?;
    Ok(report)
}
