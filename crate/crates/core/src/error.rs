use thiserror::Error;

/// Errors raised by the kinetic models and their numerical machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("hamiltonian kind `{kind}` expects {expected} parameters, got {got}")]
    ParamCount {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("matrix is not Hermitian (defect {defect:.3e} > {tol:.1e})")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("time step too large: h * scale = {product:.3} exceeds 1")]
    StepTooLarge { product: f64 },
    #[error("Fock space dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("operator acts on {got} modes, expected {expected}")]
    ModeCount { expected: usize, got: usize },
    #[error("cannot prepare multi-pair state: {0}")]
    Preparation(String),
    #[error("unphysical state: {0}")]
    Unphysical(String),
    #[error("correlation function tail does not converge: |g(end)| / peak = {ratio:.3e}")]
    NonConvergentTail { ratio: f64 },
    #[error("correlation function gives negative rate kS = {0:.6e}")]
    NegativeRate(f64),
    #[error("exponential fit rejected: rms log residual {rms:.3e} exceeds {tol:.1e}")]
    FitResidual { rms: f64, tol: f64 },
    #[error("invalid time grid: {0}")]
    Grid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
