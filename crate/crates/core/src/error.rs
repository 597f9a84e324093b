use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("non-finite argument: {0}")]
    Domain(String),

    #[error("assumption `{inequality}` violated at e = {e}, p = {p} (value {value:e})")]
    AssumptionViolated {
        inequality: &'static str,
        e: f64,
        p: f64,
        value: f64,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("Newton iteration failed after {iterations} iterations, residual {residual:e}")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("unsolvable configuration: {0}")]
    Unsolvable(String),

    #[error("characteristic left the velocity box at t = {t} (dt = {dt})")]
    Instability { t: f64, dt: f64 },

    #[error("no orbit with e = {e}, p = {p}: empty energy shell")]
    EmptyEnergyShell { e: f64, p: f64 },

    #[error("projector rejected: {0}")]
    ProjectorRejected(String),

    #[error("operator assembly failed: {0}")]
    Assembly(String),

    #[error("axiom {axiom} fails: {detail}")]
    Axiom { axiom: &'static str, detail: String },

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::Domain(_)
            | Error::AssumptionViolated { .. }
            | Error::Config(_)
            | Error::Contract(_) => 2,
            Error::Axiom { .. } | Error::Consistency(_) | Error::ProjectorRejected(_) => 3,
            _ => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Domain(_) => "domain",
            Error::AssumptionViolated { .. } => "assumption",
            Error::Contract(_) => "contract",
            Error::NewtonDivergence { .. } => "newton_divergence",
            Error::Unsolvable(_) => "unsolvable",
            Error::Instability { .. } => "instability",
            Error::EmptyEnergyShell { .. } => "empty_energy_shell",
            Error::ProjectorRejected(_) => "projector_rejected",
            Error::Assembly(_) => "assembly",
            Error::Axiom { .. } => "axiom",
            Error::Consistency(_) => "consistency",
            Error::Numerical(_) => "numerical",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
