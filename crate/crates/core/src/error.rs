//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("UnsupportedDerivativeOrder: order {requested} exceeds supported maximum {max}")]
    UnsupportedDerivativeOrder { requested: usize, max: usize },
    #[error("UnknownFamily: {0}")]
    UnknownFamily(String),
    #[error("UnknownActivation: {0}")]
    UnknownActivation(String),
    #[error("DecayCertificateViolation: |{label}^({k})({t})| = {value:e} exceeds bound {bound:e}")]
    DecayCertificateViolation {
        label: String,
        k: usize,
        t: f64,
        value: f64,
        bound: f64,
    },
    #[error("DegenerateActivation: {0}")]
    DegenerateActivation(String),
    #[error("NotAbsolutelyIntegrable: activation {0} has no integrable Fourier transform")]
    NotAbsolutelyIntegrable(String),
    #[error("NoUsableFrequency: max |sigma_hat| on the grid is {max:e}, floor {floor:e}")]
    NoUsableFrequency { max: f64, floor: f64 },
    #[error("QuadratureBudgetExceeded: {evals} evaluations, error estimate {error:e} > tolerance {tol:e}")]
    QuadratureBudgetExceeded { evals: usize, error: f64, tol: f64 },
    #[error("BarronNormDivergent: weighted spectral integral of order {s} does not converge")]
    BarronNormDivergent { s: f64 },
    #[error("PhaseUndefined: spectral magnitude vanishes at omega = {0:?}")]
    PhaseUndefined(Vec<f64>),
    #[error("EpsilonTooLarge: (a - eps, a + eps) = ({lo}, {hi}) is not inside the Fourier interval ({ilo}, {ihi})")]
    EpsilonTooLarge { lo: f64, hi: f64, ilo: f64, ihi: f64 },
    #[error("DegenerateNormalization: {what} = {value:e} is below the floor {floor:e}")]
    DegenerateNormalization { what: String, value: f64, floor: f64 },
    #[error("ResolutionTooLow: {0}")]
    ResolutionTooLow(String),
    #[error("ProposalMismatch: rejection acceptance rate {rate:e} below 1e-3")]
    ProposalMismatch { rate: f64 },
    #[error("MollifierTableOverflow: |eps * b| = {0} lies beyond the tabulated grid")]
    MollifierTableOverflow(f64),
    #[error("PilotUnderresolved: {empty} of {total} positive-measure cells are empty in the pilot")]
    PilotUnderresolved { empty: usize, total: usize },
    #[error("CellSamplingStalled: cell {cell} accepted {accepted} of {wanted} samples within {budget} proposals")]
    CellSamplingStalled {
        cell: usize,
        accepted: usize,
        wanted: usize,
        budget: usize,
    },
    #[error("PlanSampleMismatch: {0}")]
    PlanSampleMismatch(String),
    #[error("InsufficientData: need at least 2 distinct n, got {0}")]
    InsufficientData(usize),
    #[error("InvalidErrorValue: error {0} is not positive")]
    InvalidErrorValue(f64),
    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
    #[error("TargetParse: {0}")]
    TargetParse(String),
    #[error("Config: {0}")]
    Config(String),
    #[error("Io: {0}")]
    Io(String),
}

impl Error {
    /// Variant name, used on the diagnostics stream by the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            Error::UnsupportedDerivativeOrder { .. } => "UnsupportedDerivativeOrder",
            Error::UnknownFamily(_) => "UnknownFamily",
            Error::UnknownActivation(_) => "UnknownActivation",
            Error::DecayCertificateViolation { .. } => "DecayCertificateViolation",
            Error::DegenerateActivation(_) => "DegenerateActivation",
            Error::NotAbsolutelyIntegrable(_) => "NotAbsolutelyIntegrable",
            Error::NoUsableFrequency { .. } => "NoUsableFrequency",
            Error::QuadratureBudgetExceeded { .. } => "QuadratureBudgetExceeded",
            Error::BarronNormDivergent { .. } => "BarronNormDivergent",
            Error::PhaseUndefined(_) => "PhaseUndefined",
            Error::EpsilonTooLarge { .. } => "EpsilonTooLarge",
            Error::DegenerateNormalization { .. } => "DegenerateNormalization",
            Error::ResolutionTooLow(_) => "ResolutionTooLow",
            Error::ProposalMismatch { .. } => "ProposalMismatch",
            Error::MollifierTableOverflow(_) => "MollifierTableOverflow",
            Error::PilotUnderresolved { .. } => "PilotUnderresolved",
            Error::CellSamplingStalled { .. } => "CellSamplingStalled",
            Error::PlanSampleMismatch(_) => "PlanSampleMismatch",
            Error::InsufficientData(_) => "InsufficientData",
            Error::InvalidErrorValue(_) => "InvalidErrorValue",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::TargetParse(_) => "TargetParse",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
