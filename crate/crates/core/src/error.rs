use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("covariate column {column} has zero sample standard deviation")]
    DegenerateColumn { column: usize },

    #[error("sign condition violated: beta0'v = {index}, kappa(v) - 1/2 = {excess}")]
    SignConditionViolated { index: f64, excess: f64 },

    #[error("at least two bootstrap draws are required, got {0}")]
    InsufficientDraws(usize),

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("grid step {step} is coarser than a tenth of the half width {half_width}")]
    GridTooCoarse { step: f64, half_width: f64 },

    #[error("{hits} of {total} argmax draws hit the grid boundary")]
    BoundarySaturation { hits: usize, total: usize },

    #[error("sample is empty")]
    EmptySample,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Errors caused by the numerical machinery rather than by the input data
    /// or the configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureFailure(_)
                | Error::GridTooCoarse { .. }
                | Error::BoundarySaturation { .. }
                | Error::SignConditionViolated { .. }
        )
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidConfig(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
