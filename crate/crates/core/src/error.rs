use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EcapError {
    #[error("column {0} has zero variance after centering")]
    ZeroVarianceColumn(usize),

    #[error("Gram matrix of configuration is singular (d_min = {d_min:e}, d_max = {d_max:e})")]
    SingularGram { d_min: f64, d_max: f64 },

    #[error("configuration is empty")]
    EmptyConfiguration,

    #[error("configuration index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("non-finite score: {0}")]
    NonFiniteScore(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lasso did not converge at path level {level}")]
    NoConvergence { level: usize },

    #[error("every lambda grid point has an undefined objective")]
    DegenerateObjective,

    #[error("every scored model was filtered")]
    AllFiltered,

    #[error("exhaustive enumeration needs p <= 20 (got p = {0})")]
    TooLarge(usize),

    #[error("block correlations (rho1 = {rho1}, rho2 = {rho2}, rho3 = {rho3}) give a covariance that is not positive semi-definite")]
    NotPsd { rho1: f64, rho2: f64, rho3: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl EcapError {
    /// Stable machine-readable tag, used as the prefix of CLI error messages.
    pub fn kind(&self) -> &'static str {
        match self {
            EcapError::ZeroVarianceColumn(_) => "ZeroVarianceColumn",
            EcapError::SingularGram { .. } => "SingularGram",
            EcapError::EmptyConfiguration => "EmptyConfiguration",
            EcapError::IndexOutOfRange { .. } => "IndexOutOfRange",
            EcapError::NonFiniteScore(_) => "NonFiniteScore",
            EcapError::DimensionMismatch(_) => "DimensionMismatch",
            EcapError::InvalidArgument(_) => "InvalidArgument",
            EcapError::NoConvergence { .. } => "NoConvergence",
            EcapError::DegenerateObjective => "DegenerateObjective",
            EcapError::AllFiltered => "AllFiltered",
            EcapError::TooLarge(_) => "TooLarge",
            EcapError::NotPsd { .. } => "NotPSD",
            EcapError::Parse { .. } => "ParseError",
            EcapError::Io(_) => "IoError",
        }
    }
}

pub type Result<T> = std::result::Result<T, EcapError>;
