use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported derivative order {0}, at most 2 is available")]
    UnsupportedDerivative(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "Newton iteration for the roots of P_{degree} did not converge (residual {residual:e})"
    )]
    NoConvergence { degree: usize, residual: f64 },

    #[error("least-squares system is rank deficient; retry with a positive ridge")]
    RankDeficient,

    #[error("singular KKT system: {0}")]
    SingularSystem(String),

    #[error("signals are not sampled on a common grid: {0}")]
    GridMismatch(String),

    #[error("time step {step}: {source}")]
    Step { step: usize, source: Box<Error> },

    #[error("{path}: {message}")]
    Scenario { path: String, message: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn scenario(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoConvergence { .. } | Error::RankDeficient | Error::SingularSystem(_) => true,
            Error::Step { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
