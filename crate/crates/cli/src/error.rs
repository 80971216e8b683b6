use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("validation failure: {0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("verdict gap: {0}")]
    VerdictGap(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Validation(_) => 3,
            Self::Solver(_) => 4,
            Self::VerdictGap(_) => 5,
            Self::Io(_) => 1,
        }
    }
}

impl From<perfhom::Error> for CliError {
    fn from(e: perfhom::Error) -> Self {
        use perfhom::Error as E;
        match e {
            E::NonConvergence { .. } | E::NotPositiveDefinite(_) => Self::Solver(e.to_string()),
            E::VerdictGap { .. } => Self::VerdictGap(e.to_string()),
            other => Self::Validation(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(std::io::Error::other(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
