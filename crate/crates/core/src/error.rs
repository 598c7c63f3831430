use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A mixture component collected (almost) no responsibility mass.
    #[error("component {component} is empty (effective count {count:.3e})")]
    EmptyComponent { component: usize, count: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("durbin-watson statistic undefined: residuals are all zero")]
    UndefinedStatistic,

    #[error("bootstrap aborted at iteration {iteration}: {reason}")]
    BootstrapAborted { iteration: usize, reason: String },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Process exit code used by the CLI. I/O and parse problems are kept
    /// apart from estimator failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Csv(_) => 2,
            Error::Parse { .. } | Error::Config(_) => 3,
            Error::InvalidArgument(_) | Error::Dimension(_) | Error::Data(_) => 4,
            Error::EmptyComponent { .. }
            | Error::Numerical(_)
            | Error::UndefinedStatistic
            | Error::BootstrapAborted { .. } => 5,
        }
    }

    /// True for failures that come out of estimation rather than input.
    pub fn is_estimator_error(&self) -> bool {
        self.exit_code() == 5
    }
}
