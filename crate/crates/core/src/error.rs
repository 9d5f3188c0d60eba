use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("no perfect matching exists: left set of size {deficient_side} has too small a neighborhood")]
    Infeasible { deficient_side: usize },

    #[error("initial dual is infeasible on edge ({left}, {right}) with slack {slack}; repair it with project_duals first")]
    InfeasibleDual {
        left: usize,
        right: usize,
        slack: i64,
    },

    #[error("unknown edge ({0}, {1})")]
    UnknownEdge(usize, usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty sample set")]
    EmptySample,

    #[error("oracle budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
