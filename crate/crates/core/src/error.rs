use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("format error at row {row}: {message}")]
    Format { row: usize, message: String },

    #[error("empty data body")]
    EmptyData,

    #[error("i/o error: {0}")]
    Io(String),

    #[error("table of {cells} cells exceeds the budget of {budget}")]
    TableTooLarge { cells: usize, budget: usize },

    /// A ledger entry needed by a lower-order check was not yet determined.
    #[error("ledger protocol violation: {0}")]
    Protocol(String),

    #[error("graph contains a directed cycle: {0:?}")]
    Cyclic(Vec<usize>),

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Every edge of a directed cycle is fixed by data immoralities.
    #[error("unrecoverable conflict: directed cycle {cycle:?} consists only of immorality edges")]
    Unrecoverable { cycle: Vec<usize> },

    #[error("repair did not converge after {0} passes")]
    RepairDiverged(usize),

    #[error("config error: {0}")]
    Config(String),
}
