use thiserror::Error;

/// Errors raised across model construction, estimation, graph algorithms and file IO.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid is disconnected")]
    DisconnectedGrid,
    #[error("measurement graph is disconnected")]
    Disconnected,
    #[error("measurement set does not observe the system (rank deficient)")]
    RankDeficient,
    #[error("bad index: {0}")]
    BadIndex(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("every node collapses under secure-edge contraction")]
    AllContracted,
    #[error("cut is infeasible: {n_s} secure vs {n_sc} insecure crossing edges")]
    InfeasibleCut { n_s: usize, n_sc: usize },
    #[error("graph too large for exhaustive enumeration: {nodes} non-reference nodes (cap {cap})")]
    TooLarge { nodes: usize, cap: usize },
    #[error("no removal set brings the residual under the threshold")]
    NoRemovalWorks,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unknown id: {0}")]
    UnknownId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by malformed or invalid user input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::UnknownId(_)
                | Error::BadIndex(_)
                | Error::DisconnectedGrid
                | Error::RankDeficient
                | Error::TooLarge { .. }
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
