use std::path::PathBuf;

/// Errors produced by environment construction, policy configuration and the
/// experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its legal range (e.g. a probability <= 0.5 where
    /// a strict majority is required, or alpha <= 0.5 for the theoretical
    /// constant).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Structurally degenerate input (wrong parity, too few rankers, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A preference matrix violated one of its invariants.
    #[error("matrix validation failed: {0}")]
    Validation(String),

    /// The requested computation is not defined for this environment, e.g.
    /// Condorcet regret on a matrix without a Condorcet winner.
    #[error("unsupported environment: {0}")]
    UnsupportedEnvironment(String),

    /// Ranker index outside `0..k`.
    #[error("ranker index {index} out of range for k={k}")]
    IndexOutOfRange { index: usize, k: usize },

    /// Malformed input file.
    #[error("parse error in {path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Ledgers with different checkpoint schedules cannot be aggregated.
    #[error("checkpoint schedule mismatch: {0}")]
    ScheduleMismatch(String),

    /// A replicate failed; the replicate index is attached.
    #[error("replicate {index} failed: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
