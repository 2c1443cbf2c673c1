//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Which side of a global-channel capacity was exceeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityDirection {
    Send,
    Receive,
}

impl std::fmt::Display for CapacityDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CapacityDirection::Send => write!(f, "send"),
            CapacityDirection::Receive => write!(f, "receive"),
        }
    }
}

/// Errors produced by graph construction, simulation, and the protocol stack.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad parameters, bad edge lists, out-of-range ids.
    #[error("validation: {0}")]
    Validation(String),

    /// An edge-list file or string could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A node exceeded its per-round global-channel budget while the run was
    /// configured to treat violations as hard failures.
    #[error(
        "global capacity violated: node {node} would {direction} {bits} bits in round {round} (gamma = {gamma})"
    )]
    CapacityViolation {
        node: u32,
        round: u64,
        direction: CapacityDirection,
        bits: u64,
        gamma: u64,
    },

    /// Only the unbounded local mode is implemented; finite per-edge budgets
    /// are rejected up front rather than silently ignored.
    #[error("finite local-channel budgets are not supported (requested {0} bits)")]
    UnsupportedLambda(u64),

    /// A program sent a local-mode message to a non-neighbor.
    #[error("node {src} sent a local message to non-neighbor {dst}")]
    LocalToNonNeighbor { src: u32, dst: u32 },

    /// The engine exceeded its round budget without all programs halting.
    #[error("simulation exceeded {max_rounds} rounds without terminating")]
    Runaway { max_rounds: u64 },

    /// A requested instance cannot be built; the message explains which
    /// precondition failed (e.g. the graph is too small to split).
    #[error("instance rejected: {0}")]
    InstanceRejected(String),

    /// Decoding distance labels back into bits hit a value exactly on the
    /// decision threshold.
    #[error("decode ambiguous at index {index}: distance equals threshold {threshold}")]
    DecodeAmbiguous { index: usize, threshold: u64 },

    /// Underlying I/O failure when reading or writing artifacts.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Convenience constructor for validation errors.
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code the command-line tool should use for this error:
    /// `1` for validation/parse problems, `2` for capacity and audit failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CapacityViolation { .. } => 2,
            _ => 1,
        }
    }
}
