use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("LTSs `{0}` and `{1}` do not share one event table")]
    TableMismatch(String, String),

    #[error("cannot compose an empty list of LTSs")]
    EmptyComposition,

    #[error("state budget exceeded: more than {budget} states while building `{what}`")]
    Budget { budget: usize, what: String },

    #[error("state {state} out of range for `{lts}` ({count} states)")]
    InvalidState {
        lts: String,
        state: usize,
        count: usize,
    },

    #[error("event `{event}` is not in the alphabet of `{lts}`")]
    EventNotInAlphabet { lts: String, event: String },

    #[error("the initial state of `{0}` is not kept")]
    InitialExcluded(String),

    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("invalid input: {0}")]
    Usage(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("internal contract violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
