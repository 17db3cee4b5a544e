use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),

    /// An event/state pair outside the transition tables was reached.
    #[error("protocol assertion failed at cycle {cycle}, node {node}: {detail}")]
    Protocol {
        cycle: u64,
        node: usize,
        detail: String,
    },

    #[error("cycle budget of {budget} exceeded (probable deadlock or livelock); stuck cores: {stuck}")]
    Deadlock { budget: u64, stuck: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(SimError::Config(msg.into()))
}
