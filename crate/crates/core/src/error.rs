use thiserror::Error;

use crate::netsim::{BsId, UeId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("rejected control: steering targets asleep {0:?}")]
    RejectedControl(Vec<(UeId, BsId)>),

    #[error("control references unknown id: {0}")]
    UnknownId(String),

    #[error("non-finite value during training: {0}")]
    NonFinite(String),

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("intent parse error at token {token} (offset {offset}): {message}")]
    IntentParse {
        token: usize,
        offset: usize,
        message: String,
    },

    #[error("no KPI history: run at least {needed} warm-up slots before issuing an intent (have {have})")]
    NoKpiHistory { needed: usize, have: usize },

    #[error("empty reward history")]
    EmptyHistory,

    #[error("unknown xApp id: {0}")]
    UnknownXApp(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
