use crate::model::{ConsistencyReport, EventId};
use crate::order::OrderError;
use crate::preprocess::TiebreakerConflict;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at {location}: {reason}")]
    Parse { location: String, reason: String },

    #[error("cannot parse timestamp {value:?} at {location} (tried {tried:?})")]
    Timestamp {
        location: String,
        value: String,
        tried: Vec<String>,
    },

    #[error("explicit order is cyclic: {}", fmt_ids(.events))]
    CyclicOrder { events: Vec<EventId> },

    #[error("duplicate event id {0}")]
    DuplicateEventId(EventId),

    #[error("unknown event id {0:?}")]
    UnknownEvent(String),

    #[error("order pair ({0}, {1}) refers to a missing event")]
    EdgeOutOfRange(usize, usize),

    #[error("log is inconsistent: {} violating pair(s)", .0.violations.len())]
    Inconsistent(Box<ConsistencyReport>),

    #[error("tiebreaker contradicts the explicit order in {} pair(s)", .0.len())]
    TiebreakerConflict(Vec<TiebreakerConflict>),

    #[error("invalid tiebreaker: {0}")]
    InvalidTiebreaker(String),

    #[error("{what} exceeds the limit of {limit}")]
    ResourceLimit { what: String, limit: usize },

    #[error("unknown case {0:?}")]
    UnknownCase(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Order(#[from] OrderError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_ids(ids: &[EventId]) -> String {
    ids.iter()
        .map(|i| i.as_str())
        .collect::<Vec<_>>()
        .join(" -> ")
}
