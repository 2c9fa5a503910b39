use thiserror::Error;

use crate::datamodel::{ArrivalTimestamp, QueryId, ValueType};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("type mismatch: cannot compare {left} with {right}")]
    TypeMismatch { left: ValueType, right: ValueType },

    #[error("type mismatch: {0}")]
    Type(String),

    #[error("parameter ${0} is not bound")]
    UnboundParameter(usize),

    #[error("syntax error at offset {pos}: {message}")]
    Syntax { pos: usize, message: String },

    #[error("unknown table {0}")]
    UnknownTable(String),

    #[error("unknown column {0}")]
    UnknownColumn(String),

    #[error("ambiguous column {0}")]
    AmbiguousColumn(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("cannot infer the type of parameter ${0}")]
    UnresolvableParameter(usize),

    #[error("expected {expected} parameters, got {found}")]
    Arity { expected: usize, found: usize },

    #[error("join condition is not an equi-join: {0}")]
    NonEquiJoin(String),

    #[error("statement {0} is not registered in the global plan")]
    UnknownStatement(usize),

    #[error("row {row}: {message}")]
    RowType { row: usize, message: String },

    #[error("duplicate primary key {key} in {table}")]
    DuplicateKey { table: String, key: String },

    #[error("write at {ts} is not after last applied timestamp {last}")]
    OutOfOrderWrite {
        last: ArrivalTimestamp,
        ts: ArrivalTimestamp,
    },

    #[error("no index on {table}.{column}")]
    MissingIndex { table: String, column: String },

    #[error("top-n limit must be positive, got {0}")]
    InvalidLimit(i64),

    #[error("sort key is not orderable: {0}")]
    NotOrderable(String),

    #[error("aggregate over non-numeric attribute: {0}")]
    NonNumericAggregate(String),

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("operator protocol violation: {0}")]
    Protocol(String),

    #[error("result delivery to unknown query {0}")]
    UnknownQuery(QueryId),

    #[error("engine is shut down")]
    ShutDown,

    #[error("workload not registered")]
    NotRegistered,

    #[error("engine fault in cycle {cycle}: {message}")]
    Fault { cycle: u64, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
