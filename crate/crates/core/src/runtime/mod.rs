//! The engine shell: admission, heartbeat-driven batches, workers that
//! host plan nodes, and result delivery. Also the query-at-a-time executor
//! used as oracle and baseline.

mod engine;
mod interp;
mod worker;

use std::time::{Duration, Instant};

pub use engine::{Batch, Engine, EngineConfig, FaultConfig, Metrics, Trigger};
pub use interp::{run_query_at_a_time, Interpreter, QueryAtATime};

use crate::datamodel::{ArrivalTimestamp, QueryId, Row, Value};
use crate::error::{Error, Result};
use crate::frontend::StatementId;
use crate::operators::Counters;

/// Returned by `admit`: the query's id and its arrival timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Admission {
    pub qid: QueryId,
    pub ts: ArrivalTimestamp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Rows(Vec<Row>),
    /// Number of rows inserted, updated or deleted.
    Written(usize),
    Failed(Error),
}

#[derive(Debug, Clone)]
pub struct ResultEnvelope {
    pub qid: QueryId,
    pub statement: StatementId,
    pub outcome: Outcome,
    pub arrival: ArrivalTimestamp,
    pub admitted_at: Instant,
    pub completed_at: Instant,
    /// Cycle that executed the operation; 0 for the query-at-a-time executor.
    pub cycle: u64,
}

impl ResultEnvelope {
    pub fn rows(&self) -> Result<&[Row]> {
        match &self.outcome {
            Outcome::Rows(r) => Ok(r),
            Outcome::Written(_) => Err(Error::Unsupported("write statements return no rows".into())),
            Outcome::Failed(e) => Err(e.clone()),
        }
    }

    pub fn latency(&self) -> Duration {
        self.completed_at.saturating_duration_since(self.admitted_at)
    }

    pub fn is_ok(&self) -> bool {
        !matches!(self.outcome, Outcome::Failed(_))
    }
}

/// What the bench harness needs from either executor.
pub trait Executor: Send + Sync {
    fn name(&self) -> &'static str;
    fn register(&self, sqls: &[&str]) -> Result<Vec<StatementId>>;
    fn admit(&self, stmt: StatementId, params: Vec<Value>) -> Result<Admission>;
    /// Admits a statement that was not registered up front.
    fn admit_sql(&self, sql: &str, params: Vec<Value>) -> Result<Admission>;
    fn poll(&self, qid: QueryId) -> Option<ResultEnvelope>;
    fn wait(&self, qid: QueryId, timeout: Duration) -> Option<ResultEnvelope>;
    /// Rows of a table as of the last completed operation.
    fn table_rows(&self, table: &str) -> Result<Vec<Row>>;
    fn counters(&self) -> Counters;
    fn shutdown(&self);
}
