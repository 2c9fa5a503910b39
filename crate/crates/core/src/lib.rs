//! `batchdb` is an in-memory relational engine that answers many concurrent
//! queries and updates by batching them into cycles and pushing each batch
//! once through a single always-on plan of shared operators.
//!
//! The pieces, bottom-up:
//!
//! * [`datamodel`]: values, schemas, predicates and query-tagged tuples.
//! * [`frontend`]: SQL subset parser, catalog files, prepared statements.
//! * [`planner`]: per-statement logical plans merged into one [`planner::GlobalPlan`].
//! * [`storage`]: versioned tables with shared scans and batched index probes.
//! * [`operators`]: shared join, sort, top-n, group-by and routing, plus the
//!   per-node cycle state machine.
//! * [`runtime`]: the engine (admission, heartbeat, workers, result delivery)
//!   and the query-at-a-time reference executor.
//!
//! ```
//! use batchdb::prelude::*;
//!
//! let catalog = Catalog::parse(
//!     "CREATE TABLE USERS (ID INT PRIMARY KEY, NAME VARCHAR, ACCOUNT INT);",
//! ).unwrap();
//! let mut db = Database::new(catalog);
//! db.insert_rows("USERS", vec![
//!     vec![Value::Int(1), Value::str("ann"), Value::Int(10)],
//!     vec![Value::Int(2), Value::str("bob"), Value::Int(900)],
//! ]).unwrap();
//!
//! let engine = Engine::open(db, EngineConfig::manual()).unwrap();
//! let ids = engine
//!     .register(&["SELECT NAME FROM USERS WHERE ACCOUNT > ? ORDER BY NAME"])
//!     .unwrap();
//! let q = engine.admit(ids[0], vec![Value::Int(100)]).unwrap();
//! engine.run_cycle().unwrap();
//! let result = engine.poll(q.qid).unwrap();
//! assert_eq!(result.rows().unwrap(), &[vec![Value::str("bob")]]);
//! ```

pub mod datamodel;
pub mod error;
pub mod frontend;
pub mod operators;
pub mod planner;
pub mod runtime;
pub mod storage;

pub use error::{Error, Result};

/// The types most programs need.
pub mod prelude {
    pub use crate::datamodel::{QueryId, QuerySet, SharedTuple, Value, ValueType};
    pub use crate::error::{Error, Result};
    pub use crate::frontend::{Catalog, StatementId};
    pub use crate::runtime::{
        Admission, Engine, EngineConfig, Executor, Outcome, QueryAtATime, ResultEnvelope,
    };
    pub use crate::storage::Database;
}
