//! Workload driver for batchdb: synthetic bookstore data, seeded operation
//! streams, open- and closed-loop load against either executor, oracle
//! verification and metrics reports.

pub mod compare;
pub mod config;
pub mod datagen;
pub mod driver;
pub mod metrics;
pub mod scenario;
pub mod verify;
pub mod workload;

pub use config::{ConfigError, ExecutorKind, StatementConfig, Think, ThinkKind, WorkloadConfig};
pub use driver::{run, run_on, sweep, SweepPoint};
pub use metrics::{MetricsReport, StatementMetrics};
pub use verify::{verify, Repro, VerifyOptions, VerifyReport};
