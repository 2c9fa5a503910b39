//! Per-statement logical plans, the shared global plan and query paths.
//!
//! Every registered statement is compiled to a left-deep [`LogicalPlan`] and
//! attached to one [`GlobalPlan`]. Nodes are reused whenever kind and fixed
//! configuration match (join method plus outer and inner key, sort key and
//! direction, group keys and aggregates), so one node can serve statements
//! of many types. Each statement's route through the plan is a
//! [`PathTemplate`]; per-query predicates live on the path, not the node.

mod global;
mod logical;

pub use global::{
    merge_plans, BoundStep, GlobalPlan, InPort, NodeId, NodeKind, OutEdge, PathTemplate, PlanNode,
    PortRole, QueryPath, Step, StepConfig, Stream, StreamSchema, OUTPUT,
};
pub use logical::{compile_single, AccessMethod, JoinMethod, LogicalPlan};

use crate::error::{Error, Result};
use crate::frontend::QueryInstance;

/// Instantiates the statement's path template for one bound query.
pub fn assign_path(g: &GlobalPlan, q: &QueryInstance) -> Result<QueryPath> {
    let template = g
        .template(q.prepared.id)
        .ok_or(Error::UnknownStatement(q.prepared.id.0))?;
    Ok(QueryPath {
        template: template.clone(),
        params: q.params.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Complexity {
    Linear,
    NLogN,
}

impl Complexity {
    pub fn cost(self, n: u64) -> f64 {
        let n = n as f64;
        match self {
            Complexity::Linear => n,
            Complexity::NLogN if n <= 1.0 => 0.0,
            Complexity::NLogN => n * n.log2(),
        }
    }
}

/// Whether one shared pass over `o` tuples is cheaper than separate passes
/// over each query's `n_i` tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct SharingEntry {
    pub node: String,
    pub complexity: Complexity,
    pub o: u64,
    pub ns: Vec<u64>,
    pub benefit: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SharingReport {
    pub entries: Vec<SharingEntry>,
}

pub fn sharing_benefit(f: Complexity, o: u64, ns: &[u64]) -> SharingEntry {
    let separate: f64 = ns.iter().map(|&n| f.cost(n)).sum();
    SharingEntry {
        node: String::new(),
        complexity: f,
        o,
        ns: ns.to_vec(),
        benefit: f.cost(o) < separate,
    }
}

impl SharingReport {
    pub fn push(&mut self, node: impl Into<String>, f: Complexity, o: u64, ns: &[u64]) {
        let mut e = sharing_benefit(f, o, ns);
        e.node = node.into();
        self.entries.push(e);
    }
}
