//! Shared relational operators and the per-node cycle state machine.
//!
//! Every operator consumes query-tagged tuples from all the queries active
//! in a cycle and produces tuples tagged with the subset of queries each
//! result belongs to.

mod group;
mod join;
mod node;
mod route;
mod sort;

use std::ops::AddAssign;

pub use group::{shared_groupby, AggSpec, ExactSum, GroupTable};
pub use join::{
    probe_keys, serve_probes, shared_hash_join, shared_index_nl_join, shared_queryid_join,
    JoinOptions, JoinTable,
};
pub use node::{
    Failure, Message, NodeRuntime, NodeTask, Outbox, Payload, Report, Subquery, WriteTask,
};
pub use route::{route, segregate};
pub use sort::{compare, shared_sort, shared_topn, sort_union, TopNFilter};

/// Work done by one node, or summed over many.
#[derive(Default, Clone, Copy, Debug, PartialEq, Eq)]
pub struct Counters {
    pub tuples_in: u64,
    pub tuples_out: u64,
    /// Sum of query-set sizes over emitted tuples.
    pub tags: u64,
    pub probes: u64,
    pub builds: u64,
    pub comparisons: u64,
    pub groups: u64,
    pub touched: u64,
    pub lookups: u64,
    pub nanos: u64,
}

impl AddAssign for Counters {
    fn add_assign(&mut self, o: Counters) {
        self.tuples_in += o.tuples_in;
        self.tuples_out += o.tuples_out;
        self.tags += o.tags;
        self.probes += o.probes;
        self.builds += o.builds;
        self.comparisons += o.comparisons;
        self.groups += o.groups;
        self.touched += o.touched;
        self.lookups += o.lookups;
        self.nanos += o.nanos;
    }
}
