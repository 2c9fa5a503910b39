use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use super::group::GroupTable;
use super::join::{probe_keys, serve_probes, shared_queryid_join, JoinOptions, JoinTable};
use super::route::{route, segregate};
use super::sort::{sort_union, TopNFilter};
use super::Counters;
use crate::datamodel::{ArrivalTimestamp, QueryId, QuerySet, Row, SharedTuple, Value};
use crate::error::{Error, Result};
use crate::frontend::{AggFunc, ColumnRef};
use crate::planner::{
    AccessMethod, GlobalPlan, JoinMethod, NodeId, NodeKind, PathTemplate, PlanNode, PortRole, Step,
    StepConfig, StreamSchema,
};
use crate::storage::{probe_filters, scan_filters, QueryFilter, ScanStats, TableStore, WriteOp};

/// One query's visit to one node in a cycle.
#[derive(Debug, Clone)]
pub struct Subquery {
    pub qid: QueryId,
    pub snapshot: ArrivalTimestamp,
    pub template: Arc<PathTemplate>,
    pub step: usize,
    pub params: Arc<[Value]>,
}

impl Subquery {
    pub fn step(&self) -> &Step {
        &self.template.steps[self.step]
    }
}

#[derive(Debug, Clone)]
pub struct WriteTask {
    pub qid: QueryId,
    pub ts: ArrivalTimestamp,
    pub op: WriteOp,
}

/// Everything a node has to do in one cycle. `subs` is sorted by query id.
#[derive(Debug, Clone)]
pub struct NodeTask {
    pub node: NodeId,
    pub cycle: u64,
    pub subs: Vec<Subquery>,
    pub writes: Vec<WriteTask>,
    /// Largest timestamp in the batch; versions closed at or before it are
    /// garbage once the cycle is over.
    pub horizon: ArrivalTimestamp,
}

#[derive(Debug, Clone)]
pub enum Payload {
    Tuples(Vec<SharedTuple>),
    Eos,
    /// Index probe keys for a table; the message port is the table's out
    /// edge the answer goes back on.
    Probe(Vec<(Value, QuerySet)>),
}

#[derive(Debug, Clone)]
pub struct Message {
    pub to: NodeId,
    pub port: usize,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub message: String,
    pub queries: Vec<QueryId>,
}

#[derive(Debug, Clone)]
pub enum Report {
    Written { qid: QueryId, result: Result<usize> },
    Results(Vec<(QueryId, Vec<Row>)>),
    Done {
        node: NodeId,
        counters: Counters,
        failure: Option<Failure>,
    },
}

pub trait Outbox {
    fn send(&mut self, m: Message);
    fn report(&mut self, r: Report);
}

#[derive(Default)]
struct Port {
    active: bool,
    open: bool,
    tuples: Vec<SharedTuple>,
}

struct Cycle {
    task: NodeTask,
    ports: Vec<Port>,
    waiting: usize,
    /// Queries leaving on each out edge; `None` for inactive edges.
    edges: Vec<Option<QuerySet>>,
    eos_sent: Vec<bool>,
    probes_pending: usize,
    probes_sent: bool,
    counters: Counters,
    failure: Option<String>,
    results: Vec<(QueryId, Vec<Row>)>,
}

/// A plan node's runtime: receives its task and messages for one cycle,
/// computes once all active inputs are complete and reports back.
pub struct NodeRuntime {
    plan: Arc<GlobalPlan>,
    id: NodeId,
    opts: JoinOptions,
    table: Option<Arc<Mutex<TableStore>>>,
    cycle: Option<Cycle>,
    early: Vec<Message>,
    chunk: usize,
}

fn position(schema: &StreamSchema, c: &ColumnRef) -> Result<usize> {
    schema
        .iter()
        .position(|x| x == c)
        .ok_or_else(|| Error::Protocol(format!("column {c:?} missing from input stream")))
}

fn send_chunked(out: &mut dyn Outbox, to: NodeId, port: usize, tuples: Vec<SharedTuple>, chunk: usize) {
    if tuples.len() <= chunk {
        if !tuples.is_empty() {
            out.send(Message { to, port, payload: Payload::Tuples(tuples) });
        }
        return;
    }
    let mut it = tuples.into_iter();
    loop {
        let part: Vec<SharedTuple> = it.by_ref().take(chunk).collect();
        if part.is_empty() {
            break;
        }
        out.send(Message { to, port, payload: Payload::Tuples(part) });
    }
}

fn find_sub(subs: &[Subquery], q: QueryId) -> Option<&Subquery> {
    subs.binary_search_by_key(&q, |s| s.qid).ok().map(|i| &subs[i])
}

impl NodeRuntime {
    pub fn new(plan: Arc<GlobalPlan>, id: NodeId, opts: JoinOptions, table: Option<Arc<Mutex<TableStore>>>) -> NodeRuntime {
        NodeRuntime {
            plan,
            id,
            opts,
            table,
            cycle: None,
            early: Vec::new(),
            chunk: 1024,
        }
    }

    /// Maximum tuples per message.
    pub fn with_chunk(mut self, chunk: usize) -> NodeRuntime {
        self.chunk = chunk.max(1);
        self
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn is_idle(&self) -> bool {
        self.cycle.is_none()
    }

    fn node(&self) -> &PlanNode {
        self.plan.node(self.id)
    }

    /// Whether out edge `e` feeds the inner side of an index nested-loop join.
    fn is_probe_edge(&self, e: usize) -> bool {
        let edge = &self.node().outputs[e];
        let consumer = self.plan.node(edge.consumer);
        matches!(consumer.kind, NodeKind::Join { method: JoinMethod::IndexNestedLoop, .. })
            && consumer.inputs[edge.port].role == PortRole::Inner
    }

    pub fn begin(&mut self, task: NodeTask, out: &mut dyn Outbox) {
        let node = self.node();
        let mut ports: Vec<Port> = node.inputs.iter().map(|_| Port::default()).collect();
        let mut edge_ids: Vec<Vec<QueryId>> = vec![Vec::new(); node.outputs.len()];
        for s in &task.subs {
            let step = s.step();
            for &(p, _) in &step.inputs {
                ports[p].active = true;
                ports[p].open = true;
            }
            if self.id != crate::planner::OUTPUT {
                edge_ids[step.edge].push(s.qid);
            }
        }
        let waiting = ports.iter().filter(|p| p.active).count();
        let edges: Vec<Option<QuerySet>> = edge_ids
            .into_iter()
            .map(|ids| (!ids.is_empty()).then(|| QuerySet::from_sorted(ids)))
            .collect();
        let probes_pending = (0..edges.len())
            .filter(|&e| edges[e].is_some() && self.is_probe_edge(e))
            .count();
        self.cycle = Some(Cycle {
            eos_sent: vec![false; edges.len()],
            task,
            ports,
            waiting,
            edges,
            probes_pending,
            probes_sent: false,
            counters: Counters::default(),
            failure: None,
            results: Vec::new(),
        });
        if matches!(self.node().kind, NodeKind::Table { .. }) {
            self.run_table(out);
        } else if waiting == 0 {
            self.finish(out);
        }
        for m in std::mem::take(&mut self.early) {
            self.deliver(m, out);
        }
    }

    pub fn deliver(&mut self, m: Message, out: &mut dyn Outbox) {
        let Some(c) = self.cycle.as_mut() else {
            self.early.push(m);
            return;
        };
        match m.payload {
            Payload::Tuples(ts) => {
                let port = &mut c.ports[m.port];
                if !port.open {
                    c.failure.get_or_insert(format!("tuples on closed port {}", m.port));
                    return;
                }
                c.counters.tuples_in += ts.len() as u64;
                port.tuples.extend(ts);
            }
            Payload::Eos => {
                let port = &mut c.ports[m.port];
                if !port.open {
                    c.failure.get_or_insert(format!("duplicate end of stream on port {}", m.port));
                    return;
                }
                port.open = false;
                c.waiting -= 1;
                self.maybe_probe(out);
                if self.cycle.as_ref().is_some_and(|c| c.waiting == 0) {
                    self.finish(out);
                }
            }
            Payload::Probe(keys) => self.answer_probe(m.port, keys, out),
        }
    }

    fn send_eos(&mut self, e: usize, out: &mut dyn Outbox) {
        let c = self.cycle.as_mut().expect("active cycle");
        if c.edges[e].is_none() || std::mem::replace(&mut c.eos_sent[e], true) {
            return;
        }
        let edge = &self.plan.node(self.id).outputs[e];
        out.send(Message {
            to: edge.consumer,
            port: edge.port,
            payload: Payload::Eos,
        });
    }

    fn emit(&mut self, stream: usize, tuples: Vec<SharedTuple>, out: &mut dyn Outbox) {
        let node = self.plan.node(self.id);
        let candidates: Vec<usize> = (0..node.outputs.len())
            .filter(|&e| node.outputs[e].stream == stream && !self.is_probe_edge(e))
            .collect();
        let c = self.cycle.as_mut().expect("active cycle");
        let targets: Vec<usize> = candidates.into_iter().filter(|&e| c.edges[e].is_some()).collect();
        if targets.is_empty() {
            return;
        }
        let sets: Vec<&QuerySet> = targets.iter().map(|&e| c.edges[e].as_ref().unwrap()).collect();
        for (&e, part) in targets.iter().zip(segregate(tuples, &sets)) {
            c.counters.tuples_out += part.len() as u64;
            c.counters.tags += part.iter().map(|t| t.queries.len() as u64).sum::<u64>();
            let edge = &node.outputs[e];
            send_chunked(out, edge.consumer, edge.port, part, self.chunk);
        }
    }

    fn done(&mut self, out: &mut dyn Outbox) {
        let c = self.cycle.take().expect("active cycle");
        let failure = c.failure.map(|message| Failure {
            message,
            queries: c.task.subs.iter().map(|s| s.qid).collect(),
        });
        out.report(Report::Done {
            node: self.id,
            counters: c.counters,
            failure,
        });
    }

    fn run_table(&mut self, out: &mut dyn Outbox) {
        let started = Instant::now();
        let table = self.table.clone().expect("table node has a store");
        let mut t = table.lock().unwrap_or_else(|e| e.into_inner());
        let c = self.cycle.as_mut().expect("active cycle");
        let mut writes = std::mem::take(&mut c.task.writes);
        writes.sort_by_key(|w| w.ts);
        for w in writes {
            let result = t.apply_write(&w.op, w.ts);
            out.report(Report::Written { qid: w.qid, result });
        }
        let result = self.table_reads(&t);
        drop(t);
        let c = self.cycle.as_mut().expect("active cycle");
        c.counters.nanos += started.elapsed().as_nanos() as u64;
        let emitted = match result {
            Ok(tuples) => tuples,
            Err(e) => {
                c.failure = Some(e.to_string());
                Vec::new()
            }
        };
        self.emit(0, emitted, out);
        for e in 0..self.node().outputs.len() {
            if !self.is_probe_edge(e) {
                self.send_eos(e, out);
            }
        }
        self.maybe_finish_table(out);
    }

    fn table_reads(&mut self, t: &TableStore) -> Result<Vec<SharedTuple>> {
        let c = self.cycle.as_ref().expect("active cycle");
        let node = self.plan.node(self.id);
        let mut scans: Vec<QueryFilter<'_>> = Vec::new();
        let mut probes: BTreeMap<usize, (Vec<QueryFilter<'_>>, BTreeMap<Value, Vec<u32>>)> = BTreeMap::new();
        for s in &c.task.subs {
            let step = s.step();
            let StepConfig::Access { pred, method } = &step.config else {
                return Err(Error::Protocol(format!("non-access step at table {}", t.name())));
            };
            let edge = &node.outputs[step.edge];
            let consumer = self.plan.node(edge.consumer);
            if matches!(consumer.kind, NodeKind::Join { method: JoinMethod::IndexNestedLoop, .. })
                && consumer.inputs[edge.port].role == PortRole::Inner
            {
                continue;
            }
            let f = QueryFilter {
                qid: s.qid,
                snapshot: s.snapshot,
                pred,
                params: &s.params,
            };
            match method {
                AccessMethod::Scan => scans.push(f),
                AccessMethod::Probe { column, atom } => {
                    let key = pred.atoms[*atom].operand.resolve(&s.params)?.clone();
                    let (fs, keys) = probes.entry(*column).or_default();
                    keys.entry(key).or_default().push(fs.len() as u32);
                    fs.push(f);
                }
            }
        }
        let mut stats = ScanStats::default();
        let mut tuples = scan_filters(t, &scans, &mut stats)?;
        for (column, (fs, keys)) in &probes {
            tuples.extend(probe_filters(t, *column, keys, fs, &mut stats)?);
        }
        let c = self.cycle.as_mut().expect("active cycle");
        c.counters.touched += stats.touched;
        c.counters.lookups += stats.lookups;
        Ok(tuples)
    }

    fn answer_probe(&mut self, e: usize, keys: Vec<(Value, QuerySet)>, out: &mut dyn Outbox) {
        let started = Instant::now();
        let table = self.table.clone().expect("probe sent to a table node");
        let t = table.lock().unwrap_or_else(|e| e.into_inner());
        let c = self.cycle.as_ref().expect("active cycle");
        let node = self.plan.node(self.id);
        let consumer = self.plan.node(node.outputs[e].consumer);
        let result = match &consumer.kind {
            NodeKind::Join { inner_key, .. } if c.failure.is_none() => {
                let filters: Vec<QueryFilter<'_>> = c
                    .task
                    .subs
                    .iter()
                    .filter(|s| s.step().edge == e)
                    .filter_map(|s| match &s.step().config {
                        StepConfig::Access { pred, .. } => Some(QueryFilter {
                            qid: s.qid,
                            snapshot: s.snapshot,
                            pred,
                            params: &s.params,
                        }),
                        _ => None,
                    })
                    .collect();
                let mut stats = ScanStats::default();
                serve_probes(&t, inner_key.column, &keys, &filters, &mut stats).map(|ts| (ts, stats))
            }
            _ => Ok((Vec::new(), ScanStats::default())),
        };
        drop(t);
        let c = self.cycle.as_mut().expect("active cycle");
        c.counters.nanos += started.elapsed().as_nanos() as u64;
        let tuples = match result {
            Ok((ts, stats)) => {
                c.counters.lookups += stats.lookups;
                ts
            }
            Err(err) => {
                c.failure.get_or_insert(err.to_string());
                Vec::new()
            }
        };
        c.probes_pending = c.probes_pending.saturating_sub(1);
        c.counters.tuples_out += tuples.len() as u64;
        c.counters.tags += tuples.iter().map(|t| t.queries.len() as u64).sum::<u64>();
        let edge = &self.plan.node(self.id).outputs[e];
        send_chunked(out, edge.consumer, edge.port, tuples, self.chunk);
        self.send_eos(e, out);
        self.maybe_finish_table(out);
    }

    fn maybe_finish_table(&mut self, out: &mut dyn Outbox) {
        let c = self.cycle.as_ref().expect("active cycle");
        if c.probes_pending > 0 {
            return;
        }
        let horizon = c.task.horizon;
        if let Some(t) = &self.table {
            t.lock().unwrap_or_else(|e| e.into_inner()).gc(horizon);
        }
        self.done(out);
    }

    /// An index nested-loop join asks its inner table for the distinct
    /// outer keys once every outer port is complete.
    fn maybe_probe(&mut self, out: &mut dyn Outbox) {
        let node = self.plan.node(self.id);
        let NodeKind::Join { method: JoinMethod::IndexNestedLoop, outer_key, .. } = &node.kind else {
            return;
        };
        let c = self.cycle.as_mut().expect("active cycle");
        let Some(inner) = node.inner_port() else { return };
        if c.probes_sent || !c.ports[inner].active {
            return;
        }
        let outer_open = node
            .inputs
            .iter()
            .enumerate()
            .any(|(p, i)| i.role != PortRole::Inner && c.ports[p].active && c.ports[p].open);
        if outer_open {
            return;
        }
        c.probes_sent = true;
        let mut keys: BTreeMap<Value, QuerySet> = BTreeMap::new();
        if c.failure.is_none() {
            for (p, input) in node.inputs.iter().enumerate() {
                if p == inner || !c.ports[p].active {
                    continue;
                }
                let k = match position(&input.schema, &ColumnRef::Base(*outer_key)) {
                    Ok(k) => k,
                    Err(e) => {
                        c.failure = Some(e.to_string());
                        keys.clear();
                        break;
                    }
                };
                for (v, qs) in probe_keys(&c.ports[p].tuples, k) {
                    match keys.get_mut(&v) {
                        Some(all) => *all = all.union(&qs),
                        None => {
                            keys.insert(v, qs);
                        }
                    }
                }
            }
        }
        c.counters.probes += keys.len() as u64;
        let producer = &node.inputs[inner];
        out.send(Message {
            to: producer.producer,
            port: producer.edge,
            payload: Payload::Probe(keys.into_iter().collect()),
        });
    }

    fn finish(&mut self, out: &mut dyn Outbox) {
        let started = Instant::now();
        let result = if self.cycle.as_ref().is_some_and(|c| c.failure.is_some()) {
            Ok(Vec::new())
        } else {
            self.compute()
        };
        let c = self.cycle.as_mut().expect("active cycle");
        c.counters.nanos += started.elapsed().as_nanos() as u64;
        let streams = match result {
            Ok(s) => s,
            Err(e) => {
                c.failure = Some(e.to_string());
                Vec::new()
            }
        };
        if self.id == crate::planner::OUTPUT {
            if c.failure.is_none() {
                out.report(Report::Results(std::mem::take(&mut c.results)));
            }
            self.done(out);
            return;
        }
        for (stream, tuples) in streams {
            self.emit(stream, tuples, out);
        }
        for e in 0..self.node().outputs.len() {
            self.send_eos(e, out);
        }
        self.done(out);
    }

    /// Runs the node's operator over the buffered inputs; returns tuples
    /// per output stream.
    fn compute(&mut self) -> Result<Vec<(usize, Vec<SharedTuple>)>> {
        let plan = self.plan.clone();
        let node = plan.node(self.id);
        let opts = self.opts;
        let c = self.cycle.as_mut().expect("active cycle");
        let active: Vec<usize> = (0..c.ports.len()).filter(|&p| c.ports[p].active).collect();
        let stream_of = |p: usize| {
            node.stream_for_port(p)
                .ok_or_else(|| Error::Protocol(format!("no output stream for port {p}")))
        };
        let mut out = Vec::new();
        match &node.kind {
            NodeKind::Table { .. } => {}
            NodeKind::Output => {
                let mut rows: BTreeMap<QueryId, Vec<Row>> = BTreeMap::new();
                for s in &c.task.subs {
                    rows.insert(s.qid, Vec::new());
                }
                let subs = &c.task.subs;
                for &p in &active {
                    route(
                        &c.ports[p].tuples,
                        |q| match find_sub(subs, q).map(|s| &s.step().config) {
                            Some(StepConfig::Output { projection }) => Some(projection.as_slice()),
                            _ => None,
                        },
                        &mut rows,
                    )?;
                }
                c.results = rows.into_iter().collect();
            }
            NodeKind::Join { method, outer_key, inner_key } => {
                let inner = node
                    .inner_port()
                    .ok_or_else(|| Error::Protocol("join without inner port".into()))?;
                let ik = position(&node.inputs[inner].schema, &ColumnRef::Base(*inner_key))?;
                let inner_tuples = std::mem::take(&mut c.ports[inner].tuples);
                let mut scratch = Counters::default();
                let mut table = JoinTable::new();
                if *method != JoinMethod::QueryId {
                    let counters = if *method == JoinMethod::Hash { &mut c.counters } else { &mut scratch };
                    table.insert_all(&inner_tuples, ik, counters);
                }
                for &p in &active {
                    if p == inner {
                        continue;
                    }
                    let ok = position(&node.inputs[p].schema, &ColumnRef::Base(*outer_key))?;
                    let outer = std::mem::take(&mut c.ports[p].tuples);
                    let joined = match method {
                        JoinMethod::Hash => {
                            let mut v = Vec::new();
                            table.probe_all(&outer, ok, opts, &mut c.counters, &mut v)?;
                            v
                        }
                        JoinMethod::IndexNestedLoop => {
                            let mut v = Vec::new();
                            table.probe_all(&outer, ok, opts, &mut scratch, &mut v)?;
                            v
                        }
                        JoinMethod::QueryId => shared_queryid_join(&outer, &inner_tuples, ok, ik, opts, &mut c.counters)?,
                    };
                    out.push((stream_of(p)?, joined));
                }
            }
            NodeKind::Filter => {
                let mut groups: Vec<&Vec<(usize, usize)>> = Vec::new();
                let mut group_of: BTreeMap<QueryId, usize> = BTreeMap::new();
                for s in &c.task.subs {
                    let StepConfig::Filter { eqs } = &s.step().config else {
                        return Err(Error::Protocol("filter step without equalities".into()));
                    };
                    let g = match groups.iter().position(|g| *g == eqs) {
                        Some(g) => g,
                        None => {
                            groups.push(eqs);
                            groups.len() - 1
                        }
                    };
                    group_of.insert(s.qid, g);
                }
                for &p in &active {
                    let mut kept = Vec::new();
                    let mut pass: Vec<Option<bool>> = vec![None; groups.len()];
                    let mut ids = Vec::new();
                    for t in &c.ports[p].tuples {
                        pass.iter_mut().for_each(|x| *x = None);
                        ids.clear();
                        for q in t.queries.iter() {
                            let g = *group_of.get(&q).ok_or(Error::UnknownQuery(q))?;
                            let ok = *pass[g].get_or_insert_with(|| {
                                groups[g]
                                    .iter()
                                    .all(|&(a, b)| !t.values[a].is_null() && t.values[a] == t.values[b])
                            });
                            if ok {
                                ids.push(q);
                            }
                        }
                        if ids.len() == t.queries.len() {
                            kept.push(t.clone());
                        } else if !ids.is_empty() {
                            kept.push(t.with_queries(QuerySet::from_sorted(ids.clone())));
                        }
                    }
                    out.push((stream_of(p)?, kept));
                }
            }
            NodeKind::GroupBy { keys, aggs } => {
                let funcs: Vec<AggFunc> = aggs.iter().map(|a| a.func).collect();
                for &p in &active {
                    let schema = &node.inputs[p].schema;
                    let key_cols = keys
                        .iter()
                        .map(|k| position(schema, &ColumnRef::Base(*k)))
                        .collect::<Result<Vec<_>>>()?;
                    let args = aggs
                        .iter()
                        .map(|a| a.arg.map(|b| position(schema, &ColumnRef::Base(b))).transpose())
                        .collect::<Result<Vec<_>>>()?;
                    let mut table = GroupTable::new(&funcs);
                    for t in &c.ports[p].tuples {
                        table.insert(t, &key_cols, &args, &mut c.counters)?;
                    }
                    let subs = &c.task.subs;
                    let grouped = table.finish(|q| {
                        let s = find_sub(subs, q)?;
                        match &s.step().config {
                            StepConfig::GroupBy { having } => Some((having, &s.params[..])),
                            _ => None,
                        }
                    })?;
                    out.push((stream_of(p)?, grouped));
                }
            }
            NodeKind::Sort { key, dir } | NodeKind::TopN { key, dir } => {
                let mut keys = vec![0; c.ports.len()];
                let mut items: Vec<(u32, SharedTuple)> = Vec::new();
                for &p in &active {
                    keys[p] = position(&node.inputs[p].schema, key)?;
                    items.extend(std::mem::take(&mut c.ports[p].tuples).into_iter().map(|t| (p as u32, t)));
                }
                sort_union(&mut items, &keys, *dir, &mut c.counters);
                let mut per_port: BTreeMap<usize, Vec<SharedTuple>> = active.iter().map(|&p| (p, Vec::new())).collect();
                if matches!(node.kind, NodeKind::TopN { .. }) {
                    let mut limits = Vec::with_capacity(c.task.subs.len());
                    for s in &c.task.subs {
                        let StepConfig::TopN { limit } = &s.step().config else {
                            return Err(Error::Protocol("top-n step without limit".into()));
                        };
                        let n = limit
                            .resolve(&s.params)?
                            .as_i64()
                            .ok_or_else(|| Error::Type("LIMIT must be an integer".into()))?;
                        limits.push((s.qid, n));
                    }
                    let mut filter = TopNFilter::new(limits)?;
                    for (p, t) in items {
                        if filter.is_exhausted() {
                            break;
                        }
                        if let Some(qs) = filter.admit(&t.queries)? {
                            per_port.get_mut(&(p as usize)).unwrap().push(t.with_queries(qs));
                        }
                    }
                } else {
                    for (p, t) in items {
                        per_port.get_mut(&(p as usize)).unwrap().push(t);
                    }
                }
                for (p, ts) in per_port {
                    out.push((stream_of(p)?, ts));
                }
            }
        }
        Ok(out)
    }
}
