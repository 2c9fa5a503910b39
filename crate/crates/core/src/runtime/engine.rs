use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::{Arc, Condvar, Mutex, MutexGuard, OnceLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{RecvTimeoutError, Sender};

use super::worker::{Event, Pool};
use super::interp::Eval;
use super::{Admission, Executor, Outcome, ResultEnvelope};
use crate::datamodel::{ArrivalTimestamp, QueryId, Row, Value};
use crate::error::{Error, Result};
use crate::frontend::{bind, parse, prepare, Catalog, PreparedStatement, QueryInstance, StatementId};
use crate::operators::{Counters, JoinOptions, NodeTask, Report, Subquery, WriteTask};
use crate::planner::{compile_single, GlobalPlan, LogicalPlan, NodeId};
use crate::storage::{bind_write, Database, TableStore, OPEN};

/// Longest a cycle may take before the engine declares a fault.
const CYCLE_TIMEOUT: Duration = Duration::from_secs(600);

/// When heartbeats fire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    /// Only on explicit `heartbeat`/`run_cycle` calls.
    Manual,
    /// A background thread starts the next cycle as soon as the previous
    /// one is done and either work is pending or `idle` has elapsed.
    Auto { idle: Duration },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FaultConfig {
    /// Join results keep the outer tuple's query set instead of the
    /// intersection. For mutation testing of the verifier only.
    pub skip_join_intersection: bool,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub trigger: Trigger,
    /// Worker threads; defaults to the node count capped at the available
    /// parallelism.
    pub workers: Option<usize>,
    /// Tuples per message between nodes.
    pub batch_size: usize,
    /// Admission cap per cycle; the rest waits for the next one.
    pub max_batch: Option<usize>,
    /// Receives every completed envelope instead of `poll`/`wait`.
    pub completion_sink: Option<Sender<ResultEnvelope>>,
    pub fault: FaultConfig,
}

impl EngineConfig {
    pub fn manual() -> EngineConfig {
        EngineConfig {
            trigger: Trigger::Manual,
            workers: None,
            batch_size: 1024,
            max_batch: None,
            completion_sink: None,
            fault: FaultConfig::default(),
        }
    }

    pub fn auto(idle: Duration) -> EngineConfig {
        EngineConfig {
            trigger: Trigger::Auto { idle },
            ..EngineConfig::manual()
        }
    }

    pub fn with_workers(mut self, n: usize) -> EngineConfig {
        self.workers = Some(n);
        self
    }

    pub fn with_max_batch(mut self, n: usize) -> EngineConfig {
        self.max_batch = Some(n);
        self
    }

    pub fn with_sink(mut self, sink: Sender<ResultEnvelope>) -> EngineConfig {
        self.completion_sink = Some(sink);
        self
    }

    pub fn with_fault(mut self, fault: FaultConfig) -> EngineConfig {
        self.fault = fault;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Metrics {
    pub cycles: u64,
    pub operations: u64,
    pub failures: u64,
    pub max_cycle: Duration,
    pub total_cycle: Duration,
    pub totals: Counters,
    /// Cumulative counters keyed by node name.
    pub nodes: BTreeMap<String, Counters>,
    /// Counters of the most recent non-empty cycle.
    pub last_cycle: BTreeMap<String, Counters>,
}

impl Metrics {
    pub fn mean_cycle(&self) -> Duration {
        if self.cycles == 0 {
            Duration::ZERO
        } else {
            self.total_cycle / self.cycles as u32
        }
    }
}

struct Pending {
    inst: QueryInstance,
    admitted_at: Instant,
    /// Plan of a select outside the registered workload.
    adhoc: Option<Arc<LogicalPlan>>,
}

/// One heartbeat's worth of operations with the per-node queues already
/// filled in.
pub struct Batch {
    cycle: u64,
    ops: Vec<Pending>,
    tasks: BTreeMap<NodeId, NodeTask>,
    rejected: HashMap<QueryId, Error>,
    adhoc: Vec<usize>,
    window: (ArrivalTimestamp, ArrivalTimestamp),
    started: Instant,
}

impl Batch {
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Admission window `[lo, hi)` of arrival timestamps.
    pub fn window(&self) -> (ArrivalTimestamp, ArrivalTimestamp) {
        self.window
    }

    /// Number of subqueries (and writes) queued at each node.
    pub fn node_queues(&self) -> Vec<(NodeId, usize)> {
        self.tasks
            .iter()
            .map(|(&n, t)| (n, t.subs.len() + t.writes.len()))
            .collect()
    }

    pub fn qids(&self) -> Vec<QueryId> {
        self.ops.iter().map(|p| p.inst.qid).collect()
    }
}

struct Admit {
    statements: Vec<Arc<PreparedStatement>>,
    adhoc: HashMap<String, (StatementId, Option<Arc<LogicalPlan>>)>,
    pending: VecDeque<Pending>,
    next_ts: ArrivalTimestamp,
    next_cycle: u64,
    registered: bool,
    shut: bool,
}

struct Exec {
    pool: Pool,
    next_cycle: u64,
    broken: Option<String>,
}

struct Shared {
    config: EngineConfig,
    catalog: Catalog,
    tables: Vec<Arc<Mutex<TableStore>>>,
    plan: OnceLock<(Arc<GlobalPlan>, Vec<String>)>,
    admit: Mutex<Admit>,
    wake: Condvar,
    results: Mutex<HashMap<QueryId, ResultEnvelope>>,
    ready: Condvar,
    exec: Mutex<Option<Exec>>,
    cycle_lock: Mutex<()>,
    metrics: Mutex<Metrics>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// The shared engine. Statements are registered once; each heartbeat
/// drains the pending queue into a batch that flows once through the
/// global plan.
pub struct Engine {
    shared: Arc<Shared>,
    ticker: Mutex<Option<JoinHandle<()>>>,
}

impl Engine {
    pub fn open(mut db: Database, config: EngineConfig) -> Result<Engine> {
        db.sync_row_counts();
        let (catalog, tables) = db.into_parts();
        Ok(Engine {
            shared: Arc::new(Shared {
                config,
                catalog,
                tables: tables.into_iter().map(|t| Arc::new(Mutex::new(t))).collect(),
                plan: OnceLock::new(),
                admit: Mutex::new(Admit {
                    statements: Vec::new(),
                    adhoc: HashMap::new(),
                    pending: VecDeque::new(),
                    next_ts: 1,
                    next_cycle: 1,
                    registered: false,
                    shut: false,
                }),
                wake: Condvar::new(),
                results: Mutex::new(HashMap::new()),
                ready: Condvar::new(),
                exec: Mutex::new(None),
                cycle_lock: Mutex::new(()),
                metrics: Mutex::new(Metrics::default()),
            }),
            ticker: Mutex::new(None),
        })
    }

    pub fn catalog(&self) -> &Catalog {
        &self.shared.catalog
    }

    pub fn plan(&self) -> Option<&Arc<GlobalPlan>> {
        self.shared.plan.get().map(|(p, _)| p)
    }

    pub fn node_name(&self, id: NodeId) -> Option<&str> {
        self.shared.plan.get().map(|(_, names)| names[id.0].as_str())
    }

    pub fn workers(&self) -> usize {
        lock(&self.shared.exec).as_ref().map_or(0, |e| e.pool.workers())
    }

    /// Compiles the workload into the global plan and starts the workers.
    /// Can be called once.
    pub fn register(&self, sqls: &[&str]) -> Result<Vec<StatementId>> {
        let s = &self.shared;
        let mut admit = lock(&s.admit);
        if admit.shut {
            return Err(Error::ShutDown);
        }
        if admit.registered {
            return Err(Error::Unsupported("the workload is already registered".into()));
        }
        let mut plan = GlobalPlan::new(&s.catalog);
        let mut statements = Vec::new();
        for (i, sql) in sqls.iter().enumerate() {
            let p = prepare(&parse(sql)?, &s.catalog, StatementId(i))?;
            if !p.is_write() {
                plan.add_plan(p.id, &compile_single(&p, &s.catalog)?, &s.catalog)?;
            }
            statements.push(Arc::new(p));
        }
        let names = (0..plan.nodes.len()).map(|i| plan.node_name(NodeId(i), &s.catalog)).collect();
        let plan = Arc::new(plan);
        let workers = s.config.workers.unwrap_or_else(|| {
            let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
            plan.nodes.len().min(cores)
        });
        let opts = JoinOptions {
            skip_intersection: s.config.fault.skip_join_intersection,
        };
        let pool = Pool::spawn(plan.clone(), &s.tables, workers, opts, s.config.batch_size);
        *lock(&s.exec) = Some(Exec {
            pool,
            next_cycle: 1,
            broken: None,
        });
        let _ = s.plan.set((plan, names));
        let ids = statements.iter().map(|p| p.id).collect();
        admit.statements = statements;
        admit.registered = true;
        drop(admit);
        if let Trigger::Auto { idle } = s.config.trigger {
            let shared = s.clone();
            let h = std::thread::Builder::new()
                .name("heartbeat".into())
                .spawn(move || ticker(shared, idle))
                .expect("spawn heartbeat thread");
            *lock(&self.ticker) = Some(h);
        }
        Ok(ids)
    }

    pub fn statement(&self, id: StatementId) -> Result<Arc<PreparedStatement>> {
        lock(&self.shared.admit)
            .statements
            .get(id.0)
            .cloned()
            .ok_or(Error::UnknownStatement(id.0))
    }

    /// Queues an operation with a fresh arrival timestamp and returns
    /// immediately.
    pub fn admit(&self, stmt: StatementId, params: Vec<Value>) -> Result<Admission> {
        let mut a = lock(&self.shared.admit);
        if a.shut {
            return Err(Error::ShutDown);
        }
        if !a.registered {
            return Err(Error::NotRegistered);
        }
        let p = a.statements.get(stmt.0).cloned().ok_or(Error::UnknownStatement(stmt.0))?;
        let ts = a.next_ts;
        let qid = QueryId(ts);
        let inst = bind(&p, params, qid, ts)?;
        a.next_ts += 1;
        a.pending.push_back(Pending {
            inst,
            admitted_at: Instant::now(),
            adhoc: None,
        });
        drop(a);
        self.shared.wake.notify_all();
        Ok(Admission { qid, ts })
    }

    /// Queues a statement outside the registered workload. Writes take the
    /// usual path; selects run alone on their own plan at the end of the
    /// cycle, reading the snapshot of their arrival timestamp. Each distinct
    /// text is prepared once.
    pub fn admit_sql(&self, sql: &str, params: Vec<Value>) -> Result<Admission> {
        let mut a = lock(&self.shared.admit);
        if a.shut {
            return Err(Error::ShutDown);
        }
        if !a.registered {
            return Err(Error::NotRegistered);
        }
        let (id, plan) = match a.adhoc.get(sql) {
            Some(e) => e.clone(),
            None => {
                let catalog = &self.shared.catalog;
                let id = StatementId(a.statements.len());
                let p = prepare(&parse(sql)?, catalog, id)?;
                let plan = if p.is_write() { None } else { Some(Arc::new(compile_single(&p, catalog)?)) };
                a.statements.push(Arc::new(p));
                a.adhoc.insert(sql.to_string(), (id, plan.clone()));
                (id, plan)
            }
        };
        let p = a.statements[id.0].clone();
        let ts = a.next_ts;
        let qid = QueryId(ts);
        let inst = bind(&p, params, qid, ts)?;
        a.next_ts += 1;
        a.pending.push_back(Pending {
            inst,
            admitted_at: Instant::now(),
            adhoc: plan,
        });
        drop(a);
        self.shared.wake.notify_all();
        Ok(Admission { qid, ts })
    }

    pub fn pending(&self) -> usize {
        lock(&self.shared.admit).pending.len()
    }

    /// Drains the pending queue (up to the admission cap) into a batch.
    pub fn heartbeat(&self) -> Result<Batch> {
        heartbeat(&self.shared)
    }

    /// Pushes a batch through the plan and publishes its envelopes.
    pub fn execute_batch(&self, batch: Batch) -> Result<Vec<QueryId>> {
        execute_batch(&self.shared, batch)
    }

    /// One heartbeat plus its execution; returns the number of operations.
    pub fn run_cycle(&self) -> Result<usize> {
        run_cycle(&self.shared)
    }

    /// Runs cycles until nothing is pending.
    pub fn drain(&self) -> Result<()> {
        while self.pending() > 0 {
            self.run_cycle()?;
        }
        Ok(())
    }

    pub fn poll(&self, qid: QueryId) -> Option<ResultEnvelope> {
        lock(&self.shared.results).remove(&qid)
    }

    pub fn wait(&self, qid: QueryId, timeout: Duration) -> Option<ResultEnvelope> {
        let deadline = Instant::now() + timeout;
        let mut r = lock(&self.shared.results);
        loop {
            if let Some(env) = r.remove(&qid) {
                return Some(env);
            }
            let now = Instant::now();
            if now >= deadline {
                return None;
            }
            r = self
                .shared
                .ready
                .wait_timeout(r, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }

    pub fn metrics(&self) -> Metrics {
        lock(&self.shared.metrics).clone()
    }

    /// Current rows of `table`, read between cycles.
    pub fn table_rows(&self, table: &str) -> Result<Vec<Row>> {
        let id = self
            .shared
            .catalog
            .table_id(table)
            .ok_or_else(|| Error::UnknownTable(table.to_string()))?;
        let _exec = lock(&self.shared.exec);
        let t = lock(&self.shared.tables[id as usize]);
        Ok(t.snapshot(OPEN - 1).into_iter().map(|(_, v)| v.to_vec()).collect())
    }

    /// Row versions currently retained per table.
    pub fn version_counts(&self) -> Vec<usize> {
        let _exec = lock(&self.shared.exec);
        self.shared.tables.iter().map(|t| lock(t).version_count()).collect()
    }

    /// Stops the heartbeat and the workers. Operations still pending fail
    /// with `ShutDown`.
    pub fn shutdown(&self) {
        let s = &self.shared;
        let pending: Vec<Pending> = {
            let mut a = lock(&s.admit);
            if a.shut {
                return;
            }
            a.shut = true;
            a.pending.drain(..).collect()
        };
        s.wake.notify_all();
        if let Some(h) = lock(&self.ticker).take() {
            let _ = h.join();
        }
        let _cycle = lock(&s.cycle_lock);
        if let Some(mut e) = lock(&s.exec).take() {
            e.pool.stop();
        }
        let now = Instant::now();
        publish(
            s,
            pending
                .into_iter()
                .map(|p| ResultEnvelope {
                    qid: p.inst.qid,
                    statement: p.inst.prepared.id,
                    outcome: Outcome::Failed(Error::ShutDown),
                    arrival: p.inst.arrival,
                    admitted_at: p.admitted_at,
                    completed_at: now,
                    cycle: 0,
                })
                .collect(),
        );
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn ticker(s: Arc<Shared>, idle: Duration) {
    loop {
        {
            let mut a = lock(&s.admit);
            if a.shut {
                return;
            }
            if a.pending.is_empty() {
                a = s.wake.wait_timeout(a, idle).unwrap_or_else(|e| e.into_inner()).0;
                if a.shut {
                    return;
                }
                if a.pending.is_empty() {
                    continue;
                }
            }
        }
        if run_cycle(&s).is_err() && lock(&s.exec).as_ref().is_none_or(|e| e.broken.is_some()) {
            return;
        }
    }
}

fn run_cycle(s: &Shared) -> Result<usize> {
    let _cycle = lock(&s.cycle_lock);
    let b = heartbeat(s)?;
    let n = b.len();
    execute_batch(s, b)?;
    Ok(n)
}

fn heartbeat(s: &Shared) -> Result<Batch> {
    let started = Instant::now();
    let mut a = lock(&s.admit);
    if !a.registered {
        return Err(Error::NotRegistered);
    }
    let take = s.config.max_batch.map_or(a.pending.len(), |m| m.min(a.pending.len()));
    let ops: Vec<Pending> = a.pending.drain(..take).collect();
    let cycle = a.next_cycle;
    a.next_cycle += 1;
    drop(a);
    let (plan, _) = s.plan.get().ok_or(Error::NotRegistered)?;
    let lo = ops.first().map_or(0, |p| p.inst.arrival);
    let hi = ops.last().map_or(lo, |p| p.inst.arrival + 1);
    // Ad-hoc selects read after the table nodes are done, so versions they
    // can still see must survive this cycle's collection.
    let horizon = ops
        .iter()
        .filter(|p| p.adhoc.is_some())
        .map(|p| p.inst.arrival)
        .fold(hi.saturating_sub(1), ArrivalTimestamp::min);
    let mut tasks: BTreeMap<NodeId, NodeTask> = BTreeMap::new();
    let mut rejected = HashMap::new();
    let mut adhoc = Vec::new();
    fn task(tasks: &mut BTreeMap<NodeId, NodeTask>, node: NodeId, cycle: u64, horizon: ArrivalTimestamp) -> &mut NodeTask {
        tasks.entry(node).or_insert_with(|| NodeTask {
            node,
            cycle,
            subs: Vec::new(),
            writes: Vec::new(),
            horizon,
        })
    }
    for (i, p) in ops.iter().enumerate() {
        let q = &p.inst;
        if p.adhoc.is_some() {
            adhoc.push(i);
            continue;
        }
        if q.prepared.is_write() {
            match bind_write(&q.prepared, &q.params) {
                Ok((table, op)) => task(&mut tasks, plan.table_node(table), cycle, horizon).writes.push(WriteTask {
                    qid: q.qid,
                    ts: q.arrival,
                    op,
                }),
                Err(e) => {
                    rejected.insert(q.qid, e);
                }
            }
            continue;
        }
        let Some(template) = plan.template(q.prepared.id) else {
            rejected.insert(q.qid, Error::UnknownStatement(q.prepared.id.0));
            continue;
        };
        for (i, step) in template.steps.iter().enumerate() {
            task(&mut tasks, step.node, cycle, horizon).subs.push(Subquery {
                qid: q.qid,
                snapshot: q.arrival,
                template: template.clone(),
                step: i,
                params: q.params.clone(),
            });
        }
    }
    Ok(Batch {
        cycle,
        ops,
        tasks,
        rejected,
        adhoc,
        window: (lo, hi),
        started,
    })
}

fn publish(s: &Shared, envelopes: Vec<ResultEnvelope>) {
    if envelopes.is_empty() {
        return;
    }
    if let Some(sink) = &s.config.completion_sink {
        for e in envelopes {
            let _ = sink.send(e);
        }
        return;
    }
    let mut r = lock(&s.results);
    for e in envelopes {
        r.insert(e.qid, e);
    }
    drop(r);
    s.ready.notify_all();
}

fn execute_batch(s: &Shared, batch: Batch) -> Result<Vec<QueryId>> {
    let mut exec_guard = lock(&s.exec);
    let exec = exec_guard.as_mut().ok_or(Error::ShutDown)?;
    let Batch {
        cycle,
        ops,
        tasks,
        mut rejected,
        adhoc,
        started,
        ..
    } = batch;
    if cycle != exec.next_cycle {
        return Err(Error::Protocol(format!(
            "batch for cycle {cycle} executed out of order (expected {})",
            exec.next_cycle
        )));
    }
    exec.next_cycle += 1;
    let names = &s.plan.get().expect("registered").1;

    let mut rows: HashMap<QueryId, Vec<Row>> = HashMap::new();
    let mut written: HashMap<QueryId, Result<usize>> = HashMap::new();
    let mut failed: HashMap<QueryId, String> = HashMap::new();
    let mut counters: BTreeMap<String, Counters> = BTreeMap::new();
    let mut fault: Option<String> = exec.broken.clone();

    if fault.is_none() {
        let mut outstanding = tasks.len();
        for (_, t) in tasks {
            exec.pool.dispatch(t);
        }
        while outstanding > 0 {
            match exec.pool.events.recv_timeout(CYCLE_TIMEOUT) {
                Ok(Event::Report(Report::Written { qid, result })) => {
                    written.insert(qid, result);
                }
                Ok(Event::Report(Report::Results(rs))) => rows.extend(rs),
                Ok(Event::Report(Report::Done { node, counters: c, failure })) => {
                    outstanding -= 1;
                    *counters.entry(names[node.0].clone()).or_default() += c;
                    if let Some(f) = failure {
                        for q in f.queries {
                            failed.entry(q).or_insert_with(|| format!("{}: {}", names[node.0], f.message));
                        }
                    }
                }
                Ok(Event::Panic(msg)) => {
                    fault = Some(msg);
                    break;
                }
                Err(RecvTimeoutError::Timeout) => {
                    fault = Some("cycle did not complete".into());
                    break;
                }
                Err(RecvTimeoutError::Disconnected) => {
                    fault = Some("workers are gone".into());
                    break;
                }
            }
        }
        if fault.is_some() {
            exec.broken = fault.clone();
        }
    }

    let mut adhoc_out: HashMap<QueryId, Result<Vec<Row>>> = HashMap::new();
    if fault.is_none() && !adhoc.is_empty() {
        let guards: Vec<MutexGuard<'_, TableStore>> = s.tables.iter().map(|t| lock(t)).collect();
        let tables: Vec<&TableStore> = guards.iter().map(|g| &**g).collect();
        let mut c = Counters::default();
        for &i in &adhoc {
            let p = &ops[i];
            let plan = p.adhoc.as_ref().expect("ad-hoc plan");
            let mut eval = Eval {
                catalog: &s.catalog,
                tables: &tables,
                counters: &mut c,
            };
            adhoc_out.insert(p.inst.qid, eval.query(plan, &p.inst.params, p.inst.arrival));
        }
        *counters.entry("adhoc".into()).or_default() += c;
    }

    let now = Instant::now();
    let mut envelopes = Vec::with_capacity(ops.len());
    let mut failures = 0;
    for p in &ops {
        let q = &p.inst;
        let outcome = if let Some(msg) = &fault {
            Outcome::Failed(Error::Fault { cycle, message: msg.clone() })
        } else if let Some(e) = rejected.remove(&q.qid) {
            Outcome::Failed(e)
        } else if q.prepared.is_write() {
            match written.remove(&q.qid) {
                Some(Ok(n)) => Outcome::Written(n),
                Some(Err(e)) => Outcome::Failed(e),
                None => Outcome::Failed(Error::Fault {
                    cycle,
                    message: "write was not applied".into(),
                }),
            }
        } else if let Some(r) = adhoc_out.remove(&q.qid) {
            match r {
                Ok(rows) => Outcome::Rows(rows),
                Err(e) => Outcome::Failed(e),
            }
        } else if let Some(msg) = failed.get(&q.qid) {
            Outcome::Failed(Error::Fault { cycle, message: msg.clone() })
        } else {
            match rows.remove(&q.qid) {
                Some(r) => Outcome::Rows(r),
                None => Outcome::Failed(Error::Fault {
                    cycle,
                    message: "no result delivered".into(),
                }),
            }
        };
        if matches!(outcome, Outcome::Failed(_)) {
            failures += 1;
        }
        envelopes.push(ResultEnvelope {
            qid: q.qid,
            statement: q.prepared.id,
            outcome,
            arrival: q.arrival,
            admitted_at: p.admitted_at,
            completed_at: now,
            cycle,
        });
    }
    let elapsed = started.elapsed();
    {
        let mut m = lock(&s.metrics);
        m.cycles += 1;
        m.operations += ops.len() as u64;
        m.failures += failures;
        m.max_cycle = m.max_cycle.max(elapsed);
        m.total_cycle += elapsed;
        if !counters.is_empty() {
            for (name, c) in &counters {
                m.totals += *c;
                *m.nodes.entry(name.clone()).or_default() += *c;
            }
            m.last_cycle = counters;
        }
    }
    drop(exec_guard);
    let ids = envelopes.iter().map(|e| e.qid).collect();
    publish(s, envelopes);
    match fault {
        Some(message) => Err(Error::Fault { cycle, message }),
        None => Ok(ids),
    }
}

impl Executor for Engine {
    fn name(&self) -> &'static str {
        "shared"
    }

    fn register(&self, sqls: &[&str]) -> Result<Vec<StatementId>> {
        Engine::register(self, sqls)
    }

    fn admit(&self, stmt: StatementId, params: Vec<Value>) -> Result<Admission> {
        Engine::admit(self, stmt, params)
    }

    fn admit_sql(&self, sql: &str, params: Vec<Value>) -> Result<Admission> {
        Engine::admit_sql(self, sql, params)
    }

    fn poll(&self, qid: QueryId) -> Option<ResultEnvelope> {
        Engine::poll(self, qid)
    }

    fn wait(&self, qid: QueryId, timeout: Duration) -> Option<ResultEnvelope> {
        Engine::wait(self, qid, timeout)
    }

    fn table_rows(&self, table: &str) -> Result<Vec<Row>> {
        Engine::table_rows(self, table)
    }

    fn counters(&self) -> Counters {
        lock(&self.shared.metrics).totals
    }

    fn shutdown(&self) {
        Engine::shutdown(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::fixtures::users_rows;

    fn engine(cfg: EngineConfig) -> Engine {
        let c = Catalog::parse(
            "CREATE TABLE USERS (NAME VARCHAR PRIMARY KEY, ACCOUNT INT, BIRTHDATE DATE);
             CREATE INDEX ON USERS(ACCOUNT);",
        )
        .unwrap();
        let mut db = Database::new(c);
        db.insert_rows("USERS", users_rows()).unwrap();
        Engine::open(db, cfg).unwrap()
    }

    #[test]
    fn max_batch_caps_each_heartbeat() {
        let e = engine(EngineConfig::manual().with_max_batch(2));
        let ids = e.register(&["SELECT NAME FROM USERS WHERE ACCOUNT > ?"]).unwrap();
        for i in 0..5 {
            e.admit(ids[0], vec![Value::Int(i)]).unwrap();
        }
        let b = e.heartbeat().unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b.window(), (1, 3));
        assert_eq!(b.qids(), vec![QueryId(1), QueryId(2)]);
        e.execute_batch(b).unwrap();
        assert_eq!(e.pending(), 3);
        e.drain().unwrap();
        assert_eq!(e.metrics().cycles, 3);
    }

    #[test]
    fn batches_execute_in_heartbeat_order() {
        let e = engine(EngineConfig::manual());
        let ids = e.register(&["SELECT NAME FROM USERS WHERE ACCOUNT > ?"]).unwrap();
        e.admit(ids[0], vec![Value::Int(0)]).unwrap();
        let first = e.heartbeat().unwrap();
        e.admit(ids[0], vec![Value::Int(0)]).unwrap();
        let second = e.heartbeat().unwrap();
        assert!(e.execute_batch(second).is_err());
        e.execute_batch(first).unwrap();
    }

    #[test]
    fn bad_write_fails_alone() {
        let e = engine(EngineConfig::manual());
        let ids = e
            .register(&[
                "INSERT INTO USERS VALUES (?, ?, ?)",
                "SELECT NAME FROM USERS WHERE ACCOUNT = ?",
            ])
            .unwrap();
        let dup = e
            .admit(ids[0], vec![Value::str("Nick Lee"), Value::Int(1), Value::Null])
            .unwrap();
        let ok = e.admit(ids[1], vec![Value::Int(500)]).unwrap();
        e.run_cycle().unwrap();
        let t = Duration::from_secs(10);
        assert!(matches!(e.wait(dup.qid, t).unwrap().outcome, Outcome::Failed(Error::DuplicateKey { .. })));
        assert_eq!(
            e.wait(ok.qid, t).unwrap().outcome,
            Outcome::Rows(vec![vec![Value::str("Nick Lee")]])
        );
        assert_eq!(e.metrics().failures, 1);
    }
}
