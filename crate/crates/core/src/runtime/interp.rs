use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Sender};

use super::{Admission, Executor, Outcome, ResultEnvelope};
use crate::datamodel::{
    tuple_order, ArrivalTimestamp, Atom, Lineage, Predicate, QueryId, Row, TableId, Value, ValueType,
};
use crate::error::{Error, Result};
use crate::frontend::{bind_params, parse, prepare, AggFunc, Catalog, ColumnRef, PreparedStatement, SortDir, StatementId};
use crate::operators::{Counters, ExactSum};
use crate::planner::{compile_single, AccessMethod, JoinMethod, LogicalPlan};
use crate::storage::{bind_write, Database, TableStore, Version, OPEN};

type Item = (Lineage, Vec<Value>);

fn position(schema: &[ColumnRef], c: &ColumnRef, catalog: &Catalog) -> Result<usize> {
    schema
        .iter()
        .position(|x| x == c)
        .ok_or_else(|| Error::UnknownColumn(c.display(catalog)))
}

enum Agg {
    Count(i64),
    SumInt(Option<i64>),
    SumFloat(Option<ExactSum>),
    Avg(i128, ExactSum, bool, i64),
    Min(Option<Value>),
    Max(Option<Value>),
}

impl Agg {
    fn new(func: AggFunc, ty: Option<ValueType>) -> Agg {
        match func {
            AggFunc::Count => Agg::Count(0),
            AggFunc::Sum if ty == Some(ValueType::Float) => Agg::SumFloat(None),
            AggFunc::Sum => Agg::SumInt(None),
            AggFunc::Avg => Agg::Avg(0, ExactSum::default(), false, 0),
            AggFunc::Min => Agg::Min(None),
            AggFunc::Max => Agg::Max(None),
        }
    }

    fn add(&mut self, v: Option<&Value>) -> Result<()> {
        let Some(v) = v else {
            if let Agg::Count(n) = self {
                *n += 1;
            }
            return Ok(());
        };
        if v.is_null() {
            return Ok(());
        }
        match (self, v) {
            (Agg::Count(n), _) => *n += 1,
            (Agg::SumInt(s), Value::Int(x)) => {
                *s = Some(s.unwrap_or(0).checked_add(*x).ok_or(Error::Overflow("SUM"))?);
            }
            (Agg::SumFloat(s), Value::Float(x)) => s.get_or_insert_with(ExactSum::default).add(*x),
            (Agg::Avg(i, _, _, n), Value::Int(x)) => {
                *i += *x as i128;
                *n += 1;
            }
            (Agg::Avg(_, f, is_float, n), Value::Float(x)) => {
                f.add(*x);
                *is_float = true;
                *n += 1;
            }
            (Agg::Min(m), v) => {
                if m.as_ref().is_none_or(|m| v < m) {
                    *m = Some(v.clone());
                }
            }
            (Agg::Max(m), v) => {
                if m.as_ref().is_none_or(|m| v > m) {
                    *m = Some(v.clone());
                }
            }
            (_, v) => return Err(Error::NonNumericAggregate(v.to_string())),
        }
        Ok(())
    }

    fn value(&self) -> Value {
        match self {
            Agg::Count(n) => Value::Int(*n),
            Agg::SumInt(s) => s.map_or(Value::Null, Value::Int),
            Agg::SumFloat(s) => s.as_ref().map_or(Value::Null, |s| Value::Float(s.value())),
            Agg::Avg(_, _, _, 0) => Value::Null,
            Agg::Avg(i, f, true, n) => {
                let mut f = f.clone();
                f.add(*i as f64);
                Value::Float(f.value() / *n as f64)
            }
            Agg::Avg(i, _, false, n) => Value::Float(*i as f64 / *n as f64),
            Agg::Min(m) | Agg::Max(m) => m.clone().unwrap_or(Value::Null),
        }
    }
}

/// Executes one statement at a time on its own plan with plain operators:
/// a scan per query, a hash table per join, a sort per query.
#[derive(Debug, Clone)]
pub struct Interpreter {
    db: Database,
    statements: Vec<(Arc<PreparedStatement>, Option<LogicalPlan>)>,
    adhoc: HashMap<String, StatementId>,
    pub counters: Counters,
    since_gc: u64,
}

impl Interpreter {
    pub fn new(db: Database) -> Interpreter {
        Interpreter {
            db,
            statements: Vec::new(),
            adhoc: HashMap::new(),
            counters: Counters::default(),
            since_gc: 0,
        }
    }

    pub fn register(&mut self, sqls: &[&str]) -> Result<Vec<StatementId>> {
        let mut ids = Vec::new();
        for sql in sqls {
            let id = StatementId(self.statements.len());
            let p = prepare(&parse(sql)?, self.db.catalog(), id)?;
            let plan = if p.is_write() { None } else { Some(compile_single(&p, self.db.catalog())?) };
            self.statements.push((Arc::new(p), plan));
            ids.push(id);
        }
        Ok(ids)
    }

    /// Id of an ad-hoc statement, preparing it on first use.
    pub fn prepare_sql(&mut self, sql: &str) -> Result<StatementId> {
        if let Some(&id) = self.adhoc.get(sql) {
            return Ok(id);
        }
        let id = self.register(&[sql])?[0];
        self.adhoc.insert(sql.to_string(), id);
        Ok(id)
    }

    pub fn statement(&self, id: StatementId) -> Result<&Arc<PreparedStatement>> {
        self.statements
            .get(id.0)
            .map(|(p, _)| p)
            .ok_or(Error::UnknownStatement(id.0))
    }

    pub fn database(&self) -> &Database {
        &self.db
    }

    /// Runs a statement with raw parameters at timestamp `ts`; reads see
    /// every write executed before.
    pub fn execute(&mut self, stmt: StatementId, params: Vec<Value>, ts: ArrivalTimestamp) -> Result<Outcome> {
        let p = self.statement(stmt)?.clone();
        let params = bind_params(&p, params)?;
        let outcome = match &self.statements[stmt.0].1 {
            Some(plan) => {
                let plan = plan.clone();
                Outcome::Rows(self.query(&plan, &params, ts)?)
            }
            None => {
                let (table, op) = bind_write(&p, &params)?;
                Outcome::Written(self.db.table_mut(table).apply_write(&op, ts)?)
            }
        };
        self.since_gc += 1;
        if self.since_gc >= 64 {
            self.since_gc = 0;
            for id in 0..self.db.tables().len() {
                self.db.table_mut(id as TableId).gc(ts);
            }
        }
        Ok(outcome)
    }

    /// Evaluates a select plan at `snapshot`.
    pub fn query(&mut self, plan: &LogicalPlan, params: &[Value], snapshot: ArrivalTimestamp) -> Result<Vec<Row>> {
        let tables: Vec<&TableStore> = self.db.tables().iter().collect();
        Eval {
            catalog: self.db.catalog(),
            tables: &tables,
            counters: &mut self.counters,
        }
        .query(plan, params, snapshot)
    }
}

/// Plain per-query evaluation of a logical plan over borrowed tables.
pub(crate) struct Eval<'a> {
    pub catalog: &'a Catalog,
    pub tables: &'a [&'a TableStore],
    pub counters: &'a mut Counters,
}

impl Eval<'_> {
    pub fn query(&mut self, plan: &LogicalPlan, params: &[Value], snapshot: ArrivalTimestamp) -> Result<Vec<Row>> {
        let LogicalPlan::Output { input, projection } = plan else {
            return Err(Error::Unsupported("plan must end in an output".into()));
        };
        let schema = input.schema(self.catalog);
        let cols = projection
            .iter()
            .map(|c| position(&schema, c, self.catalog))
            .collect::<Result<Vec<_>>>()?;
        let items = self.eval(input, params, snapshot)?;
        Ok(items
            .into_iter()
            .map(|(_, v)| cols.iter().map(|&c| v[c].clone()).collect())
            .collect())
    }

    fn visible<'v>(
        v: &'v Version,
        snapshot: ArrivalTimestamp,
        pred: &Predicate,
        params: &[Value],
    ) -> Result<Option<&'v Version>> {
        Ok((v.visible(snapshot) && pred.eval(&v.values, params)?).then_some(v))
    }

    fn lookup(
        t: &TableStore,
        column: usize,
        key: &Value,
        pred: &Predicate,
        params: &[Value],
        snapshot: ArrivalTimestamp,
        out: &mut Vec<Item>,
    ) -> Result<()> {
        if key.is_null() {
            return Ok(());
        }
        for &row in t.index_lookup(column, key)? {
            for v in t.chain(row) {
                if v.values[column] == *key {
                    if let Some(v) = Self::visible(v, snapshot, pred, params)? {
                        out.push((Lineage::base(t.id(), row), v.values.to_vec()));
                    }
                }
            }
        }
        Ok(())
    }

    fn eval(&mut self, plan: &LogicalPlan, params: &[Value], snapshot: ArrivalTimestamp) -> Result<Vec<Item>> {
        let catalog = self.catalog;
        match plan {
            LogicalPlan::Access { table, pred, method } => {
                let t = self.tables[*table as usize];
                let mut out = Vec::new();
                match method {
                    AccessMethod::Scan => {
                        for (row, chain) in t.chains() {
                            for v in chain {
                                self.counters.touched += 1;
                                if let Some(v) = Self::visible(v, snapshot, pred, params)? {
                                    out.push((Lineage::base(*table, row), v.values.to_vec()));
                                }
                            }
                        }
                    }
                    AccessMethod::Probe { column, atom } => {
                        self.counters.lookups += 1;
                        let key = pred.atoms[*atom].operand.resolve(params)?;
                        Self::lookup(t, *column, key, pred, params, snapshot, &mut out)?;
                    }
                }
                Ok(out)
            }
            LogicalPlan::Join { outer, inner, outer_key, inner_key, method } => {
                let ok = position(&outer.schema(catalog), &ColumnRef::Base(*outer_key), catalog)?;
                let outer_items = self.eval(outer, params, snapshot)?;
                let mut out = Vec::new();
                if let (JoinMethod::IndexNestedLoop, LogicalPlan::Access { table, pred, .. }) = (method, &**inner) {
                    let t = self.tables[*table as usize];
                    let mut found = Vec::new();
                    for (lin, vals) in &outer_items {
                        self.counters.probes += 1;
                        self.counters.lookups += 1;
                        found.clear();
                        Self::lookup(t, inner_key.column, &vals[ok], pred, params, snapshot, &mut found)?;
                        for (il, iv) in &found {
                            let mut v = vals.clone();
                            v.extend(iv.iter().cloned());
                            out.push((lin.join(il), v));
                        }
                    }
                    return Ok(out);
                }
                let ik = position(&inner.schema(catalog), &ColumnRef::Base(*inner_key), catalog)?;
                let inner_items = self.eval(inner, params, snapshot)?;
                let mut table: HashMap<&Value, Vec<usize>> = HashMap::new();
                for (i, (_, v)) in inner_items.iter().enumerate() {
                    self.counters.builds += 1;
                    if !v[ik].is_null() {
                        table.entry(&v[ik]).or_default().push(i);
                    }
                }
                for (lin, vals) in &outer_items {
                    self.counters.probes += 1;
                    if vals[ok].is_null() {
                        continue;
                    }
                    for &i in table.get(&vals[ok]).map_or(&[][..], |v| v.as_slice()) {
                        let (il, iv) = &inner_items[i];
                        let mut v = vals.clone();
                        v.extend(iv.iter().cloned());
                        out.push((lin.join(il), v));
                    }
                }
                Ok(out)
            }
            LogicalPlan::Filter { input, eqs } => {
                let schema = input.schema(catalog);
                let eqs = eqs
                    .iter()
                    .map(|(a, b)| {
                        Ok((
                            position(&schema, &ColumnRef::Base(*a), catalog)?,
                            position(&schema, &ColumnRef::Base(*b), catalog)?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut items = self.eval(input, params, snapshot)?;
                items.retain(|(_, v)| eqs.iter().all(|&(a, b)| !v[a].is_null() && v[a] == v[b]));
                Ok(items)
            }
            LogicalPlan::GroupBy { input, keys, aggs, having } => {
                let schema = input.schema(catalog);
                let key_cols = keys
                    .iter()
                    .map(|k| position(&schema, &ColumnRef::Base(*k), catalog))
                    .collect::<Result<Vec<_>>>()?;
                let args = aggs
                    .iter()
                    .map(|a| a.arg.map(|b| position(&schema, &ColumnRef::Base(b), catalog)).transpose())
                    .collect::<Result<Vec<_>>>()?;
                let out_schema = plan.schema(catalog);
                let having = Predicate::new(
                    having
                        .iter()
                        .map(|h| Ok(Atom::new(position(&out_schema, &h.target, catalog)?, h.op, h.operand.clone())))
                        .collect::<Result<_>>()?,
                );
                let items = self.eval(input, params, snapshot)?;
                let mut groups: BTreeMap<Vec<Value>, Vec<Agg>> = BTreeMap::new();
                for (_, v) in &items {
                    let key: Vec<Value> = key_cols.iter().map(|&k| v[k].clone()).collect();
                    let accs = groups.entry(key).or_insert_with(|| {
                        aggs.iter()
                            .map(|a| Agg::new(a.func, a.arg.map(|b| catalog.table(b.table).schema.columns[b.column].ty)))
                            .collect()
                    });
                    for (acc, arg) in accs.iter_mut().zip(&args) {
                        acc.add(arg.map(|a| &v[a]))?;
                    }
                }
                self.counters.groups += groups.len() as u64;
                let mut out = Vec::new();
                for (key, accs) in groups {
                    let mut row = key;
                    row.extend(accs.iter().map(Agg::value));
                    if having.eval(&row, params)? {
                        out.push((Lineage::derived(), row));
                    }
                }
                Ok(out)
            }
            LogicalPlan::Sort { input, key, dir } | LogicalPlan::TopN { input, key, dir, .. } => {
                let k = position(&input.schema(catalog), key, catalog)?;
                let mut items = self.eval(input, params, snapshot)?;
                let mut n = 0u64;
                items.sort_by(|a, b| {
                    n += 1;
                    let o = tuple_order(&a.1[k], (&a.0, &a.1), &b.1[k], (&b.0, &b.1));
                    match dir {
                        SortDir::Asc => o,
                        SortDir::Desc => o.reverse(),
                    }
                });
                self.counters.comparisons += n;
                if let LogicalPlan::TopN { limit, .. } = plan {
                    let n = limit
                        .resolve(params)?
                        .as_i64()
                        .ok_or_else(|| Error::Type("LIMIT must be an integer".into()))?;
                    if n <= 0 {
                        return Err(Error::InvalidLimit(n));
                    }
                    items.truncate(n as usize);
                }
                Ok(items)
            }
            LogicalPlan::Output { .. } => Err(Error::Unsupported("nested output".into())),
        }
    }
}

/// Runs one bound query alone on `db` at its arrival timestamp.
pub fn run_query_at_a_time(
    db: &Database,
    q: &crate::frontend::QueryInstance,
) -> Result<ResultEnvelope> {
    let start = Instant::now();
    let mut interp = Interpreter::new(db.clone());
    let outcome = match compile_single(&q.prepared, db.catalog()) {
        Ok(plan) => interp.query(&plan, &q.params, q.arrival),
        Err(e) => Err(e),
    };
    Ok(ResultEnvelope {
        qid: q.qid,
        statement: q.prepared.id,
        outcome: match outcome {
            Ok(rows) => Outcome::Rows(rows),
            Err(e) => Outcome::Failed(e),
        },
        arrival: q.arrival,
        admitted_at: start,
        completed_at: Instant::now(),
        cycle: 0,
    })
}

struct Job {
    qid: QueryId,
    stmt: StatementId,
    params: Vec<Value>,
    ts: ArrivalTimestamp,
    admitted_at: Instant,
}

#[derive(Default)]
struct State {
    next: u64,
    results: HashMap<QueryId, ResultEnvelope>,
    shut: bool,
}

struct Shared {
    interp: Mutex<Interpreter>,
    state: Mutex<State>,
    ready: Condvar,
    sink: Option<Sender<ResultEnvelope>>,
}

/// The query-at-a-time executor: a FIFO queue served by one thread that
/// runs each statement to completion before starting the next.
pub struct QueryAtATime {
    shared: Arc<Shared>,
    queue: Mutex<Option<Sender<Job>>>,
    worker: Mutex<Option<JoinHandle<()>>>,
}

impl QueryAtATime {
    pub fn open(db: Database) -> QueryAtATime {
        Self::with_sink(db, None)
    }

    pub fn with_sink(db: Database, sink: Option<Sender<ResultEnvelope>>) -> QueryAtATime {
        let shared = Arc::new(Shared {
            interp: Mutex::new(Interpreter::new(db)),
            state: Mutex::new(State {
                next: 1,
                ..State::default()
            }),
            ready: Condvar::new(),
            sink,
        });
        let (tx, rx) = unbounded::<Job>();
        let s = shared.clone();
        let worker = std::thread::Builder::new()
            .name("query-at-a-time".into())
            .spawn(move || {
                for job in rx {
                    let outcome = if s.state.lock().unwrap_or_else(|e| e.into_inner()).shut {
                        Outcome::Failed(Error::ShutDown)
                    } else {
                        s.interp
                            .lock()
                            .unwrap_or_else(|e| e.into_inner())
                            .execute(job.stmt, job.params, job.ts)
                            .unwrap_or_else(Outcome::Failed)
                    };
                    let env = ResultEnvelope {
                        qid: job.qid,
                        statement: job.stmt,
                        outcome,
                        arrival: job.ts,
                        admitted_at: job.admitted_at,
                        completed_at: Instant::now(),
                        cycle: 0,
                    };
                    match &s.sink {
                        Some(sink) => {
                            let _ = sink.send(env);
                        }
                        None => {
                            s.state.lock().unwrap_or_else(|e| e.into_inner()).results.insert(job.qid, env);
                            s.ready.notify_all();
                        }
                    }
                }
            })
            .expect("spawn executor thread");
        QueryAtATime {
            shared,
            queue: Mutex::new(Some(tx)),
            worker: Mutex::new(Some(worker)),
        }
    }

    pub fn counters(&self) -> Counters {
        self.shared.interp.lock().unwrap_or_else(|e| e.into_inner()).counters
    }
}

impl Executor for QueryAtATime {
    fn name(&self) -> &'static str {
        "query-at-a-time"
    }

    fn register(&self, sqls: &[&str]) -> Result<Vec<StatementId>> {
        self.shared.interp.lock().unwrap_or_else(|e| e.into_inner()).register(sqls)
    }

    fn admit(&self, stmt: StatementId, params: Vec<Value>) -> Result<Admission> {
        {
            let interp = self.shared.interp.lock().unwrap_or_else(|e| e.into_inner());
            bind_params(interp.statement(stmt)?, params.clone())?;
        }
        let mut st = self.shared.state.lock().unwrap_or_else(|e| e.into_inner());
        if st.shut {
            return Err(Error::ShutDown);
        }
        let queue = self.queue.lock().unwrap_or_else(|e| e.into_inner());
        let tx = queue.as_ref().ok_or(Error::ShutDown)?;
        let ts = st.next;
        st.next += 1;
        let qid = QueryId(ts);
        tx.send(Job {
            qid,
            stmt,
            params,
            ts,
            admitted_at: Instant::now(),
        })
        .map_err(|_| Error::ShutDown)?;
        Ok(Admission { qid, ts })
    }

    fn admit_sql(&self, sql: &str, params: Vec<Value>) -> Result<Admission> {
        let id = self.shared.interp.lock().unwrap_or_else(|e| e.into_inner()).prepare_sql(sql)?;
        self.admit(id, params)
    }

    fn poll(&self, qid: QueryId) -> Option<ResultEnvelope> {
        self.shared.state.lock().unwrap_or_else(|e| e.into_inner()).results.remove(&qid)
    }

    fn wait(&self, qid: QueryId, timeout: Duration) -> Option<ResultEnvelope> {
        let deadline = Instant::now() + timeout;
        let mut st = self.shared.state.lock().unwrap_or_else(|e| e.into_inner());
        loop {
            if let Some(env) = st.results.remove(&qid) {
                return Some(env);
            }
            let now = Instant::now();
            if now >= deadline {
                return None;
            }
            st = self.shared.ready.wait_timeout(st, deadline - now).unwrap_or_else(|e| e.into_inner()).0;
        }
    }

    fn table_rows(&self, table: &str) -> Result<Vec<Row>> {
        let interp = self.shared.interp.lock().unwrap_or_else(|e| e.into_inner());
        let t = interp
            .database()
            .table_by_name(table)
            .ok_or_else(|| Error::UnknownTable(table.to_string()))?;
        Ok(t.snapshot(OPEN - 1).into_iter().map(|(_, v)| v.to_vec()).collect())
    }

    fn counters(&self) -> Counters {
        QueryAtATime::counters(self)
    }

    fn shutdown(&self) {
        self.shared.state.lock().unwrap_or_else(|e| e.into_inner()).shut = true;
        self.queue.lock().unwrap_or_else(|e| e.into_inner()).take();
        if let Some(h) = self.worker.lock().unwrap_or_else(|e| e.into_inner()).take() {
            let _ = h.join();
        }
    }
}

impl Drop for QueryAtATime {
    fn drop(&mut self) {
        Executor::shutdown(self);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::Catalog;
    use crate::storage::fixtures::users_rows;

    fn users() -> Database {
        let c = Catalog::parse(
            "CREATE TABLE USERS (NAME VARCHAR PRIMARY KEY, ACCOUNT INT, BIRTHDATE DATE);
             CREATE INDEX ON USERS(ACCOUNT);",
        )
        .unwrap();
        let mut db = Database::new(c);
        db.insert_rows("USERS", users_rows()).unwrap();
        db
    }

    fn rows(o: Outcome) -> Vec<Row> {
        match o {
            Outcome::Rows(r) => r,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reads_respect_their_snapshot() {
        let mut i = Interpreter::new(users());
        let ids = i
            .register(&[
                "SELECT NAME FROM USERS WHERE ACCOUNT = ?",
                "UPDATE USERS SET ACCOUNT = ? WHERE NAME = ?",
            ])
            .unwrap();
        let w = i
            .execute(ids[1], vec![Value::Int(500), Value::str("Kate Johnson")], 2)
            .unwrap();
        assert_eq!(w, Outcome::Written(1));
        let now = rows(i.execute(ids[0], vec![Value::Int(500)], 3).unwrap());
        assert_eq!(now.len(), 2);
        let plan = i.statements[ids[0].0].1.clone().unwrap();
        let then = i.query(&plan, &[Value::Int(500)], 1).unwrap();
        assert_eq!(then, vec![vec![Value::str("Nick Lee")]]);
        assert_eq!(i.counters.lookups, 2);
    }

    #[test]
    fn aggregates_and_limits() {
        let mut i = Interpreter::new(users());
        let ids = i
            .register(&[
                "SELECT COUNT(*), SUM(ACCOUNT), AVG(ACCOUNT) FROM USERS WHERE ACCOUNT > ?",
                "SELECT NAME FROM USERS ORDER BY ACCOUNT DESC LIMIT ?",
            ])
            .unwrap();
        let agg = rows(i.execute(ids[0], vec![Value::Int(700)], 1).unwrap());
        assert_eq!(agg, vec![vec![Value::Int(4), Value::Int(10030), Value::Float(2507.5)]]);
        let top = rows(i.execute(ids[1], vec![Value::Int(2)], 2).unwrap());
        assert_eq!(top, vec![vec![Value::str("James Meyer")], vec![Value::str("John Smith")]]);
        assert!(i.execute(ids[1], vec![Value::Int(0)], 3).is_err());
    }

    #[test]
    fn query_at_a_time_runs_in_arrival_order() {
        let qat = QueryAtATime::open(users());
        let ids = qat
            .register(&[
                "SELECT NAME FROM USERS WHERE NAME = ?",
                "DELETE FROM USERS WHERE NAME = ?",
            ])
            .unwrap();
        let d = qat.admit(ids[1], vec![Value::str("Nick Lee")]).unwrap();
        let r = qat.admit(ids[0], vec![Value::str("Nick Lee")]).unwrap();
        assert!(d.ts < r.ts);
        let t = Duration::from_secs(10);
        assert_eq!(qat.wait(d.qid, t).unwrap().outcome, Outcome::Written(1));
        assert_eq!(qat.wait(r.qid, t).unwrap().outcome, Outcome::Rows(vec![]));
        assert_eq!(qat.table_rows("USERS").unwrap().len(), 4);
    }
}
