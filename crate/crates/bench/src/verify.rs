//! Oracle gate: every admitted operation runs through the shared engine
//! and through the interpreter at the same arrival timestamp, and the two
//! outcomes must agree.

use std::fmt;
use std::time::Duration;

use anyhow::Context;
use batchdb::datamodel::{QueryId, Value};
use batchdb::frontend::{PreparedStatement, StatementId};
use batchdb::runtime::{Engine, EngineConfig, FaultConfig, Interpreter, Outcome};
use batchdb::storage::{Database, OPEN};
use rand::Rng;

use crate::config::WorkloadConfig;
use crate::datagen::{generate, Scale};
use crate::workload::OpStream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyOptions {
    pub ops: usize,
    pub max_batch: usize,
    pub seeds: Vec<u64>,
    /// Runs the engine with the join's query-set intersection disabled.
    pub fault: bool,
}

impl VerifyOptions {
    pub fn from_config(cfg: &WorkloadConfig) -> VerifyOptions {
        VerifyOptions {
            ops: cfg.verify.ops,
            max_batch: cfg.verify.max_batch,
            seeds: (cfg.seed..cfg.seed + cfg.verify.seeds).collect(),
            fault: false,
        }
    }
}

/// The first disagreement, reduced to the smallest batch that still shows
/// it.
#[derive(Debug, Clone)]
pub struct Repro {
    pub seed: u64,
    pub cycle: u64,
    pub qid: QueryId,
    pub statement: String,
    pub sql: String,
    pub params: Vec<Value>,
    pub expected: Outcome,
    pub got: Outcome,
    /// Operations of the reduced batch in arrival order, the failing one
    /// included; they run after every earlier batch of the seed.
    pub batch: Vec<(String, Vec<Value>)>,
    pub minimized: bool,
}

impl fmt::Display for Repro {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mismatch: seed {} cycle {} {}", self.seed, self.cycle, self.qid)?;
        writeln!(f, "  statement {}: {}", self.statement, self.sql)?;
        writeln!(f, "  params {:?}", self.params)?;
        writeln!(f, "  expected {:?}", self.expected)?;
        writeln!(f, "  got      {:?}", self.got)?;
        let how = if self.minimized { "minimized" } else { "full" };
        writeln!(f, "  {how} batch ({} ops):", self.batch.len())?;
        for (s, p) in &self.batch {
            writeln!(f, "    {s} {p:?}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checked: u64,
    pub cycles: u64,
    pub seeds: usize,
    pub repro: Option<Repro>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.repro.is_none()
    }
}

/// Rows compare in order under ORDER BY and as multisets otherwise; any two
/// failures agree.
pub fn agrees(p: &PreparedStatement, expected: &Outcome, got: &Outcome) -> bool {
    match (expected, got) {
        (Outcome::Rows(a), Outcome::Rows(b)) if p.has_order() => a == b,
        (Outcome::Rows(a), Outcome::Rows(b)) => {
            let (mut a, mut b) = (a.clone(), b.clone());
            a.sort();
            b.sort();
            a == b
        }
        (Outcome::Written(a), Outcome::Written(b)) => a == b,
        (Outcome::Failed(_), Outcome::Failed(_)) => true,
        _ => false,
    }
}

pub fn database_for(cfg: &WorkloadConfig, seed: u64) -> anyhow::Result<Database> {
    match (&cfg.catalog, &cfg.data_dir) {
        (Some(c), Some(d)) => Database::open(c, d).with_context(|| format!("loading {}", d.display())),
        _ => Ok(generate(Scale::users(cfg.scale.unwrap_or(1000)), seed)),
    }
}

fn engine_config(opts: &VerifyOptions) -> EngineConfig {
    EngineConfig::manual()
        .with_max_batch(opts.max_batch)
        .with_fault(FaultConfig {
            skip_join_intersection: opts.fault,
        })
}

const WAIT: Duration = Duration::from_secs(600);

type Op = (usize, Vec<Value>);

pub fn verify(cfg: &WorkloadConfig, opts: &VerifyOptions) -> anyhow::Result<VerifyReport> {
    let sqls = cfg.statement_sqls();
    let mut report = VerifyReport::default();
    for &seed in &opts.seeds {
        report.seeds += 1;
        let engine = Engine::open(database_for(cfg, seed)?, engine_config(opts))?;
        let ids = engine.register(&sqls)?;
        let mut interp = Interpreter::new(database_for(cfg, seed)?);
        interp.register(&sqls)?;
        let mut seeded = cfg.clone();
        seeded.seed = seed;
        let mut stream = OpStream::new(&seeded, 0, 1);
        let mut history: Vec<Op> = Vec::new();
        while history.len() < opts.ops {
            let n = stream.rng().random_range(1..=opts.max_batch).min(opts.ops - history.len());
            let batch: Vec<Op> = (0..n).map(|_| stream.next_op()).collect();
            let admitted = batch
                .iter()
                .map(|(s, p)| engine.admit(ids[*s], p.clone()))
                .collect::<Result<Vec<_>, _>>()?;
            engine.run_cycle()?;
            report.cycles += 1;
            for (i, ((s, params), a)) in batch.iter().zip(&admitted).enumerate() {
                let expected = interp.execute(ids[*s], params.clone(), a.ts).unwrap_or_else(Outcome::Failed);
                let got = engine
                    .wait(a.qid, WAIT)
                    .map(|e| e.outcome)
                    .unwrap_or(Outcome::Failed(batchdb::Error::ShutDown));
                report.checked += 1;
                if !agrees(interp.statement(ids[*s])?, &expected, &got) {
                    let (batch, minimized) = minimize(cfg, seed, opts, &ids, &history, &batch, i)?;
                    report.repro = Some(Repro {
                        seed,
                        cycle: report.cycles,
                        qid: a.qid,
                        statement: cfg.statements[*s].name.clone(),
                        sql: cfg.statements[*s].sql.clone(),
                        params: params.clone(),
                        expected,
                        got,
                        batch: batch
                            .into_iter()
                            .map(|(s, p)| (cfg.statements[s].name.clone(), p))
                            .collect(),
                        minimized,
                    });
                    return Ok(report);
                }
            }
            history.extend(batch);
        }
    }
    Ok(report)
}

/// Rebuilds the state every earlier batch left behind as freshly loaded
/// tables.
fn state_after(cfg: &WorkloadConfig, seed: u64, ids: &[StatementId], history: &[Op]) -> anyhow::Result<impl Fn() -> Database> {
    let mut interp = Interpreter::new(database_for(cfg, seed)?);
    interp.register(&cfg.statement_sqls())?;
    for (ts, (s, p)) in history.iter().enumerate() {
        let _ = interp.execute(ids[*s], p.clone(), ts as u64 + 1);
    }
    let db = interp.database();
    let catalog = db.catalog().clone();
    let rows: Vec<(String, Vec<Vec<Value>>)> = db
        .tables()
        .iter()
        .map(|t| {
            let rows = t.snapshot(OPEN - 1).into_iter().map(|(_, v)| v.to_vec()).collect();
            (t.name().to_string(), rows)
        })
        .collect();
    Ok(move || {
        let mut db = Database::new(catalog.clone());
        for (t, r) in &rows {
            db.insert_rows(t, r.clone()).expect("rows came from this schema");
        }
        db
    })
}

fn reproduces(
    cfg: &WorkloadConfig,
    opts: &VerifyOptions,
    fresh: &dyn Fn() -> Database,
    batch: &[Op],
    keep: &[usize],
    target: usize,
) -> anyhow::Result<bool> {
    let sqls = cfg.statement_sqls();
    let engine = Engine::open(fresh(), engine_config(opts))?;
    let ids = engine.register(&sqls)?;
    let mut interp = Interpreter::new(fresh());
    interp.register(&sqls)?;
    let mut admitted = Vec::new();
    for &i in keep {
        let (s, p) = &batch[i];
        admitted.push((i, engine.admit(ids[*s], p.clone())?));
    }
    engine.run_cycle()?;
    for (i, a) in admitted {
        let (s, p) = &batch[i];
        let expected = interp.execute(ids[*s], p.clone(), a.ts).unwrap_or_else(Outcome::Failed);
        if i == target {
            let got = engine
                .wait(a.qid, WAIT)
                .map(|e| e.outcome)
                .unwrap_or(Outcome::Failed(batchdb::Error::ShutDown));
            return Ok(!agrees(interp.statement(ids[*s])?, &expected, &got));
        }
    }
    Ok(false)
}

/// Greedily drops companions of the failing operation while the mismatch
/// persists. Returns the full batch unreduced if it does not reproduce on
/// reloaded state.
fn minimize(
    cfg: &WorkloadConfig,
    seed: u64,
    opts: &VerifyOptions,
    ids: &[StatementId],
    history: &[Op],
    batch: &[Op],
    target: usize,
) -> anyhow::Result<(Vec<Op>, bool)> {
    let fresh = state_after(cfg, seed, ids, history)?;
    let mut keep: Vec<usize> = (0..batch.len()).collect();
    if !reproduces(cfg, opts, &fresh, batch, &keep, target)? {
        return Ok((batch.to_vec(), false));
    }
    let mut i = keep.len();
    while i > 0 {
        i -= 1;
        if keep[i] == target {
            continue;
        }
        let mut trial = keep.clone();
        trial.remove(i);
        if reproduces(cfg, opts, &fresh, batch, &trial, target)? {
            keep = trial;
        }
    }
    Ok((keep.into_iter().map(|i| batch[i].clone()).collect(), true))
}
