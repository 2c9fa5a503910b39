use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use batchdb::datamodel::QueryId;
use batchdb::operators::Counters;
use batchdb::runtime::{Engine, EngineConfig, Executor, QueryAtATime, ResultEnvelope};
use batchdb::storage::Database;
use crossbeam_channel::{unbounded, Sender};
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::config::{ExecutorKind, ThinkKind, WorkloadConfig};
use crate::datagen::{generate, Scale};
use crate::metrics::{MetricsReport, Sample};
use crate::workload::OpStream;

pub enum Exec {
    Shared(Engine),
    Baseline(QueryAtATime),
}

impl Exec {
    pub fn open(kind: ExecutorKind, cfg: &WorkloadConfig, db: Database, sink: Option<Sender<ResultEnvelope>>) -> anyhow::Result<Exec> {
        Ok(match kind {
            ExecutorKind::Shared => {
                let mut ec = EngineConfig::auto(Duration::from_secs_f64(cfg.idle_ms / 1e3));
                ec.workers = cfg.workers;
                ec.max_batch = cfg.max_batch;
                ec.completion_sink = sink;
                Exec::Shared(Engine::open(db, ec)?)
            }
            ExecutorKind::QueryAtATime => Exec::Baseline(QueryAtATime::with_sink(db, sink)),
        })
    }

    pub fn executor(&self) -> &dyn Executor {
        match self {
            Exec::Shared(e) => e,
            Exec::Baseline(q) => q,
        }
    }

    pub fn counters(&self) -> Counters {
        self.executor().counters()
    }

    fn fill(&self, report: &mut MetricsReport) {
        match self {
            Exec::Shared(e) => {
                let m = e.metrics();
                report.cycles = m.cycles;
                report.mean_cycle_ms = m.mean_cycle().as_secs_f64() * 1e3;
                report.max_cycle_ms = m.max_cycle.as_secs_f64() * 1e3;
                report.nodes = m.nodes.into_iter().map(|(k, c)| (k, c.into())).collect();
            }
            Exec::Baseline(q) => {
                report.nodes.insert("query-at-a-time".into(), q.counters().into());
            }
        }
    }
}

pub fn load_database(cfg: &WorkloadConfig) -> anyhow::Result<Database> {
    match (&cfg.catalog, &cfg.data_dir) {
        (Some(c), Some(d)) => Database::open(c, d).with_context(|| format!("loading {}", d.display())),
        _ => Ok(generate(Scale::users(cfg.scale.unwrap_or(1000)), cfg.seed)),
    }
}

/// Loads the configured data and runs the workload.
pub fn run(cfg: &WorkloadConfig) -> anyhow::Result<MetricsReport> {
    run_on(cfg, load_database(cfg)?)
}

fn drain_time(cfg: &WorkloadConfig) -> Duration {
    let longest = cfg.statements.iter().map(|s| s.limit_ms).fold(0.0, f64::max);
    Duration::from_secs_f64((longest / 1e3).clamp(0.5, 30.0))
}

/// Offers the configured load to `db` for `duration_s`, then waits up to the
/// longest response-time limit for stragglers.
pub fn run_on(cfg: &WorkloadConfig, db: Database) -> anyhow::Result<MetricsReport> {
    cfg.validate()?;
    let open_loop = cfg.rate.is_some();
    let (tx, rx) = unbounded();
    let exec = Exec::open(cfg.executor, cfg, db, open_loop.then_some(tx))?;
    let ids = exec.executor().register(&cfg.statement_sqls())?;
    let duration = Duration::from_secs_f64(cfg.duration_s);
    let drain = drain_time(cfg);
    let start = Instant::now();
    let end = start + duration;
    let deadline = end + drain;

    let samples = if duration.is_zero() {
        Vec::new()
    } else if let Some(rate) = cfg.rate {
        let received = AtomicUsize::new(0);
        let stop = AtomicBool::new(false);
        std::thread::scope(|sc| -> anyhow::Result<Vec<Sample>> {
            let collector = sc.spawn(|| {
                let mut got: HashMap<QueryId, ResultEnvelope> = HashMap::new();
                while !stop.load(Ordering::Acquire) {
                    if let Ok(env) = rx.recv_timeout(Duration::from_millis(20)) {
                        got.insert(env.qid, env);
                        received.fetch_add(1, Ordering::Release);
                    }
                }
                got
            });
            let mut stream = OpStream::new(cfg, 0, 1);
            let gap = Exp::new(rate).expect("positive rate");
            let mut issued: Vec<(usize, Option<QueryId>)> = Vec::new();
            let mut at = start;
            while at < end {
                let now = Instant::now();
                if at > now {
                    std::thread::sleep(at - now);
                }
                let (s, params) = stream.next_op();
                let qid = exec.executor().admit(ids[s], params).ok().map(|a| a.qid);
                issued.push((s, qid));
                at += match cfg.think.kind {
                    ThinkKind::Exponential => Duration::from_secs_f64(gap.sample(stream.rng())),
                    ThinkKind::Fixed => Duration::from_secs_f64(1.0 / rate),
                };
            }
            let admitted = issued.iter().filter(|(_, q)| q.is_some()).count();
            while received.load(Ordering::Acquire) < admitted && Instant::now() < deadline {
                std::thread::sleep(Duration::from_millis(5));
            }
            stop.store(true, Ordering::Release);
            let mut got = collector.join().expect("collector thread");
            Ok(issued
                .into_iter()
                .map(|(s, q)| match q.and_then(|q| got.remove(&q)) {
                    Some(env) => envelope_sample(s, &env, end),
                    None if q.is_none() => rejected(s),
                    None => missing(s),
                })
                .collect())
        })?
    } else {
        let clients = cfg.clients.expect("validated");
        std::thread::scope(|sc| {
            let handles: Vec<_> = (0..clients)
                .map(|k| {
                    let exec = &exec;
                    let ids = &ids;
                    sc.spawn(move || client(cfg, exec.executor(), ids, k as u64, clients as u64, end, deadline))
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("client thread")).collect()
        })
    };

    let names: Vec<String> = cfg.statements.iter().map(|s| s.name.clone()).collect();
    let limits: Vec<f64> = cfg.statements.iter().map(|s| s.limit_ms).collect();
    let mut report = MetricsReport::from_samples(cfg.executor.name(), cfg.seed, duration, &names, &limits, samples);
    report.workload = cfg.name.clone();
    exec.fill(&mut report);
    exec.executor().shutdown();
    Ok(report)
}

fn envelope_sample(statement: usize, env: &ResultEnvelope, end: Instant) -> Sample {
    Sample {
        statement,
        latency: Some(env.latency()),
        ok: env.is_ok(),
        late: env.completed_at > end,
    }
}

fn rejected(statement: usize) -> Sample {
    Sample {
        statement,
        latency: Some(Duration::ZERO),
        ok: false,
        late: false,
    }
}

fn missing(statement: usize) -> Sample {
    Sample {
        statement,
        latency: None,
        ok: false,
        late: false,
    }
}

fn client(
    cfg: &WorkloadConfig,
    exec: &dyn Executor,
    ids: &[batchdb::frontend::StatementId],
    k: u64,
    clients: u64,
    end: Instant,
    deadline: Instant,
) -> Vec<Sample> {
    let mut stream = OpStream::new(cfg, k, clients);
    let think = match cfg.think.kind {
        ThinkKind::Exponential if cfg.think.mean_ms > 0.0 => Some(Exp::new(1e3 / cfg.think.mean_ms).expect("positive")),
        _ => None,
    };
    let mut out = Vec::new();
    while Instant::now() < end {
        let (s, params) = stream.next_op();
        match exec.admit(ids[s], params) {
            Err(_) => out.push(rejected(s)),
            Ok(a) => match exec.wait(a.qid, deadline.saturating_duration_since(Instant::now())) {
                Some(env) => out.push(envelope_sample(s, &env, end)),
                None => {
                    out.push(missing(s));
                    break;
                }
            },
        }
        let pause = match &think {
            Some(d) => Duration::from_secs_f64(d.sample(stream.rng())),
            None => Duration::from_secs_f64(cfg.think.mean_ms / 1e3),
        };
        let left = end.saturating_duration_since(Instant::now());
        std::thread::sleep(pause.min(left));
    }
    out
}

/// Time to complete a batch of `k` instances of one statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub executor: String,
    pub seed: u64,
    pub statement: String,
    pub k: u64,
    pub seconds: f64,
    /// Probes, builds, comparisons, touched rows and groups spent on the batch.
    pub work: u64,
}

fn work(c: Counters) -> u64 {
    c.probes + c.builds + c.comparisons + c.touched + c.groups
}

/// Submits batches of `k` instances of `statement` for every `k`, one batch
/// at a time, and measures each batch's completion time.
pub fn sweep(cfg: &WorkloadConfig, kind: ExecutorKind, statement: &str, ks: &[u64], db: Database) -> anyhow::Result<Vec<SweepPoint>> {
    let Some(s) = cfg.statements.iter().position(|x| x.name == statement) else {
        bail!("no statement named {statement}");
    };
    let exec = match kind {
        ExecutorKind::Shared => Exec::Shared(Engine::open(db, EngineConfig::manual().with_workers(cfg.workers.unwrap_or(1)))?),
        ExecutorKind::QueryAtATime => Exec::Baseline(QueryAtATime::open(db)),
    };
    let ids = exec.executor().register(&cfg.statement_sqls())?;
    let mut stream = OpStream::new(cfg, 0, 1);
    let mut out = Vec::new();
    for &k in ks {
        let before = exec.counters();
        let t = Instant::now();
        let mut qids = Vec::new();
        for _ in 0..k {
            let params = stream.params_for(s);
            qids.push(exec.executor().admit(ids[s], params)?.qid);
        }
        if let Exec::Shared(e) = &exec {
            e.drain()?;
        }
        for q in qids {
            match exec.executor().wait(q, Duration::from_secs(600)) {
                Some(env) if env.is_ok() => {}
                Some(env) => bail!("{statement} failed: {:?}", env.outcome),
                None => bail!("{statement} did not complete"),
            }
        }
        let seconds = t.elapsed().as_secs_f64();
        let after = exec.counters();
        out.push(SweepPoint {
            executor: kind.name().into(),
            seed: cfg.seed,
            statement: statement.into(),
            k,
            seconds,
            work: work(after) - work(before),
        });
    }
    exec.executor().shutdown();
    Ok(out)
}

pub fn write_sweep(points: &[SweepPoint], path: &std::path::Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
