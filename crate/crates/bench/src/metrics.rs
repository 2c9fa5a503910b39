use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use anyhow::Context;
use batchdb::operators::Counters;
use serde::{Deserialize, Serialize};

/// One delivered (or never delivered) operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub statement: usize,
    /// `None` when no result arrived before the drain deadline.
    pub latency: Option<Duration>,
    pub ok: bool,
    /// Result arrived after the load phase ended.
    pub late: bool,
}

/// Per-statement row of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementMetrics {
    pub executor: String,
    pub seed: u64,
    pub statement: String,
    pub issued: u64,
    /// Results delivered during the load phase.
    pub completed: u64,
    /// Results delivered while draining after the load phase.
    pub in_flight_at_end: u64,
    /// No result by the drain deadline.
    pub timed_out: u64,
    pub failed: u64,
    /// Completed without error within the statement's limit.
    pub within_limit: u64,
    /// Completed without error but over the limit.
    pub violations: u64,
    /// `within_limit` per second of load.
    pub throughput: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    pub limit_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeCounters {
    pub tuples_in: u64,
    pub tuples_out: u64,
    pub tags: u64,
    pub probes: u64,
    pub builds: u64,
    pub comparisons: u64,
    pub groups: u64,
    pub touched: u64,
    pub lookups: u64,
    pub nanos: u64,
}

impl From<Counters> for NodeCounters {
    fn from(c: Counters) -> Self {
        NodeCounters {
            tuples_in: c.tuples_in,
            tuples_out: c.tuples_out,
            tags: c.tags,
            probes: c.probes,
            builds: c.builds,
            comparisons: c.comparisons,
            groups: c.groups,
            touched: c.touched,
            lookups: c.lookups,
            nanos: c.nanos,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub workload: String,
    pub executor: String,
    pub seed: u64,
    pub duration_s: f64,
    pub issued: u64,
    pub cycles: u64,
    pub mean_cycle_ms: f64,
    pub max_cycle_ms: f64,
    pub statements: Vec<StatementMetrics>,
    /// Work counters keyed by plan node name.
    pub nodes: BTreeMap<String, NodeCounters>,
    #[serde(skip)]
    pub samples: Vec<Sample>,
}

/// Nearest-rank percentile of sorted `xs`.
pub fn percentile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let rank = (p / 100.0 * xs.len() as f64).ceil() as usize;
    xs[rank.clamp(1, xs.len()) - 1]
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

impl MetricsReport {
    /// Summarizes `samples` per statement. `names` and `limits` are indexed
    /// by statement.
    pub fn from_samples(
        executor: &str,
        seed: u64,
        duration: Duration,
        names: &[String],
        limits: &[f64],
        samples: Vec<Sample>,
    ) -> MetricsReport {
        let secs = duration.as_secs_f64();
        let statements = names
            .iter()
            .enumerate()
            .map(|(s, name)| {
                let mine: Vec<&Sample> = samples.iter().filter(|x| x.statement == s).collect();
                let mut lat: Vec<f64> = mine.iter().filter_map(|x| x.latency.map(ms)).collect();
                lat.sort_by(f64::total_cmp);
                let count = |f: &dyn Fn(&Sample) -> bool| mine.iter().filter(|x| f(x)).count() as u64;
                let limit = limits[s];
                let completed = count(&|x| x.latency.is_some() && !x.late);
                let within = count(&|x| !x.late && x.ok && x.latency.is_some_and(|l| ms(l) <= limit));
                StatementMetrics {
                    executor: executor.to_string(),
                    seed,
                    statement: name.clone(),
                    issued: mine.len() as u64,
                    completed,
                    in_flight_at_end: count(&|x| x.latency.is_some() && x.late),
                    timed_out: count(&|x| x.latency.is_none()),
                    failed: count(&|x| x.latency.is_some() && !x.late && !x.ok),
                    within_limit: within,
                    violations: count(&|x| !x.late && x.ok && x.latency.is_some_and(|l| ms(l) > limit)),
                    throughput: if secs > 0.0 { within as f64 / secs } else { 0.0 },
                    p50_ms: percentile(&lat, 50.0),
                    p95_ms: percentile(&lat, 95.0),
                    p99_ms: percentile(&lat, 99.0),
                    max_ms: lat.last().copied().unwrap_or(0.0),
                    limit_ms: limit,
                }
            })
            .collect();
        MetricsReport {
            executor: executor.to_string(),
            seed,
            duration_s: secs,
            issued: samples.len() as u64,
            statements,
            samples,
            ..MetricsReport::default()
        }
    }

    pub fn statement(&self, name: &str) -> Option<&StatementMetrics> {
        self.statements.iter().find(|s| s.statement == name)
    }

    pub fn total_throughput(&self) -> f64 {
        self.statements.iter().map(|s| s.throughput).sum()
    }

    pub fn write_csv(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        for s in &self.statements {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> anyhow::Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            workload: &'a str,
            executor: &'a str,
            seed: u64,
            duration_s: f64,
            issued: u64,
            cycles: u64,
            mean_cycle_ms: f64,
            max_cycle_ms: f64,
            nodes: &'a BTreeMap<String, NodeCounters>,
        }
        Ok(toml::to_string(&Summary {
            workload: &self.workload,
            executor: &self.executor,
            seed: self.seed,
            duration_s: self.duration_s,
            issued: self.issued,
            cycles: self.cycles,
            mean_cycle_ms: self.mean_cycle_ms,
            max_cycle_ms: self.max_cycle_ms,
            nodes: &self.nodes,
        })?)
    }

    /// Writes `metrics.csv` and `summary.toml` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(&dir.join("metrics.csv"))?;
        std::fs::write(dir.join("summary.toml"), self.summary()?)?;
        Ok(())
    }
}

pub fn read_csv(path: &Path) -> anyhow::Result<Vec<StatementMetrics>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = r.deserialize().collect::<Result<Vec<StatementMetrics>, _>>()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(statement: usize, ms: Option<u64>, ok: bool, late: bool) -> Sample {
        Sample {
            statement,
            latency: ms.map(Duration::from_millis),
            ok,
            late,
        }
    }

    #[test]
    fn percentiles_are_nearest_rank_and_monotone() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&xs, 50.0), 50.0);
        assert_eq!(percentile(&xs, 99.0), 99.0);
        assert_eq!(percentile(&xs, 100.0), 100.0);
        assert_eq!(percentile(&[7.0], 1.0), 7.0);
        assert_eq!(percentile(&[], 50.0), 0.0);
    }

    #[test]
    fn conserves_issued_operations() {
        let samples = vec![
            sample(0, Some(5), true, false),
            sample(0, Some(50), true, false),
            sample(0, Some(5), false, false),
            sample(0, Some(5), true, true),
            sample(0, None, false, false),
            sample(1, Some(1), true, false),
        ];
        let r = MetricsReport::from_samples(
            "shared",
            1,
            Duration::from_secs(2),
            &["a".into(), "b".into()],
            &[10.0, 10.0],
            samples,
        );
        let a = &r.statements[0];
        assert_eq!(a.issued, 5);
        assert_eq!(a.completed + a.in_flight_at_end + a.timed_out, a.issued);
        assert_eq!((a.completed, a.in_flight_at_end, a.timed_out), (3, 1, 1));
        assert_eq!((a.failed, a.within_limit, a.violations), (1, 1, 1));
        assert!(a.within_limit <= a.issued);
        assert_eq!(a.throughput, 0.5);
        assert!(a.p50_ms <= a.p95_ms && a.p95_ms <= a.p99_ms && a.p99_ms <= a.max_ms);
        assert_eq!(r.issued, 6);
        assert_eq!(r.statements.iter().map(|s| s.issued).sum::<u64>(), r.issued);
    }

    #[test]
    fn empty_run_gives_empty_report() {
        let r = MetricsReport::from_samples("shared", 1, Duration::ZERO, &["a".into()], &[1.0], vec![]);
        assert_eq!(r.issued, 0);
        assert_eq!(r.statements[0].throughput, 0.0);
        assert_eq!(r.statements[0].max_ms, 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = MetricsReport::from_samples(
            "shared",
            3,
            Duration::from_secs(1),
            &["a".into()],
            &[10.0],
            vec![sample(0, Some(2), true, false)],
        );
        r.write_dir(dir.path()).unwrap();
        assert_eq!(read_csv(&dir.path().join("metrics.csv")).unwrap(), r.statements);
        let summary = std::fs::read_to_string(dir.path().join("summary.toml")).unwrap();
        assert!(summary.contains("executor = \"shared\""));
    }
}
