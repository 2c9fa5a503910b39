//! Side-by-side comparison of two runs of the same workload.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use thiserror::Error;

use crate::driver::SweepPoint;
use crate::metrics::{read_csv, StatementMetrics};

#[derive(Debug, Error, PartialEq)]
#[error("reports are not comparable: {0}")]
pub struct Mismatch(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct StatementDelta {
    pub statement: String,
    pub throughput: (f64, f64),
    pub p50_ms: (f64, f64),
    pub p99_ms: (f64, f64),
    pub violations: (u64, u64),
}

impl StatementDelta {
    pub fn throughput_delta(&self) -> f64 {
        self.throughput.1 - self.throughput.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub labels: (String, String),
    pub rows: Vec<StatementDelta>,
}

impl Comparison {
    pub fn violations(&self) -> (u64, u64) {
        self.rows
            .iter()
            .fold((0, 0), |(a, b), r| (a + r.violations.0, b + r.violations.1))
    }

    pub fn render(&self) -> String {
        let (la, lb) = &self.labels;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<20} {:>12} {:>12} {:>10} {:>9} {:>9} {:>9} {:>9} {:>7} {:>7}",
            "statement", "ops/s A", "ops/s B", "delta", "p50 A", "p50 B", "p99 A", "p99 B", "viol A", "viol B"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<20} {:>12.1} {:>12.1} {:>+10.1} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>7} {:>7}",
                r.statement,
                r.throughput.0,
                r.throughput.1,
                r.throughput_delta(),
                r.p50_ms.0,
                r.p50_ms.1,
                r.p99_ms.0,
                r.p99_ms.1,
                r.violations.0,
                r.violations.1
            );
        }
        let (va, vb) = self.violations();
        let _ = writeln!(s, "A = {la}, B = {lb}; limit violations: A {va}, B {vb}");
        s
    }
}

pub fn compare_reports(a: &[StatementMetrics], b: &[StatementMetrics]) -> Result<Comparison, Mismatch> {
    let seed = |rs: &[StatementMetrics]| rs.first().map(|r| r.seed);
    if seed(a) != seed(b) {
        return Err(Mismatch(format!("seeds differ: {:?} vs {:?}", seed(a), seed(b))));
    }
    let names = |rs: &[StatementMetrics]| rs.iter().map(|r| r.statement.clone()).collect::<Vec<_>>();
    if names(a) != names(b) {
        return Err(Mismatch(format!("statements differ: {:?} vs {:?}", names(a), names(b))));
    }
    let label = |rs: &[StatementMetrics]| rs.first().map_or(String::new(), |r| r.executor.clone());
    let rows = a
        .iter()
        .zip(b)
        .map(|(x, y)| StatementDelta {
            statement: x.statement.clone(),
            throughput: (x.throughput, y.throughput),
            p50_ms: (x.p50_ms, y.p50_ms),
            p99_ms: (x.p99_ms, y.p99_ms),
            violations: (x.violations, y.violations),
        })
        .collect();
    Ok(Comparison {
        labels: (label(a), label(b)),
        rows,
    })
}

/// Paired batch times per `k`, and the first `k` at which the faster side
/// changes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepComparison {
    pub labels: (String, String),
    pub points: Vec<(u64, f64, f64)>,
    pub crossover: Option<u64>,
}

impl SweepComparison {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>6} {:>12} {:>12} {:>8}", "k", "A s", "B s", "B/A");
        for (k, a, b) in &self.points {
            let _ = writeln!(s, "{k:>6} {a:>12.4} {b:>12.4} {:>8.2}", b / a);
        }
        let _ = match self.crossover {
            Some(k) => writeln!(s, "A = {}, B = {}; crossover at k = {k}", self.labels.0, self.labels.1),
            None => writeln!(s, "A = {}, B = {}; no crossover", self.labels.0, self.labels.1),
        };
        s
    }
}

pub fn compare_sweeps(a: &[SweepPoint], b: &[SweepPoint]) -> Result<SweepComparison, Mismatch> {
    let by_k = |ps: &[SweepPoint]| ps.iter().map(|p| (p.k, p.seconds)).collect::<BTreeMap<u64, f64>>();
    let (ma, mb) = (by_k(a), by_k(b));
    if ma.keys().ne(mb.keys()) {
        return Err(Mismatch("sweeps cover different k".into()));
    }
    let shape = |ps: &[SweepPoint]| ps.first().map(|p| (p.seed, p.statement.clone()));
    if shape(a) != shape(b) {
        return Err(Mismatch(format!("sweeps differ in seed or statement: {:?} vs {:?}", shape(a), shape(b))));
    }
    let points: Vec<(u64, f64, f64)> = ma.iter().map(|(&k, &x)| (k, x, mb[&k])).collect();
    let faster_a = |&(_, x, y): &(u64, f64, f64)| x < y;
    let crossover = points
        .first()
        .and_then(|p0| points.iter().find(|p| faster_a(p) != faster_a(p0)).map(|p| p.0));
    let label = |ps: &[SweepPoint]| ps.first().map_or(String::new(), |p| p.executor.clone());
    Ok(SweepComparison {
        labels: (label(a), label(b)),
        points,
        crossover,
    })
}

fn is_sweep(path: &Path) -> anyhow::Result<bool> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(r.headers()?.iter().any(|h| h == "k"))
}

fn read_sweep(path: &Path) -> anyhow::Result<Vec<SweepPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<SweepPoint>, _>>()?)
}

/// Compares two metrics or two sweep CSVs and renders the table.
pub fn compare_files(a: &Path, b: &Path) -> anyhow::Result<String> {
    match (is_sweep(a)?, is_sweep(b)?) {
        (true, true) => Ok(compare_sweeps(&read_sweep(a)?, &read_sweep(b)?)?.render()),
        (false, false) => Ok(compare_reports(&read_csv(a)?, &read_csv(b)?)?.render()),
        _ => Err(Mismatch("one file is a sweep and the other is not".into()).into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(executor: &str, statement: &str, throughput: f64, violations: u64) -> StatementMetrics {
        StatementMetrics {
            executor: executor.into(),
            seed: 1,
            statement: statement.into(),
            issued: 10,
            completed: 10,
            in_flight_at_end: 0,
            timed_out: 0,
            failed: 0,
            within_limit: 10 - violations,
            violations,
            throughput,
            p50_ms: 1.0,
            p95_ms: 2.0,
            p99_ms: 3.0,
            max_ms: 4.0,
            limit_ms: 10.0,
        }
    }

    fn point(executor: &str, k: u64, seconds: f64) -> SweepPoint {
        SweepPoint {
            executor: executor.into(),
            seed: 1,
            statement: "heavy".into(),
            k,
            seconds,
            work: 0,
        }
    }

    #[test]
    fn identical_reports_have_zero_deltas() {
        let a = vec![row("shared", "x", 5.0, 0), row("shared", "y", 7.0, 0)];
        let c = compare_reports(&a, &a).unwrap();
        assert!(c.rows.iter().all(|r| r.throughput_delta() == 0.0));
        assert_eq!(c.violations(), (0, 0));
    }

    #[test]
    fn violations_are_listed() {
        let a = vec![row("shared", "x", 5.0, 0)];
        let b = vec![row("query-at-a-time", "x", 3.0, 4)];
        let c = compare_reports(&a, &b).unwrap();
        assert_eq!(c.violations(), (0, 4));
        assert!(c.render().contains("B 4"));
    }

    #[test]
    fn mismatched_workloads_are_rejected() {
        let a = vec![row("shared", "x", 5.0, 0)];
        let b = vec![row("shared", "z", 5.0, 0)];
        assert!(compare_reports(&a, &b).is_err());
        let mut c = a.clone();
        c[0].seed = 2;
        assert!(compare_reports(&a, &c).is_err());
    }

    #[test]
    fn crossover_is_the_first_flip() {
        let shared: Vec<_> = [(1, 0.010), (2, 0.011), (4, 0.012), (8, 0.013)]
            .iter()
            .map(|&(k, s)| point("shared", k, s))
            .collect();
        let base: Vec<_> = [(1, 0.004), (2, 0.008), (4, 0.016), (8, 0.032)]
            .iter()
            .map(|&(k, s)| point("query-at-a-time", k, s))
            .collect();
        let c = compare_sweeps(&shared, &base).unwrap();
        assert_eq!(c.crossover, Some(4));
        assert!(compare_sweeps(&shared, &shared).unwrap().crossover.is_none());
        assert!(compare_sweeps(&shared, &base[..2]).is_err());
    }
}
