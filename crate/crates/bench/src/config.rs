use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::workload::ParamGen;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid workload: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutorKind {
    #[default]
    Shared,
    QueryAtATime,
}

impl ExecutorKind {
    pub fn name(self) -> &'static str {
        match self {
            ExecutorKind::Shared => "shared",
            ExecutorKind::QueryAtATime => "query-at-a-time",
        }
    }
}

impl std::str::FromStr for ExecutorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shared" => Ok(ExecutorKind::Shared),
            "query-at-a-time" => Ok(ExecutorKind::QueryAtATime),
            _ => Err(format!("unknown executor {s}; expected shared or query-at-a-time")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThinkKind {
    #[default]
    Fixed,
    Exponential,
}

/// Pause between a client's operations, or between open-loop arrivals
/// when `kind` is exponential.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Think {
    #[serde(default)]
    pub kind: ThinkKind,
    #[serde(default)]
    pub mean_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatementConfig {
    pub name: String,
    pub sql: String,
    pub weight: f64,
    #[serde(default)]
    pub params: Vec<ParamGen>,
    /// Response-time limit for counting an operation as successful.
    #[serde(default = "default_limit")]
    pub limit_ms: f64,
}

fn default_limit() -> f64 {
    1000.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_ops")]
    pub ops: usize,
    #[serde(default = "default_verify_batch")]
    pub max_batch: usize,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
}

fn default_ops() -> usize {
    2000
}

fn default_verify_batch() -> usize {
    256
}

fn default_seeds() -> u64 {
    10
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            ops: default_ops(),
            max_batch: default_verify_batch(),
            seeds: default_seeds(),
        }
    }
}

fn default_idle() -> f64 {
    1.0
}

/// A benchmark workload: the data to load, the statements and their mix,
/// and how load is offered.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    #[serde(default)]
    pub name: String,
    /// Catalog file (CREATE TABLE / CREATE INDEX statements). Without it the
    /// bookstore schema is generated at `scale` users.
    pub catalog: Option<PathBuf>,
    /// Directory with one `<TABLE>.csv` per table.
    pub data_dir: Option<PathBuf>,
    pub scale: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub executor: ExecutorKind,
    pub duration_s: f64,
    /// Closed loop: number of clients, each waiting for its result.
    pub clients: Option<usize>,
    /// Open loop: operations per second regardless of completions.
    pub rate: Option<f64>,
    #[serde(default)]
    pub think: Think,
    /// Heartbeat wait when nothing is pending.
    #[serde(default = "default_idle")]
    pub idle_ms: f64,
    pub workers: Option<usize>,
    pub max_batch: Option<usize>,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(rename = "statement", default)]
    pub statements: Vec<StatementConfig>,
}

impl WorkloadConfig {
    /// Reads a config file; relative paths inside resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<WorkloadConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::parse(&text)?;
        for p in [&mut cfg.catalog, &mut cfg.data_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<WorkloadConfig, ConfigError> {
        let cfg: WorkloadConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.statements.is_empty() {
            return bad("no statements".into());
        }
        let total: f64 = self.statements.iter().map(|s| s.weight).sum();
        if (total - 1.0).abs() > 1e-6 {
            return bad(format!("statement weights sum to {total}, not 1"));
        }
        for s in &self.statements {
            if !(s.weight >= 0.0) {
                return bad(format!("{}: negative weight", s.name));
            }
            if !(s.limit_ms > 0.0) {
                return bad(format!("{}: limit_ms must be positive", s.name));
            }
            for p in &s.params {
                p.validate().map_err(|m| ConfigError::Invalid(format!("{}: {m}", s.name)))?;
            }
        }
        let mut names: Vec<&str> = self.statements.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("statement names must be unique".into());
        }
        if !(self.duration_s >= 0.0) {
            return bad("duration_s must be non-negative".into());
        }
        match (self.clients, self.rate) {
            (Some(0), _) => return bad("clients must be positive".into()),
            (_, Some(r)) if !(r > 0.0) => return bad("rate must be positive".into()),
            (Some(_), Some(_)) => return bad("set either clients or rate, not both".into()),
            (None, None) => return bad("set clients (closed loop) or rate (open loop)".into()),
            _ => {}
        }
        if !(self.think.mean_ms >= 0.0) {
            return bad("think.mean_ms must be non-negative".into());
        }
        if self.catalog.is_some() != self.data_dir.is_some() {
            return bad("catalog and data_dir go together".into());
        }
        if self.catalog.is_none() && self.scale.is_none() {
            return bad("set scale, or catalog and data_dir".into());
        }
        if self.max_batch == Some(0) || self.workers == Some(0) {
            return bad("max_batch and workers must be positive".into());
        }
        if self.verify.max_batch == 0 || self.verify.max_batch > 256 || self.verify.seeds == 0 {
            return bad("verify needs 1..=256 queries per batch and at least one seed".into());
        }
        Ok(())
    }

    pub fn statement_sqls(&self) -> Vec<&str> {
        self.statements.iter().map(|s| s.sql.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        seed = 7
        scale = 100
        duration_s = 1.5
        clients = 4
        think = { kind = "exponential", mean_ms = 2 }

        [[statement]]
        name = "by-user"
        sql = "SELECT U_NAME FROM USERS WHERE U_ID = ?"
        weight = 0.75
        params = [{ int = [0, 99] }]

        [[statement]]
        name = "orders"
        sql = "SELECT O_ID FROM ORDERS WHERE O_STATUS = ? AND O_DATE > ?"
        weight = 0.25
        params = [{ choice = ["PENDING", "SHIPPED"] }, { date = ["2006-01-01", "2010-01-01"] }]
        limit_ms = 50
    "#;

    #[test]
    fn parses_statement_blocks() {
        let c = WorkloadConfig::parse(BASE).unwrap();
        assert_eq!(c.statements.len(), 2);
        assert_eq!(c.statements[0].limit_ms, 1000.0);
        assert_eq!(c.statements[1].limit_ms, 50.0);
        assert_eq!(c.think.kind, ThinkKind::Exponential);
        assert_eq!(c.executor, ExecutorKind::Shared);
        assert_eq!(c.verify, VerifySection::default());
    }

    #[test]
    fn rejects_bad_weights_and_load_shapes() {
        let w = BASE.replace("weight = 0.25", "weight = 0.5");
        assert!(matches!(WorkloadConfig::parse(&w), Err(ConfigError::Invalid(m)) if m.contains("sum")));
        let both = BASE.replace("clients = 4", "clients = 4\nrate = 10.0");
        assert!(WorkloadConfig::parse(&both).is_err());
        let none = BASE.replace("clients = 4", "");
        assert!(WorkloadConfig::parse(&none).is_err());
        let typo = BASE.replace("clients = 4", "client = 4");
        assert!(matches!(WorkloadConfig::parse(&typo), Err(ConfigError::Parse(_))));
        let range = BASE.replace("[0, 99]", "[99, 0]");
        assert!(WorkloadConfig::parse(&range).is_err());
    }
}
