use batchdb::datamodel::{Date, Value};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::config::WorkloadConfig;

/// How one statement parameter is drawn.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ParamGen {
    /// Uniform integer in `[lo, hi]`.
    Int([i64; 2]),
    /// Uniform float in `[lo, hi)` in whole cents.
    Float([f64; 2]),
    /// Uniform date in `[lo, hi]`.
    Date([String; 2]),
    Choice(Vec<String>),
    /// Fresh integers starting here, never repeated within a run.
    Seq(i64),
    /// `template` with `{}` replaced by a uniform integer.
    Pattern { template: String, int: [i64; 2] },
    Const(toml::Value),
}

impl ParamGen {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            ParamGen::Int([lo, hi]) | ParamGen::Pattern { int: [lo, hi], .. } if lo > hi => {
                Err(format!("empty range [{lo}, {hi}]"))
            }
            ParamGen::Float([lo, hi]) if !(lo < hi) => Err(format!("empty range [{lo}, {hi})")),
            ParamGen::Date([lo, hi]) => match (Date::parse(lo), Date::parse(hi)) {
                (Some(a), Some(b)) if a <= b => Ok(()),
                _ => Err(format!("bad date range [{lo}, {hi}]")),
            },
            ParamGen::Choice(c) if c.is_empty() => Err("empty choice".into()),
            ParamGen::Pattern { template, .. } if !template.contains("{}") => {
                Err(format!("pattern {template} has no {{}}"))
            }
            ParamGen::Const(v) if const_value(v).is_none() => Err(format!("unsupported constant {v}")),
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, seq: &mut i64, stride: i64) -> Value {
        match self {
            ParamGen::Int([lo, hi]) => Value::Int(rng.random_range(*lo..=*hi)),
            ParamGen::Float([lo, hi]) => {
                let (a, b) = ((lo * 100.0).ceil() as i64, (hi * 100.0).ceil() as i64);
                if a < b {
                    Value::Float(rng.random_range(a..b) as f64 / 100.0)
                } else {
                    Value::Float(rng.random_range(*lo..*hi))
                }
            }
            ParamGen::Date([lo, hi]) => {
                let (lo, hi) = (Date::parse(lo).expect("validated"), Date::parse(hi).expect("validated"));
                Value::Date(Date(rng.random_range(lo.0..=hi.0)))
            }
            ParamGen::Choice(c) => Value::str(&c[rng.random_range(0..c.len())]),
            ParamGen::Seq(_) => {
                let v = *seq;
                *seq += stride;
                Value::Int(v)
            }
            ParamGen::Pattern { template, int: [lo, hi] } => {
                Value::str(template.replacen("{}", &rng.random_range(*lo..=*hi).to_string(), 1))
            }
            ParamGen::Const(v) => const_value(v).expect("validated"),
        }
    }
}

fn const_value(v: &toml::Value) -> Option<Value> {
    match v {
        toml::Value::Integer(i) => Some(Value::Int(*i)),
        toml::Value::Float(f) => Some(Value::Float(*f)),
        toml::Value::String(s) => Some(Value::str(s)),
        _ => None,
    }
}

/// Deterministic stream of `(statement index, parameters)`. Stream `k` of
/// `n` draws sequence parameters `start + k, start + k + n, ...` so that
/// parallel clients never collide.
pub struct OpStream {
    rng: ChaCha8Rng,
    pick: WeightedIndex<f64>,
    params: Vec<Vec<ParamGen>>,
    seqs: Vec<Vec<i64>>,
    stride: i64,
}

impl OpStream {
    pub fn new(cfg: &WorkloadConfig, stream: u64, streams: u64) -> OpStream {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&cfg.seed.to_le_bytes());
        seed[8..16].copy_from_slice(&stream.to_le_bytes());
        let pick = WeightedIndex::new(cfg.statements.iter().map(|s| s.weight)).expect("validated weights");
        let params: Vec<Vec<ParamGen>> = cfg.statements.iter().map(|s| s.params.clone()).collect();
        let seqs = params
            .iter()
            .map(|ps| {
                ps.iter()
                    .map(|p| match p {
                        ParamGen::Seq(start) => start + stream as i64,
                        _ => 0,
                    })
                    .collect()
            })
            .collect();
        OpStream {
            rng: ChaCha8Rng::from_seed(seed),
            pick,
            params,
            seqs,
            stride: streams as i64,
        }
    }

    pub fn next_op(&mut self) -> (usize, Vec<Value>) {
        let s = self.pick.sample(&mut self.rng);
        (s, self.params_for(s))
    }

    pub fn params_for(&mut self, s: usize) -> Vec<Value> {
        let rng = &mut self.rng;
        let stride = self.stride;
        self.params[s]
            .iter()
            .zip(self.seqs[s].iter_mut())
            .map(|(p, seq)| p.sample(rng, seq, stride))
            .collect()
    }

    /// Uniform in `[0, 1)`, from the same stream.
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

impl Iterator for OpStream {
    type Item = (usize, Vec<Value>);

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_op())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> WorkloadConfig {
        WorkloadConfig::parse(
            r#"
            seed = 11
            scale = 10
            duration_s = 1
            rate = 100.0

            [[statement]]
            name = "a"
            sql = "INSERT INTO ORDERS VALUES (?, ?, ?, ?, ?)"
            weight = 0.5
            params = [{ seq = 1000 }, { int = [0, 9] }, { date = ["2005-01-01", "2005-01-03"] },
                      { float = [1.0, 2.0] }, { choice = ["X"] }]

            [[statement]]
            name = "b"
            sql = "SELECT U_ID FROM USERS WHERE U_NAME LIKE ?"
            weight = 0.5
            params = [{ pattern = { template = "user{}%", int = [1, 3] } }]
            "#,
        )
        .unwrap()
    }

    #[test]
    fn same_seed_same_stream() {
        let c = cfg();
        let a: Vec<_> = OpStream::new(&c, 0, 1).take(200).collect();
        let b: Vec<_> = OpStream::new(&c, 0, 1).take(200).collect();
        assert_eq!(a, b);
        let other: Vec<_> = OpStream::new(&c, 1, 2).take(200).collect();
        assert_ne!(a, other);
    }

    #[test]
    fn parameters_stay_in_range() {
        let c = cfg();
        let lo = Date::parse("2005-01-01").unwrap();
        let hi = Date::parse("2005-01-03").unwrap();
        for (s, p) in OpStream::new(&c, 0, 1).take(500) {
            if s == 0 {
                let Value::Date(d) = p[2] else { panic!() };
                assert!(lo <= d && d <= hi);
                let f = p[3].as_f64().unwrap();
                assert!((1.0..2.0).contains(&f));
            } else {
                let s = p[0].as_str().unwrap();
                assert!(["user1%", "user2%", "user3%"].contains(&s));
            }
        }
    }

    #[test]
    fn sequences_never_collide_across_streams() {
        let c = cfg();
        let mut seen = std::collections::BTreeSet::new();
        for k in 0..3 {
            for (s, p) in OpStream::new(&c, k, 3).take(300) {
                if s == 0 {
                    assert!(seen.insert(p[0].as_i64().unwrap()));
                }
            }
        }
        assert!(seen.len() > 300);
    }
}
