use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::Counters;
use crate::datamodel::{Lineage, Predicate, QueryId, QuerySet, SharedTuple, Value};
use crate::error::{Error, Result};
use crate::frontend::AggFunc;

/// Exactly rounded floating-point sum whose result does not depend on the
/// order of the addends (Shewchuk's partials with a final half-even fixup).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(mut n) = p.len().checked_sub(1) else {
            return 0.0;
        };
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            n -= 1;
            let x = hi;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggSpec {
    pub func: AggFunc,
    /// Argument column; `None` for `COUNT(*)`.
    pub arg: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum Acc {
    Count(i64),
    Sum { int: i64, float: ExactSum, is_float: bool, n: i64 },
    Avg { int: i128, float: ExactSum, is_float: bool, n: i64 },
    Min(Value),
    Max(Value),
}

impl Acc {
    fn new(func: AggFunc) -> Acc {
        match func {
            AggFunc::Count => Acc::Count(0),
            AggFunc::Sum => Acc::Sum {
                int: 0,
                float: ExactSum::default(),
                is_float: false,
                n: 0,
            },
            AggFunc::Avg => Acc::Avg {
                int: 0,
                float: ExactSum::default(),
                is_float: false,
                n: 0,
            },
            AggFunc::Min => Acc::Min(Value::Null),
            AggFunc::Max => Acc::Max(Value::Null),
        }
    }

    fn update(&mut self, v: Option<&Value>) -> Result<()> {
        let v = match v {
            None => {
                if let Acc::Count(n) = self {
                    *n += 1;
                }
                return Ok(());
            }
            Some(Value::Null) => return Ok(()),
            Some(v) => v,
        };
        let numeric = || Error::NonNumericAggregate(format!("{} value {v}", v.value_type().expect("non-null")));
        match self {
            Acc::Count(n) => *n += 1,
            Acc::Sum { int, float, is_float, n } => {
                match v {
                    Value::Int(x) => *int = int.checked_add(*x).ok_or(Error::Overflow("SUM"))?,
                    Value::Float(x) => {
                        float.add(*x);
                        *is_float = true;
                    }
                    _ => return Err(numeric()),
                }
                *n += 1;
            }
            Acc::Avg { int, float, is_float, n } => {
                match v {
                    Value::Int(x) => *int += *x as i128,
                    Value::Float(x) => {
                        float.add(*x);
                        *is_float = true;
                    }
                    _ => return Err(numeric()),
                }
                *n += 1;
            }
            Acc::Min(m) => {
                if !matches!(v, Value::Int(_) | Value::Float(_)) {
                    return Err(numeric());
                }
                if m.is_null() || v < m {
                    *m = v.clone();
                }
            }
            Acc::Max(m) => {
                if !matches!(v, Value::Int(_) | Value::Float(_)) {
                    return Err(numeric());
                }
                if m.is_null() || v > m {
                    *m = v.clone();
                }
            }
        }
        Ok(())
    }

    fn finish(&self) -> Value {
        match self {
            Acc::Count(n) => Value::Int(*n),
            Acc::Sum { n: 0, .. } | Acc::Avg { n: 0, .. } => Value::Null,
            Acc::Sum { int, float, is_float, .. } => {
                if *is_float {
                    let mut s = float.clone();
                    s.add(*int as f64);
                    Value::Float(s.value())
                } else {
                    Value::Int(*int)
                }
            }
            Acc::Avg { int, float, is_float, n } => {
                if *is_float {
                    let mut s = float.clone();
                    s.add(*int as f64);
                    Value::Float(s.value() / *n as f64)
                } else {
                    Value::Float(*int as f64 / *n as f64)
                }
            }
            Acc::Min(v) | Acc::Max(v) => v.clone(),
        }
    }
}

struct Group {
    key: Vec<Value>,
    accs: BTreeMap<QueryId, Vec<Acc>>,
}

/// Phase one of the shared group-by: one hash grouping over the union of
/// all queries' tuples, with aggregate state kept per (group, query).
pub struct GroupTable {
    aggs: Vec<AggFunc>,
    index: HashMap<Vec<Value>, usize>,
    groups: Vec<Group>,
}

impl GroupTable {
    pub fn new(aggs: &[AggFunc]) -> GroupTable {
        GroupTable {
            aggs: aggs.to_vec(),
            index: HashMap::new(),
            groups: Vec::new(),
        }
    }

    /// `keys` and `args` give the tuple's column for each group key and each
    /// aggregate argument (`None` for `COUNT(*)`).
    pub fn insert(&mut self, t: &SharedTuple, keys: &[usize], args: &[Option<usize>], c: &mut Counters) -> Result<()> {
        let key: Vec<Value> = keys.iter().map(|&k| t.values[k].clone()).collect();
        let gi = match self.index.get(&key) {
            Some(&g) => g,
            None => {
                self.groups.push(Group {
                    key: key.clone(),
                    accs: BTreeMap::new(),
                });
                self.index.insert(key, self.groups.len() - 1);
                c.groups += 1;
                self.groups.len() - 1
            }
        };
        let g = &mut self.groups[gi];
        for q in t.queries.iter() {
            let accs = g
                .accs
                .entry(q)
                .or_insert_with(|| self.aggs.iter().map(|&f| Acc::new(f)).collect());
            for (acc, arg) in accs.iter_mut().zip(args) {
                acc.update(arg.map(|a| &t.values[a]))?;
            }
        }
        Ok(())
    }

    /// Phase two: groups in key order; for each group, each query's row
    /// (keys then aggregates) is checked against that query's HAVING, and
    /// queries producing the same row share one output tuple.
    pub fn finish<'p>(
        mut self,
        having: impl Fn(QueryId) -> Option<(&'p Predicate, &'p [Value])>,
    ) -> Result<Vec<SharedTuple>> {
        self.groups.sort_by(|a, b| a.key.cmp(&b.key));
        let mut out = Vec::new();
        let mut rows: Vec<(Vec<Value>, Vec<QueryId>)> = Vec::new();
        for g in &self.groups {
            rows.clear();
            for (q, accs) in &g.accs {
                let mut values = g.key.clone();
                values.extend(accs.iter().map(Acc::finish));
                let (pred, params) = having(*q).ok_or_else(|| Error::Protocol(format!("group-by has no state for {q}")))?;
                if !pred.eval(&values, params)? {
                    continue;
                }
                match rows.iter_mut().find(|(v, _)| *v == values) {
                    Some((_, qs)) => qs.push(*q),
                    None => rows.push((values, vec![*q])),
                }
            }
            for (values, qs) in rows.drain(..) {
                let values: Arc<[Value]> = values.into();
                out.push(SharedTuple::new(values, QuerySet::from_sorted(qs), Lineage::derived()));
            }
        }
        Ok(out)
    }
}

/// Shared group-by over one input: keys and aggregate arguments are column
/// indexes of `input`; `having` maps each query to its predicate over the
/// output row (keys then aggregates).
pub fn shared_groupby(
    input: &[SharedTuple],
    keys: &[usize],
    aggs: &[AggSpec],
    having: &BTreeMap<QueryId, Predicate>,
    c: &mut Counters,
) -> Result<Vec<SharedTuple>> {
    let funcs: Vec<AggFunc> = aggs.iter().map(|a| a.func).collect();
    let args: Vec<Option<usize>> = aggs.iter().map(|a| a.arg).collect();
    let mut table = GroupTable::new(&funcs);
    for t in input {
        table.insert(t, keys, &args, c)?;
    }
    table.finish(|q| having.get(&q).map(|p| (p, &[][..])))
}
