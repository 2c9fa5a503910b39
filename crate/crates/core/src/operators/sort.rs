use std::cmp::Ordering;
use std::collections::HashMap;

use super::Counters;
use crate::datamodel::{tuple_order, QueryId, QuerySet, SharedTuple};
use crate::error::{Error, Result};
use crate::frontend::SortDir;

/// Compares two tuples by their sort keys under the engine-wide total order.
#[inline]
pub fn compare(a: &SharedTuple, ka: usize, b: &SharedTuple, kb: usize, dir: SortDir) -> Ordering {
    let ord = tuple_order(
        &a.values[ka],
        (&a.lineage, &a.values),
        &b.values[kb],
        (&b.lineage, &b.values),
    );
    match dir {
        SortDir::Asc => ord,
        SortDir::Desc => ord.reverse(),
    }
}

/// Sorts tuples drawn from several inputs in one pass. Each item is
/// `(input, tuple)` and `keys[input]` is the key column for that input.
pub fn sort_union(items: &mut [(u32, SharedTuple)], keys: &[usize], dir: SortDir, c: &mut Counters) {
    let mut n = 0u64;
    items.sort_by(|(pa, a), (pb, b)| {
        n += 1;
        compare(a, keys[*pa as usize], b, keys[*pb as usize], dir)
    });
    c.comparisons += n;
}

/// One comparison sort over the union of every query's tuples; query sets
/// ride along unchanged.
pub fn shared_sort(input: Vec<SharedTuple>, key: usize, dir: SortDir, c: &mut Counters) -> Vec<SharedTuple> {
    let mut items: Vec<(u32, SharedTuple)> = input.into_iter().map(|t| (0, t)).collect();
    sort_union(&mut items, &[key], dir, c);
    items.into_iter().map(|(_, t)| t).collect()
}

/// Walks a sorted stream keeping, for each query, only its first `limit`
/// tuples. A tuple survives with the subset of its queries that still had
/// room.
pub struct TopNFilter {
    remaining: HashMap<QueryId, u64>,
    open: usize,
}

impl TopNFilter {
    pub fn new(limits: impl IntoIterator<Item = (QueryId, i64)>) -> Result<TopNFilter> {
        let mut remaining = HashMap::new();
        for (q, n) in limits {
            if n <= 0 {
                return Err(Error::InvalidLimit(n));
            }
            remaining.insert(q, n as u64);
        }
        let open = remaining.len();
        Ok(TopNFilter { remaining, open })
    }

    pub fn is_exhausted(&self) -> bool {
        self.open == 0
    }

    pub fn admit(&mut self, qs: &QuerySet) -> Result<Option<QuerySet>> {
        let mut kept = Vec::new();
        for q in qs.iter() {
            let left = self.remaining.get_mut(&q).ok_or(Error::Protocol(format!("top-n has no limit for {q}")))?;
            if *left > 0 {
                *left -= 1;
                if *left == 0 {
                    self.open -= 1;
                }
                kept.push(q);
            }
        }
        Ok(match kept.len() {
            0 => None,
            n if n == qs.len() => Some(qs.clone()),
            _ => Some(QuerySet::from_sorted(kept)),
        })
    }
}

/// Shared sort followed by a per-query prefix of length `limits[q]`.
pub fn shared_topn(
    input: Vec<SharedTuple>,
    key: usize,
    dir: SortDir,
    limits: &[(QueryId, i64)],
    c: &mut Counters,
) -> Result<Vec<SharedTuple>> {
    let mut filter = TopNFilter::new(limits.iter().copied())?;
    let sorted = shared_sort(input, key, dir, c);
    let mut out = Vec::new();
    for t in sorted {
        if filter.is_exhausted() {
            break;
        }
        if let Some(qs) = filter.admit(&t.queries)? {
            out.push(t.with_queries(qs));
        }
    }
    Ok(out)
}
