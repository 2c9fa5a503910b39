use std::collections::{BTreeMap, HashMap};

use smallvec::SmallVec;

use super::Counters;
use crate::datamodel::{QueryId, QuerySet, SharedTuple, Value, ValueType};
use crate::error::{Error, Result};
use crate::storage::{probe_filters, QueryFilter, ScanStats, TableStore};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JoinOptions {
    /// Fault injection: tag join results with the outer tuple's queries
    /// instead of the intersection.
    pub skip_intersection: bool,
}

impl JoinOptions {
    #[inline]
    fn tag(&self, outer: &QuerySet, inner: &QuerySet) -> QuerySet {
        if self.skip_intersection {
            outer.clone()
        } else {
            outer.intersect(inner)
        }
    }
}

fn check_key_types(left: Option<ValueType>, right: Option<ValueType>) -> Result<()> {
    match (left, right) {
        (Some(l), Some(r)) if l != r => Err(Error::TypeMismatch { left: l, right: r }),
        _ => Ok(()),
    }
}

/// Hash table over the inner side of a join, keyed by the join attribute.
/// Tuples with a null key are never inserted.
#[derive(Debug, Default)]
pub struct JoinTable<'a> {
    map: HashMap<&'a Value, SmallVec<[&'a SharedTuple; 1]>>,
    key_type: Option<ValueType>,
}

impl<'a> JoinTable<'a> {
    pub fn new() -> Self {
        JoinTable {
            map: HashMap::new(),
            key_type: None,
        }
    }

    pub fn insert_all(&mut self, inner: &'a [SharedTuple], key: usize, c: &mut Counters) {
        for t in inner {
            let k = &t.values[key];
            c.builds += 1;
            if k.is_null() {
                continue;
            }
            self.key_type = self.key_type.or(k.value_type());
            self.map.entry(k).or_default().push(t);
        }
    }

    /// Probes with every outer tuple and appends matches whose query sets
    /// intersect.
    pub fn probe_all(
        &self,
        outer: &[SharedTuple],
        key: usize,
        opts: JoinOptions,
        c: &mut Counters,
        out: &mut Vec<SharedTuple>,
    ) -> Result<()> {
        for o in outer {
            c.probes += 1;
            let k = &o.values[key];
            if k.is_null() {
                continue;
            }
            check_key_types(k.value_type(), self.key_type)?;
            if let Some(matches) = self.map.get(k) {
                for i in matches {
                    let qs = opts.tag(&o.queries, &i.queries);
                    if !qs.is_empty() {
                        out.push(o.joined(i, qs));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One hash join serving every query in the batch: build on `inner`, probe
/// with `outer`, and keep a pair only for the queries both sides belong to.
pub fn shared_hash_join(
    outer: &[SharedTuple],
    inner: &[SharedTuple],
    outer_key: usize,
    inner_key: usize,
    opts: JoinOptions,
    c: &mut Counters,
) -> Result<Vec<SharedTuple>> {
    let mut table = JoinTable::new();
    table.insert_all(inner, inner_key, c);
    let mut out = Vec::new();
    table.probe_all(outer, outer_key, opts, c, &mut out)?;
    Ok(out)
}

/// Join keyed on query id: the inner side is indexed by the queries each
/// tuple belongs to, and each outer tuple only meets inner tuples of its own
/// queries. Pairs reached through several queries are emitted once.
pub fn shared_queryid_join(
    outer: &[SharedTuple],
    inner: &[SharedTuple],
    outer_key: usize,
    inner_key: usize,
    opts: JoinOptions,
    c: &mut Counters,
) -> Result<Vec<SharedTuple>> {
    let mut by_query: HashMap<QueryId, Vec<u32>> = HashMap::new();
    for (i, t) in inner.iter().enumerate() {
        for q in t.queries.iter() {
            c.builds += 1;
            by_query.entry(q).or_default().push(i as u32);
        }
    }
    let inner_type = inner.iter().find_map(|t| t.values[inner_key].value_type());
    let mut out = Vec::new();
    let mut pairs: BTreeMap<u32, Vec<QueryId>> = BTreeMap::new();
    for o in outer {
        let k = &o.values[outer_key];
        if k.is_null() {
            continue;
        }
        check_key_types(k.value_type(), inner_type)?;
        pairs.clear();
        for q in o.queries.iter() {
            c.probes += 1;
            for &i in by_query.get(&q).map_or(&[][..], |v| v.as_slice()) {
                if inner[i as usize].values[inner_key] == *k {
                    pairs.entry(i).or_default().push(q);
                }
            }
        }
        for (&i, qs) in &pairs {
            let t = &inner[i as usize];
            let qs = if opts.skip_intersection {
                o.queries.clone()
            } else {
                QuerySet::from_sorted(qs.clone())
            };
            out.push(o.joined(t, qs));
        }
    }
    Ok(out)
}

/// Distinct non-null outer keys, each with the union of the queries asking
/// for it.
pub fn probe_keys(outer: &[SharedTuple], key: usize) -> BTreeMap<Value, QuerySet> {
    let mut keys: BTreeMap<Value, QuerySet> = BTreeMap::new();
    for o in outer {
        let k = &o.values[key];
        if k.is_null() {
            continue;
        }
        match keys.get_mut(k) {
            Some(qs) => *qs = qs.union(&o.queries),
            None => {
                keys.insert(k.clone(), o.queries.clone());
            }
        }
    }
    keys
}

/// Answers a batch of probe keys against `table` for the queries in
/// `filters` (sorted by query id). Each distinct key is looked up once.
pub fn serve_probes(
    table: &TableStore,
    column: usize,
    keys: &[(Value, QuerySet)],
    filters: &[QueryFilter<'_>],
    stats: &mut ScanStats,
) -> Result<Vec<SharedTuple>> {
    let mut wanted: BTreeMap<Value, Vec<u32>> = BTreeMap::new();
    for (k, qs) in keys {
        let list = wanted.entry(k.clone()).or_default();
        for q in qs.iter() {
            let i = filters
                .binary_search_by_key(&q, |f| f.qid)
                .map_err(|_| Error::Protocol(format!("probe for {q}, which has no access on {}", table.name())))?;
            list.push(i as u32);
        }
        list.sort_unstable();
        list.dedup();
    }
    probe_filters(table, column, &wanted, filters, stats)
}

/// Index nested-loop join: the outer tuples' distinct keys are probed once
/// each in `table`'s index on `inner_column`; the rows found are matched
/// back to outer tuples with query-set intersection.
pub fn shared_index_nl_join(
    outer: &[SharedTuple],
    outer_key: usize,
    table: &TableStore,
    inner_column: usize,
    filters: &[QueryFilter<'_>],
    opts: JoinOptions,
    c: &mut Counters,
) -> Result<Vec<SharedTuple>> {
    let keys: Vec<(Value, QuerySet)> = probe_keys(outer, outer_key).into_iter().collect();
    c.probes += keys.len() as u64;
    let mut stats = ScanStats::default();
    let inner = serve_probes(table, inner_column, &keys, filters, &mut stats)?;
    c.lookups += stats.lookups;
    let mut scratch = Counters::default();
    let mut t = JoinTable::new();
    t.insert_all(&inner, inner_column, &mut scratch);
    let mut out = Vec::new();
    t.probe_all(outer, outer_key, opts, &mut scratch, &mut out)?;
    Ok(out)
}
