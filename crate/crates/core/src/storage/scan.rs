use std::collections::{BTreeMap, HashMap};

use super::table::{TableStore, Version, OPEN};
use crate::datamodel::{
    ArrivalTimestamp, CmpOp, Lineage, Predicate, QueryId, QuerySet, SharedTuple, Value,
};
use crate::error::Result;

/// A query reading a table through the shared scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanQuery {
    pub qid: QueryId,
    pub pred: Predicate,
    pub snapshot: ArrivalTimestamp,
}

/// An index probe: rows with `column = key` that also satisfy `pred`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeQuery {
    pub qid: QueryId,
    pub key: Value,
    pub pred: Predicate,
    pub snapshot: ArrivalTimestamp,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanStats {
    /// Row versions visited by scans.
    pub touched: u64,
    /// Distinct index keys looked up.
    pub lookups: u64,
}

/// A query's view of a table: its predicate (possibly with parameter slots
/// resolved from `params`) and snapshot.
#[derive(Debug, Clone, Copy)]
pub struct QueryFilter<'a> {
    pub qid: QueryId,
    pub snapshot: ArrivalTimestamp,
    pub pred: &'a Predicate,
    pub params: &'a [Value],
}

impl QueryFilter<'_> {
    fn passes(&self, v: &Version, skip: Option<usize>) -> Result<bool> {
        if !v.visible(self.snapshot) {
            return Ok(false);
        }
        for (i, a) in self.pred.atoms.iter().enumerate() {
            if Some(i) != skip && !a.eval(&v.values, self.params)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Reuses the previous set when consecutive rows go to the same queries.
#[derive(Default)]
struct Interner {
    last: Vec<QueryId>,
    set: Option<QuerySet>,
}

impl Interner {
    fn get(&mut self, ids: &[QueryId]) -> QuerySet {
        match &self.set {
            Some(s) if self.last == ids => s.clone(),
            _ => {
                self.last.clear();
                self.last.extend_from_slice(ids);
                let s = QuerySet::from_sorted(ids.to_vec());
                self.set = Some(s.clone());
                s
            }
        }
    }
}

fn hashable(v: &Value) -> bool {
    matches!(v, Value::Int(_) | Value::Str(_) | Value::Date(_))
}

/// One pass over every retained row version, evaluating all `queries`
/// (sorted by query id) at once. Equality atoms are grouped per attribute
/// into a hash from constant to the queries asking for it, so a row finds
/// its equality matches with one lookup per attribute; the remaining atoms
/// are checked per candidate query.
pub fn scan_filters(t: &TableStore, queries: &[QueryFilter<'_>], stats: &mut ScanStats) -> Result<Vec<SharedTuple>> {
    debug_assert!(queries.windows(2).all(|w| w[0].qid < w[1].qid));
    let mut out = Vec::new();
    if queries.is_empty() {
        return Ok(out);
    }
    let mut by_attr: BTreeMap<usize, HashMap<Value, Vec<u32>>> = BTreeMap::new();
    let mut generic: Vec<u32> = Vec::new();
    let mut skip: Vec<Option<usize>> = Vec::with_capacity(queries.len());
    for (i, q) in queries.iter().enumerate() {
        let mut keyed = None;
        for (a, atom) in q.pred.atoms.iter().enumerate() {
            if atom.op == CmpOp::Eq {
                let v = atom.operand.resolve(q.params)?;
                if hashable(v) {
                    keyed = Some((a, atom.column, v.clone()));
                    break;
                }
            }
        }
        match keyed {
            Some((a, column, v)) => {
                by_attr.entry(column).or_default().entry(v).or_default().push(i as u32);
                skip.push(Some(a));
            }
            None => {
                generic.push(i as u32);
                skip.push(None);
            }
        }
    }
    let min_snap = queries.iter().map(|q| q.snapshot).min().unwrap_or(0);
    let max_snap = queries.iter().map(|q| q.snapshot).max().unwrap_or(0);
    let all_open = by_attr.is_empty() && queries.iter().all(|q| q.pred.atoms.is_empty());
    let all: Vec<QueryId> = queries.iter().map(|q| q.qid).collect();

    let mut interner = Interner::default();
    let mut cands: Vec<u32> = Vec::new();
    let mut ids: Vec<QueryId> = Vec::new();
    for (row, chain) in t.chains() {
        for v in chain {
            stats.touched += 1;
            let everyone = v.valid_from <= min_snap && (v.valid_to == OPEN || v.valid_to > max_snap);
            if all_open && everyone {
                let qs = interner.get(&all);
                out.push(SharedTuple::new(v.values.clone(), qs, Lineage::base(t.id(), row)));
                continue;
            }
            cands.clear();
            let mut sources = 0;
            for (column, map) in &by_attr {
                let key = &v.values[*column];
                if !key.is_null() {
                    if let Some(list) = map.get(key) {
                        cands.extend_from_slice(list);
                        sources += 1;
                    }
                }
            }
            if !generic.is_empty() {
                cands.extend_from_slice(&generic);
                sources += 1;
            }
            if sources > 1 {
                cands.sort_unstable();
            }
            ids.clear();
            for &i in &cands {
                let q = &queries[i as usize];
                let visible = everyone || v.visible(q.snapshot);
                if visible && q.passes(v, skip[i as usize])? {
                    ids.push(q.qid);
                }
            }
            if !ids.is_empty() {
                let qs = interner.get(&ids);
                out.push(SharedTuple::new(v.values.clone(), qs, Lineage::base(t.id(), row)));
            }
        }
    }
    Ok(out)
}

/// Batched index probes. `keys` maps each probed key to the indexes (into
/// `queries`, sorted by query id) of the queries that want it. Keys are
/// looked up once each, in ascending order; each qualifying row version is
/// emitted once, tagged with every query it satisfies.
pub fn probe_filters(
    t: &TableStore,
    column: usize,
    keys: &BTreeMap<Value, Vec<u32>>,
    queries: &[QueryFilter<'_>],
    stats: &mut ScanStats,
) -> Result<Vec<SharedTuple>> {
    let mut out = Vec::new();
    let mut interner = Interner::default();
    let mut ids: Vec<QueryId> = Vec::new();
    for (key, wanted) in keys {
        stats.lookups += 1;
        if key.is_null() {
            continue;
        }
        for &row in t.index_lookup(column, key)? {
            for v in t.chain(row) {
                if v.values[column] != *key {
                    continue;
                }
                ids.clear();
                for &i in wanted {
                    let q = &queries[i as usize];
                    if q.passes(v, None)? {
                        ids.push(q.qid);
                    }
                }
                if !ids.is_empty() {
                    let qs = interner.get(&ids);
                    out.push(SharedTuple::new(v.values.clone(), qs, Lineage::base(t.id(), row)));
                }
            }
        }
    }
    Ok(out)
}

/// Shared table scan over a batch of bound queries: one pass, one tuple per
/// qualifying row version carrying every query it qualifies for.
pub fn shared_scan(t: &TableStore, batch: &[ScanQuery], stats: &mut ScanStats) -> Result<Vec<SharedTuple>> {
    let mut filters: Vec<QueryFilter<'_>> = batch
        .iter()
        .map(|q| QueryFilter {
            qid: q.qid,
            snapshot: q.snapshot,
            pred: &q.pred,
            params: &[],
        })
        .collect();
    filters.sort_by_key(|f| f.qid);
    scan_filters(t, &filters, stats)
}

/// Shared index probes on `column`: distinct keys are looked up once, in
/// key order, and matches fan out to every requesting query.
pub fn shared_index_probe(
    t: &TableStore,
    column: usize,
    batch: &[ProbeQuery],
    stats: &mut ScanStats,
) -> Result<Vec<SharedTuple>> {
    let mut order: Vec<usize> = (0..batch.len()).collect();
    order.sort_by_key(|&i| batch[i].qid);
    let filters: Vec<QueryFilter<'_>> = order
        .iter()
        .map(|&i| QueryFilter {
            qid: batch[i].qid,
            snapshot: batch[i].snapshot,
            pred: &batch[i].pred,
            params: &[],
        })
        .collect();
    let mut keys: BTreeMap<Value, Vec<u32>> = BTreeMap::new();
    for (pos, &i) in order.iter().enumerate() {
        keys.entry(batch[i].key.clone()).or_default().push(pos as u32);
    }
    if !t.has_index(column) {
        t.index_lookup(column, &Value::Null)?;
    }
    probe_filters(t, column, &keys, &filters, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{Atom, Operand};
    use crate::storage::table::{load_table, tests::*, WriteOp};

    fn q(id: u64, atoms: Vec<Atom>) -> ScanQuery {
        ScanQuery {
            qid: QueryId(id),
            pred: Predicate::new(atoms),
            snapshot: 100,
        }
    }

    fn sets(out: &[SharedTuple]) -> Vec<(u64, Vec<u64>)> {
        out.iter()
            .map(|t| (t.lineage.row_id().unwrap().0, t.queries.iter().map(|q| q.0).collect()))
            .collect()
    }

    #[test]
    fn users_queries_a_and_b() {
        let t = load_table(&users_def(), users_rows()).unwrap();
        let a = q(1, vec![Atom::new(2, CmpOp::Gt, Operand::Const(Value::date("1980.01.01").unwrap()))]);
        let b = q(2, vec![Atom::new(1, CmpOp::Gt, Operand::Const(Value::Int(1000)))]);
        let mut stats = ScanStats::default();
        let out = shared_scan(&t, &[a, b], &mut stats).unwrap();
        assert_eq!(
            sets(&out),
            vec![(0, vec![1, 2]), (2, vec![2]), (3, vec![1]), (4, vec![1, 2])]
        );
        assert_eq!(stats.touched, 5);
    }

    #[test]
    fn single_query_without_predicate_sees_everything() {
        let t = load_table(&users_def(), users_rows()).unwrap();
        let out = shared_scan(&t, &[q(9, vec![])], &mut ScanStats::default()).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|t| t.queries == QuerySet::single(QueryId(9))));
    }

    #[test]
    fn equality_queries_share_a_hash() {
        let t = load_table(&users_def(), users_rows()).unwrap();
        let by_name = |id, n: &str| q(id, vec![Atom::new(0, CmpOp::Eq, Operand::Const(Value::str(n)))]);
        let batch = vec![by_name(1, "Nick Lee"), by_name(2, "Nick Lee"), by_name(3, "Bill Harisson"), by_name(4, "Nobody")];
        let out = shared_scan(&t, &batch, &mut ScanStats::default()).unwrap();
        assert_eq!(sets(&out), vec![(2, vec![3]), (3, vec![1, 2])]);
    }

    #[test]
    fn snapshots_are_per_query() {
        let mut t = load_table(&users_def(), users_rows()).unwrap();
        let del = WriteOp::Delete {
            pred: Predicate::new(vec![Atom::new(0, CmpOp::Eq, Operand::Const(Value::str("Nick Lee")))]),
        };
        t.apply_write(&del, 5).unwrap();
        let mut early = q(1, vec![]);
        early.snapshot = 4;
        let late = q(2, vec![]);
        let out = shared_scan(&t, &[early, late], &mut ScanStats::default()).unwrap();
        assert_eq!(sets(&out)[3], (3, vec![1]));
        assert_eq!(sets(&out).iter().filter(|(_, s)| s.contains(&2)).count(), 4);
    }

    #[test]
    fn probes_deduplicate_keys() {
        let def = crate::frontend::Catalog::parse("CREATE TABLE T (ID INT PRIMARY KEY, V INT);")
            .unwrap()
            .tables()[0]
            .clone();
        let rows = (0..200).map(|i| vec![Value::Int(i), Value::Int(i % 7)]).collect();
        let t = load_table(&def, rows).unwrap();
        let probe = |id, k| ProbeQuery {
            qid: QueryId(id),
            key: Value::Int(k),
            pred: Predicate::always(),
            snapshot: 1,
        };
        let mut stats = ScanStats::default();
        let out = shared_index_probe(&t, 0, &[probe(1, 143), probe(2, 143), probe(3, 148)], &mut stats).unwrap();
        assert_eq!(stats.lookups, 2);
        assert_eq!(sets(&out), vec![(143, vec![1, 2]), (148, vec![3])]);

        let mut stats = ScanStats::default();
        assert!(shared_index_probe(&t, 0, &[probe(1, 999)], &mut stats).unwrap().is_empty());

        let batch: Vec<ProbeQuery> = (0..256).map(|i| probe(i, (i * 31 % 40) as i64)).collect();
        let mut stats = ScanStats::default();
        shared_index_probe(&t, 0, &batch, &mut stats).unwrap();
        assert_eq!(stats.lookups, 40);

        assert!(shared_index_probe(&t, 1, &[probe(1, 1)], &mut stats).is_err());
    }
}
