use std::collections::{BTreeMap, BTreeSet};

use batchdb::datamodel::{
    to_first_normal_form, Atom, CmpOp, Lineage, Operand, Predicate, QueryId, QuerySet, RowId, SharedTuple, Value,
};
use batchdb::frontend::{AggFunc, Catalog, SortDir, TableDef};
use batchdb::operators::{
    shared_groupby, shared_hash_join, shared_index_nl_join, shared_queryid_join, shared_sort, AggSpec, Counters,
    JoinOptions,
};
use batchdb::storage::{scan_filters, QueryFilter, ScanStats, TableStore, WriteOp};
use proptest::prelude::*;

const OPEN: u64 = u64::MAX;

fn def() -> TableDef {
    Catalog::parse("CREATE TABLE T (K INT PRIMARY KEY, A INT, B INT); CREATE INDEX ON T(A);")
        .unwrap()
        .tables()[0]
        .clone()
}

fn row(k: i64, a: i64, b: i64) -> Vec<Value> {
    vec![Value::Int(k), Value::Int(a), Value::Int(b)]
}

fn atom(col: usize, op: CmpOp, v: i64) -> Predicate {
    Predicate::new(vec![Atom::new(col, op, Operand::Const(Value::Int(v)))])
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop_oneof![
        Just(CmpOp::Eq),
        Just(CmpOp::Ne),
        Just(CmpOp::Lt),
        Just(CmpOp::Le),
        Just(CmpOp::Gt),
        Just(CmpOp::Ge)
    ]
}

#[derive(Debug, Clone)]
enum Op {
    Insert(i64, i64, i64),
    Update { col: usize, op: CmpOp, v: i64, set_b: i64 },
    Delete { col: usize, op: CmpOp, v: i64 },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0i64..30, 0i64..8, 0i64..100).prop_map(|(k, a, b)| Op::Insert(k, a, b)),
        (0usize..3, cmp_op(), 0i64..30, 0i64..100).prop_map(|(col, op, v, set_b)| Op::Update { col, op, v, set_b }),
        (0usize..3, cmp_op(), 0i64..30).prop_map(|(col, op, v)| Op::Delete { col, op, v }),
    ]
}

type Model = BTreeMap<i64, Vec<Value>>;

fn apply_model(m: &Model, op: &Op) -> Option<Model> {
    let mut m = m.clone();
    match op {
        Op::Insert(k, a, b) => {
            if m.contains_key(k) {
                return None;
            }
            m.insert(*k, row(*k, *a, *b));
        }
        Op::Update { col, op, v, set_b } => {
            for r in m.values_mut() {
                if op.holds(r[*col].cmp(&Value::Int(*v))) {
                    r[2] = Value::Int(*set_b);
                }
            }
        }
        Op::Delete { col, op, v } => m.retain(|_, r| !op.holds(r[*col].cmp(&Value::Int(*v)))),
    }
    Some(m)
}

fn write_op(op: &Op) -> WriteOp {
    match op {
        Op::Insert(k, a, b) => WriteOp::Insert(vec![row(*k, *a, *b)]),
        Op::Update { col, op, v, set_b } => WriteOp::Update {
            set: vec![(2, Value::Int(*set_b))],
            pred: atom(*col, *op, *v),
        },
        Op::Delete { col, op, v } => WriteOp::Delete {
            pred: atom(*col, *op, *v),
        },
    }
}

fn contents(t: &TableStore, s: u64) -> Vec<Vec<Value>> {
    let mut rows: Vec<Vec<Value>> = t.snapshot(s).into_iter().map(|(_, v)| v.to_vec()).collect();
    rows.sort();
    rows
}

/// A table after a random write history, plus the model state after each
/// write (index 0 is the initial load).
fn history(initial: &[(i64, i64, i64)], ops: &[Op]) -> (TableStore, Vec<Model>) {
    let mut t = TableStore::empty(&def());
    let mut model = Model::new();
    let mut rows = Vec::new();
    for &(k, a, b) in initial {
        if let std::collections::btree_map::Entry::Vacant(e) = model.entry(k) {
            e.insert(row(k, a, b));
            rows.push(row(k, a, b));
        }
    }
    t.load_rows(rows).unwrap();
    let mut states = vec![model];
    for (i, op) in ops.iter().enumerate() {
        let ts = i as u64 + 1;
        let next = apply_model(states.last().unwrap(), op);
        let r = t.apply_write(&write_op(op), ts);
        assert_eq!(r.is_ok(), next.is_some(), "write {op:?} at {ts}: {r:?}");
        states.push(next.unwrap_or_else(|| states.last().unwrap().clone()));
    }
    (t, states)
}

fn model_rows(m: &Model) -> Vec<Vec<Value>> {
    m.values().cloned().collect()
}

fn expand(out: &[SharedTuple]) -> Vec<(QueryId, Vec<Value>)> {
    let mut v: Vec<(QueryId, Vec<Value>)> = to_first_normal_form(out)
        .into_iter()
        .map(|(q, t)| (q, t.values.to_vec()))
        .collect();
    v.sort();
    v
}

fn tuples(rows: &[(i64, i64, Vec<u64>)], table: u32) -> Vec<SharedTuple> {
    rows.iter()
        .enumerate()
        .filter(|(_, (_, _, qs))| !qs.is_empty())
        .map(|(i, (k, p, qs))| {
            SharedTuple::new(
                vec![Value::Int(*k), Value::Int(*p)],
                QuerySet::from_ids(qs.iter().map(|&q| QueryId(q))),
                Lineage::base(table, RowId(i as u64)),
            )
        })
        .collect()
}

fn side() -> impl Strategy<Value = Vec<(i64, i64, Vec<u64>)>> {
    proptest::collection::vec(
        (0i64..10, 0i64..100, proptest::collection::vec(0u64..6, 0..4)),
        0..40,
    )
}

fn per_query(input: &[SharedTuple], q: QueryId) -> Vec<SharedTuple> {
    input
        .iter()
        .filter(|t| t.queries.contains(q))
        .map(|t| t.with_queries(QuerySet::single(q)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn snapshots_replay_the_write_history(
        initial in proptest::collection::vec((0i64..30, 0i64..8, 0i64..100), 0..20),
        ops in proptest::collection::vec(op(), 0..30),
        horizon in 0u64..32,
    ) {
        let (mut t, states) = history(&initial, &ops);
        prop_assert!(t.versions_well_formed());
        prop_assert!(t.indexes_consistent());
        for (s, m) in states.iter().enumerate() {
            prop_assert_eq!(contents(&t, s as u64), model_rows(m), "snapshot {}", s);
        }
        let before = t.version_count();
        t.gc(horizon);
        prop_assert!(t.version_count() <= before);
        prop_assert!(t.versions_well_formed());
        prop_assert!(t.indexes_consistent());
        for (s, m) in states.iter().enumerate().skip(horizon as usize) {
            prop_assert_eq!(contents(&t, s as u64), model_rows(m), "snapshot {} after gc({})", s, horizon);
        }
        prop_assert_eq!(contents(&t, OPEN - 1), model_rows(states.last().unwrap()));
    }

    #[test]
    fn version_chains_never_overlap(
        initial in proptest::collection::vec((0i64..30, 0i64..8, 0i64..100), 0..20),
        ops in proptest::collection::vec(op(), 0..30),
    ) {
        let (t, _) = history(&initial, &ops);
        for (_, chain) in t.chains() {
            for w in chain.windows(2) {
                prop_assert!(w[0].valid_from < w[0].valid_to);
                prop_assert!(w[0].valid_to <= w[1].valid_from);
            }
            prop_assert!(chain.iter().filter(|v| v.is_open()).count() <= 1);
        }
    }

    #[test]
    fn shared_scan_equals_one_scan_per_query(
        initial in proptest::collection::vec((0i64..30, 0i64..8, 0i64..100), 0..20),
        ops in proptest::collection::vec(op(), 0..12),
        queries in proptest::collection::vec(
            (proptest::collection::vec((0usize..3, cmp_op(), 0i64..30), 0..3), 0u64..14), 1..10),
    ) {
        let (t, _) = history(&initial, &ops);
        let preds: Vec<Predicate> = queries
            .iter()
            .map(|(atoms, _)| Predicate::new(
                atoms.iter().map(|&(c, op, v)| Atom::new(c, op, Operand::Const(Value::Int(v)))).collect()))
            .collect();
        let filters: Vec<QueryFilter> = queries
            .iter()
            .zip(&preds)
            .enumerate()
            .map(|(i, ((_, snap), pred))| QueryFilter { qid: QueryId(i as u64), snapshot: *snap, pred, params: &[] })
            .collect();
        let mut stats = ScanStats::default();
        let shared = expand(&scan_filters(&t, &filters, &mut stats).unwrap());
        let mut separate = Vec::new();
        for f in &filters {
            separate.extend(expand(&scan_filters(&t, std::slice::from_ref(f), &mut ScanStats::default()).unwrap()));
        }
        separate.sort();
        prop_assert_eq!(shared, separate);
        prop_assert_eq!(stats.touched as usize, t.version_count());
    }

    #[test]
    fn join_methods_agree_with_per_query_nested_loops(outer in side(), inner in side()) {
        let (o, i) = (tuples(&outer, 0), tuples(&inner, 1));
        let opts = JoinOptions::default();
        let mut c = Counters::default();
        let hash = expand(&shared_hash_join(&o, &i, 0, 0, opts, &mut c).unwrap());
        let qid = expand(&shared_queryid_join(&o, &i, 0, 0, opts, &mut c).unwrap());
        let mut naive = Vec::new();
        for q in 0..6 {
            let q = QueryId(q);
            for a in o.iter().filter(|t| t.queries.contains(q)) {
                for b in i.iter().filter(|t| t.queries.contains(q)) {
                    if a.values[0] == b.values[0] {
                        let mut v = a.values.to_vec();
                        v.extend(b.values.iter().cloned());
                        naive.push((q, v));
                    }
                }
            }
        }
        naive.sort();
        prop_assert_eq!(&hash, &naive);
        prop_assert_eq!(&qid, &naive);
    }

    #[test]
    fn index_nested_loop_join_equals_hash_join(
        initial in proptest::collection::vec((0i64..30, 0i64..8, 0i64..100), 0..20),
        ops in proptest::collection::vec(op(), 0..10),
        outer in side(),
    ) {
        let (t, _) = history(&initial, &ops);
        let o = tuples(&outer, 1);
        let pred = Predicate::always();
        let filters: Vec<QueryFilter> = (0..6)
            .map(|q| QueryFilter { qid: QueryId(q), snapshot: OPEN - 1, pred: &pred, params: &[] })
            .collect();
        let inner = scan_filters(&t, &filters, &mut ScanStats::default()).unwrap();
        let mut c = Counters::default();
        let hash = expand(&shared_hash_join(&o, &inner, 0, 1, JoinOptions::default(), &mut c).unwrap());
        let inl = expand(&shared_index_nl_join(&o, 0, &t, 1, &filters, JoinOptions::default(), &mut c).unwrap());
        prop_assert_eq!(inl, hash);
    }

    #[test]
    fn shared_sort_orders_every_query(input in side(), desc in any::<bool>()) {
        let input = tuples(&input, 0);
        let dir = if desc { SortDir::Desc } else { SortDir::Asc };
        let sorted = shared_sort(input.clone(), 1, dir, &mut Counters::default());
        for q in 0..6 {
            let q = QueryId(q);
            let mine: Vec<Vec<Value>> = sorted
                .iter()
                .filter(|t| t.queries.contains(q))
                .map(|t| t.values.to_vec())
                .collect();
            let alone: Vec<Vec<Value>> = shared_sort(per_query(&input, q), 1, dir, &mut Counters::default())
                .iter()
                .map(|t| t.values.to_vec())
                .collect();
            prop_assert_eq!(mine, alone);
        }
    }

    #[test]
    fn shared_groupby_equals_per_query_groupby(input in side(), threshold in 0i64..3) {
        let input = tuples(&input, 0);
        let aggs = [
            AggSpec { func: AggFunc::Count, arg: None },
            AggSpec { func: AggFunc::Sum, arg: Some(1) },
            AggSpec { func: AggFunc::Max, arg: Some(1) },
        ];
        let having: BTreeMap<QueryId, Predicate> =
            (0..6).map(|q| (QueryId(q), atom(1, CmpOp::Gt, threshold + q as i64 % 2))).collect();
        let shared = expand(&shared_groupby(&input, &[0], &aggs, &having, &mut Counters::default()).unwrap());
        let mut separate = Vec::new();
        for (q, h) in &having {
            let one = BTreeMap::from([(*q, h.clone())]);
            separate.extend(expand(
                &shared_groupby(&per_query(&input, *q), &[0], &aggs, &one, &mut Counters::default()).unwrap(),
            ));
        }
        separate.sort();
        prop_assert_eq!(shared, separate);
    }

    #[test]
    fn queryset_algebra_matches_sets(
        a in proptest::collection::btree_set(0u64..100, 0..30),
        b in proptest::collection::btree_set(0u64..100, 0..30),
    ) {
        let qa = QuerySet::from_ids(a.iter().map(|&q| QueryId(q)));
        let qb = QuerySet::from_ids(b.iter().map(|&q| QueryId(q)));
        let ids = |s: &QuerySet| s.iter().map(|q| q.0).collect::<BTreeSet<u64>>();
        prop_assert_eq!(ids(&qa.union(&qb)), a.union(&b).cloned().collect::<BTreeSet<_>>());
        prop_assert_eq!(ids(&qa.intersect(&qb)), a.intersection(&b).cloned().collect::<BTreeSet<_>>());
        prop_assert_eq!(qa.is_subset_of(&qb), a.is_subset(&b));
    }
}
