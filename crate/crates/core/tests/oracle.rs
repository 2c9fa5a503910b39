//! Randomized equivalence between the batched engine and the
//! query-at-a-time interpreter applying the same operations in
//! arrival order.

mod common;

use std::time::Duration;

use batchdb::datamodel::Value;
use batchdb::frontend::StatementId;
use batchdb::runtime::{Engine, EngineConfig, Interpreter, Outcome};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run(seed: u64, ops: usize, writes: bool, workers: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let engine = Engine::open(database(seed, &SMALL), EngineConfig::manual().with_workers(workers)).unwrap();
    let ids = engine.register(&STATEMENTS).unwrap();
    let mut interp = Interpreter::new(database(seed, &SMALL));
    interp.register(&STATEMENTS).unwrap();

    let mut next_order = SMALL.orders;
    let mut admitted: Vec<(StatementId, Vec<Value>, u64, batchdb::datamodel::QueryId)> = Vec::new();
    for _ in 0..ops {
        let (stmt, params) = random_op(&mut rng, &SMALL, &mut next_order, writes);
        let a = engine.admit(ids[stmt], params.clone()).unwrap();
        admitted.push((ids[stmt], params, a.ts, a.qid));
        if rng.random_bool(0.08) {
            engine.run_cycle().unwrap();
        }
    }
    engine.drain().unwrap();

    let mut kinds = [0usize; STATEMENTS.len()];
    for (stmt, params, ts, qid) in admitted {
        let p = interp.statement(stmt).unwrap().clone();
        let expected = interp.execute(stmt, params.clone(), ts).unwrap_or_else(Outcome::Failed);
        let got = engine.wait(qid, Duration::from_secs(5)).expect("result delivered");
        assert_eq!(got.arrival, ts);
        let (e, g) = (normalize(&p, &expected), normalize(&p, &got.outcome));
        assert_eq!(g, e, "seed {seed} ts {ts} statement {} params {params:?}", STATEMENTS[stmt.0]);
        if matches!(e, Outcome::Rows(ref r) if !r.is_empty()) || matches!(e, Outcome::Written(n) if n > 0) {
            kinds[stmt.0] += 1;
        }
    }
    for t in ["CUSTOMERS", "ORDERS", "ITEMS"] {
        let mut a = engine.table_rows(t).unwrap();
        let mut b: Vec<Vec<Value>> = interp
            .database()
            .table_by_name(t)
            .unwrap()
            .snapshot(u64::MAX - 1)
            .into_iter()
            .map(|(_, v)| v.to_vec())
            .collect();
        a.sort();
        b.sort();
        assert_eq!(a, b, "final state of {t}");
    }
    if ops >= 400 {
        let covered = kinds.iter().filter(|&&k| k > 0).count();
        let want = if writes { STATEMENTS.len() - 2 } else { 7 };
        assert!(covered >= want, "workload only produced output for {covered} statements: {kinds:?}");
    }
}

#[test]
fn read_only_workload_matches_interpreter() {
    for seed in 0..4 {
        run(seed, 400, false, 1);
    }
}

#[test]
fn mixed_workload_matches_interpreter() {
    for seed in 10..16 {
        run(seed, 500, true, 3);
    }
}

#[test]
fn single_worker_and_many_workers_agree() {
    run(99, 300, true, 1);
    run(99, 300, true, 8);
}
