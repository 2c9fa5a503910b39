mod common;

use std::collections::BTreeSet;
use std::time::Duration;

use batchdb::datamodel::Value;
use batchdb::frontend::Catalog;
use batchdb::runtime::{Engine, EngineConfig, FaultConfig, Interpreter, Outcome};
use batchdb::storage::Database;
use batchdb::Error;
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const WAIT: Duration = Duration::from_secs(10);

fn users() -> Database {
    let catalog = Catalog::parse(
        "CREATE TABLE USERS (NAME VARCHAR PRIMARY KEY, ACCOUNT INT, BIRTHDATE DATE);
         CREATE INDEX ON USERS(ACCOUNT);",
    )
    .unwrap();
    let mut db = Database::new(catalog);
    let rows = [
        ("John Smith", 3000, "1980.03.05"),
        ("Kate Johnson", 800, "1976.04.11"),
        ("Bill Harisson", 1230, "1978.03.02"),
        ("Nick Lee", 500, "1992.08.11"),
        ("James Meyer", 5000, "1984.05.01"),
    ]
    .iter()
    .map(|(n, a, b)| vec![Value::str(n), Value::Int(*a), Value::date(b).unwrap()])
    .collect();
    db.insert_rows("USERS", rows).unwrap();
    db
}

const USER_QUERIES: [&str; 4] = [
    "SELECT * FROM USERS WHERE BIRTHDATE > ? ORDER BY NAME",
    "SELECT * FROM USERS WHERE ACCOUNT > ? ORDER BY NAME",
    "SELECT NAME FROM USERS WHERE ACCOUNT > ? ORDER BY ACCOUNT DESC LIMIT ?",
    "UPDATE USERS SET ACCOUNT = ? WHERE NAME = ?",
];

fn names(rows: &[Vec<Value>]) -> Vec<String> {
    rows.iter().map(|r| r[0].as_str().unwrap().to_string()).collect()
}

#[test]
fn users_batch_answers_both_queries_in_one_pass() {
    let engine = Engine::open(users(), EngineConfig::manual()).unwrap();
    let ids = engine.register(&USER_QUERIES).unwrap();
    let a = engine.admit(ids[0], vec![Value::date("1980.01.01").unwrap()]).unwrap();
    let b = engine.admit(ids[1], vec![Value::Int(1000)]).unwrap();
    let top = engine.admit(ids[2], vec![Value::Int(0), Value::Int(1)]).unwrap();
    assert!(a.ts < b.ts && b.ts < top.ts);

    let batch = engine.heartbeat().unwrap();
    assert_eq!(batch.len(), 3);
    let queues = batch.node_queues();
    let table = queues
        .iter()
        .find(|(n, _)| engine.node_name(*n).unwrap().contains("table(USERS)"))
        .unwrap();
    assert_eq!(table.1, 3, "all three queries share one table access");
    engine.execute_batch(batch).unwrap();

    let ra = engine.wait(a.qid, WAIT).unwrap();
    let rb = engine.wait(b.qid, WAIT).unwrap();
    let rt = engine.wait(top.qid, WAIT).unwrap();
    assert_eq!(ra.cycle, rb.cycle);
    assert_eq!(names(ra.rows().unwrap()), ["James Meyer", "John Smith", "Nick Lee"]);
    assert_eq!(names(rb.rows().unwrap()), ["Bill Harisson", "James Meyer", "John Smith"]);
    assert_eq!(names(rt.rows().unwrap()), ["James Meyer"]);

    // Per-row membership: each base row belongs to the queries whose
    // predicate it satisfies.
    let in_a: BTreeSet<String> = names(ra.rows().unwrap()).into_iter().collect();
    let in_b: BTreeSet<String> = names(rb.rows().unwrap()).into_iter().collect();
    let membership: Vec<(bool, bool)> = ["John Smith", "Kate Johnson", "Bill Harisson", "Nick Lee", "James Meyer"]
        .iter()
        .map(|n| (in_a.contains(*n), in_b.contains(*n)))
        .collect();
    assert_eq!(
        membership,
        [(true, true), (false, false), (false, true), (true, false), (true, true)]
    );
    assert!(engine.metrics().totals.touched <= 5, "the table is scanned once per batch");
}

#[test]
fn reads_see_earlier_writes_of_the_same_batch_only() {
    let engine = Engine::open(users(), EngineConfig::manual()).unwrap();
    let ids = engine.register(&USER_QUERIES).unwrap();
    let before = engine.admit(ids[1], vec![Value::Int(1000)]).unwrap();
    let w = engine
        .admit(ids[3], vec![Value::Int(9000), Value::str("Kate Johnson")])
        .unwrap();
    let after = engine.admit(ids[1], vec![Value::Int(1000)]).unwrap();
    assert_eq!(engine.run_cycle().unwrap(), 3);

    assert_eq!(engine.wait(w.qid, WAIT).unwrap().outcome, Outcome::Written(1));
    let before = names(engine.wait(before.qid, WAIT).unwrap().rows().unwrap());
    let after = names(engine.wait(after.qid, WAIT).unwrap().rows().unwrap());
    assert!(!before.contains(&"Kate Johnson".to_string()));
    assert!(after.contains(&"Kate Johnson".to_string()));
}

#[test]
fn every_operation_gets_exactly_one_result() {
    let engine = Engine::open(database(3, &SMALL), EngineConfig::manual().with_max_batch(37)).unwrap();
    let ids = engine.register(&STATEMENTS).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut next = SMALL.orders;
    let mut qids = Vec::new();
    for _ in 0..300 {
        let (s, p) = random_op(&mut rng, &SMALL, &mut next, true);
        qids.push(engine.admit(ids[s], p).unwrap().qid);
    }
    engine.drain().unwrap();
    let m = engine.metrics();
    assert_eq!(m.operations, 300);
    assert!(m.cycles >= 300 / 37);
    for q in &qids {
        assert!(engine.poll(*q).is_some(), "{q:?} has a result");
        assert!(engine.poll(*q).is_none(), "{q:?} is delivered once");
    }
}

fn run_workload(seed: u64, workers: usize) -> Vec<Outcome> {
    let engine = Engine::open(database(seed, &SMALL), EngineConfig::manual().with_workers(workers)).unwrap();
    let ids = engine.register(&STATEMENTS).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = SMALL.orders;
    let mut qids = Vec::new();
    for i in 0..200 {
        let (s, p) = random_op(&mut rng, &SMALL, &mut next, true);
        qids.push(engine.admit(ids[s], p).unwrap().qid);
        if i % 40 == 39 {
            engine.run_cycle().unwrap();
        }
    }
    engine.drain().unwrap();
    qids.iter().map(|q| engine.wait(*q, WAIT).unwrap().outcome).collect()
}

#[test]
fn results_are_deterministic_across_runs_and_worker_counts() {
    let first = run_workload(21, 2);
    assert_eq!(first, run_workload(21, 2));
    assert_eq!(first, run_workload(21, 5));
}

#[test]
fn skipping_the_join_intersection_leaks_rows_between_queries() {
    let seed = 4;
    let faulty = Engine::open(
        database(seed, &SMALL),
        EngineConfig::manual().with_fault(FaultConfig {
            skip_join_intersection: true,
        }),
    )
    .unwrap();
    let ids = faulty.register(&STATEMENTS).unwrap();
    let mut interp = Interpreter::new(database(seed, &SMALL));
    interp.register(&STATEMENTS).unwrap();
    // Two join queries with different countries in one batch.
    let ops: Vec<(usize, Vec<Value>)> = COUNTRIES.iter().map(|c| (2, vec![Value::str(c)])).collect();
    let mut admitted = Vec::new();
    for (s, p) in &ops {
        admitted.push(faulty.admit(ids[*s], p.clone()).unwrap());
    }
    faulty.drain().unwrap();
    let mut mismatches = 0;
    for ((s, p), a) in ops.into_iter().zip(admitted) {
        let prepared = interp.statement(ids[s]).unwrap().clone();
        let expected = normalize(&prepared, &interp.execute(ids[s], p, a.ts).unwrap());
        let got = normalize(&prepared, &faulty.wait(a.qid, WAIT).unwrap().outcome);
        if got != expected {
            mismatches += 1;
        }
    }
    assert!(mismatches > 0, "the injected fault must be observable");
}

#[test]
fn shutdown_fails_pending_and_rejects_new_work() {
    let engine = Engine::open(users(), EngineConfig::manual()).unwrap();
    let ids = engine.register(&USER_QUERIES).unwrap();
    let a = engine.admit(ids[1], vec![Value::Int(0)]).unwrap();
    engine.shutdown();
    assert_eq!(engine.wait(a.qid, WAIT).unwrap().outcome, Outcome::Failed(Error::ShutDown));
    assert_eq!(engine.admit(ids[1], vec![Value::Int(0)]), Err(Error::ShutDown));
}

#[test]
fn admission_validates_before_queueing() {
    let engine = Engine::open(users(), EngineConfig::manual()).unwrap();
    assert_eq!(
        engine.admit(batchdb::frontend::StatementId(0), vec![]).unwrap_err(),
        Error::NotRegistered
    );
    let ids = engine.register(&USER_QUERIES).unwrap();
    assert!(engine.register(&USER_QUERIES).is_err());
    assert!(engine.admit(ids[1], vec![]).is_err());
    assert!(engine.admit(ids[1], vec![Value::str("x")]).is_err());
    assert_eq!(engine.pending(), 0);
}

#[test]
fn auto_heartbeat_delivers_without_manual_cycles() {
    let engine = Engine::open(users(), EngineConfig::auto(Duration::from_millis(2))).unwrap();
    let ids = engine.register(&USER_QUERIES).unwrap();
    let qids: Vec<_> = (0..50)
        .map(|i| engine.admit(ids[1], vec![Value::Int(i * 100)]).unwrap().qid)
        .collect();
    for q in qids {
        let env = engine.wait(q, WAIT).expect("auto cycle ran");
        assert!(env.is_ok());
        assert!(env.latency() < WAIT);
    }
    assert!(engine.metrics().cycles >= 1);
}

#[test]
fn old_versions_are_collected_after_each_cycle() {
    let engine = Engine::open(users(), EngineConfig::manual()).unwrap();
    let ids = engine.register(&USER_QUERIES).unwrap();
    for i in 0..20 {
        engine
            .admit(ids[3], vec![Value::Int(i), Value::str("Nick Lee")])
            .unwrap();
        engine.run_cycle().unwrap();
    }
    assert_eq!(engine.version_counts(), vec![5]);
    let rows = engine.table_rows("USERS").unwrap();
    let nick = rows.iter().find(|r| r[0] == Value::str("Nick Lee")).unwrap();
    assert_eq!(nick[1], Value::Int(19));
}

#[test]
fn unregistered_statements_run_alone_at_their_snapshot() {
    let e = Engine::open(users(), EngineConfig::manual()).unwrap();
    let ids = e.register(&["UPDATE USERS SET ACCOUNT = ? WHERE NAME = ?"]).unwrap();
    let top = "SELECT NAME, ACCOUNT FROM USERS WHERE ACCOUNT > ? ORDER BY ACCOUNT DESC LIMIT ?";
    let mut interp = Interpreter::new(users());
    let iid = interp.register(&["UPDATE USERS SET ACCOUNT = ? WHERE NAME = ?"]).unwrap()[0];

    let ops: Vec<(Option<&str>, Vec<Value>)> = vec![
        (Some(top), vec![Value::Int(0), Value::Int(2)]),
        (None, vec![Value::Int(9000), Value::str("Nick Lee")]),
        (Some(top), vec![Value::Int(0), Value::Int(2)]),
        (Some("DELETE FROM USERS WHERE NAME = ?"), vec![Value::str("Nick Lee")]),
        (Some("SELECT COUNT(*) FROM USERS GROUP BY BIRTHDATE"), vec![]),
        (Some(top), vec![Value::Int(0), Value::Int(2)]),
    ];
    let mut admitted = Vec::new();
    for (sql, params) in &ops {
        admitted.push(match sql {
            Some(sql) => e.admit_sql(sql, params.clone()).unwrap(),
            None => e.admit(ids[0], params.clone()).unwrap(),
        });
    }
    assert_eq!(e.run_cycle().unwrap(), ops.len());
    let got: Vec<_> = admitted.iter().map(|a| e.poll(a.qid).unwrap()).collect();
    assert_eq!(got[0].statement, got[2].statement);
    for (((sql, params), a), env) in ops.iter().zip(&admitted).zip(&got) {
        let id = match sql {
            Some(sql) => interp.prepare_sql(sql).unwrap(),
            None => iid,
        };
        assert_eq!(env.outcome, interp.execute(id, params.clone(), a.ts).unwrap(), "{sql:?}");
    }
    let top2 = |a: (&str, i64), b: (&str, i64)| {
        Outcome::Rows(vec![vec![Value::str(a.0), Value::Int(a.1)], vec![Value::str(b.0), Value::Int(b.1)]])
    };
    assert_eq!(got[0].outcome, top2(("James Meyer", 5000), ("John Smith", 3000)));
    assert_eq!(got[2].outcome, top2(("Nick Lee", 9000), ("James Meyer", 5000)));
    assert_eq!(got[5].outcome, top2(("James Meyer", 5000), ("John Smith", 3000)));
    assert!(e.metrics().nodes.contains_key("adhoc"));
    assert!(matches!(e.admit_sql("SELECT NOPE FROM USERS", vec![]), Err(Error::UnknownColumn(_))));
}
