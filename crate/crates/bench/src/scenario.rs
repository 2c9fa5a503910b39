//! Scripted scenario: five users and two overlapping range queries sharing
//! one table access.

use std::collections::BTreeSet;
use std::time::Duration;

use batchdb::datamodel::{Row, Value};
use batchdb::frontend::Catalog;
use batchdb::runtime::{Engine, EngineConfig};
use batchdb::storage::Database;

pub const USERS_DDL: &str = "CREATE TABLE USERS (NAME VARCHAR PRIMARY KEY, ACCOUNT INT, BIRTHDATE DATE);
CREATE INDEX ON USERS(ACCOUNT);";

pub const USERS: [(&str, i64, &str); 5] = [
    ("John Smith", 3000, "1980.03.05"),
    ("Kate Johnson", 800, "1976.04.11"),
    ("Bill Harisson", 1230, "1978.03.02"),
    ("Nick Lee", 500, "1992.08.11"),
    ("James Meyer", 5000, "1984.05.01"),
];

pub const QUERY_A: &str = "SELECT * FROM USERS WHERE BIRTHDATE > 1980.01.01 ORDER BY NAME";
pub const QUERY_B: &str = "SELECT * FROM USERS WHERE ACCOUNT > 1000 ORDER BY NAME";

/// Queries interested in each row of `USERS`, in load order.
pub const EXPECTED_MEMBERSHIP: [&[char]; 5] = [&['A', 'B'], &[], &['B'], &['A'], &['A', 'B']];

pub fn users_database() -> Database {
    let mut db = Database::new(Catalog::parse(USERS_DDL).expect("schema"));
    let rows = USERS
        .iter()
        .map(|(n, a, b)| vec![Value::str(n), Value::Int(*a), Value::date(b).expect("date")])
        .collect();
    db.insert_rows("USERS", rows).expect("rows");
    db
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsersOutcome {
    pub a: Vec<Row>,
    pub b: Vec<Row>,
    pub membership: Vec<BTreeSet<char>>,
    /// Subqueries queued at the USERS table in the shared cycle.
    pub table_queue: usize,
    /// Row versions the cycle visited.
    pub touched: u64,
}

/// Runs both queries in one cycle of the shared engine.
pub fn run_users() -> anyhow::Result<UsersOutcome> {
    let engine = Engine::open(users_database(), EngineConfig::manual())?;
    let ids = engine.register(&[QUERY_A, QUERY_B])?;
    let a = engine.admit(ids[0], vec![])?;
    let b = engine.admit(ids[1], vec![])?;
    let batch = engine.heartbeat()?;
    let table_queue = batch
        .node_queues()
        .into_iter()
        .find(|(n, _)| engine.node_name(*n).is_some_and(|s| s.contains("table(USERS)")))
        .map_or(0, |(_, q)| q);
    engine.execute_batch(batch)?;
    let wait = Duration::from_secs(10);
    let a = engine.wait(a.qid, wait).ok_or_else(|| anyhow::anyhow!("no result for A"))?;
    let b = engine.wait(b.qid, wait).ok_or_else(|| anyhow::anyhow!("no result for B"))?;
    let (a, b) = (a.rows()?.to_vec(), b.rows()?.to_vec());
    let membership = USERS
        .iter()
        .map(|(name, ..)| {
            let has = |rows: &[Row]| rows.iter().any(|r| r[0] == Value::str(name));
            let mut s = BTreeSet::new();
            if has(&a) {
                s.insert('A');
            }
            if has(&b) {
                s.insert('B');
            }
            s
        })
        .collect();
    let touched = engine.metrics().totals.touched;
    Ok(UsersOutcome {
        a,
        b,
        membership,
        table_queue,
        touched,
    })
}

/// Checks membership, per-query name order and the shared table access.
pub fn check_users(o: &UsersOutcome) -> Result<(), String> {
    let expected: Vec<BTreeSet<char>> = EXPECTED_MEMBERSHIP.iter().map(|s| s.iter().copied().collect()).collect();
    if o.membership != expected {
        return Err(format!("membership {:?}, expected {expected:?}", o.membership));
    }
    let names = |rows: &[Row]| -> Vec<String> { rows.iter().map(|r| r[0].as_str().unwrap_or("").to_string()).collect() };
    let (a, b) = (names(&o.a), names(&o.b));
    if a != ["James Meyer", "John Smith", "Nick Lee"] {
        return Err(format!("query A returned {a:?}"));
    }
    if b != ["Bill Harisson", "James Meyer", "John Smith"] {
        return Err(format!("query B returned {b:?}"));
    }
    if o.table_queue != 2 || o.touched != USERS.len() as u64 {
        return Err(format!(
            "expected one shared scan for both queries; queue {} touched {}",
            o.table_queue, o.touched
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn users_scenario_holds() {
        let o = run_users().unwrap();
        check_users(&o).unwrap();
    }
}
