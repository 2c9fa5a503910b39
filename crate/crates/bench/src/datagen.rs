//! Synthetic bookstore: users, authors, items, orders and order lines,
//! generated from a seed.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::Context;
use batchdb::datamodel::{Date, Value};
use batchdb::frontend::Catalog;
use batchdb::storage::{write_csv, Database, OPEN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BOOKSTORE_DDL: &str = "\
CREATE TABLE USERS (U_ID INT PRIMARY KEY, U_NAME VARCHAR, U_COUNTRY VARCHAR, U_BALANCE FLOAT, U_SINCE DATE);
CREATE TABLE AUTHORS (A_ID INT PRIMARY KEY, A_NAME VARCHAR, A_COUNTRY VARCHAR);
CREATE TABLE ITEMS (I_ID INT PRIMARY KEY, I_TITLE VARCHAR, I_A_ID INT, I_SUBJECT VARCHAR, I_PRICE FLOAT, I_STOCK INT, I_PUB_DATE DATE);
CREATE TABLE ORDERS (O_ID INT PRIMARY KEY, O_U_ID INT, O_DATE DATE, O_TOTAL FLOAT, O_STATUS VARCHAR);
CREATE TABLE ORDER_LINES (OL_ID INT PRIMARY KEY, OL_O_ID INT, OL_I_ID INT, OL_QTY INT);
CREATE INDEX ON ORDERS (O_U_ID);
CREATE INDEX ON ORDER_LINES (OL_O_ID);
CREATE INDEX ON ITEMS (I_A_ID);
";

pub const COUNTRIES: [&str; 8] = ["AT", "CH", "DE", "ES", "FR", "IT", "NL", "UK"];
pub const SUBJECTS: [&str; 12] = [
    "ARTS", "BIOGRAPHIES", "BUSINESS", "CHILDREN", "COMPUTERS", "COOKING", "HEALTH", "HISTORY", "MYSTERY",
    "RELIGION", "SCIENCE", "TRAVEL",
];
pub const STATUSES: [&str; 4] = ["CANCELLED", "DELIVERED", "PENDING", "SHIPPED"];

/// Dates fall in `[FIRST_DAY, FIRST_DAY + SPAN_DAYS)`.
pub const FIRST_DAY: &str = "2005-01-01";
pub const SPAN_DAYS: i32 = 8 * 365;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    pub users: i64,
    pub authors: i64,
    pub items: i64,
    pub orders: i64,
    pub order_lines: i64,
}

impl Scale {
    /// Table sizes derived from the user count.
    pub fn users(n: usize) -> Scale {
        let n = n.max(1) as i64;
        Scale {
            users: n,
            authors: (n / 4).max(1),
            items: n,
            orders: 2 * n,
            order_lines: 5 * n,
        }
    }
}

fn date(rng: &mut ChaCha8Rng) -> Value {
    let first = Date::parse(FIRST_DAY).expect("constant");
    Value::Date(Date(first.0 + rng.random_range(0..SPAN_DAYS)))
}

fn cents(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Value {
    Value::Float(rng.random_range(lo..hi) as f64 / 100.0)
}

fn pick(rng: &mut ChaCha8Rng, from: &[&str]) -> Value {
    Value::str(from[rng.random_range(0..from.len())])
}

pub fn generate(scale: Scale, seed: u64) -> Database {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut db = Database::new(Catalog::parse(BOOKSTORE_DDL).expect("bookstore schema"));
    let users = (0..scale.users)
        .map(|i| {
            vec![
                Value::Int(i),
                Value::str(format!("user{i}")),
                pick(&mut rng, &COUNTRIES),
                cents(&mut rng, 0, 1_000_000),
                date(&mut rng),
            ]
        })
        .collect();
    let authors = (0..scale.authors)
        .map(|i| vec![Value::Int(i), Value::str(format!("author{i}")), pick(&mut rng, &COUNTRIES)])
        .collect();
    let items = (0..scale.items)
        .map(|i| {
            vec![
                Value::Int(i),
                Value::str(format!("title{i}")),
                Value::Int(rng.random_range(0..scale.authors)),
                pick(&mut rng, &SUBJECTS),
                cents(&mut rng, 100, 10_000),
                Value::Int(rng.random_range(0..100)),
                date(&mut rng),
            ]
        })
        .collect();
    let orders = (0..scale.orders)
        .map(|i| {
            vec![
                Value::Int(i),
                Value::Int(rng.random_range(0..scale.users)),
                date(&mut rng),
                cents(&mut rng, 100, 50_000),
                pick(&mut rng, &STATUSES),
            ]
        })
        .collect();
    let lines = (0..scale.order_lines)
        .map(|i| {
            vec![
                Value::Int(i),
                Value::Int(rng.random_range(0..scale.orders)),
                Value::Int(rng.random_range(0..scale.items)),
                Value::Int(rng.random_range(1..10)),
            ]
        })
        .collect();
    for (t, rows) in [
        ("USERS", users),
        ("AUTHORS", authors),
        ("ITEMS", items),
        ("ORDERS", orders),
        ("ORDER_LINES", lines),
    ] {
        db.insert_rows(t, rows).expect("generated rows fit the schema");
    }
    db
}

/// Writes `catalog.sql` and one CSV per table into `dir`.
pub fn write_dir(db: &Database, ddl: &str, dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("catalog.sql"), ddl)?;
    for t in db.tables() {
        let path = dir.join(format!("{}.csv", t.name()));
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_csv(t, OPEN - 1, BufWriter::new(f))?;
    }
    Ok(())
}
