#![allow(dead_code)]

use batchdb::datamodel::{Date, Value};
use batchdb::frontend::{Catalog, PreparedStatement};
use batchdb::runtime::Outcome;
use batchdb::storage::Database;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DDL: &str = "
CREATE TABLE CUSTOMERS (C_ID INT PRIMARY KEY, C_NAME VARCHAR, C_COUNTRY VARCHAR, C_BALANCE FLOAT);
CREATE TABLE ORDERS (O_ID INT PRIMARY KEY, O_C_ID INT, O_ITEM INT, O_QTY INT, O_DATE DATE);
CREATE TABLE ITEMS (I_ID INT PRIMARY KEY, I_CAT VARCHAR, I_PRICE FLOAT, I_STOCK INT);
CREATE INDEX ON ORDERS (O_C_ID);
";

pub const COUNTRIES: [&str; 5] = ["CH", "DE", "FR", "IT", "AT"];
pub const CATEGORIES: [&str; 6] = ["ARTS", "BOOKS", "COOKING", "HISTORY", "MUSIC", "TRAVEL"];

/// Statements covering every plan shape: shared scan, index probe, hash,
/// index nested-loop and query-id joins, filters, group-by with HAVING,
/// sort, top-n and all three writes.
pub const STATEMENTS: [&str; 15] = [
    "SELECT C_NAME, C_BALANCE FROM CUSTOMERS WHERE C_COUNTRY = ? AND C_BALANCE > ?",
    "SELECT C_NAME FROM CUSTOMERS WHERE C_ID = ?",
    "SELECT C.C_NAME, O.O_QTY FROM CUSTOMERS C, ORDERS O WHERE C.C_ID = O.O_C_ID AND C.C_COUNTRY = ?",
    "SELECT O.O_ID, I.I_PRICE FROM ORDERS O, ITEMS I WHERE O.O_ITEM = I.I_ID AND O.O_ID = ?",
    "SELECT C.C_COUNTRY, SUM(O.O_QTY), COUNT(*) FROM CUSTOMERS C, ORDERS O WHERE C.C_ID = O.O_C_ID AND O.O_QTY > ? GROUP BY C.C_COUNTRY",
    "SELECT I_ID, I_PRICE FROM ITEMS WHERE I_CAT = ? ORDER BY I_PRICE DESC",
    "SELECT O_ID, O_QTY FROM ORDERS WHERE O_DATE > ? ORDER BY O_QTY LIMIT ?",
    "SELECT I_CAT, AVG(I_PRICE), MAX(I_STOCK), COUNT(*) FROM ITEMS GROUP BY I_CAT HAVING COUNT(*) > ?",
    "INSERT INTO ORDERS VALUES (?, ?, ?, ?, ?)",
    "UPDATE ITEMS SET I_PRICE = ? WHERE I_ID = ?",
    "DELETE FROM ORDERS WHERE O_ID = ?",
    "SELECT I.I_ID, O.O_ID FROM ITEMS I, ORDERS O WHERE I.I_STOCK = O.O_QTY AND I.I_ID = ? AND O.O_ID = ?",
    "SELECT C.C_NAME, I.I_CAT FROM CUSTOMERS C, ORDERS O, ITEMS I WHERE C.C_ID = O.O_C_ID AND O.O_ITEM = I.I_ID AND I.I_PRICE < ?",
    "SELECT O_ID FROM ORDERS WHERE O_ITEM = O_QTY",
    "SELECT C_NAME, C_ID FROM CUSTOMERS WHERE C_NAME LIKE ? ORDER BY C_NAME",
];

pub struct Sizes {
    pub customers: i64,
    pub orders: i64,
    pub items: i64,
}

pub const SMALL: Sizes = Sizes {
    customers: 200,
    orders: 1000,
    items: 100,
};

fn date(rng: &mut ChaCha8Rng) -> Value {
    Value::Date(Date::from_ymd(2010 + rng.random_range(0..3), rng.random_range(1..13), rng.random_range(1..29)).unwrap())
}

pub fn database(seed: u64, sizes: &Sizes) -> Database {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut db = Database::new(Catalog::parse(DDL).unwrap());
    let customers = (0..sizes.customers)
        .map(|i| {
            vec![
                Value::Int(i),
                Value::str(format!("c{i}")),
                Value::str(COUNTRIES[rng.random_range(0..COUNTRIES.len())]),
                Value::Float((rng.random_range(0..100_000) as f64) / 100.0),
            ]
        })
        .collect();
    db.insert_rows("CUSTOMERS", customers).unwrap();
    let orders = (0..sizes.orders)
        .map(|i| {
            vec![
                Value::Int(i),
                Value::Int(rng.random_range(0..sizes.customers)),
                Value::Int(rng.random_range(0..sizes.items)),
                Value::Int(rng.random_range(1..20)),
                date(&mut rng),
            ]
        })
        .collect();
    db.insert_rows("ORDERS", orders).unwrap();
    let items = (0..sizes.items)
        .map(|i| {
            vec![
                Value::Int(i),
                Value::str(CATEGORIES[rng.random_range(0..CATEGORIES.len())]),
                Value::Float(rng.random_range(1..500) as f64 / 4.0),
                Value::Int(rng.random_range(0..20)),
            ]
        })
        .collect();
    db.insert_rows("ITEMS", items).unwrap();
    db
}

/// Random statement and parameters; `next_order` feeds fresh order ids.
pub fn random_op(rng: &mut ChaCha8Rng, sizes: &Sizes, next_order: &mut i64, writes: bool) -> (usize, Vec<Value>) {
    let max = if writes { STATEMENTS.len() } else { 8 };
    let mut stmt = rng.random_range(0..max);
    if !writes && stmt >= 8 {
        stmt = 0;
    }
    let params = match stmt {
        0 => vec![
            Value::str(COUNTRIES[rng.random_range(0..COUNTRIES.len())]),
            Value::Float(rng.random_range(0..1000) as f64),
        ],
        1 => vec![Value::Int(rng.random_range(-5..sizes.customers + 5))],
        2 => vec![Value::str(COUNTRIES[rng.random_range(0..COUNTRIES.len())])],
        3 => vec![Value::Int(rng.random_range(0..*next_order + 5))],
        4 => vec![Value::Int(rng.random_range(0..20))],
        5 => vec![Value::str(CATEGORIES[rng.random_range(0..CATEGORIES.len())])],
        6 => vec![date(rng), Value::Int(rng.random_range(1..30))],
        7 => vec![Value::Int(rng.random_range(0..25))],
        8 => {
            let id = if rng.random_bool(0.05) { rng.random_range(0..*next_order) } else { *next_order };
            *next_order = (*next_order).max(id + 1);
            vec![
                Value::Int(id),
                Value::Int(rng.random_range(0..sizes.customers)),
                Value::Int(rng.random_range(0..sizes.items)),
                Value::Int(rng.random_range(1..20)),
                date(rng),
            ]
        }
        9 => vec![
            Value::Float(rng.random_range(1..500) as f64 / 4.0),
            Value::Int(rng.random_range(0..sizes.items)),
        ],
        10 => vec![Value::Int(rng.random_range(0..*next_order))],
        11 => vec![
            Value::Int(rng.random_range(0..sizes.items)),
            Value::Int(rng.random_range(0..*next_order)),
        ],
        12 => vec![Value::Float(rng.random_range(1..40) as f64)],
        13 => vec![],
        _ => vec![Value::str(format!("c{}%", rng.random_range(0..30)))],
    };
    (stmt, params)
}

/// Unordered results compare as multisets.
pub fn normalize(p: &PreparedStatement, o: &Outcome) -> Outcome {
    match o {
        Outcome::Rows(r) if !p.has_order() => {
            let mut r = r.clone();
            r.sort();
            Outcome::Rows(r)
        }
        other => other.clone(),
    }
}
