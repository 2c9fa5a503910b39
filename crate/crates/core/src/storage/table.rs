use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use smallvec::SmallVec;

use crate::datamodel::{ArrivalTimestamp, CmpOp, Predicate, RowId, Schema, TableId, Value};
use crate::error::{Error, Result};
use crate::frontend::TableDef;

/// `valid_to` of a version that has not been superseded.
pub const OPEN: ArrivalTimestamp = ArrivalTimestamp::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct Version {
    pub values: Arc<[Value]>,
    pub valid_from: ArrivalTimestamp,
    pub valid_to: ArrivalTimestamp,
}

impl Version {
    /// Visible to a reader whose snapshot is `s`.
    #[inline]
    pub fn visible(&self, s: ArrivalTimestamp) -> bool {
        self.valid_from <= s && s < self.valid_to
    }

    pub fn is_open(&self) -> bool {
        self.valid_to == OPEN
    }
}

/// Fully bound write statement against one table.
#[derive(Debug, Clone, PartialEq)]
pub enum WriteOp {
    Insert(Vec<Vec<Value>>),
    Update {
        set: Vec<(usize, Value)>,
        pred: Predicate,
    },
    Delete {
        pred: Predicate,
    },
}

type RowList = SmallVec<[RowId; 1]>;

#[derive(Debug, Clone)]
struct Index {
    column: usize,
    map: BTreeMap<Value, RowList>,
}

impl Index {
    fn add(&mut self, key: &Value, row: RowId) {
        if key.is_null() {
            return;
        }
        let rows = self.map.entry(key.clone()).or_default();
        if let Err(at) = rows.binary_search(&row) {
            rows.insert(at, row);
        }
    }

    fn remove(&mut self, key: &Value, row: RowId) {
        if let Some(rows) = self.map.get_mut(key) {
            if let Ok(at) = rows.binary_search(&row) {
                rows.remove(at);
            }
            if rows.is_empty() {
                self.map.remove(key);
            }
        }
    }
}

/// One table: a version chain per row id plus B-tree indexes over every
/// retained version.
#[derive(Debug, Clone)]
pub struct TableStore {
    id: TableId,
    name: String,
    schema: Arc<Schema>,
    chains: Vec<Vec<Version>>,
    indexes: Vec<Index>,
    dirty: BTreeSet<RowId>,
    last_write: ArrivalTimestamp,
}

/// Builds a table whose rows are all valid from timestamp 0.
pub fn load_table(def: &TableDef, rows: Vec<Vec<Value>>) -> Result<TableStore> {
    let mut t = TableStore::empty(def);
    t.load_rows(rows)?;
    Ok(t)
}

impl TableStore {
    pub fn empty(def: &TableDef) -> TableStore {
        TableStore {
            id: def.id,
            name: def.name.clone(),
            schema: def.schema.clone(),
            chains: Vec::new(),
            indexes: def
                .indexes
                .iter()
                .map(|&column| Index {
                    column,
                    map: BTreeMap::new(),
                })
                .collect(),
            dirty: BTreeSet::new(),
            last_write: 0,
        }
    }

    pub fn id(&self) -> TableId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn last_write(&self) -> ArrivalTimestamp {
        self.last_write
    }

    /// Appends rows valid from timestamp 0; only allowed before any write.
    pub fn load_rows(&mut self, rows: Vec<Vec<Value>>) -> Result<()> {
        if self.last_write != 0 {
            return Err(Error::OutOfOrderWrite {
                last: self.last_write,
                ts: 0,
            });
        }
        let first = self.chains.len();
        for (i, row) in rows.iter().enumerate() {
            self.schema.check_row(row).map_err(|e| Error::RowType {
                row: first + i + 1,
                message: e.to_string(),
            })?;
        }
        self.check_new_keys(rows.iter(), &HashSet::new())?;
        for row in rows {
            self.push_row(row.into(), 0);
        }
        Ok(())
    }

    fn push_row(&mut self, values: Arc<[Value]>, ts: ArrivalTimestamp) {
        let row = RowId(self.chains.len() as u64);
        for idx in &mut self.indexes {
            idx.add(&values[idx.column], row);
        }
        self.chains.push(vec![Version {
            values,
            valid_from: ts,
            valid_to: OPEN,
        }]);
    }

    pub fn chains(&self) -> impl Iterator<Item = (RowId, &[Version])> {
        self.chains
            .iter()
            .enumerate()
            .map(|(i, c)| (RowId(i as u64), c.as_slice()))
    }

    pub fn chain(&self, row: RowId) -> &[Version] {
        self.chains.get(row.0 as usize).map_or(&[], |c| c.as_slice())
    }

    pub fn version_count(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    /// Rows with an open version.
    pub fn live_rows(&self) -> usize {
        self.chains
            .iter()
            .filter(|c| c.last().is_some_and(Version::is_open))
            .count()
    }

    /// Values of every row visible at snapshot `s`, in row-id order.
    pub fn snapshot(&self, s: ArrivalTimestamp) -> Vec<(RowId, Arc<[Value]>)> {
        self.chains()
            .filter_map(|(r, c)| c.iter().find(|v| v.visible(s)).map(|v| (r, v.values.clone())))
            .collect()
    }

    pub fn has_index(&self, column: usize) -> bool {
        self.indexes.iter().any(|i| i.column == column)
    }

    /// Row ids having some retained version with `column = key`.
    pub fn index_lookup(&self, column: usize, key: &Value) -> Result<&[RowId]> {
        let idx = self
            .indexes
            .iter()
            .find(|i| i.column == column)
            .ok_or_else(|| Error::MissingIndex {
                table: self.name.clone(),
                column: self.schema.columns[column].name.clone(),
            })?;
        Ok(idx.map.get(key).map_or(&[], |r| r.as_slice()))
    }

    fn pk_taken(&self, key: &Value, ignore: &HashSet<RowId>) -> bool {
        let Some(pk) = self.schema.primary_key else {
            return false;
        };
        let rows: &[RowId] = match self.indexes.iter().find(|i| i.column == pk) {
            Some(idx) => idx.map.get(key).map_or(&[], |r| r.as_slice()),
            None => {
                return self.chains.iter().enumerate().any(|(i, c)| {
                    !ignore.contains(&RowId(i as u64))
                        && c.last().is_some_and(|v| v.is_open() && v.values[pk] == *key)
                })
            }
        };
        rows.iter().any(|r| {
            !ignore.contains(r)
                && self.chains[r.0 as usize]
                    .last()
                    .is_some_and(|v| v.is_open() && v.values[pk] == *key)
        })
    }

    /// Checks that no two of `rows`, and no open row outside `ignore`,
    /// share a primary key.
    fn check_new_keys<'a>(&self, rows: impl Iterator<Item = &'a Vec<Value>>, ignore: &HashSet<RowId>) -> Result<()> {
        let Some(pk) = self.schema.primary_key else {
            return Ok(());
        };
        let mut seen = HashSet::new();
        for row in rows {
            let key = &row[pk];
            if !seen.insert(key.clone()) || self.pk_taken(key, ignore) {
                return Err(Error::DuplicateKey {
                    table: self.name.clone(),
                    key: key.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Rows whose open version satisfies `pred`.
    fn matching_open(&self, pred: &Predicate) -> Result<Vec<RowId>> {
        let probe = pred
            .atoms
            .iter()
            .find(|a| a.op == CmpOp::Eq && self.has_index(a.column));
        let candidates: Vec<RowId> = match probe {
            Some(a) => {
                let key = a.operand.resolve(&[])?;
                self.index_lookup(a.column, key)?.to_vec()
            }
            None => (0..self.chains.len() as u64).map(RowId).collect(),
        };
        let mut out = Vec::new();
        for r in candidates {
            if let Some(v) = self.chains[r.0 as usize].last() {
                if v.is_open() && pred.eval(&v.values, &[])? {
                    out.push(r);
                }
            }
        }
        Ok(out)
    }

    /// Applies one write statement atomically at `ts` and returns the number
    /// of rows it affected.
    pub fn apply_write(&mut self, w: &WriteOp, ts: ArrivalTimestamp) -> Result<usize> {
        if ts <= self.last_write {
            return Err(Error::OutOfOrderWrite {
                last: self.last_write,
                ts,
            });
        }
        let n = match w {
            WriteOp::Insert(rows) => {
                for row in rows {
                    self.schema.check_row(row)?;
                }
                self.check_new_keys(rows.iter(), &HashSet::new())?;
                for row in rows {
                    self.push_row(row.clone().into(), ts);
                }
                rows.len()
            }
            WriteOp::Update { set, pred } => {
                let rows = self.matching_open(pred)?;
                let mut updated = Vec::with_capacity(rows.len());
                for &r in &rows {
                    let mut values = self.chains[r.0 as usize].last().expect("open").values.to_vec();
                    for (c, v) in set {
                        values[*c] = v.clone();
                    }
                    self.schema.check_row(&values)?;
                    updated.push(values);
                }
                if let Some(pk) = self.schema.primary_key {
                    if set.iter().any(|(c, _)| *c == pk) {
                        let ignore: HashSet<RowId> = rows.iter().copied().collect();
                        self.check_new_keys(updated.iter(), &ignore)?;
                    }
                }
                for (r, values) in rows.iter().zip(updated) {
                    let values: Arc<[Value]> = values.into();
                    for idx in &mut self.indexes {
                        idx.add(&values[idx.column], *r);
                    }
                    let chain = &mut self.chains[r.0 as usize];
                    chain.last_mut().expect("open").valid_to = ts;
                    chain.push(Version {
                        values,
                        valid_from: ts,
                        valid_to: OPEN,
                    });
                    self.dirty.insert(*r);
                }
                rows.len()
            }
            WriteOp::Delete { pred } => {
                let rows = self.matching_open(pred)?;
                for &r in &rows {
                    self.chains[r.0 as usize].last_mut().expect("open").valid_to = ts;
                    self.dirty.insert(r);
                }
                rows.len()
            }
        };
        self.last_write = ts;
        Ok(n)
    }

    /// Drops versions that ended at or before `horizon`, which no current or
    /// future snapshot can see. Returns the number of versions removed.
    pub fn gc(&mut self, horizon: ArrivalTimestamp) -> usize {
        let mut removed = 0;
        let dirty = std::mem::take(&mut self.dirty);
        for r in dirty {
            let chain = &mut self.chains[r.0 as usize];
            let (dead, keep): (Vec<Version>, Vec<Version>) = chain.drain(..).partition(|v| v.valid_to <= horizon);
            *chain = keep;
            removed += dead.len();
            if chain.iter().any(|v| !v.is_open()) {
                self.dirty.insert(r);
            }
            for idx in &mut self.indexes {
                for v in &dead {
                    let key = &v.values[idx.column];
                    if !chain.iter().any(|k| k.values[idx.column] == *key) {
                        idx.remove(key, r);
                    }
                }
            }
        }
        removed
    }

    /// Whether every chain is ordered with non-overlapping intervals and only
    /// its last version open.
    pub fn versions_well_formed(&self) -> bool {
        self.chains.iter().all(|c| {
            c.iter().all(|v| v.valid_from < v.valid_to)
                && c.windows(2).all(|w| w[0].valid_to <= w[1].valid_from && !w[0].is_open())
        })
    }

    /// Whether each index maps exactly the keys of retained versions.
    pub fn indexes_consistent(&self) -> bool {
        self.indexes.iter().all(|idx| {
            let mut expect: BTreeMap<Value, RowList> = BTreeMap::new();
            for (r, c) in self.chains() {
                for v in c {
                    let key = &v.values[idx.column];
                    if !key.is_null() {
                        let rows = expect.entry(key.clone()).or_default();
                        if rows.last() != Some(&r) {
                            rows.push(r);
                        }
                    }
                }
            }
            expect == idx.map
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::datamodel::{Atom, Operand};
    use crate::frontend::Catalog;

    pub(crate) fn users_def() -> TableDef {
        Catalog::parse(
            "CREATE TABLE USERS (NAME VARCHAR PRIMARY KEY, ACCOUNT INT, BIRTHDATE DATE);
             CREATE INDEX ON USERS(ACCOUNT);",
        )
        .unwrap()
        .tables()[0]
        .clone()
    }

    pub(crate) fn users_rows() -> Vec<Vec<Value>> {
        [
            ("John Smith", 3000, "1980.03.05"),
            ("Kate Johnson", 800, "1976.04.11"),
            ("Bill Harisson", 1230, "1978.03.02"),
            ("Nick Lee", 500, "1992.08.11"),
            ("James Meyer", 5000, "1984.05.01"),
        ]
        .iter()
        .map(|(n, a, b)| vec![Value::str(n), Value::Int(*a), Value::date(b).unwrap()])
        .collect()
    }

    fn eq(col: usize, v: Value) -> Predicate {
        Predicate::new(vec![Atom::new(col, CmpOp::Eq, Operand::Const(v))])
    }

    #[test]
    fn load_opens_every_row_at_zero() {
        let t = load_table(&users_def(), users_rows()).unwrap();
        assert_eq!(t.version_count(), 5);
        assert!(t.chains().all(|(_, c)| c.len() == 1 && c[0].valid_from == 0 && c[0].is_open()));
        assert_eq!(load_table(&users_def(), vec![]).unwrap().version_count(), 0);
    }

    #[test]
    fn load_reports_row_numbers() {
        let mut rows = users_rows();
        rows[2][1] = Value::str("lots");
        let err = load_table(&users_def(), rows).unwrap_err();
        assert!(matches!(err, Error::RowType { row: 3, .. }), "{err:?}");
        let mut rows = users_rows();
        rows[4][0] = Value::str("John Smith");
        assert!(matches!(load_table(&users_def(), rows), Err(Error::DuplicateKey { .. })));
    }

    #[test]
    fn update_closes_and_reopens() {
        let mut t = load_table(&users_def(), users_rows()).unwrap();
        let n = t
            .apply_write(
                &WriteOp::Update {
                    set: vec![(1, Value::Int(0))],
                    pred: eq(0, Value::str("Nick Lee")),
                },
                7,
            )
            .unwrap();
        assert_eq!(n, 1);
        let chain = t.chain(RowId(3));
        assert_eq!(chain.len(), 2);
        assert_eq!(chain[0].valid_to, 7);
        assert_eq!(chain[1].valid_from, 7);
        assert_eq!(chain[1].values[1], Value::Int(0));
        assert_eq!(t.snapshot(6)[3].1[1], Value::Int(500));
        assert_eq!(t.snapshot(8)[3].1[1], Value::Int(0));
        assert!(t.versions_well_formed() && t.indexes_consistent());
    }

    #[test]
    fn delete_closes_matching_rows() {
        let mut t = load_table(&users_def(), users_rows()).unwrap();
        let pred = Predicate::new(vec![Atom::new(1, CmpOp::Lt, Operand::Const(Value::Int(600)))]);
        assert_eq!(t.apply_write(&WriteOp::Delete { pred }, 9).unwrap(), 1);
        assert_eq!(t.chain(RowId(3))[0].valid_to, 9);
        assert_eq!(t.snapshot(10).len(), 4);
        assert_eq!(t.live_rows(), 4);
    }

    #[test]
    fn writes_must_arrive_in_order() {
        let mut t = load_table(&users_def(), users_rows()).unwrap();
        let del = WriteOp::Delete { pred: Predicate::always() };
        t.apply_write(&del, 5).unwrap();
        assert_eq!(t.apply_write(&del, 5).unwrap_err(), Error::OutOfOrderWrite { last: 5, ts: 5 });
        assert!(t.apply_write(&del, 4).is_err());
    }

    #[test]
    fn failed_statements_change_nothing() {
        let mut t = load_table(&users_def(), users_rows()).unwrap();
        let ins = WriteOp::Insert(vec![
            vec![Value::str("Zoe"), Value::Int(1), Value::Null],
            vec![Value::str("Kate Johnson"), Value::Int(1), Value::Null],
        ]);
        assert!(matches!(t.apply_write(&ins, 1), Err(Error::DuplicateKey { .. })));
        assert_eq!(t.version_count(), 5);
        let upd = WriteOp::Update {
            set: vec![(0, Value::str("Same"))],
            pred: Predicate::always(),
        };
        assert!(matches!(t.apply_write(&upd, 2), Err(Error::DuplicateKey { .. })));
        assert_eq!(t.version_count(), 5);
        let rename = WriteOp::Update {
            set: vec![(0, Value::str("Nicholas Lee"))],
            pred: eq(0, Value::str("Nick Lee")),
        };
        assert_eq!(t.apply_write(&rename, 3).unwrap(), 1);
        let reuse = WriteOp::Insert(vec![vec![Value::str("Nick Lee"), Value::Int(2), Value::Null]]);
        assert_eq!(t.apply_write(&reuse, 4).unwrap(), 1);
    }

    #[test]
    fn gc_drops_dead_versions_and_index_entries() {
        let mut t = load_table(&users_def(), users_rows()).unwrap();
        t.apply_write(
            &WriteOp::Update {
                set: vec![(1, Value::Int(1))],
                pred: Predicate::always(),
            },
            3,
        )
        .unwrap();
        assert_eq!(t.version_count(), 10);
        assert_eq!(t.index_lookup(1, &Value::Int(3000)).unwrap(), &[RowId(0)]);
        assert_eq!(t.gc(2), 0);
        assert_eq!(t.gc(3), 5);
        assert_eq!(t.version_count(), 5);
        assert!(t.index_lookup(1, &Value::Int(3000)).unwrap().is_empty());
        assert_eq!(t.index_lookup(1, &Value::Int(1)).unwrap().len(), 5);
        assert!(t.indexes_consistent());
        assert!(matches!(t.index_lookup(2, &Value::Null), Err(Error::MissingIndex { .. })));
    }
}
