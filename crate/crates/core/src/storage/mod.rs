//! Versioned in-memory tables, shared scans and batched index probes.
//!
//! Every row keeps a chain of versions `[valid_from, valid_to)` stamped with
//! arrival timestamps. A reader with snapshot `s` sees the version whose
//! interval contains `s`, so a batch can apply all its writes first and
//! still give each read exactly the state left by the writes admitted
//! before it.

mod scan;
mod table;

use std::path::Path;

pub use scan::{
    probe_filters, scan_filters, shared_index_probe, shared_scan, ProbeQuery, QueryFilter,
    ScanQuery, ScanStats,
};
pub use table::{load_table, TableStore, Version, WriteOp, OPEN};
#[cfg(test)]
pub(crate) use table::tests as fixtures;

use crate::datamodel::{Date, Row, TableId, Value, ValueType};
use crate::error::{Error, Result};
use crate::frontend::{Bound, Catalog, PreparedStatement, TableDef};

/// Resolves a write statement's parameters into a [`WriteOp`].
pub fn bind_write(p: &PreparedStatement, params: &[Value]) -> Result<(TableId, WriteOp)> {
    let resolve = |o: &crate::datamodel::Operand| o.resolve(params).cloned();
    match &p.body {
        Bound::Insert(i) => {
            let rows = i
                .rows
                .iter()
                .map(|r| r.iter().map(resolve).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            Ok((i.table, WriteOp::Insert(rows)))
        }
        Bound::Update(u) => {
            let set = u
                .set
                .iter()
                .map(|(c, o)| Ok((*c, resolve(o)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok((u.table, WriteOp::Update { set, pred: u.pred.bind(params)? }))
        }
        Bound::Delete(d) => Ok((d.table, WriteOp::Delete { pred: d.pred.bind(params)? })),
        Bound::Select(_) => Err(Error::Unsupported("SELECT is not a write".into())),
    }
}

/// Parses one CSV field as a value of type `ty`; the empty field is null.
pub fn parse_field(text: &str, ty: ValueType) -> Result<Value> {
    if text.is_empty() {
        return Ok(Value::Null);
    }
    let bad = || Error::Type(format!("'{text}' is not a valid {ty}"));
    Ok(match ty {
        ValueType::Int => Value::Int(text.trim().parse().map_err(|_| bad())?),
        ValueType::Float => Value::Float(text.trim().parse().map_err(|_| bad())?),
        ValueType::Str => Value::str(text),
        ValueType::Date => Value::Date(Date::parse(text).ok_or_else(bad)?),
    })
}

/// Reads CSV text with a header row naming the table's columns (in any
/// order).
pub fn read_csv(def: &TableDef, reader: impl std::io::Read) -> Result<Vec<Row>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = r.headers()?.clone();
    let mut positions = Vec::with_capacity(headers.len());
    for h in headers.iter() {
        let name = h.trim().to_ascii_uppercase();
        let pos = def
            .schema
            .index_of(&name)
            .ok_or_else(|| Error::UnknownColumn(format!("{}.{name}", def.name)))?;
        positions.push(pos);
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != positions.len() {
            return Err(Error::RowType {
                row: i + 1,
                message: format!("expected {} fields, found {}", positions.len(), rec.len()),
            });
        }
        let mut row = vec![Value::Null; def.schema.arity()];
        for (field, &pos) in rec.iter().zip(&positions) {
            row[pos] = parse_field(field, def.schema.columns[pos].ty).map_err(|e| Error::RowType {
                row: i + 1,
                message: e.to_string(),
            })?;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Writes a table's rows visible at `snapshot` as CSV with a header.
pub fn write_csv(t: &TableStore, snapshot: u64, w: impl std::io::Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(t.schema().columns.iter().map(|c| c.name.as_str()))?;
    for (_, values) in t.snapshot(snapshot) {
        out.write_record(values.iter().map(|v| match v {
            Value::Null => String::new(),
            Value::Float(f) => format!("{f:?}"),
            other => other.to_string(),
        }))?;
    }
    out.flush()?;
    Ok(())
}

/// A catalog plus one table store per table.
#[derive(Debug, Clone)]
pub struct Database {
    catalog: Catalog,
    tables: Vec<TableStore>,
}

impl Database {
    pub fn new(catalog: Catalog) -> Database {
        let tables = catalog.tables().iter().map(TableStore::empty).collect();
        Database { catalog, tables }
    }

    /// Loads the catalog file and then `<TABLE>.csv` from `data_dir` for
    /// every table that has one.
    pub fn open(catalog_path: &Path, data_dir: &Path) -> Result<Database> {
        let text = std::fs::read_to_string(catalog_path)?;
        let mut db = Database::new(Catalog::parse(&text)?);
        db.load_csv_dir(data_dir)?;
        Ok(db)
    }

    pub fn load_csv_dir(&mut self, dir: &Path) -> Result<()> {
        for i in 0..self.tables.len() {
            let def = self.catalog.tables()[i].clone();
            let path = dir.join(format!("{}.csv", def.name));
            if !path.exists() {
                continue;
            }
            let rows = read_csv(&def, std::fs::File::open(&path)?)?;
            self.tables[i].load_rows(rows)?;
        }
        self.sync_row_counts();
        Ok(())
    }

    pub fn insert_rows(&mut self, table: &str, rows: Vec<Row>) -> Result<()> {
        let id = self
            .catalog
            .table_id(table)
            .ok_or_else(|| Error::UnknownTable(table.to_string()))?;
        self.tables[id as usize].load_rows(rows)?;
        self.sync_row_counts();
        Ok(())
    }

    /// Copies live row counts into the catalog, where the planner reads them.
    pub fn sync_row_counts(&mut self) {
        for t in &self.tables {
            self.catalog.set_rows(t.id(), t.live_rows());
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn table(&self, id: TableId) -> &TableStore {
        &self.tables[id as usize]
    }

    pub fn table_mut(&mut self, id: TableId) -> &mut TableStore {
        &mut self.tables[id as usize]
    }

    pub fn table_by_name(&self, name: &str) -> Option<&TableStore> {
        self.catalog.table_id(name).map(|id| self.table(id))
    }

    pub fn tables(&self) -> &[TableStore] {
        &self.tables
    }

    pub fn into_parts(self) -> (Catalog, Vec<TableStore>) {
        (self.catalog, self.tables)
    }
}
