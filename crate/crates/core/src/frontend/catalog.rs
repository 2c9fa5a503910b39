use std::sync::Arc;

use super::lexer::Tok;
use super::parser::Parser;
use crate::datamodel::{Column, Schema, TableId, ValueType};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TableDef {
    pub id: TableId,
    pub name: String,
    pub schema: Arc<Schema>,
    /// Indexed columns; the primary key is always first when present.
    pub indexes: Vec<usize>,
    /// Row count at load time; drives build-side selection.
    pub rows: usize,
}

impl TableDef {
    pub fn has_index(&self, column: usize) -> bool {
        self.indexes.contains(&column)
    }
}

/// Table definitions, read from `CREATE TABLE` / `CREATE INDEX` text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    tables: Vec<TableDef>,
}

fn parse_type(p: &mut Parser) -> Result<ValueType> {
    let name = p.ident()?;
    let ty = match name.as_str() {
        "INT" | "INTEGER" | "BIGINT" | "SMALLINT" => ValueType::Int,
        "FLOAT" | "DOUBLE" | "REAL" | "DECIMAL" | "NUMERIC" => ValueType::Float,
        "VARCHAR" | "CHAR" | "TEXT" | "STRING" => ValueType::Str,
        "DATE" => ValueType::Date,
        other => return p.error(format!("unknown type {other}")),
    };
    if p.eat(&Tok::LParen) {
        p.int()?;
        if p.eat(&Tok::Comma) {
            p.int()?;
        }
        p.expect(&Tok::RParen, "')'")?;
    }
    Ok(ty)
}

impl Catalog {
    pub fn new() -> Catalog {
        Catalog::default()
    }

    /// Parses a sequence of `;`-separated DDL statements.
    pub fn parse(text: &str) -> Result<Catalog> {
        let mut catalog = Catalog::new();
        let mut p = Parser::new(text)?;
        while !p.at_end() {
            if p.eat(&Tok::Semi) {
                continue;
            }
            p.keyword("CREATE")?;
            if p.eat_keyword("TABLE") {
                let name = p.ident()?;
                p.expect(&Tok::LParen, "'('")?;
                let mut columns = Vec::new();
                let mut pk: Option<String> = None;
                loop {
                    if p.eat_keyword("PRIMARY") {
                        p.keyword("KEY")?;
                        p.expect(&Tok::LParen, "'('")?;
                        pk = Some(p.ident()?);
                        p.expect(&Tok::RParen, "')'")?;
                    } else {
                        let col = p.ident()?;
                        let ty = parse_type(&mut p)?;
                        if p.eat_keyword("PRIMARY") {
                            p.keyword("KEY")?;
                            pk = Some(col.clone());
                        }
                        if p.eat_keyword("NOT") {
                            p.keyword("NULL")?;
                        }
                        columns.push(Column::new(col, ty));
                    }
                    if !p.eat(&Tok::Comma) {
                        break;
                    }
                }
                p.expect(&Tok::RParen, "')'")?;
                let schema = Schema::new(columns, pk.as_deref())?;
                catalog.add_table(&name, schema)?;
            } else if p.eat_keyword("INDEX") {
                if !p.peek_keyword("ON") {
                    p.ident()?;
                }
                p.keyword("ON")?;
                let table = p.ident()?;
                p.expect(&Tok::LParen, "'('")?;
                let column = p.ident()?;
                p.expect(&Tok::RParen, "')'")?;
                catalog.add_index(&table, &column)?;
            } else {
                return p.error("expected TABLE or INDEX");
            }
        }
        Ok(catalog)
    }

    pub fn add_table(&mut self, name: &str, schema: Schema) -> Result<TableId> {
        let name = name.to_ascii_uppercase();
        if self.table_id(&name).is_some() {
            return Err(Error::Unsupported(format!("table {name} defined twice")));
        }
        let id = self.tables.len() as TableId;
        let indexes = schema.primary_key.into_iter().collect();
        self.tables.push(TableDef {
            id,
            name,
            schema: Arc::new(schema),
            indexes,
            rows: 0,
        });
        Ok(id)
    }

    pub fn add_index(&mut self, table: &str, column: &str) -> Result<()> {
        let id = self
            .table_id(table)
            .ok_or_else(|| Error::UnknownTable(table.to_string()))?;
        let def = &mut self.tables[id as usize];
        let col = def
            .schema
            .index_of(&column.to_ascii_uppercase())
            .ok_or_else(|| Error::UnknownColumn(format!("{table}.{column}")))?;
        if !def.indexes.contains(&col) {
            def.indexes.push(col);
        }
        Ok(())
    }

    pub fn table_id(&self, name: &str) -> Option<TableId> {
        self.tables
            .iter()
            .position(|t| t.name.eq_ignore_ascii_case(name))
            .map(|i| i as TableId)
    }

    pub fn table(&self, id: TableId) -> &TableDef {
        &self.tables[id as usize]
    }

    pub fn tables(&self) -> &[TableDef] {
        &self.tables
    }

    pub fn set_rows(&mut self, id: TableId, rows: usize) {
        self.tables[id as usize].rows = rows;
    }

    pub fn column_label(&self, table: TableId, column: usize) -> String {
        let t = self.table(table);
        format!("{}.{}", t.name, t.schema.columns[column].name)
    }
}
