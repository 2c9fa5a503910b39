//! SQL subset: lexer, parser, catalog DDL, prepared statements and binding.
//!
//! Supported statements are single-block conjunctive `SELECT`s with
//! comma-joins, `GROUP BY`/`HAVING`, one `ORDER BY` key and `LIMIT`, plus
//! `INSERT`, `UPDATE` and `DELETE`. Keywords and identifiers are
//! case-insensitive and normalized to upper case.

pub mod ast;
mod catalog;
mod lexer;
mod parser;
mod prepare;

pub use ast::{AggFunc, SortDir, Statement};
pub use catalog::{Catalog, TableDef};
pub use parser::parse;
pub use prepare::{
    bind, bind_params, prepare, AggTemplate, BaseCol, Bound, BoundDelete, BoundInsert, BoundSelect,
    BoundUpdate, ColumnRef, Grouping, HavingAtom, PreparedStatement, QueryInstance, StatementId,
};
