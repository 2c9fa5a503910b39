use std::fmt;

use crate::datamodel::{CmpOp, Date};

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Null,
    Int(i64),
    Float(f64),
    Str(String),
    Date(Date),
}

/// A constant or a `?` slot, numbered from 0 in text order.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Lit(Literal),
    Param(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnName {
    pub qualifier: Option<String>,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column(ColumnName),
    /// `arg == None` is `COUNT(*)`.
    Agg { func: AggFunc, arg: Option<ColumnName> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Expr(Expr),
    Scalar(Scalar),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub left: Term,
    pub op: CmpOp,
    pub right: Term,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SortDir {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectItem {
    Star,
    Expr { expr: Expr, alias: Option<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRef {
    pub name: String,
    pub alias: Option<String>,
}

impl TableRef {
    pub fn label(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Select {
    pub items: Vec<SelectItem>,
    pub from: Vec<TableRef>,
    pub conditions: Vec<Condition>,
    pub group_by: Vec<ColumnName>,
    pub having: Vec<Condition>,
    pub order_by: Option<(Expr, SortDir)>,
    pub limit: Option<Scalar>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Insert {
    pub table: String,
    pub columns: Option<Vec<String>>,
    pub rows: Vec<Vec<Scalar>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub table: String,
    pub assignments: Vec<(String, Scalar)>,
    pub conditions: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delete {
    pub table: String,
    pub conditions: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Select(Select),
    Insert(Insert),
    Update(Update),
    Delete(Delete),
}

impl Statement {
    pub fn kind(&self) -> &'static str {
        match self {
            Statement::Select(_) => "SELECT",
            Statement::Insert(_) => "INSERT",
            Statement::Update(_) => "UPDATE",
            Statement::Delete(_) => "DELETE",
        }
    }

    pub fn is_write(&self) -> bool {
        !matches!(self, Statement::Select(_))
    }
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Null => f.write_str("NULL"),
            Literal::Int(v) => write!(f, "{v}"),
            Literal::Float(v) => write!(f, "{v:?}"),
            Literal::Str(s) => f.write_str(&quote(s)),
            Literal::Date(d) => write!(f, "DATE '{d}'"),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Lit(l) => l.fmt(f),
            Scalar::Param(_) => f.write_str("?"),
        }
    }
}

impl fmt::Display for ColumnName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.qualifier {
            Some(q) => write!(f, "{q}.{}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

impl fmt::Display for AggFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Column(c) => c.fmt(f),
            Expr::Agg { func, arg: Some(c) } => write!(f, "{func}({c})"),
            Expr::Agg { func, arg: None } => write!(f, "{func}(*)"),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Expr(e) => e.fmt(f),
            Term::Scalar(s) => s.fmt(f),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.op, self.right)
    }
}

impl fmt::Display for SortDir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SortDir::Asc => "ASC",
            SortDir::Desc => "DESC",
        })
    }
}

fn join<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T], sep: &str) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        item.fmt(f)?;
    }
    Ok(())
}

impl fmt::Display for SelectItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectItem::Star => f.write_str("*"),
            SelectItem::Expr { expr, alias: None } => expr.fmt(f),
            SelectItem::Expr {
                expr,
                alias: Some(a),
            } => write!(f, "{expr} AS {a}"),
        }
    }
}

impl fmt::Display for TableRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.alias {
            Some(a) => write!(f, "{} {a}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

/// Unparses to canonical SQL that parses back to an equal statement.
impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Select(s) => {
                f.write_str("SELECT ")?;
                join(f, &s.items, ", ")?;
                f.write_str(" FROM ")?;
                join(f, &s.from, ", ")?;
                if !s.conditions.is_empty() {
                    f.write_str(" WHERE ")?;
                    join(f, &s.conditions, " AND ")?;
                }
                if !s.group_by.is_empty() {
                    f.write_str(" GROUP BY ")?;
                    join(f, &s.group_by, ", ")?;
                }
                if !s.having.is_empty() {
                    f.write_str(" HAVING ")?;
                    join(f, &s.having, " AND ")?;
                }
                if let Some((e, dir)) = &s.order_by {
                    write!(f, " ORDER BY {e} {dir}")?;
                }
                if let Some(l) = &s.limit {
                    write!(f, " LIMIT {l}")?;
                }
                Ok(())
            }
            Statement::Insert(i) => {
                write!(f, "INSERT INTO {}", i.table)?;
                if let Some(cols) = &i.columns {
                    f.write_str(" (")?;
                    join(f, cols, ", ")?;
                    f.write_str(")")?;
                }
                f.write_str(" VALUES ")?;
                for (n, row) in i.rows.iter().enumerate() {
                    if n > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str("(")?;
                    join(f, row, ", ")?;
                    f.write_str(")")?;
                }
                Ok(())
            }
            Statement::Update(u) => {
                write!(f, "UPDATE {} SET ", u.table)?;
                for (n, (c, v)) in u.assignments.iter().enumerate() {
                    if n > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c} = {v}")?;
                }
                if !u.conditions.is_empty() {
                    f.write_str(" WHERE ")?;
                    join(f, &u.conditions, " AND ")?;
                }
                Ok(())
            }
            Statement::Delete(d) => {
                write!(f, "DELETE FROM {}", d.table)?;
                if !d.conditions.is_empty() {
                    f.write_str(" WHERE ")?;
                    join(f, &d.conditions, " AND ")?;
                }
                Ok(())
            }
        }
    }
}
