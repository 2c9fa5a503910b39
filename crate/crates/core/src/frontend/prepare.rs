use std::fmt;
use std::sync::Arc;

use super::ast::*;
use super::catalog::Catalog;
use crate::datamodel::{
    like_pattern_prefix, ArrivalTimestamp, Atom, CmpOp, Operand, Predicate, QueryId, TableId, Value,
    ValueType,
};
use crate::error::{Error, Result};
use crate::planner::QueryPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StatementId(pub usize);

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BaseCol {
    pub table: TableId,
    pub column: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AggTemplate {
    pub func: AggFunc,
    pub arg: Option<BaseCol>,
}

/// A column of an intermediate result: either a base-table attribute or an
/// aggregate produced by a group-by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ColumnRef {
    Base(BaseCol),
    Agg(AggTemplate),
}

impl ColumnRef {
    pub fn display(&self, catalog: &Catalog) -> String {
        match self {
            ColumnRef::Base(c) => catalog.column_label(c.table, c.column),
            ColumnRef::Agg(a) => a.display(catalog),
        }
    }

    pub fn value_type(&self, catalog: &Catalog) -> ValueType {
        match self {
            ColumnRef::Base(c) => catalog.table(c.table).schema.columns[c.column].ty,
            ColumnRef::Agg(a) => a.output_type(catalog),
        }
    }
}

impl AggTemplate {
    pub fn display(&self, catalog: &Catalog) -> String {
        match self.arg {
            Some(c) => format!("{}({})", self.func, catalog.column_label(c.table, c.column)),
            None => format!("{}(*)", self.func),
        }
    }

    pub fn output_type(&self, catalog: &Catalog) -> ValueType {
        let arg = self.arg.map(|c| catalog.table(c.table).schema.columns[c.column].ty);
        match (self.func, arg) {
            (AggFunc::Count, _) => ValueType::Int,
            (AggFunc::Avg, _) => ValueType::Float,
            (_, Some(t)) => t,
            (_, None) => ValueType::Int,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HavingAtom {
    pub target: ColumnRef,
    pub op: CmpOp,
    pub operand: Operand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    pub keys: Vec<BaseCol>,
    pub aggs: Vec<AggTemplate>,
    pub having: Vec<HavingAtom>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSelect {
    /// FROM-clause order.
    pub tables: Vec<TableId>,
    pub labels: Vec<String>,
    /// Single-table atoms per FROM position, over that table's columns.
    pub filters: Vec<Predicate>,
    /// Equi-join conditions between two different tables.
    pub joins: Vec<(BaseCol, BaseCol)>,
    /// `A.X = A.Y` conditions within one table.
    pub column_eqs: Vec<(BaseCol, BaseCol)>,
    pub grouping: Option<Grouping>,
    pub order: Option<(ColumnRef, SortDir)>,
    pub limit: Option<Operand>,
    pub projection: Vec<ColumnRef>,
    pub labels_out: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundInsert {
    pub table: TableId,
    /// One operand per schema column.
    pub rows: Vec<Vec<Operand>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundUpdate {
    pub table: TableId,
    pub set: Vec<(usize, Operand)>,
    pub pred: Predicate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundDelete {
    pub table: TableId,
    pub pred: Predicate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    Select(BoundSelect),
    Insert(BoundInsert),
    Update(BoundUpdate),
    Delete(BoundDelete),
}

impl Bound {
    pub fn write_table(&self) -> Option<TableId> {
        match self {
            Bound::Select(_) => None,
            Bound::Insert(i) => Some(i.table),
            Bound::Update(u) => Some(u.table),
            Bound::Delete(d) => Some(d.table),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedStatement {
    pub id: StatementId,
    pub statement: Statement,
    pub body: Bound,
    pub param_types: Vec<ValueType>,
}

impl PreparedStatement {
    pub fn select(&self) -> Option<&BoundSelect> {
        match &self.body {
            Bound::Select(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_write(&self) -> bool {
        self.select().is_none()
    }

    pub fn has_order(&self) -> bool {
        self.select().is_some_and(|s| s.order.is_some())
    }
}

/// A prepared statement bound to parameter values and admitted under a
/// query id and arrival timestamp.
#[derive(Debug, Clone)]
pub struct QueryInstance {
    pub prepared: Arc<PreparedStatement>,
    pub params: Arc<[Value]>,
    pub qid: QueryId,
    pub arrival: ArrivalTimestamp,
    pub path: Option<QueryPath>,
}

fn lit_value(l: &Literal) -> Value {
    match l {
        Literal::Null => Value::Null,
        Literal::Int(v) => Value::Int(*v),
        Literal::Float(v) => Value::Float(*v),
        Literal::Str(s) => Value::str(s),
        Literal::Date(d) => Value::Date(*d),
    }
}

fn coerce_const(v: Value, ty: ValueType) -> Result<Value> {
    let vt = v.value_type();
    v.coerce_to(ty).map_err(|_| Error::TypeMismatch {
        left: ty,
        right: vt.expect("null always coerces"),
    })
}

struct Resolver<'a> {
    catalog: &'a Catalog,
    tables: Vec<TableId>,
    labels: Vec<String>,
    params: Vec<Option<ValueType>>,
}

impl<'a> Resolver<'a> {
    fn new(catalog: &'a Catalog) -> Resolver<'a> {
        Resolver {
            catalog,
            tables: Vec::new(),
            labels: Vec::new(),
            params: Vec::new(),
        }
    }

    fn add_table(&mut self, t: &TableRef) -> Result<()> {
        let id = self
            .catalog
            .table_id(&t.name)
            .ok_or_else(|| Error::UnknownTable(t.name.clone()))?;
        if self.tables.contains(&id) {
            return Err(Error::Unsupported(format!(
                "table {} appears more than once in FROM",
                t.name
            )));
        }
        let label = t.label().to_string();
        if self.labels.contains(&label) {
            return Err(Error::Unsupported(format!("duplicate table alias {label}")));
        }
        self.tables.push(id);
        self.labels.push(label);
        Ok(())
    }

    fn column(&self, c: &ColumnName) -> Result<BaseCol> {
        let mut found = None;
        for (pos, &t) in self.tables.iter().enumerate() {
            let def = self.catalog.table(t);
            if let Some(q) = &c.qualifier {
                if *q != self.labels[pos] && *q != def.name {
                    continue;
                }
            }
            if let Some(col) = def.schema.index_of(&c.name) {
                if found.is_some() {
                    return Err(Error::AmbiguousColumn(c.to_string()));
                }
                found = Some(BaseCol { table: t, column: col });
            }
        }
        if found.is_none() {
            if let Some(q) = &c.qualifier {
                let known = self
                    .tables
                    .iter()
                    .enumerate()
                    .any(|(pos, &t)| *q == self.labels[pos] || *q == self.catalog.table(t).name);
                if !known {
                    return Err(Error::UnknownTable(q.clone()));
                }
            }
        }
        found.ok_or_else(|| Error::UnknownColumn(c.to_string()))
    }

    fn col_type(&self, c: BaseCol) -> ValueType {
        self.catalog.table(c.table).schema.columns[c.column].ty
    }

    fn position(&self, t: TableId) -> usize {
        self.tables.iter().position(|&x| x == t).expect("resolved table")
    }

    fn operand(&mut self, s: &Scalar, ty: ValueType) -> Result<Operand> {
        match s {
            Scalar::Lit(l) => Ok(Operand::Const(coerce_const(lit_value(l), ty)?)),
            Scalar::Param(i) => {
                if self.params.len() <= *i {
                    self.params.resize(*i + 1, None);
                }
                match self.params[*i] {
                    Some(prev) if prev != ty => Err(Error::Type(format!(
                        "parameter ${i} used as both {prev} and {ty}"
                    ))),
                    _ => {
                        self.params[*i] = Some(ty);
                        Ok(Operand::Param(*i))
                    }
                }
            }
        }
    }

    fn agg(&self, func: AggFunc, arg: &Option<ColumnName>) -> Result<AggTemplate> {
        let arg = match arg {
            Some(c) => Some(self.column(c)?),
            None => None,
        };
        if func != AggFunc::Count {
            let c = arg.expect("parser only allows COUNT(*)");
            if !self.col_type(c).is_numeric() {
                return Err(Error::NonNumericAggregate(format!(
                    "{func}({})",
                    self.catalog.column_label(c.table, c.column)
                )));
            }
        }
        Ok(AggTemplate { func, arg })
    }

    fn like_check(op: CmpOp, ty: ValueType, operand: &Operand) -> Result<()> {
        if op != CmpOp::LikePrefix {
            return Ok(());
        }
        if ty != ValueType::Str {
            return Err(Error::Type(format!("LIKE on {ty} column")));
        }
        if let Operand::Const(Value::Str(p)) = operand {
            like_pattern_prefix(p)?;
        }
        Ok(())
    }

    /// Splits WHERE conditions into per-table atoms, joins and column equalities.
    #[allow(clippy::type_complexity)]
    fn where_clause(
        &mut self,
        conds: &[Condition],
    ) -> Result<(Vec<Predicate>, Vec<(BaseCol, BaseCol)>, Vec<(BaseCol, BaseCol)>)> {
        let mut filters = vec![Predicate::always(); self.tables.len()];
        let mut joins = Vec::new();
        let mut eqs = Vec::new();
        for c in conds {
            match (&c.left, &c.right) {
                (Term::Expr(Expr::Column(a)), Term::Expr(Expr::Column(b))) => {
                    let (a, b) = (self.column(a)?, self.column(b)?);
                    let (ta, tb) = (self.col_type(a), self.col_type(b));
                    if ta != tb {
                        return Err(Error::TypeMismatch { left: ta, right: tb });
                    }
                    if c.op != CmpOp::Eq {
                        return Err(Error::NonEquiJoin(c.to_string()));
                    }
                    if a.table == b.table {
                        eqs.push((a, b));
                    } else {
                        joins.push((a, b));
                    }
                }
                (Term::Expr(Expr::Column(col)), Term::Scalar(s)) => {
                    let col = self.column(col)?;
                    self.push_atom(&mut filters, col, c.op, s)?;
                }
                (Term::Scalar(s), Term::Expr(Expr::Column(col))) => {
                    if c.op == CmpOp::LikePrefix {
                        return Err(Error::Unsupported("pattern on the left of LIKE".into()));
                    }
                    let col = self.column(col)?;
                    self.push_atom(&mut filters, col, c.op.flipped(), s)?;
                }
                (Term::Expr(Expr::Agg { .. }), _) | (_, Term::Expr(Expr::Agg { .. })) => {
                    return Err(Error::Unsupported("aggregate in WHERE; use HAVING".into()))
                }
                (Term::Scalar(_), Term::Scalar(_)) => {
                    return Err(Error::Unsupported(format!("condition without a column: {c}")))
                }
            }
        }
        Ok((filters, joins, eqs))
    }

    fn push_atom(&mut self, filters: &mut [Predicate], col: BaseCol, op: CmpOp, s: &Scalar) -> Result<()> {
        let ty = self.col_type(col);
        let operand = self.operand(s, ty)?;
        Self::like_check(op, ty, &operand)?;
        let pos = self.position(col.table);
        filters[pos].atoms.push(Atom::new(col.column, op, operand));
        Ok(())
    }

    fn single_table_pred(&mut self, conds: &[Condition]) -> Result<Predicate> {
        let (mut filters, joins, eqs) = self.where_clause(conds)?;
        if !joins.is_empty() || !eqs.is_empty() {
            return Err(Error::Unsupported("column comparisons in a write statement".into()));
        }
        Ok(filters.remove(0))
    }

    fn finish_params(&self) -> Result<Vec<ValueType>> {
        self.params
            .iter()
            .enumerate()
            .map(|(i, t)| t.ok_or(Error::UnresolvableParameter(i)))
            .collect()
    }
}

fn collect_aggs(e: &Expr, out: &mut Vec<(AggFunc, Option<ColumnName>)>) {
    if let Expr::Agg { func, arg } = e {
        out.push((*func, arg.clone()));
    }
}

fn resolve_select(s: &Select, r: &mut Resolver<'_>) -> Result<BoundSelect> {
    for t in &s.from {
        r.add_table(t)?;
    }
    let (filters, joins, column_eqs) = r.where_clause(&s.conditions)?;

    let mut raw_aggs = Vec::new();
    for item in &s.items {
        if let SelectItem::Expr { expr, .. } = item {
            collect_aggs(expr, &mut raw_aggs);
        }
    }
    for c in &s.having {
        for t in [&c.left, &c.right] {
            if let Term::Expr(e) = t {
                collect_aggs(e, &mut raw_aggs);
            }
        }
    }
    if let Some((e, _)) = &s.order_by {
        collect_aggs(e, &mut raw_aggs);
    }
    let grouped = !s.group_by.is_empty() || !raw_aggs.is_empty() || !s.having.is_empty();

    let grouping = if grouped {
        let keys = s.group_by.iter().map(|c| r.column(c)).collect::<Result<Vec<_>>>()?;
        let mut aggs: Vec<AggTemplate> = Vec::new();
        for (func, arg) in &raw_aggs {
            let a = r.agg(*func, arg)?;
            if !aggs.contains(&a) {
                aggs.push(a);
            }
        }
        let mut having = Vec::new();
        for c in &s.having {
            let (expr, op, scalar) = match (&c.left, &c.right) {
                (Term::Expr(e), Term::Scalar(v)) => (e, c.op, v),
                (Term::Scalar(v), Term::Expr(e)) if c.op != CmpOp::LikePrefix => (e, c.op.flipped(), v),
                _ => return Err(Error::Unsupported(format!("HAVING condition {c}"))),
            };
            let target = group_ref(expr, &keys, r)?;
            let ty = target.value_type(r.catalog);
            let operand = r.operand(scalar, ty)?;
            Resolver::like_check(op, ty, &operand)?;
            having.push(HavingAtom { target, op, operand });
        }
        Some(Grouping { keys, aggs, having })
    } else {
        None
    };

    let mut projection = Vec::new();
    let mut labels_out = Vec::new();
    for item in &s.items {
        match item {
            SelectItem::Star => {
                if grouping.is_some() {
                    return Err(Error::Unsupported("SELECT * with grouping".into()));
                }
                for (pos, &t) in r.tables.iter().enumerate() {
                    let def = r.catalog.table(t);
                    for (i, c) in def.schema.columns.iter().enumerate() {
                        projection.push(ColumnRef::Base(BaseCol { table: t, column: i }));
                        labels_out.push(format!("{}.{}", r.labels[pos], c.name));
                    }
                }
            }
            SelectItem::Expr { expr, alias } => {
                let cref = match &grouping {
                    Some(g) => group_ref(expr, &g.keys, r)?,
                    None => match expr {
                        Expr::Column(c) => ColumnRef::Base(r.column(c)?),
                        Expr::Agg { .. } => unreachable!("aggregates imply grouping"),
                    },
                };
                let label = match (alias, cref) {
                    (Some(a), _) => a.clone(),
                    (None, ColumnRef::Base(c)) => format!(
                        "{}.{}",
                        r.labels[r.position(c.table)],
                        r.catalog.table(c.table).schema.columns[c.column].name
                    ),
                    (None, ColumnRef::Agg(_)) => expr.to_string(),
                };
                projection.push(cref);
                labels_out.push(label);
            }
        }
    }

    let order = match &s.order_by {
        Some((e, dir)) => {
            let key = match &grouping {
                Some(g) => group_ref(e, &g.keys, r)?,
                None => match e {
                    Expr::Column(c) => ColumnRef::Base(r.column(c)?),
                    Expr::Agg { .. } => unreachable!("aggregates imply grouping"),
                },
            };
            Some((key, *dir))
        }
        None => None,
    };

    let limit = match &s.limit {
        None => None,
        Some(_) if order.is_none() => {
            return Err(Error::Unsupported("LIMIT requires ORDER BY".into()))
        }
        Some(Scalar::Lit(Literal::Int(n))) if *n <= 0 => return Err(Error::InvalidLimit(*n)),
        Some(l) => Some(r.operand(l, ValueType::Int)?),
    };

    Ok(BoundSelect {
        tables: r.tables.clone(),
        labels: r.labels.clone(),
        filters,
        joins,
        column_eqs,
        grouping,
        order,
        limit,
        projection,
        labels_out,
    })
}

fn group_ref(e: &Expr, keys: &[BaseCol], r: &Resolver<'_>) -> Result<ColumnRef> {
    match e {
        Expr::Column(c) => {
            let col = r.column(c)?;
            if keys.contains(&col) {
                Ok(ColumnRef::Base(col))
            } else {
                Err(Error::Unsupported(format!("column {c} is neither grouped nor aggregated")))
            }
        }
        Expr::Agg { func, arg } => Ok(ColumnRef::Agg(r.agg(*func, arg)?)),
    }
}

/// Resolves names against the catalog and infers parameter types.
pub fn prepare(stmt: &Statement, catalog: &Catalog, id: StatementId) -> Result<PreparedStatement> {
    let mut r = Resolver::new(catalog);
    let body = match stmt {
        Statement::Select(s) => Bound::Select(resolve_select(s, &mut r)?),
        Statement::Insert(i) => {
            r.add_table(&TableRef {
                name: i.table.clone(),
                alias: None,
            })?;
            let table = r.tables[0];
            let schema = catalog.table(table).schema.clone();
            let positions: Vec<usize> = match &i.columns {
                Some(cols) => cols
                    .iter()
                    .map(|c| {
                        schema
                            .index_of(c)
                            .ok_or_else(|| Error::UnknownColumn(format!("{}.{c}", i.table)))
                    })
                    .collect::<Result<_>>()?,
                None => (0..schema.arity()).collect(),
            };
            let mut rows = Vec::new();
            for row in &i.rows {
                if row.len() != positions.len() {
                    return Err(Error::Arity {
                        expected: positions.len(),
                        found: row.len(),
                    });
                }
                let mut out = vec![Operand::Const(Value::Null); schema.arity()];
                for (s, &pos) in row.iter().zip(&positions) {
                    out[pos] = r.operand(s, schema.columns[pos].ty)?;
                }
                rows.push(out);
            }
            Bound::Insert(BoundInsert { table, rows })
        }
        Statement::Update(u) => {
            r.add_table(&TableRef {
                name: u.table.clone(),
                alias: None,
            })?;
            let table = r.tables[0];
            let schema = catalog.table(table).schema.clone();
            let mut set = Vec::new();
            for (c, s) in &u.assignments {
                let pos = schema
                    .index_of(c)
                    .ok_or_else(|| Error::UnknownColumn(format!("{}.{c}", u.table)))?;
                set.push((pos, r.operand(s, schema.columns[pos].ty)?));
            }
            let pred = r.single_table_pred(&u.conditions)?;
            Bound::Update(BoundUpdate { table, set, pred })
        }
        Statement::Delete(d) => {
            r.add_table(&TableRef {
                name: d.table.clone(),
                alias: None,
            })?;
            let table = r.tables[0];
            let pred = r.single_table_pred(&d.conditions)?;
            Bound::Delete(BoundDelete { table, pred })
        }
    };
    Ok(PreparedStatement {
        id,
        statement: stmt.clone(),
        body,
        param_types: r.finish_params()?,
    })
}

/// Checks and coerces parameter values against the statement's inferred types.
pub fn bind_params(p: &PreparedStatement, params: Vec<Value>) -> Result<Vec<Value>> {
    if params.len() != p.param_types.len() {
        return Err(Error::Arity {
            expected: p.param_types.len(),
            found: params.len(),
        });
    }
    let params = params
        .into_iter()
        .zip(&p.param_types)
        .map(|(v, &ty)| coerce_const(v, ty))
        .collect::<Result<Vec<_>>>()?;
    if let Some(Operand::Param(i)) = p.select().and_then(|s| s.limit.as_ref()) {
        match params[*i] {
            Value::Int(n) if n > 0 => {}
            Value::Int(n) => return Err(Error::InvalidLimit(n)),
            _ => return Err(Error::Type("LIMIT must be a non-null integer".into())),
        }
    }
    Ok(params)
}

pub fn bind(
    p: &Arc<PreparedStatement>,
    params: Vec<Value>,
    qid: QueryId,
    arrival: ArrivalTimestamp,
) -> Result<QueryInstance> {
    Ok(QueryInstance {
        prepared: p.clone(),
        params: bind_params(p, params)?.into(),
        qid,
        arrival,
        path: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn shop_catalog() -> Catalog {
        Catalog::parse(
            "CREATE TABLE USERS (USER_ID INT PRIMARY KEY, USERNAME VARCHAR, COUNTRY VARCHAR, BIRTHDATE DATE);
             CREATE TABLE ORDERS (ORDER_ID INT PRIMARY KEY, USER_ID INT, ITEM_ID INT, STATUS VARCHAR, DATE DATE);
             CREATE TABLE ITEMS (ITEM_ID INT PRIMARY KEY, CATEGORY VARCHAR, PRICE FLOAT, AVAILABLE INT);",
        )
        .unwrap()
    }

    fn prep(sql: &str) -> Result<PreparedStatement> {
        prepare(&parse(sql)?, &shop_catalog(), StatementId(0))
    }

    #[test]
    fn category_param_is_a_string() {
        let p = prep("SELECT * FROM ITEMS I WHERE I.CATEGORY = ? ORDER BY I.PRICE").unwrap();
        assert_eq!(p.param_types, vec![ValueType::Str]);
    }

    #[test]
    fn no_params() {
        let p = prep("SELECT COUNTRY, SUM(USER_ID) FROM USERS GROUP BY COUNTRY").unwrap();
        assert!(p.param_types.is_empty());
        let s = p.select().unwrap();
        assert_eq!(s.grouping.as_ref().unwrap().aggs.len(), 1);
        assert_eq!(s.labels_out, vec!["USERS.COUNTRY", "SUM(USER_ID)"]);
    }

    #[test]
    fn date_param_inferred_from_column() {
        let p = prep("SELECT * FROM ORDERS O, ITEMS I WHERE O.ITEM_ID = I.ITEM_ID AND O.DATE > ? ORDER BY I.PRICE")
            .unwrap();
        assert_eq!(p.param_types, vec![ValueType::Date]);
        let s = p.select().unwrap();
        assert_eq!(s.joins.len(), 1);
        assert_eq!(s.projection.len(), 5 + 4);
        assert_eq!(s.labels_out[0], "O.ORDER_ID");
    }

    #[test]
    fn string_literal_coerces_to_date() {
        let p = prep("SELECT USERNAME FROM USERS WHERE BIRTHDATE > '1980-01-01'").unwrap();
        let atom = &p.select().unwrap().filters[0].atoms[0];
        assert_eq!(atom.operand, Operand::Const(Value::date("1980-01-01").unwrap()));
        assert!(matches!(
            prep("SELECT USERNAME FROM USERS WHERE BIRTHDATE > 7"),
            Err(Error::TypeMismatch { .. })
        ));
    }

    #[test]
    fn resolution_errors() {
        assert!(matches!(prep("SELECT X FROM USERS"), Err(Error::UnknownColumn(_))));
        assert!(matches!(prep("SELECT * FROM NOPE"), Err(Error::UnknownTable(_))));
        assert!(matches!(
            prep("SELECT USER_ID FROM USERS U, ORDERS O WHERE U.USER_ID = O.USER_ID"),
            Err(Error::AmbiguousColumn(_))
        ));
        assert!(matches!(
            prep("SELECT * FROM USERS U, ORDERS O WHERE U.USER_ID < O.USER_ID"),
            Err(Error::NonEquiJoin(_))
        ));
        assert!(matches!(
            prep("SELECT SUM(USERNAME) FROM USERS"),
            Err(Error::NonNumericAggregate(_))
        ));
        assert!(matches!(prep("SELECT * FROM USERS U, USERS V"), Err(Error::Unsupported(_))));
        assert!(matches!(prep("SELECT USERNAME FROM USERS LIMIT 3"), Err(Error::Unsupported(_))));
        assert!(matches!(
            prep("SELECT USERNAME FROM USERS ORDER BY USERNAME LIMIT 0"),
            Err(Error::InvalidLimit(0))
        ));
        assert!(matches!(
            prep("SELECT USERNAME, COUNT(*) FROM USERS GROUP BY COUNTRY"),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn bind_checks_arity_and_types() {
        let p = Arc::new(prep("SELECT * FROM ORDERS O WHERE O.DATE > ? AND O.USER_ID = ?").unwrap());
        let q = bind(&p, vec![Value::str("2011-06-01"), Value::Int(3)], QueryId(1), 1).unwrap();
        assert_eq!(q.params[0], Value::date("2011-06-01").unwrap());
        assert!(matches!(bind(&p, vec![Value::Int(1)], QueryId(2), 2), Err(Error::Arity { .. })));
        assert!(bind(&p, vec![Value::Int(1), Value::Int(3)], QueryId(2), 2).is_err());
        let a = bind(&p, vec![Value::str("2011-06-01"), Value::Int(3)], QueryId(3), 3).unwrap();
        let b = bind(&p, vec![Value::str("2011-06-01"), Value::Int(3)], QueryId(4), 4).unwrap();
        assert_ne!(a.qid, b.qid);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn writes_resolve() {
        let p = prep("INSERT INTO ITEMS (ITEM_ID, PRICE) VALUES (?, 3)").unwrap();
        let Bound::Insert(i) = &p.body else { panic!() };
        assert_eq!(i.rows[0][2], Operand::Const(Value::Float(3.0)));
        assert_eq!(i.rows[0][1], Operand::Const(Value::Null));
        assert_eq!(p.param_types, vec![ValueType::Int]);
        let p = prep("UPDATE USERS SET COUNTRY = ? WHERE USERNAME = ?").unwrap();
        assert_eq!(p.param_types, vec![ValueType::Str, ValueType::Str]);
        assert!(prep("INSERT INTO ITEMS VALUES (1)").is_err());
    }

    #[test]
    fn unresolvable_parameter() {
        let p = prepare(
            &Statement::Select(Select {
                items: vec![SelectItem::Star],
                from: vec![TableRef {
                    name: "USERS".into(),
                    alias: None,
                }],
                conditions: vec![Condition {
                    left: Term::Expr(Expr::Column(ColumnName {
                        qualifier: None,
                        name: "USER_ID".into(),
                    })),
                    op: CmpOp::Eq,
                    right: Term::Scalar(Scalar::Param(1)),
                }],
                group_by: vec![],
                having: vec![],
                order_by: None,
                limit: None,
            }),
            &shop_catalog(),
            StatementId(0),
        );
        assert_eq!(p.unwrap_err(), Error::UnresolvableParameter(0));
    }
}
