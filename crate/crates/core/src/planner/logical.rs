use std::fmt::Write as _;

use crate::datamodel::{CmpOp, Operand, Predicate, TableId};
use crate::error::{Error, Result};
use crate::frontend::{
    AggTemplate, BaseCol, Bound, Catalog, ColumnRef, HavingAtom, PreparedStatement, SortDir,
};

#[derive(Debug, Clone, PartialEq)]
pub enum AccessMethod {
    Scan,
    /// Index look-up on `column` with the key taken from `pred.atoms[atom]`.
    Probe { column: usize, atom: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JoinMethod {
    Hash,
    QueryId,
    IndexNestedLoop,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogicalPlan {
    Access {
        table: TableId,
        pred: Predicate,
        method: AccessMethod,
    },
    /// Output columns are the outer's followed by the inner's.
    Join {
        outer: Box<LogicalPlan>,
        inner: Box<LogicalPlan>,
        outer_key: BaseCol,
        inner_key: BaseCol,
        method: JoinMethod,
    },
    Filter {
        input: Box<LogicalPlan>,
        eqs: Vec<(BaseCol, BaseCol)>,
    },
    GroupBy {
        input: Box<LogicalPlan>,
        keys: Vec<BaseCol>,
        aggs: Vec<AggTemplate>,
        having: Vec<HavingAtom>,
    },
    Sort {
        input: Box<LogicalPlan>,
        key: ColumnRef,
        dir: SortDir,
    },
    TopN {
        input: Box<LogicalPlan>,
        key: ColumnRef,
        dir: SortDir,
        limit: Operand,
    },
    Output {
        input: Box<LogicalPlan>,
        projection: Vec<ColumnRef>,
    },
}

impl LogicalPlan {
    pub fn schema(&self, catalog: &Catalog) -> Vec<ColumnRef> {
        match self {
            LogicalPlan::Access { table, .. } => (0..catalog.table(*table).schema.arity())
                .map(|column| ColumnRef::Base(BaseCol { table: *table, column }))
                .collect(),
            LogicalPlan::Join { outer, inner, .. } => {
                let mut s = outer.schema(catalog);
                s.extend(inner.schema(catalog));
                s
            }
            LogicalPlan::GroupBy { keys, aggs, .. } => keys
                .iter()
                .map(|k| ColumnRef::Base(*k))
                .chain(aggs.iter().map(|a| ColumnRef::Agg(*a)))
                .collect(),
            LogicalPlan::Filter { input, .. }
            | LogicalPlan::Sort { input, .. }
            | LogicalPlan::TopN { input, .. } => input.schema(catalog),
            LogicalPlan::Output { projection, .. } => projection.clone(),
        }
    }

    pub fn input(&self) -> Option<&LogicalPlan> {
        match self {
            LogicalPlan::Access { .. } | LogicalPlan::Join { .. } => None,
            LogicalPlan::Filter { input, .. }
            | LogicalPlan::GroupBy { input, .. }
            | LogicalPlan::Sort { input, .. }
            | LogicalPlan::TopN { input, .. }
            | LogicalPlan::Output { input, .. } => Some(input),
        }
    }

    /// Number of plan nodes, counting each access once.
    pub fn node_count(&self) -> usize {
        match self {
            LogicalPlan::Access { .. } => 1,
            LogicalPlan::Join { outer, inner, .. } => 1 + outer.node_count() + inner.node_count(),
            other => 1 + other.input().map_or(0, LogicalPlan::node_count),
        }
    }

    /// True when every table access below is an index probe.
    pub fn is_point_lookup(&self) -> bool {
        match self {
            LogicalPlan::Access { method, .. } => matches!(method, AccessMethod::Probe { .. }),
            LogicalPlan::Join { outer, inner, .. } => outer.is_point_lookup() && inner.is_point_lookup(),
            other => other.input().is_some_and(LogicalPlan::is_point_lookup),
        }
    }

    pub fn describe(&self, catalog: &Catalog) -> String {
        let mut out = String::new();
        self.describe_into(catalog, 0, &mut out);
        out
    }

    fn describe_into(&self, catalog: &Catalog, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        let col = |c: &BaseCol| catalog.column_label(c.table, c.column);
        match self {
            LogicalPlan::Access { table, pred, method } => {
                let def = catalog.table(*table);
                let atoms: Vec<String> = pred
                    .atoms
                    .iter()
                    .map(|a| {
                        let operand = match &a.operand {
                            Operand::Const(v) => v.to_string(),
                            Operand::Param(i) => format!("${i}"),
                        };
                        format!("{} {} {operand}", def.schema.columns[a.column].name, a.op)
                    })
                    .collect();
                let how = match method {
                    AccessMethod::Scan => "Scan".to_string(),
                    AccessMethod::Probe { column, .. } => {
                        format!("Probe[{}]", def.schema.columns[*column].name)
                    }
                };
                let _ = writeln!(out, "{pad}{how}({}) [{}]", def.name, atoms.join(" AND "));
            }
            LogicalPlan::Join {
                outer,
                inner,
                outer_key,
                inner_key,
                method,
            } => {
                let _ = writeln!(out, "{pad}{method:?}Join({} = {})", col(outer_key), col(inner_key));
                outer.describe_into(catalog, depth + 1, out);
                inner.describe_into(catalog, depth + 1, out);
            }
            LogicalPlan::Filter { input, eqs } => {
                let eqs: Vec<String> = eqs.iter().map(|(a, b)| format!("{} = {}", col(a), col(b))).collect();
                let _ = writeln!(out, "{pad}Filter({})", eqs.join(" AND "));
                input.describe_into(catalog, depth + 1, out);
            }
            LogicalPlan::GroupBy { input, keys, aggs, .. } => {
                let keys: Vec<String> = keys.iter().map(col).collect();
                let aggs: Vec<String> = aggs.iter().map(|a| a.display(catalog)).collect();
                let _ = writeln!(out, "{pad}GroupBy([{}], [{}])", keys.join(", "), aggs.join(", "));
                input.describe_into(catalog, depth + 1, out);
            }
            LogicalPlan::Sort { input, key, dir } => {
                let _ = writeln!(out, "{pad}Sort({} {dir})", key.display(catalog));
                input.describe_into(catalog, depth + 1, out);
            }
            LogicalPlan::TopN { input, key, dir, .. } => {
                let _ = writeln!(out, "{pad}TopN({} {dir})", key.display(catalog));
                input.describe_into(catalog, depth + 1, out);
            }
            LogicalPlan::Output { input, projection } => {
                let cols: Vec<String> = projection.iter().map(|c| c.display(catalog)).collect();
                let _ = writeln!(out, "{pad}Output({})", cols.join(", "));
                input.describe_into(catalog, depth + 1, out);
            }
        }
    }
}

fn access(table: TableId, pred: &Predicate, catalog: &Catalog) -> LogicalPlan {
    let def = catalog.table(table);
    let probe = pred
        .atoms
        .iter()
        .enumerate()
        .find(|(_, a)| a.op == CmpOp::Eq && def.has_index(a.column));
    let method = match probe {
        Some((atom, a)) => AccessMethod::Probe {
            column: a.column,
            atom,
        },
        None => AccessMethod::Scan,
    };
    LogicalPlan::Access {
        table,
        pred: pred.clone(),
        method,
    }
}

fn join_method(outer: &LogicalPlan, inner: &LogicalPlan, inner_key: BaseCol, catalog: &Catalog) -> JoinMethod {
    let indexed = catalog.table(inner_key.table).has_index(inner_key.column);
    if indexed && outer.is_point_lookup() {
        JoinMethod::IndexNestedLoop
    } else if outer.is_point_lookup() && inner.is_point_lookup() {
        JoinMethod::QueryId
    } else {
        JoinMethod::Hash
    }
}

/// Per-statement plan: selections pushed onto accesses, joins left-deep in
/// FROM order, then filter, group-by, sort or top-n, output.
pub fn compile_single(p: &PreparedStatement, catalog: &Catalog) -> Result<LogicalPlan> {
    let s = match &p.body {
        Bound::Select(s) => s,
        _ => return Err(Error::Unsupported(format!("{} statements have no query plan", p.statement.kind()))),
    };
    let mut plan = access(s.tables[0], &s.filters[0], catalog);
    let mut joined = vec![s.tables[0]];
    let mut used = vec![false; s.joins.len()];
    for (pos, &t) in s.tables.iter().enumerate().skip(1) {
        let link = s.joins.iter().enumerate().find(|(i, (a, b))| {
            !used[*i]
                && ((a.table == t && joined.contains(&b.table)) || (b.table == t && joined.contains(&a.table)))
        });
        let Some((i, &(a, b))) = link else {
            return Err(Error::Unsupported(format!(
                "table {} is not joined to the preceding tables (cross products are not supported)",
                catalog.table(t).name
            )));
        };
        used[i] = true;
        let (new_key, old_key) = if a.table == t { (a, b) } else { (b, a) };
        let new_side = access(t, &s.filters[pos], catalog);
        let (outer, inner, outer_key, inner_key) = if pos == 1 {
            let indexed = |k: BaseCol| catalog.table(k.table).has_index(k.column);
            let left_inl = plan.is_point_lookup() && indexed(new_key);
            let right_inl = new_side.is_point_lookup() && indexed(old_key);
            let left_rows = catalog.table(s.tables[0]).rows;
            let right_rows = catalog.table(t).rows;
            if right_inl && !left_inl || right_inl == left_inl && left_rows < right_rows {
                (new_side, plan, new_key, old_key)
            } else {
                (plan, new_side, old_key, new_key)
            }
        } else {
            (plan, new_side, old_key, new_key)
        };
        let method = join_method(&outer, &inner, inner_key, catalog);
        plan = LogicalPlan::Join {
            outer: Box::new(outer),
            inner: Box::new(inner),
            outer_key,
            inner_key,
            method,
        };
        joined.push(t);
    }
    let mut eqs: Vec<(BaseCol, BaseCol)> = s
        .joins
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(j, _)| *j)
        .collect();
    eqs.extend(s.column_eqs.iter().copied());
    if !eqs.is_empty() {
        plan = LogicalPlan::Filter {
            input: Box::new(plan),
            eqs,
        };
    }
    if let Some(g) = &s.grouping {
        plan = LogicalPlan::GroupBy {
            input: Box::new(plan),
            keys: g.keys.clone(),
            aggs: g.aggs.clone(),
            having: g.having.clone(),
        };
    }
    if let Some((key, dir)) = s.order {
        plan = match &s.limit {
            Some(limit) => LogicalPlan::TopN {
                input: Box::new(plan),
                key,
                dir,
                limit: limit.clone(),
            },
            None => LogicalPlan::Sort {
                input: Box::new(plan),
                key,
                dir,
            },
        };
    }
    Ok(LogicalPlan::Output {
        input: Box::new(plan),
        projection: s.projection.clone(),
    })
}
