use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use smallvec::SmallVec;

use super::{QueryId, QuerySet, Value};

pub type TableId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub u64);

/// Base rows a tuple was derived from, as `(table, row)` pairs sorted by
/// table. Group-by outputs have an empty lineage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lineage(SmallVec<[(TableId, RowId); 2]>);

impl Lineage {
    pub fn base(table: TableId, row: RowId) -> Lineage {
        let mut v = SmallVec::new();
        v.push((table, row));
        Lineage(v)
    }

    pub fn derived() -> Lineage {
        Lineage(SmallVec::new())
    }

    pub fn join(&self, other: &Lineage) -> Lineage {
        let mut v: SmallVec<[(TableId, RowId); 2]> = SmallVec::with_capacity(self.0.len() + other.0.len());
        v.extend(self.0.iter().copied());
        v.extend(other.0.iter().copied());
        v.sort_unstable();
        Lineage(v)
    }

    pub fn entries(&self) -> &[(TableId, RowId)] {
        &self.0
    }

    /// Row id when the tuple comes from exactly one base row.
    pub fn row_id(&self) -> Option<RowId> {
        match self.0.as_slice() {
            [(_, r)] => Some(*r),
            _ => None,
        }
    }
}

/// A relational row plus the set of queries it is relevant to.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedTuple {
    pub values: Arc<[Value]>,
    pub queries: QuerySet,
    pub lineage: Lineage,
}

impl SharedTuple {
    pub fn new(values: impl Into<Arc<[Value]>>, queries: QuerySet, lineage: Lineage) -> SharedTuple {
        SharedTuple {
            values: values.into(),
            queries,
            lineage,
        }
    }

    /// Concatenates `self` (outer) with `inner`.
    pub fn joined(&self, inner: &SharedTuple, queries: QuerySet) -> SharedTuple {
        let mut values = Vec::with_capacity(self.values.len() + inner.values.len());
        values.extend_from_slice(&self.values);
        values.extend_from_slice(&inner.values);
        SharedTuple {
            values: values.into(),
            queries,
            lineage: self.lineage.join(&inner.lineage),
        }
    }

    pub fn with_queries(&self, queries: QuerySet) -> SharedTuple {
        SharedTuple {
            values: self.values.clone(),
            queries,
            lineage: self.lineage.clone(),
        }
    }
}

/// Sort order shared by every executor: key, then lineage, then all values.
/// Descending is the exact reverse.
pub fn tuple_order(key_a: &Value, a: (&Lineage, &[Value]), key_b: &Value, b: (&Lineage, &[Value])) -> Ordering {
    key_a
        .cmp(key_b)
        .then_with(|| a.0.cmp(b.0))
        .then_with(|| a.1.cmp(b.1))
}

/// One row per `(query, tuple)` pair.
pub fn to_first_normal_form(tuples: &[SharedTuple]) -> Vec<(QueryId, SharedTuple)> {
    let mut out = Vec::new();
    for t in tuples {
        for q in t.queries.iter() {
            out.push((q, t.with_queries(QuerySet::single(q))));
        }
    }
    out
}

/// Merges first-normal-form rows back into one tuple per distinct
/// `(lineage, values)`, in order of first appearance.
pub fn compact_first_normal_form(rows: &[(QueryId, SharedTuple)]) -> Vec<SharedTuple> {
    let mut order: Vec<(Lineage, Arc<[Value]>)> = Vec::new();
    let mut sets: BTreeMap<(Lineage, Arc<[Value]>), Vec<QueryId>> = BTreeMap::new();
    for (q, t) in rows {
        let key = (t.lineage.clone(), t.values.clone());
        let entry = sets.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        entry.push(*q);
    }
    order
        .into_iter()
        .map(|key| {
            let ids = sets.remove(&key).unwrap_or_default();
            SharedTuple {
                values: key.1,
                queries: QuerySet::from_ids(ids),
                lineage: key.0,
            }
        })
        .collect()
}
