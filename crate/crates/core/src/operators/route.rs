use std::collections::BTreeMap;

use crate::datamodel::{QueryId, QuerySet, Row, SharedTuple};
use crate::error::{Error, Result};

/// Splits a stream across out edges: edge `i` gets every tuple restricted
/// to `edges[i]`, dropping tuples left with no queries.
pub fn segregate(tuples: Vec<SharedTuple>, edges: &[&QuerySet]) -> Vec<Vec<SharedTuple>> {
    if let [_] = edges {
        return vec![tuples];
    }
    let mut out: Vec<Vec<SharedTuple>> = edges.iter().map(|_| Vec::new()).collect();
    for t in &tuples {
        for (i, e) in edges.iter().enumerate() {
            if t.queries.is_subset_of(e) {
                out[i].push(t.clone());
                continue;
            }
            let qs = t.queries.intersect(e);
            if !qs.is_empty() {
                out[i].push(t.with_queries(qs));
            }
        }
    }
    out
}

/// Delivers each tuple to every query it is tagged with, projected by that
/// query's column list. `projection` returns `None` for queries the
/// router does not know.
pub fn route<'a>(
    tuples: &[SharedTuple],
    projection: impl Fn(QueryId) -> Option<&'a [usize]>,
    rows: &mut BTreeMap<QueryId, Vec<Row>>,
) -> Result<()> {
    for t in tuples {
        for q in t.queries.iter() {
            let cols = projection(q).ok_or(Error::UnknownQuery(q))?;
            rows.entry(q)
                .or_default()
                .push(cols.iter().map(|&c| t.values[c].clone()).collect());
        }
    }
    Ok(())
}
