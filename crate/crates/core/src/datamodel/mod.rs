//! Values, schemas, predicates and the query-tagged tuple representation.
//!
//! Every intermediate tuple carries a [`QuerySet`]: the sorted list of the
//! live queries it is relevant to. Operators apply their work once per tuple
//! regardless of how many queries subscribed to it, and tuples are only
//! expanded to one row per query at the very end of a path.

mod predicate;
mod queryset;
mod schema;
mod tuple;
mod value;

pub use predicate::{eval_predicate, like_pattern_prefix, Atom, CmpOp, Operand, Predicate};
pub use queryset::{queryset_intersect, queryset_union, QueryId, QuerySet};
pub use schema::{Column, Schema};
pub use tuple::{
    compact_first_normal_form, to_first_normal_form, tuple_order, Lineage, RowId, SharedTuple,
    TableId,
};
pub use value::{Date, Value, ValueType};

/// Logical admission time. Strictly increasing across every query and
/// update admitted to one engine; `0` is reserved for loaded data.
pub type ArrivalTimestamp = u64;

pub type Row = Vec<Value>;
