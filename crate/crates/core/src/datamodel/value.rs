use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueType {
    Int,
    Float,
    Str,
    Date,
}

impl ValueType {
    pub fn is_numeric(self) -> bool {
        matches!(self, ValueType::Int | ValueType::Float)
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueType::Int => "INT",
            ValueType::Float => "FLOAT",
            ValueType::Str => "VARCHAR",
            ValueType::Date => "DATE",
        })
    }
}

/// Calendar date stored as days since 1970-01-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Date(pub i32);

impl Date {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Date> {
        NaiveDate::from_ymd_opt(year, month, day).map(Self::from_naive)
    }

    /// Accepts `YYYY-MM-DD` and `YYYY.MM.DD`.
    pub fn parse(text: &str) -> Option<Date> {
        let text = text.trim();
        let sep = if text.contains('-') { '-' } else { '.' };
        let mut parts = text.split(sep);
        let year = parts.next()?.parse().ok()?;
        let month = parts.next()?.parse().ok()?;
        let day = parts.next()?.parse().ok()?;
        if parts.next().is_some() {
            return None;
        }
        Self::from_ymd(year, month, day)
    }

    fn from_naive(d: NaiveDate) -> Date {
        Date(d.num_days_from_ce() - EPOCH_DAYS_FROM_CE)
    }

    fn to_naive(self) -> NaiveDate {
        NaiveDate::from_num_days_from_ce_opt(self.0 + EPOCH_DAYS_FROM_CE).unwrap_or(NaiveDate::MIN)
    }
}

// NaiveDate::from_ymd(1970, 1, 1).num_days_from_ce()
const EPOCH_DAYS_FROM_CE: i32 = 719_163;

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.to_naive();
        write!(f, "{:04}-{:02}-{:02}", d.year(), d.month(), d.day())
    }
}

#[derive(Debug, Clone, Default)]
pub enum Value {
    #[default]
    Null,
    Int(i64),
    Float(f64),
    Str(Arc<str>),
    Date(Date),
}

impl Value {
    pub fn str(s: impl AsRef<str>) -> Value {
        Value::Str(Arc::from(s.as_ref()))
    }

    pub fn date(text: &str) -> Option<Value> {
        Date::parse(text).map(Value::Date)
    }

    pub fn value_type(&self) -> Option<ValueType> {
        match self {
            Value::Null => None,
            Value::Int(_) => Some(ValueType::Int),
            Value::Float(_) => Some(ValueType::Float),
            Value::Str(_) => Some(ValueType::Str),
            Value::Date(_) => Some(ValueType::Date),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    /// SQL-style comparison. `Ok(None)` when either side is null; unlike
    /// non-null types are an error.
    pub fn try_compare(&self, other: &Value) -> Result<Option<Ordering>> {
        Ok(match (self, other) {
            (Value::Null, _) | (_, Value::Null) => None,
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Float(a), Value::Float(b)) => a.partial_cmp(b),
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::Date(a), Value::Date(b)) => Some(a.cmp(b)),
            (a, b) => {
                return Err(Error::TypeMismatch {
                    left: a.value_type().expect("non-null"),
                    right: b.value_type().expect("non-null"),
                })
            }
        })
    }

    /// Converts a value to `ty` where the conversion is lossless and
    /// unambiguous: INT widens to FLOAT, date strings parse to DATE.
    pub fn coerce_to(self, ty: ValueType) -> Result<Value> {
        match (self, ty) {
            (Value::Null, _) => Ok(Value::Null),
            (Value::Int(v), ValueType::Float) => Ok(Value::Float(v as f64)),
            (Value::Str(s), ValueType::Date) => Date::parse(&s)
                .map(Value::Date)
                .ok_or_else(|| Error::Type(format!("'{s}' is not a date"))),
            (v, ty) if v.value_type() == Some(ty) => Ok(v),
            (v, ty) => Err(Error::Type(format!(
                "expected {ty}, found {}",
                v.value_type().expect("non-null")
            ))),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Int(_) => 1,
            Value::Float(_) => 2,
            Value::Str(_) => 3,
            Value::Date(_) => 4,
        }
    }
}

/// Total order used for sorting, grouping and hashing: nulls first, then by
/// type, floats by `total_cmp`.
impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Null => {}
            Value::Int(v) => v.hash(state),
            Value::Float(v) => v.to_bits().hash(state),
            Value::Str(s) => s.hash(state),
            Value::Date(d) => d.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v:?}"),
            Value::Str(s) => f.write_str(s),
            Value::Date(d) => write!(f, "{d}"),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::str(v)
    }
}

impl From<Date> for Value {
    fn from(v: Date) -> Self {
        Value::Date(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dates_parse_in_both_forms() {
        let a = Date::parse("1980.01.01").unwrap();
        let b = Date::parse("1980-01-01").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "1980-01-01");
        assert_eq!(Date::parse("1970-01-01"), Some(Date(0)));
        assert!(Date::parse("1980-13-01").is_none());
        assert!(Date::parse("hello").is_none());
    }

    #[test]
    fn unlike_types_do_not_compare() {
        let err = Value::Int(1).try_compare(&Value::Float(1.0)).unwrap_err();
        assert!(matches!(err, Error::TypeMismatch { .. }));
        assert_eq!(Value::Null.try_compare(&Value::Int(1)).unwrap(), None);
        assert_eq!(
            Value::str("a").try_compare(&Value::str("b")).unwrap(),
            Some(Ordering::Less)
        );
    }

    #[test]
    fn coercion_is_explicit() {
        assert_eq!(Value::Int(3).coerce_to(ValueType::Float).unwrap(), Value::Float(3.0));
        assert_eq!(
            Value::str("2011-06-01").coerce_to(ValueType::Date).unwrap(),
            Value::date("2011-06-01").unwrap()
        );
        assert!(Value::Float(1.5).coerce_to(ValueType::Int).is_err());
    }

    #[test]
    fn total_order_puts_nulls_first() {
        let mut v = vec![Value::Int(3), Value::Null, Value::Int(-1)];
        v.sort();
        assert_eq!(v, vec![Value::Null, Value::Int(-1), Value::Int(3)]);
    }
}
