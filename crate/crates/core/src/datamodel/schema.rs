use std::collections::HashSet;

use super::{Value, ValueType};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: ValueType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ValueType) -> Column {
        Column {
            name: name.into(),
            ty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub columns: Vec<Column>,
    pub primary_key: Option<usize>,
}

impl Schema {
    pub fn new(columns: Vec<Column>, primary_key: Option<&str>) -> Result<Schema> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Unsupported(format!("duplicate column {}", c.name)));
            }
        }
        let primary_key = match primary_key {
            Some(name) => Some(
                columns
                    .iter()
                    .position(|c| c.name == name)
                    .ok_or_else(|| Error::UnknownColumn(name.to_string()))?,
            ),
            None => None,
        };
        Ok(Schema { columns, primary_key })
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn types(&self) -> Vec<ValueType> {
        self.columns.iter().map(|c| c.ty).collect()
    }

    /// Checks arity and per-column types; nulls are accepted anywhere except
    /// the primary key.
    pub fn check_row(&self, values: &[Value]) -> Result<()> {
        if values.len() != self.arity() {
            return Err(Error::Type(format!(
                "expected {} values, found {}",
                self.arity(),
                values.len()
            )));
        }
        for (i, (c, v)) in self.columns.iter().zip(values).enumerate() {
            match v.value_type() {
                None if self.primary_key == Some(i) => {
                    return Err(Error::Type(format!("primary key {} is null", c.name)))
                }
                None => {}
                Some(t) if t == c.ty => {}
                Some(t) => {
                    return Err(Error::Type(format!(
                        "column {} expects {}, found {t}",
                        c.name, c.ty
                    )))
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let cols = vec![Column::new("A", ValueType::Int), Column::new("A", ValueType::Str)];
        assert!(Schema::new(cols, None).is_err());
    }

    #[test]
    fn row_checks() {
        let s = Schema::new(
            vec![Column::new("ID", ValueType::Int), Column::new("NAME", ValueType::Str)],
            Some("ID"),
        )
        .unwrap();
        assert!(s.check_row(&[Value::Int(1), Value::Null]).is_ok());
        assert!(s.check_row(&[Value::Null, Value::str("x")]).is_err());
        assert!(s.check_row(&[Value::Int(1)]).is_err());
        assert!(s.check_row(&[Value::str("1"), Value::str("x")]).is_err());
    }
}
