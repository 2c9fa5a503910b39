use std::cmp::Ordering;
use std::fmt;

use super::{SharedTuple, Value, ValueType};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    /// `LIKE 'abc%'`; only trailing-`%` patterns are accepted.
    LikePrefix,
}

impl CmpOp {
    /// The operator with its operands swapped (`a < b` ⇔ `b > a`).
    pub fn flipped(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq | CmpOp::LikePrefix => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::LikePrefix => "LIKE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Const(Value),
    Param(usize),
}

impl Operand {
    pub fn resolve<'a>(&'a self, params: &'a [Value]) -> Result<&'a Value> {
        match self {
            Operand::Const(v) => Ok(v),
            Operand::Param(i) => params.get(*i).ok_or(Error::UnboundParameter(*i)),
        }
    }
}

/// `column <op> operand`, where `column` indexes the tuple being tested.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub column: usize,
    pub op: CmpOp,
    pub operand: Operand,
}

impl Atom {
    pub fn new(column: usize, op: CmpOp, operand: Operand) -> Atom {
        Atom { column, op, operand }
    }

    pub fn eval(&self, values: &[Value], params: &[Value]) -> Result<bool> {
        let operand = self.operand.resolve(params)?;
        let value = values
            .get(self.column)
            .ok_or_else(|| Error::UnknownColumn(format!("#{}", self.column)))?;
        if self.op == CmpOp::LikePrefix {
            return like_prefix(value, operand);
        }
        Ok(match value.try_compare(operand)? {
            Some(ord) => self.op.holds(ord),
            None => false,
        })
    }
}

fn like_prefix(value: &Value, pattern: &Value) -> Result<bool> {
    let (v, p) = match (value, pattern) {
        (Value::Null, _) | (_, Value::Null) => return Ok(false),
        (Value::Str(v), Value::Str(p)) => (v, p),
        (a, b) => {
            return Err(Error::TypeMismatch {
                left: a.value_type().expect("non-null"),
                right: b.value_type().expect("non-null"),
            })
        }
    };
    match like_pattern_prefix(p)? {
        (prefix, true) => Ok(v.starts_with(prefix)),
        (exact, false) => Ok(v.as_ref() == exact),
    }
}

/// Splits a LIKE pattern into its literal part and whether it ends in `%`.
pub fn like_pattern_prefix(pattern: &str) -> Result<(&str, bool)> {
    let (body, wildcard) = match pattern.strip_suffix('%') {
        Some(body) => (body, true),
        None => (pattern, false),
    };
    if body.contains('%') {
        return Err(Error::Unsupported(format!(
            "LIKE pattern '{pattern}': only prefix patterns are supported"
        )));
    }
    Ok((body, wildcard))
}

/// Conjunction of atoms; the empty predicate is true.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Predicate {
    pub atoms: Vec<Atom>,
}

impl Predicate {
    pub fn always() -> Predicate {
        Predicate { atoms: Vec::new() }
    }

    pub fn new(atoms: Vec<Atom>) -> Predicate {
        Predicate { atoms }
    }

    pub fn is_always(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn eval(&self, values: &[Value], params: &[Value]) -> Result<bool> {
        for atom in &self.atoms {
            if !atom.eval(values, params)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Checks that referenced columns exist and constant operands have the
    /// column's type.
    pub fn validate(&self, types: &[ValueType]) -> Result<()> {
        for atom in &self.atoms {
            let ty = *types
                .get(atom.column)
                .ok_or_else(|| Error::UnknownColumn(format!("#{}", atom.column)))?;
            if atom.op == CmpOp::LikePrefix && ty != ValueType::Str {
                return Err(Error::Type(format!("LIKE on {ty} column")));
            }
            if let Operand::Const(v) = &atom.operand {
                if let Some(vt) = v.value_type() {
                    if vt != ty {
                        return Err(Error::TypeMismatch { left: ty, right: vt });
                    }
                }
                if let (CmpOp::LikePrefix, Value::Str(p)) = (atom.op, v) {
                    like_pattern_prefix(p)?;
                }
            }
        }
        Ok(())
    }

    /// Replaces every parameter slot with its value.
    pub fn bind(&self, params: &[Value]) -> Result<Predicate> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                Ok(Atom {
                    column: a.column,
                    op: a.op,
                    operand: Operand::Const(a.operand.resolve(params)?.clone()),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Predicate { atoms })
    }

    pub fn and(mut self, other: Predicate) -> Predicate {
        self.atoms.extend(other.atoms);
        self
    }
}

/// Evaluates a fully bound predicate against a tuple. Null never satisfies
/// an atom.
pub fn eval_predicate(p: &Predicate, t: &SharedTuple) -> Result<bool> {
    p.eval(&t.values, &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{Lineage, QueryId, QuerySet, RowId};

    fn user(name: &str, account: i64, birth: &str) -> SharedTuple {
        SharedTuple::new(
            vec![Value::str(name), Value::Int(account), Value::date(birth).unwrap()],
            QuerySet::single(QueryId(0)),
            Lineage::base(0, RowId(0)),
        )
    }

    #[test]
    fn birthdate_after_1980() {
        let p = Predicate::new(vec![Atom::new(
            2,
            CmpOp::Gt,
            Operand::Const(Value::date("1980.01.01").unwrap()),
        )]);
        assert!(eval_predicate(&p, &user("John Smith", 3000, "1980.03.05")).unwrap());
    }

    #[test]
    fn account_over_1000() {
        let p = Predicate::new(vec![Atom::new(1, CmpOp::Gt, Operand::Const(Value::Int(1000)))]);
        assert!(!eval_predicate(&p, &user("Kate Johnson", 800, "1976.04.11")).unwrap());
    }

    #[test]
    fn null_never_matches() {
        let t = SharedTuple::new(vec![Value::Null], QuerySet::single(QueryId(0)), Lineage::derived());
        for op in [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge] {
            let p = Predicate::new(vec![Atom::new(0, op, Operand::Const(Value::Int(1)))]);
            assert!(!eval_predicate(&p, &t).unwrap());
        }
        let p = Predicate::new(vec![Atom::new(0, CmpOp::LikePrefix, Operand::Const(Value::str("a%")))]);
        assert!(!eval_predicate(&p, &t).unwrap());
    }

    #[test]
    fn type_mismatch_is_an_error() {
        let p = Predicate::new(vec![Atom::new(1, CmpOp::Eq, Operand::Const(Value::str("x")))]);
        assert!(eval_predicate(&p, &user("a", 1, "2000-01-01")).is_err());
    }

    #[test]
    fn unbound_parameter_is_an_error() {
        let p = Predicate::new(vec![Atom::new(1, CmpOp::Eq, Operand::Param(0))]);
        assert_eq!(
            eval_predicate(&p, &user("a", 1, "2000-01-01")).unwrap_err(),
            Error::UnboundParameter(0)
        );
        let bound = p.bind(&[Value::Int(1)]).unwrap();
        assert!(eval_predicate(&bound, &user("a", 1, "2000-01-01")).unwrap());
    }

    #[test]
    fn like_prefix_patterns() {
        let t = user("Bill Harisson", 1230, "1978.03.02");
        let like = |pat: &str| Predicate::new(vec![Atom::new(0, CmpOp::LikePrefix, Operand::Const(Value::str(pat)))]);
        assert!(eval_predicate(&like("Bill%"), &t).unwrap());
        assert!(!eval_predicate(&like("Nick%"), &t).unwrap());
        assert!(eval_predicate(&like("Bill Harisson"), &t).unwrap());
        assert!(eval_predicate(&like("%son"), &t).is_err());
    }
}
