//! Scalar operators with SQL NULL semantics.

use std::cmp::Ordering;

use num_integer::Integer;
use num_traits::Zero;

use super::ast::BinOp;
use crate::error::{Error, Result};
use crate::physlog::{Uid, Value};

/// Column values visible to an expression: the current row, then the rows
/// of enclosing queries.
#[derive(Clone, Copy)]
pub struct Env<'a> {
    pub cols: &'a [Uid],
    pub row: &'a [Value],
    pub parent: Option<&'a Env<'a>>,
}

impl<'a> Env<'a> {
    pub const EMPTY: Env<'static> = Env { cols: &[], row: &[], parent: None };

    pub fn new(cols: &'a [Uid], row: &'a [Value], parent: Option<&'a Env<'a>>) -> Env<'a> {
        Env { cols, row, parent }
    }

    pub fn get(&self, uid: Uid) -> Option<&'a Value> {
        match self.cols.iter().position(|c| *c == uid) {
            Some(i) => self.row.get(i),
            None => self.parent.and_then(|p| p.get(uid)),
        }
    }
}

/// Integer arithmetic stays integral (division truncates); anything
/// involving a Real is exact decimal arithmetic.
pub fn arith(op: BinOp, a: &Value, b: &Value) -> Result<Value> {
    if a.is_null() || b.is_null() {
        return Ok(Value::Null);
    }
    if let (Value::Integer(x), Value::Integer(y)) = (a, b) {
        let v = match op {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => {
                if y.is_zero() {
                    return Err(Error::DivisionByZero);
                }
                let (q, _) = x.div_rem(y);
                q
            }
            _ => unreachable!("not arithmetic"),
        };
        let v = Value::Integer(v);
        v.check_bounds()?;
        return Ok(v);
    }
    let (Some(x), Some(y)) = (a.as_decimal(), b.as_decimal()) else {
        return Err(Error::typ(format!(
            "cannot apply {} to {} and {}",
            op.symbol(),
            a.kind_name(),
            b.kind_name()
        )));
    };
    let d = match op {
        BinOp::Add => x.add(&y),
        BinOp::Sub => x.sub(&y),
        BinOp::Mul => x.mul(&y),
        BinOp::Div => x.div(&y)?,
        _ => unreachable!("not arithmetic"),
    };
    let v = Value::Real(d);
    v.check_bounds()?;
    Ok(v)
}

pub fn negate(v: &Value) -> Result<Value> {
    match v {
        Value::Null => Ok(Value::Null),
        Value::Integer(i) => Ok(Value::Integer(-i)),
        Value::Real(d) => Ok(Value::Real(d.neg())),
        other => Err(Error::typ(format!("cannot negate {}", other.kind_name()))),
    }
}

pub fn concat(a: &Value, b: &Value) -> Value {
    if a.is_null() || b.is_null() {
        return Value::Null;
    }
    Value::Char(format!("{a}{b}"))
}

/// Three-valued comparison.
pub fn compare(op: BinOp, a: &Value, b: &Value) -> Result<Value> {
    let Some(o) = a.sql_cmp(b)? else { return Ok(Value::Null) };
    let r = match op {
        BinOp::Eq => o == Ordering::Equal,
        BinOp::Ne => o != Ordering::Equal,
        BinOp::Lt => o == Ordering::Less,
        BinOp::Le => o != Ordering::Greater,
        BinOp::Gt => o == Ordering::Greater,
        BinOp::Ge => o != Ordering::Less,
        _ => unreachable!("not a comparison"),
    };
    Ok(Value::Boolean(r))
}

/// Truth value: `Some(bool)` or `None` for unknown.
pub fn truth(v: &Value) -> Result<Option<bool>> {
    match v {
        Value::Null => Ok(None),
        Value::Boolean(b) => Ok(Some(*b)),
        other => Err(Error::typ(format!("{} value '{other}' used as a condition", other.kind_name()))),
    }
}

pub fn from_truth(t: Option<bool>) -> Value {
    t.map(Value::Boolean).unwrap_or(Value::Null)
}

/// SQL LIKE with `%` and `_`.
pub fn like(s: &str, pattern: &str) -> bool {
    let s: Vec<char> = s.chars().collect();
    let p: Vec<char> = pattern.chars().collect();
    let (mut i, mut j) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while i < s.len() {
        if j < p.len() && (p[j] == '_' || p[j] == s[i]) {
            i += 1;
            j += 1;
        } else if j < p.len() && p[j] == '%' {
            star = Some((j, i));
            j += 1;
        } else if let Some((sj, si)) = star {
            j = sj + 1;
            i = si + 1;
            star = Some((sj, si + 1));
        } else {
            return false;
        }
    }
    while j < p.len() && p[j] == '%' {
        j += 1;
    }
    j == p.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_division_truncates() {
        assert_eq!(arith(BinOp::Div, &Value::int(7), &Value::int(2)).unwrap(), Value::int(3));
        assert_eq!(arith(BinOp::Div, &Value::int(-7), &Value::int(2)).unwrap(), Value::int(-3));
        assert!(matches!(arith(BinOp::Div, &Value::int(1), &Value::int(0)), Err(Error::DivisionByZero)));
    }

    #[test]
    fn decimal_division_rounds_to_thirty_digits() {
        // 5/19 = 0.263157894736842105263157894736|842...
        let v = arith(BinOp::Div, &Value::real("20000.00"), &Value::real("76000.00")).unwrap();
        assert_eq!(v.to_string(), "0.263157894736842105263157894737");
    }

    #[test]
    fn null_semantics() {
        assert_eq!(compare(BinOp::Eq, &Value::Null, &Value::Null).unwrap(), Value::Null);
        assert_eq!(concat(&Value::text("a"), &Value::text("b")), Value::text("ab"));
        assert_eq!(arith(BinOp::Add, &Value::Null, &Value::int(1)).unwrap(), Value::Null);
    }

    #[test]
    fn like_patterns() {
        assert!(like("Bosch", "B%"));
        assert!(like("Bosch", "_osc_"));
        assert!(like("Bosch", "%sc%"));
        assert!(!like("Bosch", "B_"));
        assert!(like("", "%"));
    }
}
