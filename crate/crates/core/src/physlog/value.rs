use std::cmp::Ordering;
use std::fmt;

use chrono::NaiveDate;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::Uid;
use crate::error::{Error, Result};
use crate::numeric::Decimal;
use crate::pbtree::Key;

/// Largest Integer magnitude is below `2^MAX_INTEGER_BITS`.
pub const MAX_INTEGER_BITS: u64 = 2040;

/// A typed cell value.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Value {
    Null,
    Integer(BigInt),
    /// Exactly `mantissa * 10^exponent`.
    Real(Decimal),
    Char(String),
    Boolean(bool),
    Date(NaiveDate),
}

/// Column domains. Parameterised domains are stored as Domain physicals;
/// bare built-ins use fixed negative uids.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Domain {
    Integer,
    Numeric { precision: Option<u32>, scale: Option<u32> },
    Real,
    Char { length: Option<u32> },
    Boolean,
    Date,
}

impl Value {
    pub fn int(i: i64) -> Value {
        Value::Integer(BigInt::from(i))
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Char(s.into())
    }

    pub fn real(s: &str) -> Value {
        Value::Real(s.parse().expect("decimal literal"))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Null => "NULL",
            Value::Integer(_) => "INTEGER",
            Value::Real(_) => "REAL",
            Value::Char(_) => "CHAR",
            Value::Boolean(_) => "BOOLEAN",
            Value::Date(_) => "DATE",
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Integer(i) => i.to_i64(),
            Value::Real(d) => d.to_i64(),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Char(s) => Some(s),
            _ => None,
        }
    }

    /// Numeric view of Integer and Real values.
    pub fn as_decimal(&self) -> Option<Decimal> {
        match self {
            Value::Integer(i) => Some(Decimal::from(i.clone())),
            Value::Real(d) => Some(d.clone()),
            _ => None,
        }
    }

    /// Reject Integers whose magnitude needs more than 2040 bits.
    pub fn check_bounds(&self) -> Result<()> {
        let m = match self {
            Value::Integer(i) => i,
            Value::Real(d) => d.mantissa(),
            _ => return Ok(()),
        };
        if m.bits() > MAX_INTEGER_BITS {
            return Err(Error::Encoding(format!(
                "integer of {} bits exceeds the {MAX_INTEGER_BITS}-bit limit",
                m.bits()
            )));
        }
        Ok(())
    }

    /// SQL comparison: `None` when either side is NULL.
    pub fn sql_cmp(&self, other: &Value) -> Result<Option<Ordering>> {
        use Value::*;
        Ok(Some(match (self, other) {
            (Null, _) | (_, Null) => return Ok(None),
            (Integer(a), Integer(b)) => a.cmp(b),
            (Char(a), Char(b)) => a.cmp(b),
            (Boolean(a), Boolean(b)) => a.cmp(b),
            (Date(a), Date(b)) => a.cmp(b),
            (a, b) => match (a.as_decimal(), b.as_decimal()) {
                (Some(x), Some(y)) => x.cmp(&y),
                _ => {
                    return Err(Error::typ(format!(
                        "cannot compare {} with {}",
                        a.kind_name(),
                        b.kind_name()
                    )))
                }
            },
        }))
    }

    /// Total order used for sorting: NULL sorts after everything.
    pub fn sort_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Null, Value::Null) => Ordering::Equal,
            (Value::Null, _) => Ordering::Greater,
            (_, Value::Null) => Ordering::Less,
            _ => self
                .sql_cmp(other)
                .ok()
                .flatten()
                .unwrap_or_else(|| self.kind_name().cmp(other.kind_name())),
        }
    }

    /// Index key for this value; NULL has none.
    pub fn to_key(&self) -> Option<Key> {
        Some(match self {
            Value::Null => return None,
            Value::Integer(i) => Key::Num(Decimal::from(i.clone())),
            Value::Real(d) => Key::Num(d.clone()),
            Value::Char(s) => Key::Str(s.clone()),
            Value::Boolean(b) => Key::int(*b as i64),
            Value::Date(d) => Key::int(days_from_ce(d)),
        })
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Value::Boolean(true))
    }
}

pub(crate) fn days_from_ce(d: &NaiveDate) -> i64 {
    use chrono::Datelike;
    d.num_days_from_ce() as i64
}

pub(crate) fn date_from_days(days: i64) -> Option<NaiveDate> {
    NaiveDate::from_num_days_from_ce_opt(i32::try_from(days).ok()?)
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => Ok(()),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Real(d) => write!(f, "{d}"),
            Value::Char(s) => write!(f, "{s}"),
            Value::Boolean(b) => write!(f, "{}", if *b { "true" } else { "false" }),
            Value::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Null => s.serialize_none(),
            Value::Boolean(b) => s.serialize_bool(*b),
            other => s.serialize_str(&format!("{}:{other}", other.kind_name())),
        }
    }
}

impl Domain {
    /// Uid for the unparameterised built-in form, if this is one.
    pub fn builtin_uid(&self) -> Option<Uid> {
        Some(match self {
            Domain::Integer => Uid::INTEGER,
            Domain::Numeric { precision: None, scale: None } => Uid::NUMERIC,
            Domain::Real => Uid::REAL,
            Domain::Char { length: None } => Uid::CHAR,
            Domain::Boolean => Uid::BOOLEAN,
            Domain::Date => Uid::DATE,
            _ => return None,
        })
    }

    pub fn from_builtin(uid: Uid) -> Option<Domain> {
        Some(match uid {
            Uid::INTEGER => Domain::Integer,
            Uid::NUMERIC => Domain::Numeric { precision: None, scale: None },
            Uid::REAL => Domain::Real,
            Uid::CHAR => Domain::Char { length: None },
            Uid::BOOLEAN => Domain::Boolean,
            Uid::DATE => Domain::Date,
            _ => return None,
        })
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, Domain::Integer)
    }

    /// Convert `v` into this domain, rounding numerics half away from zero.
    pub fn coerce(&self, v: Value) -> Result<Value> {
        let bad = |v: &Value| Error::typ(format!("cannot assign {} value '{v}' to {self}", v.kind_name()));
        let out = match (self, v) {
            (_, Value::Null) => Value::Null,
            (Domain::Integer, Value::Integer(i)) => Value::Integer(i),
            (Domain::Integer, Value::Real(d)) => Value::Integer(d.round_int()),
            (Domain::Integer, v @ Value::Char(_)) => {
                let s = v.as_str().unwrap().trim();
                Value::Integer(s.parse().map_err(|_| bad(&v))?)
            }
            (Domain::Numeric { precision, scale }, v) => {
                let d = match &v {
                    Value::Char(s) => s.trim().parse::<Decimal>().map_err(|_| bad(&v))?,
                    _ => v.as_decimal().ok_or_else(|| bad(&v))?,
                };
                Value::Real(d.fit(*precision, *scale)?)
            }
            (Domain::Real, v) => {
                let d = match &v {
                    Value::Char(s) => s.trim().parse::<Decimal>().map_err(|_| bad(&v))?,
                    _ => v.as_decimal().ok_or_else(|| bad(&v))?,
                };
                Value::Real(d)
            }
            (Domain::Char { length }, v) => {
                let s = match v {
                    Value::Char(s) => s,
                    other => other.to_string(),
                };
                if let Some(n) = length {
                    if s.chars().count() > *n as usize {
                        return Err(Error::typ(format!("string '{s}' too long for CHAR({n})")));
                    }
                }
                Value::Char(s)
            }
            (Domain::Boolean, Value::Boolean(b)) => Value::Boolean(b),
            (Domain::Boolean, v @ Value::Char(_)) => match v.as_str().unwrap().trim().to_ascii_lowercase().as_str() {
                "true" => Value::Boolean(true),
                "false" => Value::Boolean(false),
                _ => return Err(bad(&v)),
            },
            (Domain::Date, Value::Date(d)) => Value::Date(d),
            (Domain::Date, v @ Value::Char(_)) => Value::Date(
                NaiveDate::parse_from_str(v.as_str().unwrap().trim(), "%Y-%m-%d").map_err(|_| bad(&v))?,
            ),
            (_, v) => return Err(bad(&v)),
        };
        out.check_bounds()?;
        Ok(out)
    }

    /// Type name as used by the class model.
    pub fn type_name(&self) -> &'static str {
        match self {
            Domain::Integer => "Integer",
            Domain::Numeric { .. } => "Decimal",
            Domain::Real => "Real",
            Domain::Char { .. } => "String",
            Domain::Boolean => "Boolean",
            Domain::Date => "Date",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Integer => write!(f, "INTEGER"),
            Domain::Numeric { precision: Some(p), scale: Some(s) } => write!(f, "NUMERIC({p},{s})"),
            Domain::Numeric { precision: Some(p), scale: None } => write!(f, "NUMERIC({p})"),
            Domain::Numeric { .. } => write!(f, "NUMERIC"),
            Domain::Real => write!(f, "REAL"),
            Domain::Char { length: Some(n) } => write!(f, "CHAR({n})"),
            Domain::Char { length: None } => write!(f, "CHAR"),
            Domain::Boolean => write!(f, "BOOLEAN"),
            Domain::Date => write!(f, "DATE"),
        }
    }
}

/// Is this magnitude small enough to travel as a JSON number?
pub fn fits_json_number(i: &BigInt) -> bool {
    i.is_zero() || i.abs() <= BigInt::from(1i64 << 53)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coerce_numeric_rounds() {
        let d = Domain::Numeric { precision: Some(8), scale: Some(2) };
        assert_eq!(d.coerce(Value::real("17000.004")).unwrap(), Value::real("17000.00"));
        assert_eq!(d.coerce(Value::int(5)).unwrap().to_string(), "5.00");
        assert!(d.coerce(Value::int(1_000_000)).is_err());
    }

    #[test]
    fn coerce_char_length() {
        let d = Domain::Char { length: Some(3) };
        assert!(d.coerce(Value::text("abcd")).is_err());
        assert_eq!(d.coerce(Value::int(12)).unwrap(), Value::text("12"));
    }

    #[test]
    fn null_comparisons_are_unknown() {
        assert_eq!(Value::Null.sql_cmp(&Value::Null).unwrap(), None);
        assert_eq!(Value::int(2).sql_cmp(&Value::real("2.0")).unwrap(), Some(Ordering::Equal));
        assert!(Value::int(1).sql_cmp(&Value::text("1")).is_err());
    }

    #[test]
    fn integer_bound() {
        let big = Value::Integer(BigInt::from(1) << 2040usize);
        assert!(big.check_bounds().is_err());
        let ok = Value::Integer((BigInt::from(1) << 2040usize) - 1);
        assert!(ok.check_bounds().is_ok());
    }
}
