//! Aggregate registers. A register holds the partial state of one
//! aggregate; registers over disjoint inputs merge, and finalizing the
//! merge equals aggregating the union of the inputs.

use std::cmp::Ordering;

use super::ast::AggFunc;
use super::eval::arith;
use super::ast::BinOp;
use crate::error::{Error, Result};
use crate::physlog::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub func: AggFunc,
    /// Non-null inputs seen (rows, for `COUNT(*)`).
    pub count: u64,
    /// Running sum, for SUM and AVG.
    pub sum: Option<Value>,
    /// Running extremum, for MIN and MAX.
    pub extremum: Option<Value>,
}

impl Register {
    pub fn new(func: AggFunc) -> Register {
        Register { func, count: 0, sum: None, extremum: None }
    }

    /// Count one row for `COUNT(*)`.
    pub fn count_row(&mut self) {
        self.count += 1;
    }

    /// Fold one input value; NULL is ignored.
    pub fn accumulate(&mut self, v: &Value) -> Result<()> {
        if v.is_null() {
            return Ok(());
        }
        match self.func {
            AggFunc::Count => {}
            AggFunc::Sum | AggFunc::Avg => {
                if v.as_decimal().is_none() {
                    return Err(Error::typ(format!("{} of {} value", self.func.name(), v.kind_name())));
                }
                self.sum = Some(match &self.sum {
                    None => v.clone(),
                    Some(s) => arith(BinOp::Add, s, v)?,
                });
            }
            AggFunc::Min | AggFunc::Max => {
                let cur = self.extremum.take();
                self.extremum = Some(self.pick(cur, v.clone())?);
            }
        }
        self.count += 1;
        Ok(())
    }

    fn pick(&self, cur: Option<Value>, v: Value) -> Result<Value> {
        let Some(c) = cur else { return Ok(v) };
        let ord = v.sql_cmp(&c)?.unwrap_or(Ordering::Equal);
        let better = match self.func {
            AggFunc::Min => ord == Ordering::Less,
            _ => ord == Ordering::Greater,
        };
        Ok(if better { v } else { c })
    }

    pub fn merge(&mut self, other: &Register) -> Result<()> {
        if other.func != self.func {
            return Err(Error::typ(format!("cannot merge {} with {}", other.func.name(), self.func.name())));
        }
        self.count += other.count;
        if let Some(s) = &other.sum {
            self.sum = Some(match &self.sum {
                None => s.clone(),
                Some(x) => arith(BinOp::Add, x, s)?,
            });
        }
        if let Some(e) = &other.extremum {
            let cur = self.extremum.take();
            self.extremum = Some(self.pick(cur, e.clone())?);
        }
        Ok(())
    }

    /// Aggregate value: NULL over no input, except COUNT which is 0.
    pub fn finalize(&self) -> Result<Value> {
        Ok(match self.func {
            AggFunc::Count => Value::int(self.count as i64),
            _ if self.count == 0 => Value::Null,
            AggFunc::Sum => self.sum.clone().unwrap_or(Value::Null),
            AggFunc::Avg => {
                let s = self.sum.as_ref().and_then(Value::as_decimal).unwrap_or_else(crate::numeric::Decimal::zero);
                Value::Real(s.div(&crate::numeric::Decimal::from(self.count as i64))?)
            }
            AggFunc::Min | AggFunc::Max => self.extremum.clone().unwrap_or(Value::Null),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(func: AggFunc, vals: &[Option<i64>]) -> Register {
        let mut r = Register::new(func);
        for v in vals {
            r.accumulate(&v.map(Value::int).unwrap_or(Value::Null)).unwrap();
        }
        r
    }

    #[test]
    fn empty_input() {
        for f in [AggFunc::Sum, AggFunc::Avg, AggFunc::Min, AggFunc::Max] {
            assert_eq!(Register::new(f).finalize().unwrap(), Value::Null);
        }
        assert_eq!(Register::new(AggFunc::Count).finalize().unwrap(), Value::int(0));
    }

    #[test]
    fn nulls_are_skipped() {
        let r = run(AggFunc::Avg, &[Some(2), None, Some(4)]);
        assert_eq!((r.count, r.sum.clone()), (2, Some(Value::int(6))));
        assert_eq!(r.finalize().unwrap(), Value::real("3"));
    }

    proptest! {
        #[test]
        fn merge_equals_union(a in proptest::collection::vec(proptest::option::of(-1000i64..1000), 0..20),
                              b in proptest::collection::vec(proptest::option::of(-1000i64..1000), 0..20)) {
            for f in [AggFunc::Count, AggFunc::Sum, AggFunc::Avg, AggFunc::Min, AggFunc::Max] {
                let mut m = run(f, &a);
                m.merge(&run(f, &b)).unwrap();
                let all: Vec<_> = a.iter().chain(&b).cloned().collect();
                prop_assert_eq!(m.finalize().unwrap(), run(f, &all).finalize().unwrap());
            }
        }
    }
}
