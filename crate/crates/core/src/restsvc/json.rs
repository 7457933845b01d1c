//! Cell values as JSON. Numbers travel as JSON numbers with their exact
//! decimal text; Integers beyond 53 bits travel as decimal strings.

use serde_json::{Map, Number, Value as Json};

use crate::error::{Error, Result};
use crate::numeric::Decimal;
use crate::physlog::{fits_json_number, Domain, Value};
use crate::sqlfront::Register;
use crate::sqlfront::AggFunc;

pub fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Null => Json::Null,
        Value::Integer(i) if fits_json_number(i) => number(&i.to_string()),
        Value::Integer(i) => Json::String(i.to_string()),
        Value::Real(d) => number(&d.to_string()),
        Value::Char(s) => Json::String(s.clone()),
        Value::Boolean(b) => Json::Bool(*b),
        Value::Date(d) => Json::String(d.format("%Y-%m-%d").to_string()),
    }
}

fn number(text: &str) -> Json {
    match serde_json::from_str::<Number>(text) {
        Ok(n) => Json::Number(n),
        Err(_) => Json::String(text.to_string()),
    }
}

/// Untyped conversion: numbers become Integer or Real by their text.
pub fn json_to_value(j: &Json) -> Result<Value> {
    Ok(match j {
        Json::Null => Value::Null,
        Json::Bool(b) => Value::Boolean(*b),
        Json::Number(n) => {
            let s = n.to_string();
            match s.parse::<num_bigint::BigInt>() {
                Ok(i) => Value::Integer(i),
                Err(_) => Value::Real(s.parse::<Decimal>().map_err(|e| Error::typ(e.to_string()))?),
            }
        }
        Json::String(s) => Value::Char(s.clone()),
        other => return Err(Error::typ(format!("cannot use JSON {other} as a value"))),
    })
}

/// Conversion into a declared domain.
pub fn json_to_domain(j: &Json, domain: &Domain) -> Result<Value> {
    domain.coerce(json_to_value(j)?)
}

pub fn row_to_json(columns: &[String], row: &[Value]) -> Json {
    let mut m = Map::new();
    for (c, v) in columns.iter().zip(row) {
        m.insert(c.clone(), value_to_json(v));
    }
    Json::Object(m)
}

/// Look up a field by column name, ignoring case if there is no exact match.
pub fn field<'a>(obj: &'a Map<String, Json>, name: &str) -> Option<&'a Json> {
    obj.get(name).or_else(|| obj.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v))
}

pub fn register_to_json(r: &Register) -> Json {
    let mut m = Map::new();
    m.insert("count".into(), Json::from(r.count));
    if let Some(s) = &r.sum {
        m.insert("sum".into(), value_to_json(s));
    }
    if let Some(e) = &r.extremum {
        m.insert("extremum".into(), value_to_json(e));
    }
    Json::Object(m)
}

pub fn register_from_json(func: AggFunc, j: &Json) -> Result<Register> {
    let bad = || Error::Remote(format!("malformed {} register: {j}", func.name()));
    let obj = j.as_object().ok_or_else(bad)?;
    let count = obj.get("count").and_then(Json::as_u64).ok_or_else(bad)?;
    let opt = |k: &str| obj.get(k).filter(|v| !v.is_null()).map(json_to_value).transpose();
    Ok(Register { func, count, sum: opt("sum")?, extremum: opt("extremum")? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for v in [
            Value::Null,
            Value::int(42),
            Value::real("17000.00"),
            Value::text("Bosch"),
            Value::Boolean(true),
        ] {
            assert_eq!(json_to_value(&value_to_json(&v)).unwrap(), v);
        }
        let big = Value::Integer(num_bigint::BigInt::from(1u64 << 60));
        assert!(value_to_json(&big).is_string());
        assert_eq!(json_to_domain(&value_to_json(&big), &Domain::Integer).unwrap(), big);
        assert_eq!(value_to_json(&Value::real("17000.00")).to_string(), "17000.00");
    }
}
