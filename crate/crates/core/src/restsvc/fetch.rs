//! The remote select: one GET per contributor carrying the projection,
//! the pushed filter and any aggregate requests.
//!
//! Wire form: `{url}?select=A,B&where=<condition>&agg=COUNT(*),SUM(E)`.
//! The answer is a JSON array of row objects, or for aggregate requests
//! `{"$registers": {"COUNT(*)": {"count": n}, "SUM(E)": {"count": n, "sum": s}}}`.

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde_json::{Map, Value as Json};

use super::client::{RemoteClient, RemoteRequest};
use super::json::register_from_json;
use crate::error::Error;
use crate::sqlfront::{AggFunc, Register};

/// Characters left unescaped in query values.
const QUERY: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_').remove(b'.').remove(b'~').remove(b',');

pub fn encode_query(s: &str) -> String {
    utf8_percent_encode(s, QUERY).to_string()
}

#[derive(Debug, Clone, Default)]
pub struct RemoteSelect {
    /// Columns requested; `None` for all.
    pub select: Option<Vec<String>>,
    /// Condition in SQL syntax over the remote column names.
    pub filter: Option<String>,
    /// Aggregates requested, as (function, column or `None` for `*`).
    pub aggs: Vec<(AggFunc, Option<String>)>,
    pub credentials: Option<(String, String)>,
}

/// Label of an aggregate request, e.g. `SUM(E)` or `COUNT(*)`.
pub fn agg_label(func: AggFunc, column: Option<&str>) -> String {
    format!("{}({})", func.name(), column.unwrap_or("*"))
}

impl RemoteSelect {
    pub fn url(&self, base: &str) -> String {
        let mut parts = vec![];
        if let Some(s) = &self.select {
            parts.push(format!("select={}", encode_query(&s.join(","))));
        }
        if let Some(w) = &self.filter {
            parts.push(format!("where={}", encode_query(w)));
        }
        if !self.aggs.is_empty() {
            let labels: Vec<String> = self.aggs.iter().map(|(f, c)| agg_label(*f, c.as_deref())).collect();
            parts.push(format!("agg={}", encode_query(&labels.join(","))));
        }
        if parts.is_empty() {
            base.to_string()
        } else {
            let sep = if base.contains('?') { '&' } else { '?' };
            format!("{base}{sep}{}", parts.join("&"))
        }
    }
}

pub enum Fetched {
    Rows(Vec<Map<String, Json>>),
    /// One register per requested aggregate, in request order.
    Registers(Vec<Register>),
}

pub enum FetchError {
    /// No response: the contributor is offline.
    Offline(String),
    Failed(Error),
}

pub fn fetch(client: &dyn RemoteClient, base: &str, sel: &RemoteSelect) -> Result<Fetched, FetchError> {
    let mut req = RemoteRequest::new("GET", sel.url(base)).header("Accept", "application/json");
    if let Some((u, p)) = &sel.credentials {
        req = req.basic_auth(u, p);
    }
    let resp = client.send(&req).map_err(|e| FetchError::Offline(e.url))?;
    let fail = |m: String| FetchError::Failed(Error::Remote(m));
    if resp.status != 200 {
        return Err(fail(format!("{base} answered {}: {}", resp.status, resp.body.trim())));
    }
    let body: Json = serde_json::from_str(&resp.body).map_err(|e| fail(format!("{base}: bad JSON: {e}")))?;
    if sel.aggs.is_empty() {
        let Json::Array(rows) = body else { return Err(fail(format!("{base}: expected a JSON array"))) };
        let mut out = vec![];
        for r in rows {
            match r {
                Json::Object(m) => out.push(m),
                other => return Err(fail(format!("{base}: expected row objects, got {other}"))),
            }
        }
        return Ok(Fetched::Rows(out));
    }
    let regs = body
        .get("$registers")
        .and_then(Json::as_object)
        .ok_or_else(|| fail(format!("{base}: expected $registers")))?;
    let mut out = vec![];
    for (f, c) in &sel.aggs {
        let label = agg_label(*f, c.as_deref());
        let j = regs.get(&label).ok_or_else(|| fail(format!("{base}: missing register {label}")))?;
        out.push(register_from_json(*f, j).map_err(FetchError::Failed)?);
    }
    Ok(Fetched::Registers(out))
}
