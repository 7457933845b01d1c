//! Versioned typed-record client. Class models come from the server
//! (`GET /{db}/{role}/$class/{table}`); every record carries the ETag it
//! was read under, and every write is conditional on it.

use std::collections::HashMap;
use std::sync::Arc;

use serde_json::{Map, Value as Json};

use crate::engine::ClassModel;
use crate::error::{Error, Result};
use crate::physlog::{Domain, Value};
use crate::restsvc::fetch::encode_query;
use crate::restsvc::json::{json_to_domain, value_to_json};
use crate::restsvc::{RemoteClient, RemoteRequest, Response};
use crate::sqlfront::{parse_domain, BinOp, Expr};

/// Where and as whom to connect: one database, one declared role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    /// Server origin, e.g. `http://localhost:8180`.
    pub server: String,
    pub database: String,
    pub role: String,
    pub user: String,
    pub password: String,
}

impl Profile {
    pub fn new(server: &str, database: &str, role: &str, user: &str) -> Profile {
        Profile {
            server: server.trim_end_matches('/').to_string(),
            database: database.to_string(),
            role: role.to_string(),
            user: user.to_string(),
            password: String::new(),
        }
    }

    pub fn with_password(mut self, password: &str) -> Profile {
        self.password = password.to_string();
        self
    }
}

/// A row as last read from the server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub table: String,
    pub defining_pos: i64,
    pub schema_key: i64,
    pub fields: Vec<(String, Value)>,
    pub etag: String,
    key_names: Vec<String>,
}

impl Record {
    pub fn get(&self, name: &str) -> Value {
        self.fields.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, v)| v.clone()).unwrap_or(Value::Null)
    }

    /// Change a field locally; nothing is sent until [`Connection::put`].
    pub fn set(&mut self, name: &str, v: Value) {
        match self.fields.iter_mut().find(|(n, _)| n.eq_ignore_ascii_case(name)) {
            Some((_, x)) => *x = v,
            None => self.fields.push((name.to_string(), v)),
        }
    }

    pub fn key(&self) -> Vec<Value> {
        self.key_names.iter().map(|k| self.get(k)).collect()
    }
}

pub struct Connection {
    profile: Profile,
    client: Arc<dyn RemoteClient>,
    models: HashMap<String, ClassModel>,
}

fn remote_error(resp: &Response) -> Error {
    let body: Json = serde_json::from_str(&resp.body).unwrap_or(Json::Null);
    let msg = body.get("message").and_then(Json::as_str).unwrap_or(resp.body.trim()).to_string();
    let text = |k: &str| body.get(k).and_then(Json::as_str).unwrap_or_default().to_string();
    match resp.status {
        401 | 403 => Error::Authorization(msg),
        404 => Error::NotFound(msg),
        409 | 412 => Error::VersionConflict(msg),
        501 => Error::NotImplemented(msg),
        400 if text("error") == "constraint" => {
            Error::Constraint { constraint: text("constraint"), row: text("row"), message: text("detail") }
        }
        _ => Error::Remote(format!("{}: {msg}", resp.status)),
    }
}

fn field_domains(model: &ClassModel) -> Result<Vec<(String, Domain)>> {
    model.fields.iter().map(|f| Ok((f.name.clone(), parse_domain(&f.domain)?))).collect()
}

fn sort_by_key(records: &mut [Record]) {
    records.sort_by(|a, b| {
        for (x, y) in a.key().iter().zip(b.key().iter()) {
            let o = x.sort_cmp(y);
            if o != std::cmp::Ordering::Equal {
                return o;
            }
        }
        std::cmp::Ordering::Equal
    });
}

impl Connection {
    /// Connect without checking any model.
    pub fn connect(profile: Profile, client: Arc<dyn RemoteClient>) -> Connection {
        Connection { profile, client, models: HashMap::new() }
    }

    /// Connect, checking that each `(table, defining_pos, schema_key)` the
    /// application was built against still matches the server.
    pub fn connect_check(profile: Profile, client: Arc<dyn RemoteClient>, expected: &[(&str, i64, i64)]) -> Result<Connection> {
        let mut c = Connection::connect(profile, client);
        for (table, pos, key) in expected {
            let m = c.fetch_model(table)?;
            if m.defining_pos != *pos || m.schema_key != *key {
                return Err(Error::SchemaDrift {
                    table: table.to_string(),
                    expected_pos: *pos,
                    expected_key: *key,
                    actual_pos: m.defining_pos,
                    actual_key: m.schema_key,
                });
            }
        }
        Ok(c)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    fn url(&self, rest: &str) -> String {
        format!(
            "{}/{}/{}/{rest}",
            self.profile.server,
            encode_query(&self.profile.database),
            encode_query(&self.profile.role)
        )
    }

    fn send(&self, req: RemoteRequest) -> Result<Response> {
        let req = req.basic_auth(&self.profile.user, &self.profile.password);
        self.client.send(&req).map_err(|e| Error::Remote(e.to_string()))
    }

    fn fetch_model(&mut self, table: &str) -> Result<ClassModel> {
        let resp = self.send(RemoteRequest::new("GET", self.url(&format!("$class/{}", encode_query(table)))))?;
        if resp.status != 200 {
            return Err(remote_error(&resp));
        }
        let m: ClassModel =
            serde_json::from_str(&resp.body).map_err(|e| Error::Remote(format!("bad class model: {e}")))?;
        self.models.insert(table.to_string(), m.clone());
        Ok(m)
    }

    /// The class model for `table`, fetched once per connection.
    pub fn model(&mut self, table: &str) -> Result<ClassModel> {
        match self.models.get(table) {
            Some(m) => Ok(m.clone()),
            None => self.fetch_model(table),
        }
    }

    /// Refuse to write a record whose table definition has changed since
    /// it was read.
    fn check_schema(&mut self, r: &Record) -> Result<()> {
        let m = self.fetch_model(&r.table)?;
        if m.defining_pos != r.defining_pos || m.schema_key != r.schema_key {
            return Err(Error::SchemaDrift {
                table: r.table.clone(),
                expected_pos: r.defining_pos,
                expected_key: r.schema_key,
                actual_pos: m.defining_pos,
                actual_key: m.schema_key,
            });
        }
        Ok(())
    }

    fn record(&self, model: &ClassModel, obj: &Map<String, Json>, etag: String) -> Result<Record> {
        let mut fields = vec![];
        for (name, dom) in field_domains(model)? {
            let v = match crate::restsvc::json::field(obj, &name) {
                Some(j) => json_to_domain(j, &dom)?,
                None => Value::Null,
            };
            fields.push((name, v));
        }
        Ok(Record {
            table: model.table.clone(),
            defining_pos: model.defining_pos,
            schema_key: model.schema_key,
            fields,
            etag,
            key_names: model.primary_key.clone(),
        })
    }

    fn records(&mut self, table: &str, query: Option<String>) -> Result<Vec<Record>> {
        let model = self.model(table)?;
        let mut path = encode_query(table);
        if let Some(q) = query {
            path = format!("{path}?where={}", encode_query(&q));
        }
        let resp = self.send(RemoteRequest::new("GET", self.url(&path)))?;
        if resp.status != 200 {
            return Err(remote_error(&resp));
        }
        let body: Json = serde_json::from_str(&resp.body).map_err(|e| Error::Remote(format!("bad JSON: {e}")))?;
        let Json::Array(rows) = body else { return Err(Error::Remote("expected a JSON array".into())) };
        let etags: Vec<String> = resp
            .header("Row-ETags")
            .map(|h| h.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect())
            .unwrap_or_default();
        if etags.len() != rows.len() {
            return Err(Error::Remote("row ETags missing from response".into()));
        }
        let mut out = vec![];
        for (row, etag) in rows.iter().zip(etags) {
            let Json::Object(obj) = row else { return Err(Error::Remote("expected row objects".into())) };
            out.push(self.record(&model, obj, etag)?);
        }
        sort_by_key(&mut out);
        Ok(out)
    }

    pub fn find_all(&mut self, table: &str) -> Result<Vec<Record>> {
        self.records(table, None)
    }

    /// Records whose `field` equals `value`, in primary-key order.
    pub fn find_with(&mut self, table: &str, field: &str, value: &Value) -> Result<Vec<Record>> {
        let cond = Expr::Binary(
            BinOp::Eq,
            Box::new(Expr::Column { qualifier: None, name: field.to_string() }),
            Box::new(Expr::Literal(value.clone())),
        );
        self.records(table, Some(cond.to_string()))
    }

    /// The first record (in primary-key order) whose `field` equals `value`.
    pub fn find_one(&mut self, table: &str, field: &str, value: &Value) -> Result<Option<Record>> {
        Ok(self.find_with(table, field, value)?.into_iter().next())
    }

    /// The record with primary key `key`, if any.
    pub fn find_key(&mut self, table: &str, key: &[Value]) -> Result<Option<Record>> {
        let model = self.model(table)?;
        let k: Vec<String> = key.iter().map(|v| encode_query(&v.to_string())).collect();
        let resp = self.send(RemoteRequest::new("GET", self.url(&format!("{}/{}", encode_query(table), k.join(",")))))?;
        match resp.status {
            200 => {}
            404 => return Ok(None),
            _ => return Err(remote_error(&resp)),
        }
        let body: Json = serde_json::from_str(&resp.body).map_err(|e| Error::Remote(format!("bad JSON: {e}")))?;
        let Json::Object(obj) = body else { return Err(Error::Remote("expected a row object".into())) };
        let etag = resp.header("ETag").unwrap_or_default().to_string();
        Ok(Some(self.record(&model, &obj, etag)?))
    }

    /// Follow a navigation link of `from`'s class model.
    pub fn navigate(&mut self, from: &Record, link: &str) -> Result<Vec<Record>> {
        let model = self.model(&from.table)?;
        let nav = model
            .navigation(link)
            .ok_or_else(|| Error::not_found(format!("navigation {link} on {}", from.table)))?
            .clone();
        let mut cond: Option<Expr> = None;
        for (l, r) in nav.local.iter().zip(&nav.remote) {
            let eq = Expr::Binary(
                BinOp::Eq,
                Box::new(Expr::Column { qualifier: None, name: r.clone() }),
                Box::new(Expr::Literal(from.get(l))),
            );
            cond = Some(match cond {
                Some(c) => Expr::Binary(BinOp::And, Box::new(c), Box::new(eq)),
                None => eq,
            });
        }
        self.records(&nav.target, cond.map(|c| c.to_string()))
    }

    /// Insert a record; the server assigns an autokey when the key is
    /// omitted.
    pub fn post(&mut self, table: &str, fields: &[(&str, Value)]) -> Result<Record> {
        let model = self.fetch_model(table)?;
        let mut obj = Map::new();
        for (n, v) in fields {
            obj.insert(n.to_string(), value_to_json(v));
        }
        let resp = self.send(RemoteRequest::new("POST", self.url(&encode_query(table))).body(Json::Object(obj).to_string()))?;
        if resp.status != 201 {
            return Err(remote_error(&resp));
        }
        let body: Json = serde_json::from_str(&resp.body).map_err(|e| Error::Remote(format!("bad JSON: {e}")))?;
        let Json::Object(obj) = body else { return Err(Error::Remote("expected a row object".into())) };
        let etag = resp.header("ETag").unwrap_or_default().to_string();
        self.record(&model, &obj, etag)
    }

    fn row_url(&self, r: &Record) -> String {
        let k: Vec<String> = r.key().iter().map(|v| encode_query(&v.to_string())).collect();
        self.url(&format!("{}/{}", encode_query(&r.table), k.join(",")))
    }

    /// Write back every field of `r`, conditional on its ETag.
    pub fn put(&mut self, r: &Record) -> Result<Record> {
        self.check_schema(r)?;
        let model = self.model(&r.table)?;
        let mut obj = Map::new();
        for (n, v) in &r.fields {
            if !model.primary_key.contains(n) {
                obj.insert(n.clone(), value_to_json(v));
            }
        }
        let req = RemoteRequest::new("PUT", self.row_url(r)).header("If-Match", r.etag.clone()).body(Json::Object(obj).to_string());
        let resp = self.send(req)?;
        if resp.status != 200 {
            return Err(remote_error(&resp));
        }
        let body: Json = serde_json::from_str(&resp.body).map_err(|e| Error::Remote(format!("bad JSON: {e}")))?;
        let Json::Object(obj) = body else { return Err(Error::Remote("expected a row object".into())) };
        let etag = resp.header("ETag").unwrap_or_default().to_string();
        self.record(&model, &obj, etag)
    }

    /// Delete `r`, conditional on its ETag. Cascades follow the server's
    /// schema.
    pub fn delete(&mut self, r: &Record) -> Result<()> {
        self.check_schema(r)?;
        let resp = self.send(RemoteRequest::new("DELETE", self.row_url(r)).header("If-Match", r.etag.clone()))?;
        match resp.status {
            200 | 204 => Ok(()),
            _ => Err(remote_error(&resp)),
        }
    }
}
