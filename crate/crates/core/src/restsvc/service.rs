//! The HTTP resource service: `/{db}/{role}/{table}[/{key}][?query]`.
//!
//! Row ETags are `"{defining_pos}-{last_change}"`; a base table's rowset
//! ETag is `"{last_change}"` of the table, a view's is the database
//! watermark. Each request runs as one transaction of the caller's user in
//! the path's role.

use std::collections::HashMap;
use std::path::PathBuf;

use parking_lot::RwLock;
use percent_encoding::percent_decode_str;
use serde_json::{json, Map, Value as Json};

use super::json::{json_to_domain, register_to_json, row_to_json};
use crate::engine::{generate_class_model, may_use_role, password_hash, Database, Detail, Engine, ObjectKind, Transaction};
use crate::error::{Error, Result};
use crate::physlog::{Domain, Payload, Uid, Value};
use crate::sqlfront::{
    ast::{Expr, Query, SelectItem, Statement, TableRef},
    execute, parse_expr, parse_statement, select_rows, AggFunc, BinOp, Register, StatementResult,
};

/// File extension of database logs in the data directory.
pub const DB_EXTENSION: &str = "pyl";

/// Selector words answered with 501.
const VISUAL: &[&str] = &["PIE", "HISTOGRAM", "LINE", "POINTS", "CAPTION", "X", "Y", "LEGEND"];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Request {
    pub method: String,
    /// Path and query, e.g. `/E/E/SALES?where=CUST%3D'Bosch'`.
    pub target: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Request {
    pub fn new(method: &str, target: impl Into<String>) -> Request {
        Request { method: method.to_string(), target: target.into(), ..Default::default() }
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Response {
    fn new(status: u16) -> Response {
        Response { status, ..Default::default() }
    }

    fn json(status: u16, body: &Json) -> Response {
        Response::new(status).with_header("Content-Type", "application/json").with_body(body.to_string())
    }

    fn with_header(mut self, name: &str, value: impl Into<String>) -> Response {
        self.headers.push((name.to_string(), value.into()));
        self
    }

    fn with_body(mut self, body: String) -> Response {
        self.body = body;
        self
    }

    fn with_etag(self, etag: String) -> Response {
        self.with_header("ETag", etag)
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    fn error(status: u16, kind: &str, message: impl Into<String>) -> Response {
        Response::json(status, &json!({ "error": kind, "message": message.into() }))
    }
}

impl From<Error> for Response {
    fn from(e: Error) -> Response {
        let msg = e.to_string();
        match e {
            Error::Authorization(_) => Response::error(403, "authorization", msg),
            Error::NotFound(_) => Response::error(404, "not-found", msg),
            Error::Conflict(r) => {
                Response::json(409, &json!({ "error": "conflict", "message": msg, "reason": r.reason.map(|x| x.to_string()) }))
            }
            Error::Constraint { constraint, row, message } => Response::json(
                400,
                &json!({ "error": "constraint", "message": msg, "constraint": constraint, "row": row, "detail": message }),
            ),
            Error::NotImplemented(_) => Response::error(501, "not-implemented", msg),
            Error::ContributorOffline { .. } | Error::Remote(_) => Response::error(502, "remote", msg),
            Error::Syntax { .. }
            | Error::Statement(_)
            | Error::Type(_)
            | Error::DivisionByZero
            | Error::Cardinality(_)
            | Error::SingleMaster(_) => Response::error(400, "statement", msg),
            _ => Response::error(500, "internal", msg),
        }
    }
}

/// ETag of one row.
pub fn row_etag(db: &Database, table: Uid, row: Uid) -> Option<String> {
    db.row(table, row).map(|r| format!("\"{}-{}\"", r.uid.0, r.last_change.0))
}

/// ETag of a relation's rowset.
pub fn rowset_etag(db: &Database, relation: Uid) -> String {
    match db.data(relation) {
        Some(d) => format!("\"{}\"", d.last_change.0),
        None => format!("\"{}\"", db.watermark),
    }
}

/// Does an `If-Match`/`If-None-Match` header value match `etag`?
fn etag_matches(header: &str, etag: &str) -> bool {
    header.split(',').map(str::trim).any(|t| t == "*" || t == etag)
}

/// Databases served from a data directory and/or registered engines.
pub struct Service {
    data_dir: Option<PathBuf>,
    engines: RwLock<HashMap<String, Engine>>,
}

/// A parsed resource path.
struct Resource {
    db: String,
    role: String,
    object: Option<String>,
    key: Option<String>,
    class: bool,
    params: Params,
}

#[derive(Default)]
struct Params {
    select: Option<Vec<String>>,
    filter: Vec<String>,
    aggs: Vec<String>,
    selector: Option<String>,
}

fn decode(s: &str) -> String {
    percent_decode_str(&s.replace('+', " ")).decode_utf8_lossy().into_owned()
}

fn parse_target(target: &str) -> Option<Resource> {
    let (path, query) = match target.split_once('?') {
        Some((p, q)) => (p, Some(q)),
        None => (target, None),
    };
    let segs: Vec<String> = path.split('/').filter(|s| !s.is_empty()).map(decode).collect();
    let mut params = Params::default();
    if let Some(q) = query {
        for part in q.split('&').filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').unwrap_or((part, ""));
            match k {
                "select" => params.select = Some(decode(v).split(',').map(|c| c.trim().to_string()).collect()),
                "where" => params.filter.push(decode(v)),
                "agg" => params.aggs.extend(split_top(&decode(v))),
                _ => {
                    let whole = decode(part);
                    let word = whole.split('(').next().unwrap_or("").trim().to_ascii_uppercase();
                    if whole.contains('(') && VISUAL.contains(&word.as_str()) {
                        params.selector = Some(whole);
                    } else {
                        params.filter.push(whole);
                    }
                }
            }
        }
    }
    let mut it = segs.into_iter();
    let db = it.next()?;
    let role = it.next()?;
    let mut object = it.next();
    let mut class = false;
    if object.as_deref() == Some("$class") {
        class = true;
        object = it.next();
    }
    let key = it.next();
    if it.next().is_some() {
        return None;
    }
    Some(Resource { db, role, object, key, class, params })
}

/// Split on commas outside parentheses.
fn split_top(s: &str) -> Vec<String> {
    let mut out = vec![];
    let mut depth = 0;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur).trim().to_string());
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// `SUM(E)` → (Sum, Some("E")); `COUNT(*)` → (Count, None).
fn parse_agg(label: &str) -> Result<(AggFunc, Option<String>)> {
    let bad = || Error::statement(format!("bad aggregate request {label}"));
    let (f, rest) = label.split_once('(').ok_or_else(bad)?;
    let arg = rest.strip_suffix(')').ok_or_else(bad)?.trim();
    let func = match f.trim().to_ascii_uppercase().as_str() {
        "COUNT" => AggFunc::Count,
        "SUM" => AggFunc::Sum,
        "AVG" => AggFunc::Avg,
        "MIN" => AggFunc::Min,
        "MAX" => AggFunc::Max,
        _ => return Err(bad()),
    };
    Ok((func, if arg == "*" { None } else { Some(arg.to_string()) }))
}

fn basic_credentials(req: &Request) -> Option<(String, String)> {
    use base64::Engine as _;
    let h = req.header("Authorization")?;
    let token = h.strip_prefix("Basic ").or_else(|| h.strip_prefix("basic "))?;
    let raw = base64::engine::general_purpose::STANDARD.decode(token.trim()).ok()?;
    let s = String::from_utf8(raw).ok()?;
    let (u, p) = s.split_once(':')?;
    Some((u.to_string(), p.to_string()))
}

impl Default for Service {
    fn default() -> Self {
        Service::new(None)
    }
}

impl Service {
    /// A service over the `*.pyl` databases in `data_dir`, opened on first
    /// use, plus any engines added explicitly.
    pub fn new(data_dir: Option<PathBuf>) -> Service {
        Service { data_dir, engines: RwLock::new(HashMap::new()) }
    }

    pub fn with_engine(engine: Engine) -> Service {
        let s = Service::new(None);
        s.add_engine(engine);
        s
    }

    pub fn add_engine(&self, engine: Engine) {
        self.engines.write().insert(engine.name(), engine);
    }

    pub fn engine(&self, name: &str) -> Option<Engine> {
        if let Some(e) = self.engines.read().get(name) {
            return Some(e.clone());
        }
        let dir = self.data_dir.as_ref()?;
        if name.contains(['/', '\\', '.']) {
            return None;
        }
        let path = dir.join(format!("{name}.{DB_EXTENSION}"));
        if !path.exists() {
            return None;
        }
        let mut engines = self.engines.write();
        if let Some(e) = engines.get(name) {
            return Some(e.clone());
        }
        let e = Engine::open(&path).ok()?;
        engines.insert(name.to_string(), e.clone());
        Some(e)
    }

    pub fn handle(&self, req: &Request) -> Response {
        let Some(res) = parse_target(&req.target) else {
            return Response::error(404, "not-found", format!("no resource at {}", req.target));
        };
        let Some(engine) = self.engine(&res.db) else {
            return Response::error(404, "not-found", format!("database {}", res.db));
        };
        let tx = match self.authenticate(&engine, req, &res.role) {
            Ok(tx) => tx,
            Err(r) => return r,
        };
        let out = match (req.method.as_str(), &res.object) {
            (_, _) if res.params.selector.is_some() => Ok(Response::error(
                501,
                "not-implemented",
                format!("visualisation selector {}", res.params.selector.as_deref().unwrap_or_default()),
            )),
            ("POST", None) => self.sql(&engine, tx, req),
            (_, None) => Ok(Response::error(405, "method", format!("{} on a database", req.method))),
            ("GET", Some(o)) if res.class => class_model(tx, o),
            ("GET", Some(o)) => get(tx, o, &res, req),
            ("POST", Some(o)) if res.key.is_none() => post(&engine, tx, o, req),
            ("PUT" | "DELETE", Some(o)) => mutate(&engine, tx, o, &res, req),
            (m, _) => Ok(Response::error(405, "method", format!("{m} not allowed here"))),
        };
        out.unwrap_or_else(Response::from)
    }

    fn authenticate(&self, engine: &Engine, req: &Request, role: &str) -> Result<Transaction, Response> {
        let unauth = |m: &str| {
            Response::error(401, "authentication", m).with_header("WWW-Authenticate", "Basic realm=\"pyrlite\"")
        };
        let Some((user, password)) = basic_credentials(req) else { return Err(unauth("credentials required")) };
        let db = engine.snapshot();
        let Some(u) = db.user_named(&user).or_else(|| db.user_named(&user.to_uppercase())) else { return Err(unauth(&format!("unknown user {user}"))) };
        if let Some(Detail::User { password: Some(hash) }) = db.object(u).map(|o| &o.detail) {
            if *hash != password_hash(&password) {
                return Err(unauth("bad password"));
            }
        }
        let Some(r) = db.role_named(role).or_else(|| db.role_named(&role.to_uppercase())) else {
            return Err(Response::error(404, "not-found", format!("role {role}")));
        };
        if !may_use_role(&db, u, r) {
            return Err(Response::error(403, "authorization", format!("role {role} has not been granted to {user}")));
        }
        engine.begin_as(u, r).map_err(Response::from)
    }

    /// `POST /{db}/{role}` with an SQL statement as the body.
    fn sql(&self, engine: &Engine, mut tx: Transaction, req: &Request) -> Result<Response> {
        let stmt = parse_statement(&req.body)?;
        let r = execute(&mut tx, &stmt)?;
        engine.commit(tx)?;
        Ok(Response::json(200, &match r {
            StatementResult::Rows { columns, rows } => {
                let rows: Vec<Json> = rows.iter().map(|r| row_to_json(&columns, r)).collect();
                json!({ "columns": columns, "rows": rows })
            }
            StatementResult::Affected(n) => json!({ "affected": n }),
            StatementResult::Done(m) => json!({ "done": m }),
        }))
    }
}

/// Resolve a path segment: as written, or folded to upper case as an
/// undelimited SQL identifier would be. Returns the object and its name.
fn lookup(db: &Database, role: Uid, name: &str) -> Result<(Uid, String)> {
    let up = name.to_uppercase();
    let uid = db
        .resolve(role, name)
        .or_else(|| db.resolve(role, &up))
        .ok_or_else(|| Error::not_found(format!("table or view {name}")))?;
    Ok((uid, db.require(uid)?.name.clone()))
}

/// The declared name of a column given as written in a request.
fn column_name(columns: &[String], name: &str) -> Result<String> {
    columns
        .iter()
        .find(|c| *c == name)
        .or_else(|| columns.iter().find(|c| c.eq_ignore_ascii_case(name)))
        .cloned()
        .ok_or_else(|| Error::not_found(format!("column {name}")))
}

fn class_model(tx: Transaction, table: &str) -> Result<Response> {
    let (_, table) = lookup(tx.db(), tx.role(), table)?;
    let m = generate_class_model(tx.db(), tx.user(), tx.role(), &table)?;
    let body = serde_json::to_value(&m).map_err(|e| Error::Encoding(e.to_string()))?;
    Ok(Response::json(200, &body).with_etag(format!("\"{}\"", m.schema_key)))
}

fn parse_filter(params: &Params) -> Result<Option<Expr>> {
    let mut out: Option<Expr> = None;
    for f in &params.filter {
        let e = parse_expr(f)?;
        out = Some(match out {
            Some(prev) => Expr::Binary(BinOp::And, Box::new(prev), Box::new(e)),
            None => e,
        });
    }
    Ok(out)
}

fn primary_key(db: &Database, table: Uid) -> Result<Vec<(String, Domain)>> {
    let ix = db.table_def(table)?.primary.ok_or_else(|| Error::not_found(format!("{} has no primary key", db.name_of(table))))?;
    db.index_def(ix)?
        .columns
        .iter()
        .map(|c| Ok((db.name_of(*c), db.column_def(*c)?.domain.clone())))
        .collect()
}

/// The condition selecting the row addressed by a key segment.
fn key_filter(db: &Database, table: Uid, key: &str) -> Result<Expr> {
    let pk = primary_key(db, table)?;
    let parts: Vec<&str> = if pk.len() == 1 { vec![key] } else { key.split(',').collect() };
    if parts.len() != pk.len() {
        return Err(Error::not_found(format!("key {key}")));
    }
    let mut out: Option<Expr> = None;
    for ((name, dom), part) in pk.iter().zip(parts) {
        let v = dom.coerce(Value::Char(part.to_string())).map_err(|_| Error::not_found(format!("key {key}")))?;
        let eq = Expr::Binary(
            BinOp::Eq,
            Box::new(Expr::Column { qualifier: None, name: name.clone() }),
            Box::new(Expr::Literal(v)),
        );
        out = Some(match out {
            Some(prev) => Expr::Binary(BinOp::And, Box::new(prev), Box::new(eq)),
            None => eq,
        });
    }
    Ok(out.expect("a primary key has columns"))
}

fn and(a: Option<Expr>, b: Option<Expr>) -> Option<Expr> {
    match (a, b) {
        (Some(x), Some(y)) => Some(Expr::Binary(BinOp::And, Box::new(x), Box::new(y))),
        (x, None) => x,
        (None, y) => y,
    }
}

fn get(mut tx: Transaction, name: &str, res: &Resource, req: &Request) -> Result<Response> {
    let db = tx.db().clone();
    let (obj, name) = lookup(&db, tx.role(), name)?;
    let name = name.as_str();
    let kind = db.require(obj)?.kind();
    let filter = parse_filter(&res.params)?;
    if kind != ObjectKind::Table {
        if res.key.is_some() || !res.params.aggs.is_empty() {
            return Err(Error::NotImplemented("keys and aggregate requests on views".into()));
        }
        let q = Query {
            items: match &res.params.select {
                Some(cols) => cols
                    .iter()
                    .map(|c| SelectItem::Expr { expr: Expr::Column { qualifier: None, name: c.clone() }, alias: None })
                    .collect(),
                None => vec![SelectItem::Star(None)],
            },
            from: vec![TableRef { name: name.to_string(), alias: None }],
            filter,
            order: vec![],
        };
        let StatementResult::Rows { columns, rows } = execute(&mut tx, &Statement::Select(q))? else {
            unreachable!("a query yields rows")
        };
        let body = Json::Array(rows.iter().map(|r| row_to_json(&columns, r)).collect());
        return Ok(conditional_get(req, rowset_etag(&db, obj), body));
    }
    let key = match &res.key {
        Some(k) => Some(key_filter(&db, obj, k)?),
        None => None,
    };
    let single = key.is_some();
    let filter = and(key, filter);
    if !res.params.aggs.is_empty() {
        let all: Vec<String> = db.columns(obj).into_iter().map(|(_, n)| n).collect();
        let specs = res
            .params
            .aggs
            .iter()
            .map(|a| {
                let (f, c) = parse_agg(a)?;
                Ok((f, c.map(|c| column_name(&all, &c)).transpose()?))
            })
            .collect::<Result<Vec<_>>>()?;
        let cols: Vec<String> = specs.iter().filter_map(|(_, c)| c.clone()).collect();
        let (_, rows) = select_rows(&mut tx, name, Some(&cols), filter.as_ref())?;
        let mut regs = Map::new();
        for (func, col) in &specs {
            let mut r = Register::new(*func);
            let i = col.as_ref().map(|c| cols.iter().position(|x| x == c).expect("requested column"));
            for (_, row) in &rows {
                match i {
                    None => r.count_row(),
                    Some(i) => r.accumulate(&row[i])?,
                }
            }
            regs.insert(super::fetch::agg_label(*func, col.as_deref()), register_to_json(&r));
        }
        return Ok(conditional_get(req, rowset_etag(&db, obj), json!({ "$registers": regs })));
    }
    let select = match &res.params.select {
        Some(cols) => {
            let all: Vec<String> = db.columns(obj).into_iter().map(|(_, n)| n).collect();
            Some(cols.iter().map(|c| column_name(&all, c)).collect::<Result<Vec<_>>>()?)
        }
        None => None,
    };
    let (columns, rows) = select_rows(&mut tx, name, select.as_deref(), filter.as_ref())?;
    if single {
        let Some((uid, row)) = rows.first() else { return Err(Error::not_found(format!("row {name}/{}", res.key.as_deref().unwrap_or_default()))) };
        let etag = row_etag(&db, obj, *uid).expect("row just read");
        return Ok(conditional_get(req, etag, row_to_json(&columns, row)));
    }
    let etags: Vec<String> = rows.iter().filter_map(|(u, _)| row_etag(&db, obj, *u)).collect();
    let body = Json::Array(rows.iter().map(|(_, r)| row_to_json(&columns, r)).collect());
    Ok(conditional_get(req, rowset_etag(&db, obj), body).with_header("Row-ETags", etags.join(", ")))
}

fn conditional_get(req: &Request, etag: String, body: Json) -> Response {
    if req.header("If-None-Match").is_some_and(|h| etag_matches(h, &etag)) {
        return Response::new(304).with_etag(etag);
    }
    Response::json(200, &body).with_etag(etag)
}

/// Literal expressions for the fields of a JSON object, coerced to the
/// columns' domains.
fn object_fields(db: &Database, table: Uid, obj: &Map<String, Json>) -> Result<Vec<(String, Expr)>> {
    let mut out = vec![];
    for (k, v) in obj {
        let c = db
            .column_named(table, k)
            .or_else(|| db.columns(table).into_iter().find(|(_, n)| n.eq_ignore_ascii_case(k)).map(|(c, _)| c))
            .ok_or_else(|| Error::statement(format!("no column {k} in {}", db.name_of(table))))?;
        let v = json_to_domain(v, &db.column_def(c)?.domain)?;
        out.push((db.name_of(c), Expr::Literal(v)));
    }
    Ok(out)
}

fn base_table(db: &Database, role: Uid, name: &str) -> Result<(Uid, String)> {
    let (t, name) = lookup(db, role, name)?;
    if db.require(t)?.kind() != ObjectKind::Table {
        return Err(Error::NotImplemented(format!("{name} is a view and cannot be changed through this service")));
    }
    Ok((t, name))
}

fn post(engine: &Engine, mut tx: Transaction, name: &str, req: &Request) -> Result<Response> {
    let db = tx.db().clone();
    let (t, name) = match base_table(&db, tx.role(), name) {
        Ok(t) => t,
        Err(Error::NotImplemented(m)) => return Ok(Response::error(405, "method", m)),
        Err(e) => return Err(e),
    };
    let body: Json = serde_json::from_str(&req.body).map_err(|e| Error::statement(format!("bad JSON body: {e}")))?;
    let (objects, many) = match body {
        Json::Object(m) => (vec![m], false),
        Json::Array(a) => (
            a.into_iter()
                .map(|x| match x {
                    Json::Object(m) => Ok(m),
                    _ => Err(Error::statement("expected an array of objects")),
                })
                .collect::<Result<Vec<_>>>()?,
            true,
        ),
        _ => return Err(Error::statement("expected a JSON object or array")),
    };
    for o in &objects {
        let fields = object_fields(&db, t, o)?;
        let (columns, exprs): (Vec<String>, Vec<Expr>) = fields.into_iter().unzip();
        execute(&mut tx, &Statement::Insert { table: name.clone(), columns, rows: vec![exprs] })?;
    }
    let info = engine.commit(tx)?;
    let uids: Vec<Uid> = info
        .physicals
        .iter()
        .filter(|p| matches!(&p.payload, Payload::Record { table, .. } if *table == t))
        .map(|p| p.pos)
        .collect();
    let columns: Vec<String> = info.db.columns(t).into_iter().map(|(_, n)| n).collect();
    let cols: Vec<Uid> = info.db.columns(t).into_iter().map(|(c, _)| c).collect();
    let rows: Vec<Json> = uids
        .iter()
        .filter_map(|u| info.db.row(t, *u))
        .map(|r| row_to_json(&columns, &cols.iter().map(|c| r.get(*c)).collect::<Vec<_>>()))
        .collect();
    if many {
        return Ok(Response::json(201, &Json::Array(rows)).with_etag(rowset_etag(&info.db, t)));
    }
    let uid = uids.first().copied().unwrap_or(Uid::NONE);
    let etag = row_etag(&info.db, t, uid).unwrap_or_default();
    let mut r = Response::json(201, rows.first().unwrap_or(&Json::Null)).with_etag(etag);
    if let Ok(pk) = primary_key(&info.db, t) {
        if let Some(row) = info.db.row(t, uid) {
            let key: Vec<String> = pk
                .iter()
                .filter_map(|(n, _)| info.db.column_named(t, n))
                .map(|c| row.get(c).to_string())
                .collect();
            r = r.with_header("Location", format!("{}/{}", req.target.trim_end_matches('/'), key.join(",")));
        }
    }
    Ok(r)
}

/// PUT or DELETE on a row (`/{table}/{key}`) or on the rows of a table
/// selected by a `where` condition. Requires `If-Match`.
fn mutate(engine: &Engine, mut tx: Transaction, name: &str, res: &Resource, req: &Request) -> Result<Response> {
    let db = tx.db().clone();
    let (t, name) = match base_table(&db, tx.role(), name) {
        Ok(t) => t,
        Err(Error::NotImplemented(m)) => return Ok(Response::error(405, "method", m)),
        Err(e) => return Err(e),
    };
    let Some(if_match) = req.header("If-Match") else {
        return Ok(Response::error(412, "precondition", "If-Match is required"));
    };
    let filter = parse_filter(&res.params)?;
    let (filter, current) = match &res.key {
        Some(k) => {
            let kf = key_filter(&db, t, k)?;
            let (_, rows) = select_rows(&mut tx, &name, Some(&[]), Some(&kf))?;
            let Some((uid, _)) = rows.first() else { return Err(Error::not_found(format!("row {name}/{k}"))) };
            (and(Some(kf), filter), row_etag(&db, t, *uid).expect("row just read"))
        }
        None => {
            if filter.is_none() {
                return Ok(Response::error(405, "method", "PUT and DELETE need a key or a where condition"));
            }
            (filter, rowset_etag(&db, t))
        }
    };
    if !etag_matches(if_match, &current) {
        return Ok(Response::error(412, "precondition", format!("ETag {current} does not match {if_match}")));
    }
    let stmt = if req.method == "PUT" {
        let body: Json = serde_json::from_str(&req.body).map_err(|e| Error::statement(format!("bad JSON body: {e}")))?;
        let Json::Object(obj) = body else { return Err(Error::statement("expected a JSON object")) };
        Statement::Update { table: name.clone(), assignments: object_fields(&db, t, &obj)?, filter: filter.clone() }
    } else {
        Statement::Delete { table: name.clone(), filter: filter.clone() }
    };
    let StatementResult::Affected(n) = execute(&mut tx, &stmt)? else { unreachable!("DML reports a count") };
    let info = engine.commit(tx)?;
    if req.method == "DELETE" {
        return Ok(Response::new(204).with_etag(rowset_etag(&info.db, t)));
    }
    match &res.key {
        Some(_) => {
            let uid = info
                .physicals
                .iter()
                .find_map(|p| match &p.payload {
                    Payload::Update { table, row, .. } if *table == t => Some(*row),
                    _ => None,
                })
                .unwrap_or(Uid::NONE);
            let columns: Vec<(Uid, String)> = info.db.columns(t);
            let row = info.db.row(t, uid);
            let body = match row {
                Some(r) => {
                    let names: Vec<String> = columns.iter().map(|(_, n)| n.clone()).collect();
                    let vals: Vec<Value> = columns.iter().map(|(c, _)| r.get(*c)).collect();
                    row_to_json(&names, &vals)
                }
                None => Json::Null,
            };
            Ok(Response::json(200, &body).with_etag(row_etag(&info.db, t, uid).unwrap_or_default()))
        }
        None => Ok(Response::json(200, &json!({ "affected": n })).with_etag(rowset_etag(&info.db, t))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_parse() {
        let r = parse_target("/E/E/SALES/3?select=A,B&where=A%3D1&agg=SUM(E),COUNT(*)").unwrap();
        assert_eq!((r.db.as_str(), r.role.as_str()), ("E", "E"));
        assert_eq!(r.object.as_deref(), Some("SALES"));
        assert_eq!(r.key.as_deref(), Some("3"));
        assert_eq!(r.params.select, Some(vec!["A".to_string(), "B".to_string()]));
        assert_eq!(r.params.filter, vec!["A=1".to_string()]);
        assert_eq!(r.params.aggs, vec!["SUM(E)".to_string(), "COUNT(*)".to_string()]);
        let r = parse_target("/E/E/SALES/?PIE(CUST,CUSTSALES)").unwrap();
        assert_eq!(r.params.selector.as_deref(), Some("PIE(CUST,CUSTSALES)"));
        assert!(parse_target("/E/E/$class/T").unwrap().class);
        assert!(parse_target("/E").is_none());
    }

    #[test]
    fn etag_lists_match() {
        assert!(etag_matches("\"1-2\", \"3-4\"", "\"3-4\""));
        assert!(etag_matches("*", "\"9\""));
        assert!(!etag_matches("\"1-2\"", "\"1-3\""));
    }
}
