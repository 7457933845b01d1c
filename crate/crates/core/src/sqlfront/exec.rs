//! Plan evaluation. Every base-table access is recorded in the
//! transaction's read set at the granularity the plan proves.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Arc;

use super::agg::Register;
use super::ast::{BinOp, Expr};
use super::eval::{self, Env};
use super::plan::*;
use crate::engine::{Database, RowsRead, Transaction};
use crate::error::{Error, Result};
use crate::pbtree::{Bookmark, Key, PList};
use crate::physlog::{Domain, Uid, Value};
use crate::restsvc::{fetch, FetchError, Fetched, HttpClient, RemoteClient, RemoteSelect};

pub type Rows = Vec<Vec<Value>>;

/// Evaluation context: the snapshot, and the transaction that records
/// reads (absent when evaluating constraint bodies at commit).
pub struct Exec<'t> {
    db: Database,
    tx: Option<&'t mut Transaction>,
    remote: Option<Arc<dyn RemoteClient>>,
}

impl<'t> Exec<'t> {
    pub fn new(tx: &'t mut Transaction) -> Exec<'t> {
        let db = tx.db().clone();
        let remote = tx.remote_client().cloned();
        Exec { db, tx: Some(tx), remote }
    }

    /// Evaluate against a bare snapshot without recording reads.
    pub fn detached(db: &Database) -> Exec<'static> {
        Exec { db: db.clone(), tx: None, remote: None }
    }

    pub fn db(&self) -> &Database {
        &self.db
    }

    fn note_read(&mut self, table: Uid, cols: &[Uid], rows: RowsRead<'_>, role: Uid) -> Result<()> {
        match self.tx.as_deref_mut() {
            Some(tx) => tx.note_read(table, cols, rows, role),
            None => Ok(()),
        }
    }

    pub fn run(&mut self, plan: &Plan) -> Result<Rows> {
        self.exec(plan, None)
    }

    pub fn exec(&mut self, plan: &Plan, outer: Option<&Env>) -> Result<Rows> {
        match &plan.node {
            Node::TableScan { .. } | Node::IndexSeek { .. } => {
                Ok(self.base_rows(plan, outer)?.into_iter().map(|(_, r)| r).collect())
            }
            Node::Rest(r) => self.rest(r, outer),
            Node::Filter { input, predicate } => {
                let rows = self.exec(input, outer)?;
                let uids = input.uids();
                let mut out = vec![];
                for row in rows {
                    let env = Env::new(&uids, &row, outer);
                    if eval::truth(&self.eval(predicate, &env)?)? == Some(true) {
                        out.push(row);
                    }
                }
                Ok(out)
            }
            Node::Project { input, exprs } => {
                let rows = self.exec(input, outer)?;
                let uids = input.uids();
                let mut out = Vec::with_capacity(rows.len());
                for row in &rows {
                    let env = Env::new(&uids, row, outer);
                    out.push(exprs.iter().map(|e| self.eval(e, &env)).collect::<Result<Vec<_>>>()?);
                }
                Ok(out)
            }
            Node::Order { input, keys } => {
                let rows = self.exec(input, outer)?;
                let uids = input.uids();
                let mut keyed = vec![];
                for row in rows {
                    let env = Env::new(&uids, &row, outer);
                    let k = keys.iter().map(|(e, _)| self.eval(e, &env)).collect::<Result<Vec<_>>>()?;
                    keyed.push((k, row));
                }
                keyed.sort_by(|(a, _), (b, _)| {
                    for ((x, y), (_, desc)) in a.iter().zip(b).zip(keys) {
                        let o = x.sort_cmp(y);
                        let o = if *desc { o.reverse() } else { o };
                        if o != Ordering::Equal {
                            return o;
                        }
                    }
                    Ordering::Equal
                });
                Ok(keyed.into_iter().map(|(_, r)| r).collect())
            }
            Node::Aggregate { input, aggs } => {
                let rows = self.exec(input, outer)?;
                let uids = input.uids();
                let mut regs: Vec<Register> = aggs.iter().map(|a| Register::new(a.func)).collect();
                for row in &rows {
                    let env = Env::new(&uids, row, outer);
                    for (a, r) in aggs.iter().zip(regs.iter_mut()) {
                        match &a.arg {
                            None => r.count_row(),
                            Some(e) => r.accumulate(&self.eval(e, &env)?)?,
                        }
                    }
                }
                Ok(vec![regs.iter().map(Register::finalize).collect::<Result<Vec<_>>>()?])
            }
            Node::Cross { inputs } => {
                let mut acc: Rows = vec![vec![]];
                for p in inputs {
                    let rows = self.exec(p, outer)?;
                    let mut next = Vec::with_capacity(acc.len() * rows.len());
                    for a in &acc {
                        for r in &rows {
                            let mut x = a.clone();
                            x.extend(r.iter().cloned());
                            next.push(x);
                        }
                    }
                    acc = next;
                }
                Ok(acc)
            }
            Node::ViewInstance { view, input } => {
                if let Some(tx) = self.tx.as_deref_mut() {
                    tx.note_object(*view);
                }
                self.exec(input, outer)
            }
            Node::Single => Ok(vec![vec![]]),
        }
    }

    /// Rows of a scan or seek, with the uid of each base row.
    fn base_rows(&mut self, plan: &Plan, outer: Option<&Env>) -> Result<Vec<(Uid, Vec<Value>)>> {
        match &plan.node {
            Node::TableScan { table, cols, used, role } => {
                let used = used.clone().unwrap_or_else(|| cols.iter().map(|(_, b)| *b).collect());
                self.note_read(*table, &used, RowsRead::All, *role)?;
                Ok(self.db.rows(*table).map(|r| (r.uid, project_row(r, cols, &used))).collect())
            }
            Node::IndexSeek { table, index, key, cols, used, role } => {
                self.seek(*table, *index, key, cols, used.as_deref(), *role, outer)
            }
            _ => Err(Error::statement("not a base table access")),
        }
    }

    /// Rows of a filtered base-table plan, as UPDATE and DELETE need them:
    /// with the uid of each base row.
    pub fn scan_rows(&mut self, plan: &Plan) -> Result<Vec<(Uid, Vec<Value>)>> {
        match &plan.node {
            Node::Filter { input, predicate } => {
                let uids = input.uids();
                let mut out = vec![];
                for (u, row) in self.scan_rows(input)? {
                    let env = Env::new(&uids, &row, None);
                    if eval::truth(&self.eval(predicate, &env)?)? == Some(true) {
                        out.push((u, row));
                    }
                }
                Ok(out)
            }
            _ => self.base_rows(plan, None),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn seek(
        &mut self,
        table: Uid,
        index: Uid,
        key: &[BExpr],
        cols: &[(Uid, Uid)],
        used: Option<&[Uid]>,
        role: Uid,
        outer: Option<&Env>,
    ) -> Result<Vec<(Uid, Vec<Value>)>> {
        let used: Vec<Uid> = used.map(<[Uid]>::to_vec).unwrap_or_else(|| cols.iter().map(|(_, b)| *b).collect());
        let idef = self.db.index_def(index)?.clone();
        let env = outer.copied().unwrap_or(Env::EMPTY);
        let mut vals = vec![];
        for e in key {
            vals.push(self.eval(e, &env)?);
        }
        if vals.iter().any(Value::is_null) {
            // equality with NULL is never true
            self.note_read(table, &used, RowsRead::Some(&[]), role)?;
            return Ok(vec![]);
        }
        let mut comparable = true;
        for (c, v) in idef.columns.iter().zip(&vals) {
            comparable &= key_compatible(&self.db.column_def(*c)?.domain, v);
        }
        if !comparable {
            // no index order applies: compare row by row as a scan would
            self.note_read(table, &used, RowsRead::All, role)?;
            let mut out = vec![];
            for r in self.db.rows(table) {
                let mut keep = true;
                for (c, v) in idef.columns.iter().zip(&vals) {
                    keep &= eval::compare(BinOp::Eq, &r.get(*c), v)? == Value::Boolean(true);
                }
                if keep {
                    out.push((r.uid, project_row(r, cols, &used)));
                }
            }
            return Ok(out);
        }
        let k = Key::Tuple(vals.iter().map(|v| v.to_key().expect("not null")).collect());
        let uids: Vec<Uid> = match self.db.data(table).and_then(|d| d.indexes.get(&index)) {
            Some(tree) => tree.prefix_iter(&k).map(|(_, r)| r).collect(),
            None => vec![],
        };
        if let Some(tx) = self.tx.as_deref_mut() {
            tx.note_probe(table, index, k.clone());
        }
        self.note_read(table, &used, RowsRead::Some(&uids), role)?;
        Ok(uids.iter().filter_map(|u| self.db.row(table, *u)).map(|r| (r.uid, project_row(r, cols, &used))).collect())
    }

    fn rest(&mut self, r: &RestNode, outer: Option<&Env>) -> Result<Rows> {
        // contributors: (url, values of the view's using-sourced columns)
        let mut contributors: Vec<(String, Vec<Value>)> = vec![];
        match r.using {
            Some(using) => {
                self.note_read(using, &r.using_cols, RowsRead::All, r.role)?;
                let url_col = *r.using_cols.last().ok_or_else(|| Error::statement("using table has no columns"))?;
                let rows: Vec<_> = self.db.rows(using).cloned().collect();
                for row in rows {
                    let vals: Vec<Value> = r
                        .sources
                        .iter()
                        .map(|s| match s {
                            RestSourceCol::Using(c) => row.get(*c),
                            RestSourceCol::Remote(_) => Value::Null,
                        })
                        .collect();
                    let env = Env::new(&r.view_cols, &vals, outer);
                    let mut keep = true;
                    for c in &r.using_filter {
                        keep &= eval::truth(&self.eval(c, &env)?)? == Some(true);
                    }
                    if keep {
                        let url = row.get(url_col);
                        let url = url.as_str().ok_or_else(|| Error::typ("contributor URL must be a string"))?;
                        contributors.push((url.to_string(), vals));
                    }
                }
            }
            None => {
                let url = r.url.clone().ok_or_else(|| Error::statement("RESTView has no URL"))?;
                contributors.push((url, vec![Value::Null; r.sources.len()]));
            }
        }
        let names: HashMap<Uid, String> = r
            .view_cols
            .iter()
            .zip(&r.sources)
            .filter_map(|(u, s)| match s {
                RestSourceCol::Remote(n) => Some((*u, n.clone())),
                _ => None,
            })
            .collect();
        let mut filter = vec![];
        for c in &r.remote_filter {
            let e = to_remote_sql(c, &names).ok_or_else(|| Error::statement("filter cannot be sent to a contributor"))?;
            filter.push(e.to_string());
        }
        let mut aggs = vec![];
        for a in &r.aggs {
            let col = match &a.arg {
                None => None,
                Some(BExpr::Col(u)) => Some(names.get(u).cloned().ok_or_else(|| Error::statement("aggregate over a local column"))?),
                Some(_) => return Err(Error::statement("aggregate argument cannot be sent to a contributor")),
            };
            aggs.push((a.func, col));
        }
        let sel = RemoteSelect {
            select: r.fetch.clone(),
            filter: if filter.is_empty() { None } else { Some(filter.join(" AND ")) },
            aggs,
            credentials: r.user.clone().map(|u| (u, r.password.clone().unwrap_or_default())),
        };
        let client: Arc<dyn RemoteClient> = self.remote.clone().unwrap_or_else(|| Arc::new(HttpClient::default()));
        let mut offline = vec![];
        let mut available = vec![];
        let mut results = vec![];
        for (url, vals) in &contributors {
            match fetch(client.as_ref(), url, &sel) {
                Ok(f) => {
                    available.push(url.clone());
                    results.push((f, vals));
                }
                Err(FetchError::Offline(_)) => offline.push(url.clone()),
                Err(FetchError::Failed(e)) => return Err(e),
            }
        }
        if !offline.is_empty() {
            return Err(Error::ContributorOffline { offline, available });
        }
        if !r.aggs.is_empty() {
            let mut regs: Vec<Register> = r.aggs.iter().map(|a| Register::new(a.func)).collect();
            for (f, _) in &results {
                let Fetched::Registers(rs) = f else { return Err(Error::Remote("expected registers".into())) };
                for (acc, x) in regs.iter_mut().zip(rs) {
                    acc.merge(x)?;
                }
            }
            return Ok(vec![regs.iter().map(Register::finalize).collect::<Result<Vec<_>>>()?]);
        }
        let mut out = vec![];
        for (f, vals) in results {
            let Fetched::Rows(rows) = f else { return Err(Error::Remote("expected rows".into())) };
            for obj in rows {
                let mut row = Vec::with_capacity(r.sources.len());
                for (i, s) in r.sources.iter().enumerate() {
                    row.push(match s {
                        RestSourceCol::Using(_) => vals[i].clone(),
                        RestSourceCol::Remote(n) => match crate::restsvc::json::field(&obj, n) {
                            Some(j) => crate::restsvc::json::json_to_domain(j, &r.domains[i])?,
                            None => Value::Null,
                        },
                    });
                }
                out.push(row);
            }
        }
        Ok(out)
    }

    pub fn eval(&mut self, e: &BExpr, env: &Env) -> Result<Value> {
        Ok(match e {
            BExpr::Lit(v) => v.clone(),
            BExpr::Col(u) => env.get(*u).cloned().ok_or_else(|| Error::statement(format!("unbound column {u:?}")))?,
            BExpr::Binary(op, l, r) => match op {
                BinOp::And => {
                    let a = eval::truth(&self.eval(l, env)?)?;
                    if a == Some(false) {
                        return Ok(Value::Boolean(false));
                    }
                    let b = eval::truth(&self.eval(r, env)?)?;
                    eval::from_truth(match (a, b) {
                        (_, Some(false)) => Some(false),
                        (Some(true), Some(true)) => Some(true),
                        _ => None,
                    })
                }
                BinOp::Or => {
                    let a = eval::truth(&self.eval(l, env)?)?;
                    if a == Some(true) {
                        return Ok(Value::Boolean(true));
                    }
                    let b = eval::truth(&self.eval(r, env)?)?;
                    eval::from_truth(match (a, b) {
                        (_, Some(true)) => Some(true),
                        (Some(false), Some(false)) => Some(false),
                        _ => None,
                    })
                }
                BinOp::Concat => {
                    let a = self.eval(l, env)?;
                    eval::concat(&a, &self.eval(r, env)?)
                }
                op if op.is_comparison() => {
                    let a = self.eval(l, env)?;
                    eval::compare(*op, &a, &self.eval(r, env)?)?
                }
                op => {
                    let a = self.eval(l, env)?;
                    eval::arith(*op, &a, &self.eval(r, env)?)?
                }
            },
            BExpr::Neg(x) => eval::negate(&self.eval(x, env)?)?,
            BExpr::Not(x) => eval::from_truth(eval::truth(&self.eval(x, env)?)?.map(|b| !b)),
            BExpr::IsNull(x, neg) => Value::Boolean(self.eval(x, env)?.is_null() != *neg),
            BExpr::InList(x, list, neg) => {
                let v = self.eval(x, env)?;
                let mut t = Some(false);
                for item in list {
                    match eval::truth(&eval::compare(BinOp::Eq, &v, &self.eval(item, env)?)?)? {
                        Some(true) => {
                            t = Some(true);
                            break;
                        }
                        None => t = None,
                        Some(false) => {}
                    }
                }
                eval::from_truth(if *neg { t.map(|b| !b) } else { t })
            }
            BExpr::Like(x, p, neg) => {
                let v = self.eval(x, env)?;
                let p = self.eval(p, env)?;
                match (&v, &p) {
                    (Value::Null, _) | (_, Value::Null) => Value::Null,
                    (Value::Char(s), Value::Char(pat)) => Value::Boolean(eval::like(s, pat) != *neg),
                    _ => return Err(Error::typ(format!("LIKE needs strings, not {} and {}", v.kind_name(), p.kind_name()))),
                }
            }
            BExpr::Case { operand, whens, otherwise } => {
                let subject = match operand {
                    Some(o) => Some(self.eval(o, env)?),
                    None => None,
                };
                for (w, t) in whens {
                    let c = self.eval(w, env)?;
                    let hit = match &subject {
                        Some(s) => eval::compare(BinOp::Eq, s, &c)? == Value::Boolean(true),
                        None => eval::truth(&c)? == Some(true),
                    };
                    if hit {
                        return self.eval(t, env);
                    }
                }
                match otherwise {
                    Some(o) => self.eval(o, env)?,
                    None => Value::Null,
                }
            }
            BExpr::Cast(x, d) => d.coerce(self.eval(x, env)?)?,
            BExpr::Subquery(p) => {
                let rows = self.exec(p, Some(env))?;
                match rows.len() {
                    0 => Value::Null,
                    1 => rows.into_iter().next().and_then(|r| r.into_iter().next()).unwrap_or(Value::Null),
                    n => return Err(Error::Cardinality(format!("scalar subquery returned {n} rows"))),
                }
            }
        })
    }
}

fn project_row(r: &crate::engine::Row, cols: &[(Uid, Uid)], used: &[Uid]) -> Vec<Value> {
    cols.iter().map(|(_, b)| if used.contains(b) { r.get(*b) } else { Value::Null }).collect()
}

/// Can `v` be looked up in an index on a column of `domain`?
fn key_compatible(domain: &Domain, v: &Value) -> bool {
    matches!(
        (domain, v),
        (Domain::Char { .. }, Value::Char(_))
            | (Domain::Integer | Domain::Numeric { .. } | Domain::Real, Value::Integer(_) | Value::Real(_))
            | (Domain::Boolean, Value::Boolean(_))
            | (Domain::Date, Value::Date(_))
    )
}

/// SQL text for a condition over remote columns.
pub fn to_remote_sql(e: &BExpr, names: &HashMap<Uid, String>) -> Option<Expr> {
    let b = |x: &BExpr| to_remote_sql(x, names).map(Box::new);
    Some(match e {
        BExpr::Lit(v) => Expr::Literal(v.clone()),
        BExpr::Col(u) => Expr::Column { qualifier: None, name: names.get(u)?.clone() },
        BExpr::Binary(op, l, r) => Expr::Binary(*op, b(l)?, b(r)?),
        BExpr::Neg(x) => Expr::Neg(b(x)?),
        BExpr::Not(x) => Expr::Not(b(x)?),
        BExpr::IsNull(x, n) => Expr::IsNull { expr: b(x)?, negated: *n },
        BExpr::InList(x, l, n) => Expr::InList {
            expr: b(x)?,
            list: l.iter().map(|i| to_remote_sql(i, names)).collect::<Option<Vec<_>>>()?,
            negated: *n,
        },
        BExpr::Like(x, p, n) => Expr::Like { expr: b(x)?, pattern: b(p)?, negated: *n },
        BExpr::Case { operand, whens, otherwise } => Expr::Case {
            operand: match operand {
                Some(o) => Some(b(o)?),
                None => None,
            },
            whens: whens
                .iter()
                .map(|(w, t)| Some((to_remote_sql(w, names)?, to_remote_sql(t, names)?)))
                .collect::<Option<Vec<_>>>()?,
            otherwise: match otherwise {
                Some(o) => Some(b(o)?),
                None => None,
            },
        },
        BExpr::Cast(x, d) => Expr::Cast { expr: b(x)?, domain: d.clone() },
        BExpr::Subquery(_) => return None,
    })
}

/// Rows of a result traversed by bookmark. The rows are a fixed list, so
/// later commits cannot disturb a cursor.
#[derive(Clone)]
pub struct Cursor {
    pub columns: Vec<String>,
    rows: PList<Vec<Value>>,
    at: Option<Bookmark<usize, Vec<Value>>>,
}

impl Cursor {
    pub fn new(columns: Vec<String>, rows: Rows) -> Cursor {
        let rows: PList<Vec<Value>> = rows.into_iter().collect();
        let at = rows.first();
        Cursor { columns, rows, at }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Current row, if the cursor is on one.
    pub fn current(&self) -> Option<&Vec<Value>> {
        self.at.as_ref().map(|b| b.value())
    }

    pub fn position(&self) -> Option<usize> {
        self.at.as_ref().map(|b| *b.key())
    }

    pub fn next(&mut self) -> Option<&Vec<Value>> {
        self.at = self.at.as_ref().and_then(|b| b.next());
        self.current()
    }

    pub fn prev(&mut self) -> Option<&Vec<Value>> {
        self.at = self.at.as_ref().and_then(|b| b.prev());
        self.current()
    }

    pub fn rewind(&mut self) {
        self.at = self.rows.first();
    }

    pub fn to_end(&mut self) {
        self.at = self.rows.last();
    }
}
