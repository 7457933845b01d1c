//! Statement execution inside one transaction.

use std::collections::BTreeSet;

use super::ast::*;
use super::bind::{Binder, Scope};
use super::eval::Env;
use super::exec::{to_remote_sql, Exec, Rows};
use super::plan::{BExpr, Node, Plan, PlanCol, RestSourceCol};
use super::review::{review, review_with_need};
use crate::engine::{
    check_privilege, password_hash, privilege_named, Database, Detail, ObjectKind, RemoteWrite, Transaction,
};
use crate::error::{Error, Result};
use crate::physlog::{AlterChange, Domain, FkAction, IndexKind, MetaItem, Payload, Privileges, Uid, Value};
use crate::restsvc::{fetch::encode_query, json::value_to_json, RemoteRequest};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatementResult {
    Rows { columns: Vec<String>, rows: Rows },
    /// Rows inserted, updated or deleted.
    Affected(usize),
    Done(String),
}

/// Bind and review a query in the transaction's role.
pub fn plan_query(tx: &Transaction, q: &Query) -> Result<Plan> {
    let mut b = Binder::new(tx.db(), tx.user());
    let p = b.bind_query(q, tx.role(), None)?;
    Ok(review(p, tx.db()))
}

pub fn run_query(tx: &mut Transaction, q: &Query) -> Result<StatementResult> {
    let plan = plan_query(tx, q)?;
    let rows = Exec::new(tx).run(&plan)?;
    Ok(StatementResult::Rows { columns: plan.columns.iter().map(|c| c.name.clone()).collect(), rows })
}

/// Execute one statement. Transaction control and SET ROLE belong to the
/// session and are rejected here.
pub fn execute(tx: &mut Transaction, stmt: &Statement) -> Result<StatementResult> {
    match stmt {
        Statement::Select(q) => run_query(tx, q),
        Statement::Table(name) => {
            let q = Query {
                items: vec![SelectItem::Star(None)],
                from: vec![TableRef { name: name.clone(), alias: None }],
                filter: None,
                order: vec![],
            };
            run_query(tx, &q)
        }
        Statement::CreateTable { name, columns, constraints, metadata } => {
            create_table(tx, name, columns, constraints, metadata)?;
            Ok(StatementResult::Done(format!("table {name} created")))
        }
        Statement::CreateView { name, columns, query, metadata } => {
            let mut b = Binder::new(tx.db(), tx.user());
            let p = b.bind_query(query, tx.role(), None)?;
            if !columns.is_empty() && columns.len() != p.columns.len() {
                return Err(Error::statement(format!(
                    "view {name} names {} columns but its query yields {}",
                    columns.len(),
                    p.columns.len()
                )));
            }
            let v = tx.stage(Payload::View { name: name.clone(), columns: columns.clone(), source: query.to_string() })?;
            stage_metadata(tx, v, metadata)?;
            Ok(StatementResult::Done(format!("view {name} created")))
        }
        Statement::CreateRestView { name, columns, source, metadata } => {
            let mut cols = vec![];
            for (c, d) in columns {
                cols.push((c.clone(), domain_uid(tx, d)?));
            }
            let (using, mut url) = match source {
                RestSource::Url(u) => (None, Some(u.clone())),
                RestSource::Using(t) => {
                    let u = resolve(tx.db(), tx.role(), t)?;
                    let def = tx.db().table_def(u)?;
                    let Some(last) = def.columns.last() else {
                        return Err(Error::statement(format!("using table {t} has no columns")));
                    };
                    if !matches!(tx.db().column_def(*last)?.domain, Domain::Char { .. }) {
                        return Err(Error::statement(format!("the last column of {t} must hold contributor URLs")));
                    }
                    (Some(u), None)
                }
            };
            if using.is_none() {
                if let Some(m) = metadata.iter().find(|m| m.word.eq_ignore_ascii_case("URL")) {
                    url = url.or_else(|| m.arg.clone());
                }
            }
            let v = tx.stage(Payload::RestView { name: name.clone(), columns: cols, using, url })?;
            let rest: Vec<MetaItem> = metadata.iter().filter(|m| !m.word.eq_ignore_ascii_case("URL")).cloned().collect();
            stage_metadata(tx, v, &rest)?;
            Ok(StatementResult::Done(format!("view {name} created")))
        }
        Statement::CreateRole { name } => {
            require_owner(tx, "create roles")?;
            tx.stage(Payload::Role { name: name.clone() })?;
            Ok(StatementResult::Done(format!("role {name} created")))
        }
        Statement::CreateUser { name, password } => {
            require_owner(tx, "create users")?;
            tx.stage(Payload::User { name: name.clone(), password: password.as_deref().map(password_hash) })?;
            Ok(StatementResult::Done(format!("user {name} created")))
        }
        Statement::Grant { target, grantees } => grant(tx, target, grantees, false),
        Statement::Revoke { target, grantees } => grant(tx, target, grantees, true),
        Statement::Insert { table, columns, rows } => insert(tx, table, columns, rows),
        Statement::Update { table, assignments, filter } => update(tx, table, assignments, filter.as_ref()),
        Statement::Delete { table, filter } => delete(tx, table, filter.as_ref()),
        Statement::AlterTable { table, action } => {
            let t = resolve(tx.db(), tx.role(), table)?;
            require_authority(tx, t)?;
            match action {
                AlterAction::AddColumn(spec) => {
                    let seq = tx.db().table_def(t)?.columns.len() as u32;
                    let c = add_column(tx, t, seq, spec)?;
                    let cons = column_constraints(spec);
                    add_constraints(tx, t, table, &cons)?;
                    let _ = c;
                }
                AlterAction::AddConstraint(c) => add_constraints(tx, t, table, std::slice::from_ref(c))?,
                AlterAction::Metadata(items) => stage_metadata(tx, t, items)?,
            }
            Ok(StatementResult::Done(format!("table {table} altered")))
        }
        Statement::AlterView { name, query } => {
            let v = resolve(tx.db(), tx.role(), name)?;
            require_authority(tx, v)?;
            let obj = tx.db().require(v)?.clone();
            let Detail::View(def) = &obj.detail else {
                return Err(Error::statement(format!("{name} is not a query view")));
            };
            let mut b = Binder::new(tx.db(), tx.user());
            let p = b.bind_query(query, obj.definer, None)?;
            if !def.columns.is_empty() && def.columns.len() != p.columns.len() {
                return Err(Error::statement(format!("view {name} has {} columns", def.columns.len())));
            }
            tx.stage(Payload::Alter { target: v, change: AlterChange::ViewSource(query.to_string()) })?;
            Ok(StatementResult::Done(format!("view {name} altered")))
        }
        Statement::Drop { kind, name } => {
            let db = tx.db();
            let target = match kind {
                DropKind::Table | DropKind::View => resolve(db, tx.role(), name)?,
                DropKind::Role => db.role_named(name).ok_or_else(|| Error::not_found(format!("role {name}")))?,
                DropKind::User => db.user_named(name).ok_or_else(|| Error::not_found(format!("user {name}")))?,
            };
            let k = db.require(target)?.kind();
            let ok = match kind {
                DropKind::Table => k == ObjectKind::Table,
                DropKind::View => matches!(k, ObjectKind::View | ObjectKind::RestView),
                _ => true,
            };
            if !ok {
                return Err(Error::statement(format!("{name} is a {k:?}")));
            }
            require_authority(tx, target)?;
            tx.stage(Payload::Drop { target })?;
            Ok(StatementResult::Done(format!("{name} dropped")))
        }
        Statement::SetRole(_) | Statement::Begin | Statement::Commit | Statement::Rollback => {
            Err(Error::statement(format!("{stmt} is a session statement")))
        }
    }
}

pub fn resolve(db: &Database, role: Uid, name: &str) -> Result<Uid> {
    db.resolve(role, name).ok_or_else(|| Error::not_found(format!("table or view {name}")))
}

fn require_owner(tx: &Transaction, what: &str) -> Result<()> {
    if tx.user() == tx.db().owner {
        Ok(())
    } else {
        Err(Error::auth(format!("only the database owner may {what}")))
    }
}

/// The database owner, the object's owner, or its definer role.
fn require_authority(tx: &Transaction, object: Uid) -> Result<()> {
    let db = tx.db();
    let o = db.require(object)?;
    if tx.user() == db.owner || o.owner == tx.user() || o.definer == tx.role() {
        Ok(())
    } else {
        Err(Error::auth(format!("{} is not owned by {}", o.name, db.name_of(tx.user()))))
    }
}

fn require(tx: &Transaction, object: Uid, action: Privileges, verb: &str) -> Result<()> {
    if check_privilege(tx.db(), tx.user(), tx.role(), object, action) {
        Ok(())
    } else {
        Err(Error::auth(format!("no {verb} privilege on {}", tx.db().name_of(object))))
    }
}

fn stage_metadata(tx: &mut Transaction, target: Uid, items: &[MetaItem]) -> Result<()> {
    if !items.is_empty() {
        tx.stage(Payload::Metadata { target, items: items.to_vec() })?;
    }
    Ok(())
}

fn domain_uid(tx: &mut Transaction, d: &Domain) -> Result<Uid> {
    match d.builtin_uid() {
        Some(u) => Ok(u),
        None => tx.stage(Payload::Domain { domain: d.clone() }),
    }
}

fn add_column(tx: &mut Transaction, table: Uid, seq: u32, spec: &ColumnSpec) -> Result<Uid> {
    let domain = domain_uid(tx, &spec.domain)?;
    tx.stage(Payload::Column {
        table,
        name: spec.name.clone(),
        seq,
        domain,
        not_null: spec.not_null || spec.primary,
    })
}

fn column_constraints(spec: &ColumnSpec) -> Vec<TableConstraint> {
    let mut out = vec![];
    if spec.primary {
        out.push(TableConstraint::Primary(vec![spec.name.clone()]));
    }
    if spec.unique {
        out.push(TableConstraint::Unique(vec![spec.name.clone()]));
    }
    if let Some(r) = &spec.references {
        out.push(TableConstraint::Foreign { columns: vec![spec.name.clone()], reference: r.clone() });
    }
    if let Some(e) = &spec.check {
        out.push(TableConstraint::Check { name: None, expr: e.clone() });
    }
    out
}

fn create_table(
    tx: &mut Transaction,
    name: &str,
    columns: &[ColumnSpec],
    constraints: &[TableConstraint],
    metadata: &[MetaItem],
) -> Result<()> {
    let t = tx.stage(Payload::Table { name: name.to_string() })?;
    let mut cons = vec![];
    for (i, c) in columns.iter().enumerate() {
        add_column(tx, t, i as u32, c)?;
        cons.extend(column_constraints(c));
    }
    cons.extend(constraints.iter().cloned());
    // primary key first, so that self-references can find it
    cons.sort_by_key(|c| !matches!(c, TableConstraint::Primary(_)));
    add_constraints(tx, t, name, &cons)?;
    stage_metadata(tx, t, metadata)
}

fn column_uids(db: &Database, table: Uid, tname: &str, names: &[String]) -> Result<Vec<Uid>> {
    names
        .iter()
        .map(|n| db.column_named(table, n).ok_or_else(|| Error::not_found(format!("column {n} in {tname}"))))
        .collect()
}

fn add_constraints(tx: &mut Transaction, t: Uid, tname: &str, cons: &[TableConstraint]) -> Result<()> {
    for c in cons {
        match c {
            TableConstraint::Primary(cols) | TableConstraint::Unique(cols) => {
                let columns = column_uids(tx.db(), t, tname, cols)?;
                let kind = if matches!(c, TableConstraint::Primary(_)) { IndexKind::Primary } else { IndexKind::Unique };
                tx.stage(Payload::Index { table: t, columns, kind })?;
            }
            TableConstraint::Foreign { columns, reference } => {
                let db = tx.db();
                let columns = column_uids(db, t, tname, columns)?;
                let rt = if reference.table == tname { t } else { resolve(db, tx.role(), &reference.table)? };
                require(tx, rt, Privileges::SELECT, "REFERENCES")?;
                let db = tx.db();
                let refers = if reference.columns.is_empty() {
                    db.table_def(rt)?
                        .primary
                        .ok_or_else(|| Error::statement(format!("{} has no primary key", reference.table)))?
                } else {
                    let rc = column_uids(db, rt, &reference.table, &reference.columns)?;
                    db.unique_index_on(rt, &rc).ok_or_else(|| {
                        Error::statement(format!("no primary or unique key on {}({})", reference.table, reference.columns.join(",")))
                    })?
                };
                let kind = IndexKind::Foreign {
                    refers,
                    on_delete: reference.on_delete.unwrap_or(FkAction::Cascade),
                    on_update: reference.on_update.unwrap_or(FkAction::Restrict),
                };
                tx.stage(Payload::Index { table: t, columns, kind })?;
            }
            TableConstraint::Check { name, expr } => {
                let n = tx.db().table_def(t)?.checks.len();
                let name = name.clone().unwrap_or_else(|| format!("CHECK_{tname}_{}", n + 1));
                // bind now so that bad names are reported at definition time
                bind_check(tx.db(), t, expr)?;
                tx.stage(Payload::Alter { target: t, change: AlterChange::AddCheck { name, source: expr.to_string() } })?;
            }
        }
    }
    Ok(())
}

/// Bind a CHECK condition over a table's base column uids.
fn bind_check(db: &Database, table: Uid, expr: &Expr) -> Result<BExpr> {
    let tname = db.name_of(table);
    let cols = db
        .table_def(table)?
        .columns
        .iter()
        .map(|c| {
            Ok(PlanCol {
                uid: *c,
                name: db.name_of(*c),
                qualifier: Some(tname.clone()),
                domain: Some(db.column_def(*c)?.domain.clone()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scope = Scope { cols, parent: None };
    let owner = db.require(table)?.owner;
    let mut b = Binder::new(db, owner);
    b.bind_expr(expr, &scope, db.require(table)?.definer, None)
}

/// Does a table's CHECK condition hold for `row`? Unknown counts as
/// holding.
pub fn check_holds(db: &Database, table: Uid, row: &crate::engine::Row, source: &str, definer: Uid) -> Result<bool> {
    let expr = super::parser::parse_expr(source)?;
    let def = db.table_def(table)?;
    let cols = def.columns.clone();
    let scope = Scope {
        cols: cols
            .iter()
            .map(|c| PlanCol { uid: *c, name: db.name_of(*c), qualifier: Some(db.name_of(table)), domain: None })
            .collect(),
        parent: None,
    };
    let mut b = Binder::new(db, db.owner);
    let e = b.bind_expr(&expr, &scope, definer, None)?;
    let vals: Vec<Value> = cols.iter().map(|c| row.get(*c)).collect();
    let env = Env::new(&cols, &vals, None);
    let v = Exec::detached(db).eval(&e, &env)?;
    Ok(super::eval::truth(&v)? != Some(false))
}

fn grantee_uid(tx: &mut Transaction, name: &str, auto_user: bool) -> Result<Uid> {
    if name.eq_ignore_ascii_case("PUBLIC") {
        return Ok(Uid::PUBLIC);
    }
    let db = tx.db();
    if let Some(r) = db.role_named(name) {
        return Ok(r);
    }
    if let Some(u) = db.user_named(name) {
        return Ok(u);
    }
    if auto_user && tx.user() == tx.db().owner {
        return tx.stage(Payload::User { name: name.to_string(), password: None });
    }
    Err(Error::not_found(format!("role or user {name}")))
}

fn grant(tx: &mut Transaction, target: &GrantTarget, grantees: &[String], revoke: bool) -> Result<StatementResult> {
    match target {
        GrantTarget::Privileges { privileges, object } => {
            let obj = resolve(tx.db(), tx.role(), object)?;
            require_authority(tx, obj)?;
            for g in grantees {
                let grantee = grantee_uid(tx, g, false)?;
                let is_role = grantee == Uid::PUBLIC || tx.db().object(grantee).is_some_and(|o| o.kind() == ObjectKind::Role);
                for (p, cols) in privileges {
                    let privs = privilege_named(p).ok_or_else(|| Error::statement(format!("unknown privilege {p}")))?;
                    if privs.contains(Privileges::OWNERSHIP) && is_role {
                        return Err(Error::statement("OWNERSHIP can be granted only to a user"));
                    }
                    let objects = if cols.is_empty() { vec![obj] } else { column_uids(tx.db(), obj, object, cols)? };
                    for o in objects {
                        tx.stage(Payload::Grant { privileges: privs, object: o, grantee, revoke })?;
                    }
                }
            }
            Ok(StatementResult::Done(if revoke { "revoked" } else { "granted" }.into()))
        }
        GrantTarget::Roles(roles) => {
            for r in roles {
                let role = tx.db().role_named(r).ok_or_else(|| Error::not_found(format!("role {r}")))?;
                require_authority(tx, role)?;
                for g in grantees {
                    let grantee = grantee_uid(tx, g, !revoke)?;
                    if tx.db().object(grantee).is_some_and(|o| o.kind() == ObjectKind::Role) {
                        return Err(Error::statement(format!("role {r} cannot be granted to role {g}: roles hold no roles")));
                    }
                    tx.stage(Payload::Grant { privileges: Privileges::USAGE, object: role, grantee, revoke })?;
                }
            }
            Ok(StatementResult::Done(if revoke { "revoked" } else { "granted" }.into()))
        }
    }
}

/// Evaluate an expression that may not reference any column.
fn eval_const(tx: &mut Transaction, e: &Expr) -> Result<Value> {
    let scope = Scope { cols: vec![], parent: None };
    let mut b = Binder::new(tx.db(), tx.user());
    let be = b.bind_expr(e, &scope, tx.role(), None)?;
    let be = review_expr(be, tx.db());
    Exec::new(tx).eval(&be, &Env::EMPTY)
}

fn review_expr(e: BExpr, db: &Database) -> BExpr {
    let p = Plan::new(Node::Project { input: Box::new(Plan::new(Node::Single, vec![])), exprs: vec![e] }, vec![]);
    match review(p, db).node {
        Node::Project { mut exprs, .. } => exprs.remove(0),
        _ => unreachable!("review keeps a project over a single row"),
    }
}

fn insert(tx: &mut Transaction, table: &str, columns: &[String], rows: &[Vec<Expr>]) -> Result<StatementResult> {
    let t = resolve(tx.db(), tx.role(), table)?;
    if tx.db().require(t)?.kind() == ObjectKind::RestView {
        return rest_insert(tx, t, columns, rows);
    }
    let def = tx.db().table_def(t).map_err(|_| Error::statement(format!("cannot insert into {table}")))?.clone();
    let targets = if columns.is_empty() { def.columns.clone() } else { column_uids(tx.db(), t, table, columns)? };
    for c in &targets {
        require(tx, *c, Privileges::INSERT, "INSERT")?;
    }
    // a single integer primary key column is assigned automatically
    let autokey = def.primary.and_then(|p| {
        let idef = tx.db().index_def(p).ok()?;
        match idef.columns.as_slice() {
            [c] if tx.db().column_def(*c).ok()?.domain.is_integer() => Some((p, *c)),
            _ => None,
        }
    });
    let mut n = 0;
    for row in rows {
        if row.len() != targets.len() {
            return Err(Error::statement(format!("{} values for {} columns", row.len(), targets.len())));
        }
        let mut fields = vec![];
        for (c, e) in targets.iter().zip(row) {
            fields.push((*c, eval_const(tx, e)?));
        }
        if let Some((ix, kc)) = autokey {
            let present = fields.iter().any(|(c, v)| *c == kc && !v.is_null());
            if !present {
                fields.retain(|(c, _)| *c != kc);
                tx.note_autokey(t, kc);
                fields.push((kc, Value::Integer(next_key(tx.db(), t, ix))));
            }
        }
        tx.stage(Payload::Record { table: t, fields })?;
        n += 1;
    }
    Ok(StatementResult::Affected(n))
}

fn next_key(db: &Database, table: Uid, index: Uid) -> num_bigint::BigInt {
    use crate::pbtree::Key;
    let last = db.data(table).and_then(|d| d.indexes.get(&index)).and_then(|t| t.last()).map(|b| b.key().clone());
    match last {
        Some(Key::Tuple(parts)) => match parts.first() {
            Some(Key::Num(d)) => d.trunc() + 1,
            _ => 1.into(),
        },
        _ => 1.into(),
    }
}

/// Bind `table` alone with a WHERE clause and review it with only the
/// columns in `needed` (by name) kept.
fn dml_plan(tx: &Transaction, table: &str, filter: Option<&Expr>, extra: &[&Expr]) -> Result<(Plan, Vec<BExpr>)> {
    let mut b = Binder::new(tx.db(), tx.user());
    let mut p = b.bind_from(&TableRef { name: table.to_string(), alias: None }, tx.role())?;
    let scope = Scope { cols: p.columns.clone(), parent: None };
    let extra = extra.iter().map(|e| b.bind_expr(e, &scope, tx.role(), None)).collect::<Result<Vec<_>>>()?;
    let mut need: BTreeSet<Uid> = extra.iter().flat_map(BExpr::refs).collect();
    if let Some(f) = filter {
        let predicate = b.bind_expr(f, &scope, tx.role(), None)?;
        need.extend(predicate.refs());
        let cols = p.columns.clone();
        p = Plan::new(Node::Filter { input: Box::new(p), predicate }, cols);
    }
    Ok((review_with_need(p, tx.db(), &need), extra))
}

/// Rows of a base table with their row uids: the named columns (all
/// when `columns` is `None`) of the rows satisfying `filter`.
pub fn select_rows(
    tx: &mut Transaction,
    table: &str,
    columns: Option<&[String]>,
    filter: Option<&Expr>,
) -> Result<(Vec<String>, Vec<(Uid, Vec<Value>)>)> {
    let t = resolve(tx.db(), tx.role(), table)?;
    if tx.db().require(t)?.kind() != ObjectKind::Table {
        return Err(Error::statement(format!("{table} is not a base table")));
    }
    let names: Vec<String> = match columns {
        Some(c) => c.to_vec(),
        None => tx.db().columns(t).into_iter().map(|(_, n)| n).collect(),
    };
    let exprs: Vec<Expr> = names.iter().map(|n| Expr::Column { qualifier: None, name: n.clone() }).collect();
    let refs: Vec<&Expr> = exprs.iter().collect();
    let (plan, values) = dml_plan(tx, table, filter, &refs)?;
    let uids = plan.uids();
    let mut exec = Exec::new(tx);
    let mut out = vec![];
    for (row, vals) in exec.scan_rows(&plan)? {
        let env = Env::new(&uids, &vals, None);
        out.push((row, values.iter().map(|e| exec.eval(e, &env)).collect::<Result<Vec<_>>>()?));
    }
    Ok((names, out))
}

fn update(tx: &mut Transaction, table: &str, assignments: &[(String, Expr)], filter: Option<&Expr>) -> Result<StatementResult> {
    let t = resolve(tx.db(), tx.role(), table)?;
    if tx.db().require(t)?.kind() == ObjectKind::RestView {
        return rest_update(tx, t, Some(assignments), filter);
    }
    let cols: Vec<String> = assignments.iter().map(|(c, _)| c.clone()).collect();
    let targets = column_uids(tx.db(), t, table, &cols)?;
    for c in &targets {
        require(tx, *c, Privileges::UPDATE, "UPDATE")?;
    }
    let exprs: Vec<&Expr> = assignments.iter().map(|(_, e)| e).collect();
    let (plan, values) = dml_plan(tx, table, filter, &exprs)?;
    let uids = plan.uids();
    let mut exec = Exec::new(tx);
    let rows = exec.scan_rows(&plan)?;
    let mut changes = vec![];
    for (row, vals) in &rows {
        let env = Env::new(&uids, vals, None);
        let mut fields = vec![];
        for (c, e) in targets.iter().zip(&values) {
            fields.push((*c, exec.eval(e, &env)?));
        }
        changes.push((*row, fields));
    }
    drop(exec);
    let n = changes.len();
    for (row, fields) in changes {
        tx.stage(Payload::Update { table: t, row, fields })?;
    }
    Ok(StatementResult::Affected(n))
}

fn delete(tx: &mut Transaction, table: &str, filter: Option<&Expr>) -> Result<StatementResult> {
    let t = resolve(tx.db(), tx.role(), table)?;
    if tx.db().require(t)?.kind() == ObjectKind::RestView {
        return rest_update(tx, t, None, filter);
    }
    require(tx, t, Privileges::DELETE, "DELETE")?;
    let (plan, _) = dml_plan(tx, table, filter, &[])?;
    let rows = Exec::new(tx).scan_rows(&plan)?;
    for (row, _) in &rows {
        tx.stage(Payload::Delete { table: t, row: *row })?;
    }
    Ok(StatementResult::Affected(rows.len()))
}

/// The contributor URL of a single-contributor RESTView, with credentials.
fn rest_target(db: &Database, view: Uid) -> Result<(String, Option<(String, String)>)> {
    let o = db.require(view)?;
    let url = o.meta_arg("URL").ok_or_else(|| Error::statement(format!("{} has no URL", o.name)))?;
    let creds = o.meta_arg("USER").map(|u| (u.to_string(), o.meta_arg("PASSWORD").unwrap_or_default().to_string()));
    Ok((url.to_string(), creds))
}

fn rest_insert(tx: &mut Transaction, view: Uid, columns: &[String], rows: &[Vec<Expr>]) -> Result<StatementResult> {
    require(tx, view, Privileges::INSERT, "INSERT")?;
    let obj = tx.db().require(view)?.clone();
    let Detail::RestView(def) = &obj.detail else { unreachable!("checked by caller") };
    let names: Vec<String> = if columns.is_empty() { def.columns.iter().map(|(n, _)| n.clone()).collect() } else { columns.to_vec() };
    let mut objects = vec![];
    let mut target: Option<String> = None;
    let using_names: Vec<(String, Uid)> = match def.using {
        Some(u) => {
            let cols = tx.db().table_def(u)?.columns.clone();
            cols[..cols.len().saturating_sub(1)].iter().map(|c| (tx.db().name_of(*c), *c)).collect()
        }
        None => vec![],
    };
    for row in rows {
        if row.len() != names.len() {
            return Err(Error::statement(format!("{} values for {} columns", row.len(), names.len())));
        }
        let mut obj_json = serde_json::Map::new();
        let mut using_vals = vec![];
        for (n, e) in names.iter().zip(row) {
            let (_, d) = def
                .columns
                .iter()
                .find(|(c, _)| c == n)
                .ok_or_else(|| Error::not_found(format!("column {n} in {}", obj.name)))?;
            let v = d.coerce(eval_const(tx, e)?)?;
            match using_names.iter().find(|(u, _)| u == n) {
                Some((_, c)) => using_vals.push((*c, v)),
                None => {
                    obj_json.insert(n.clone(), value_to_json(&v));
                }
            }
        }
        let url = match def.using {
            None => rest_target(tx.db(), view)?.0,
            Some(u) => contributor_for(tx, u, &using_vals)?,
        };
        if target.as_ref().is_some_and(|t| *t != url) {
            return Err(Error::SingleMaster(format!(
                "a transaction may update at most one remote server: {} and {url}",
                target.unwrap_or_default()
            )));
        }
        target = Some(url);
        objects.push(serde_json::Value::Object(obj_json));
    }
    let Some(url) = target else { return Ok(StatementResult::Affected(0)) };
    let body = if objects.len() == 1 { objects.remove(0) } else { serde_json::Value::Array(objects) };
    let n = rows.len();
    let mut req = RemoteRequest::new("POST", url.clone()).body(body.to_string());
    if let Some((u, p)) = rest_credentials(tx.db(), view) {
        req = req.basic_auth(&u, &p);
    }
    tx.stage_remote(RemoteWrite { contributor: url, request: req })?;
    Ok(StatementResult::Affected(n))
}

fn rest_credentials(db: &Database, view: Uid) -> Option<(String, String)> {
    let o = db.object(view)?;
    o.meta_arg("USER").map(|u| (u.to_string(), o.meta_arg("PASSWORD").unwrap_or_default().to_string()))
}

/// The contributor whose using-table row carries these column values.
fn contributor_for(tx: &mut Transaction, using: Uid, vals: &[(Uid, Value)]) -> Result<String> {
    let cols = tx.db().table_def(using)?.columns.clone();
    let url_col = *cols.last().expect("using table has columns");
    tx.note_read(using, &cols, crate::engine::RowsRead::All, tx.role())?;
    let hits: Vec<String> = tx
        .db()
        .rows(using)
        .filter(|r| vals.iter().all(|(c, v)| r.get(*c) == *v))
        .filter_map(|r| r.get(url_col).as_str().map(str::to_string))
        .collect();
    match hits.as_slice() {
        [one] => Ok(one.clone()),
        [] => Err(Error::not_found("no contributor matches the inserted values")),
        _ => Err(Error::SingleMaster("the inserted values match more than one contributor".into())),
    }
}

/// UPDATE (with assignments) or DELETE on a single-contributor RESTView:
/// read the matching rows and the rowset ETag, then queue one conditional
/// request carrying the same condition.
fn rest_update(
    tx: &mut Transaction,
    view: Uid,
    assignments: Option<&[(String, Expr)]>,
    filter: Option<&Expr>,
) -> Result<StatementResult> {
    let obj = tx.db().require(view)?.clone();
    let Detail::RestView(def) = &obj.detail else { unreachable!("checked by caller") };
    if def.using.is_some() {
        return Err(Error::NotImplemented(format!(
            "{} has several contributors; only INSERT is supported on such views",
            obj.name
        )));
    }
    let (action, verb) = match assignments {
        Some(_) => (Privileges::UPDATE, "UPDATE"),
        None => (Privileges::DELETE, "DELETE"),
    };
    require(tx, view, action, verb)?;
    let (url, creds) = rest_target(tx.db(), view)?;
    let mut b = Binder::new(tx.db(), tx.user());
    let p = b.bind_from(&TableRef { name: obj.name.clone(), alias: None }, tx.role())?;
    let Node::Rest(r) = &p.node else { unreachable!("RESTView binds to a remote rowset") };
    let names = r
        .view_cols
        .iter()
        .zip(&r.sources)
        .filter_map(|(u, s)| match s {
            RestSourceCol::Remote(n) => Some((*u, n.clone())),
            RestSourceCol::Using(_) => None,
        })
        .collect();
    let scope = Scope { cols: p.columns.clone(), parent: None };
    let condition = match filter {
        Some(f) => {
            let e = b.bind_expr(f, &scope, tx.role(), None)?;
            Some(to_remote_sql(&e, &names).ok_or_else(|| Error::statement("condition cannot be sent to the contributor"))?.to_string())
        }
        None => None,
    };
    let mut body = serde_json::Map::new();
    if let Some(assign) = assignments {
        for (c, e) in assign {
            let (_, d) = def
                .columns
                .iter()
                .find(|(n, _)| n == c)
                .ok_or_else(|| Error::not_found(format!("column {c} in {}", obj.name)))?;
            body.insert(c.clone(), value_to_json(&d.coerce(eval_const(tx, e)?)?));
        }
    }
    let client = tx.remote_client().cloned().unwrap_or_else(|| std::sync::Arc::new(crate::restsvc::HttpClient::default()));
    let target = match &condition {
        Some(c) => format!("{url}?where={}", encode_query(c)),
        None => url.clone(),
    };
    let mut get = RemoteRequest::new("GET", target.clone());
    if let Some((u, p)) = &creds {
        get = get.basic_auth(u, p);
    }
    let resp = client.send(&get).map_err(|e| Error::ContributorOffline { offline: vec![e.url], available: vec![] })?;
    if resp.status != 200 {
        return Err(Error::Remote(format!("{url} answered {}: {}", resp.status, resp.body.trim())));
    }
    let etag = resp.header("ETag").ok_or_else(|| Error::Remote(format!("{url} sent no ETag")))?.to_string();
    let rows: serde_json::Value =
        serde_json::from_str(&resp.body).map_err(|e| Error::Remote(format!("{url}: bad JSON: {e}")))?;
    let n = rows.as_array().map_or(0, Vec::len);
    if n == 0 {
        return Ok(StatementResult::Affected(0));
    }
    let method = if assignments.is_some() { "PUT" } else { "DELETE" };
    let mut req = RemoteRequest::new(method, target).header("If-Match", etag);
    if assignments.is_some() {
        req = req.body(serde_json::Value::Object(body).to_string());
    }
    if let Some((u, p)) = &creds {
        req = req.basic_auth(u, p);
    }
    tx.stage_remote(RemoteWrite { contributor: url, request: req })?;
    Ok(StatementResult::Affected(n))
}
