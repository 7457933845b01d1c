//! Constraint enforcement at commit: referential actions generate further
//! physicals, then every touched row is checked against the final state.

use std::collections::HashSet;

use super::database::Database;
use super::schema::{key_of, IndexDef};
use super::Transaction;
use crate::error::{Error, Result};
use crate::physlog::{FkAction, IndexKind, Payload, Uid, Value};

/// Upper bound on physicals a single commit may generate by cascading.
const CASCADE_LIMIT: usize = 1 << 20;

/// Apply `tx`'s staged physicals to `current`, appending the Delete and
/// Update physicals demanded by CASCADE and SET NULL actions to `tx`, and
/// check primary, unique, foreign key, NOT NULL and CHECK constraints.
/// Returns the resulting state (with temporary uids). On error `tx` is
/// left as it was.
pub fn enforce_constraints(tx: &mut Transaction, current: &Database) -> Result<Database> {
    let before = tx.staged.len();
    let r = enforce(tx, current);
    if r.is_err() {
        tx.staged.truncate(before);
    }
    r
}

fn enforce(tx: &mut Transaction, current: &Database) -> Result<Database> {
    let author = tx.author();
    let mut cand = current.clone();
    let mut touched: Vec<(Uid, Uid)> = Vec::new();
    let mut deleting: HashSet<(Uid, Uid)> = HashSet::new();
    let mut i = 0;
    while i < tx.staged.len() {
        if i > CASCADE_LIMIT {
            return Err(Error::statement("referential actions do not terminate"));
        }
        let p = tx.staged[i].clone();
        let pre = cand.clone();
        cand = cand.install(&p, author)?;
        match &p.payload {
            Payload::Record { table, .. } => touched.push((*table, p.pos)),
            Payload::Update { table, row, .. } => {
                touched.push((*table, *row));
                for g in parent_actions(&pre, &cand, *table, *row, false, &deleting)? {
                    tx.push_generated(g);
                }
            }
            Payload::Delete { table, row } => {
                deleting.insert((*table, *row));
                for g in parent_actions(&pre, &cand, *table, *row, true, &deleting)? {
                    if let Payload::Delete { table, row } = &g {
                        deleting.insert((*table, *row));
                    }
                    tx.push_generated(g);
                }
            }
            Payload::Index { table, .. } | Payload::Alter { target: table, .. } | Payload::Column { table, .. } => {
                if cand.table_def(*table).is_ok() {
                    touched.extend(cand.rows(*table).map(|r| (*table, r.uid)));
                }
            }
            _ => {}
        }
        i += 1;
    }
    let mut seen = HashSet::new();
    for (table, row) in touched {
        if seen.insert((table, row)) {
            check_row(&cand, table, row)?;
        }
    }
    Ok(cand)
}

/// Referential actions for changing or deleting a row that other tables
/// may reference.
fn parent_actions(
    pre: &Database,
    cand: &Database,
    table: Uid,
    row: Uid,
    deleted: bool,
    deleting: &HashSet<(Uid, Uid)>,
) -> Result<Vec<Payload>> {
    let mut out = Vec::new();
    let Some(old) = pre.row(table, row) else { return Ok(out) };
    let new = cand.row(table, row);
    for (fk, fk_obj) in cand.referencing(table) {
        let Some(IndexDef { table: child_table, columns, kind: IndexKind::Foreign { refers, on_delete, on_update } }) =
            fk_obj.index()
        else {
            continue;
        };
        let refdef = cand.index_def(*refers)?;
        let Some(old_key) = key_of(old, &refdef.columns) else { continue };
        let new_key = new.and_then(|n| key_of(n, &refdef.columns));
        if !deleted && new_key.as_ref() == Some(&old_key) {
            continue;
        }
        if cand.seek_unique(*refers, &old_key).is_some() {
            continue;
        }
        let Some(data) = cand.data(*child_table) else { continue };
        let Some(ix) = data.indexes.get(&fk) else { continue };
        let children: Vec<Uid> = ix
            .prefix_iter(&old_key)
            .map(|(_, r)| r)
            .filter(|r| !deleting.contains(&(*child_table, *r)))
            .collect();
        let action = if deleted { *on_delete } else { *on_update };
        for child in children {
            match action {
                FkAction::Restrict => {
                    return Err(Error::Constraint {
                        constraint: fk_obj.name.clone(),
                        row: format!("{child:?}"),
                        message: format!(
                            "row of {} still references {} key {old_key}",
                            cand.name_of(*child_table),
                            cand.name_of(table)
                        ),
                    })
                }
                FkAction::Cascade if deleted => out.push(Payload::Delete { table: *child_table, row: child }),
                FkAction::Cascade => {
                    let n = new.expect("updated row exists");
                    let fields = columns.iter().zip(&refdef.columns).map(|(c, p)| (*c, n.get(*p))).collect();
                    out.push(Payload::Update { table: *child_table, row: child, fields });
                }
                FkAction::SetNull => {
                    let fields = columns.iter().map(|c| (*c, Value::Null)).collect();
                    out.push(Payload::Update { table: *child_table, row: child, fields });
                }
            }
        }
    }
    Ok(out)
}

/// NOT NULL, foreign key existence and CHECK constraints for one row of
/// the final state. Rows no longer present are skipped.
fn check_row(db: &Database, table: Uid, row: Uid) -> Result<()> {
    let Some(r) = db.row(table, row) else { return Ok(()) };
    let def = db.table_def(table)?;
    let tname = db.name_of(table);
    for c in &def.columns {
        let cd = db.column_def(*c)?;
        if cd.not_null && r.get(*c).is_null() {
            return Err(Error::Constraint {
                constraint: format!("NOT NULL {tname}.{}", db.name_of(*c)),
                row: format!("{row:?}"),
                message: "null value".into(),
            });
        }
    }
    for ix in &def.indexes {
        let obj = db.require(*ix)?;
        let Some(IndexDef { columns, kind: IndexKind::Foreign { refers, .. }, .. }) = obj.index() else {
            continue;
        };
        if let Some(k) = key_of(r, columns) {
            if db.seek_unique(*refers, &k).is_none() {
                let target = db.index_def(*refers).map(|d| db.name_of(d.table)).unwrap_or_default();
                return Err(Error::Constraint {
                    constraint: obj.name.clone(),
                    row: format!("{row:?}"),
                    message: format!("key {k} not found in {target}"),
                });
            }
        }
    }
    for check in &def.checks {
        if !crate::sqlfront::check_holds(db, table, r, &check.source, check.definer)? {
            return Err(Error::Constraint {
                constraint: check.name.clone(),
                row: format!("{row:?}"),
                message: format!("CHECK ({}) is false", check.source),
            });
        }
    }
    Ok(())
}
