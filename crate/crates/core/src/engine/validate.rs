//! Commit-time validation: does anything committed since a transaction
//! began invalidate what it read or wrote?

use std::collections::HashSet;
use std::fmt;

use super::schema::{entry_key, key_of, Row};
use super::Transaction;
use crate::pbtree::{Key, PTree};
use crate::physlog::{Payload, Physical, Uid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Outcome {
    Ok,
    Conflict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ConflictReason {
    /// A non-row change to an object the transaction used.
    ObjectChanged,
    /// A column the transaction read was changed by a new or updated row.
    ColumnReadUpdated,
    /// A row the transaction read or wrote was updated or deleted.
    RowReadUpdated,
    /// The snapshot predates the retained commit history.
    SnapshotTooOld,
    /// The remote contributor rejected the single remote update because
    /// the data changed since it was read.
    RemotePrecondition,
}

impl fmt::Display for ConflictReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConflictReason::ObjectChanged => "object-changed",
            ConflictReason::ColumnReadUpdated => "column-read-updated",
            ConflictReason::RowReadUpdated => "row-read-updated",
            ConflictReason::SnapshotTooOld => "snapshot-too-old",
            ConflictReason::RemotePrecondition => "remote-precondition-failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ConflictReport {
    pub outcome: Outcome,
    pub object: Uid,
    pub reason: Option<ConflictReason>,
    /// Committed physical that caused the conflict.
    pub by: Uid,
}

impl ConflictReport {
    pub fn ok() -> Self {
        ConflictReport { outcome: Outcome::Ok, object: Uid::NONE, reason: None, by: Uid::NONE }
    }

    pub fn conflict(object: Uid, reason: ConflictReason, by: Uid) -> Self {
        ConflictReport { outcome: Outcome::Conflict, object, reason: Some(reason), by }
    }

    pub fn is_ok(&self) -> bool {
        self.outcome == Outcome::Ok
    }
}

impl fmt::Display for ConflictReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.reason {
            None => write!(f, "ok"),
            Some(r) => write!(f, "{r} on {:?} by {:?}", self.object, self.by),
        }
    }
}

/// Objects a schema-level physical changes. Row physicals change none.
pub fn changed_objects(p: &Payload) -> Vec<Uid> {
    match p {
        Payload::Column { table, .. } => vec![*table],
        Payload::Index { table, .. } => vec![*table],
        Payload::Grant { object, grantee, .. } => vec![*object, *grantee],
        Payload::Metadata { target, .. } | Payload::Drop { target } | Payload::Alter { target, .. } => vec![*target],
        _ => vec![],
    }
}

/// Check `tx` against the physicals committed after its snapshot.
pub fn validate(tx: &Transaction, committed: &[Physical]) -> ConflictReport {
    let reads = &tx.reads;
    let mut written: HashSet<(Uid, Uid)> = HashSet::new();
    let mut changed: HashSet<Uid> = HashSet::new();
    for p in &tx.staged {
        match &p.payload {
            Payload::Update { table, row, .. } | Payload::Delete { table, row } => {
                written.insert((*table, *row));
            }
            other => changed.extend(changed_objects(other)),
        }
    }
    for c in committed {
        match &c.payload {
            Payload::Transaction { .. } => {}
            Payload::Record { table, fields } => {
                let Some(r) = reads.table(*table) else { continue };
                if r.whole {
                    return ConflictReport::conflict(*table, ConflictReason::ColumnReadUpdated, c.pos);
                }
                if r.probes.is_empty() {
                    continue;
                }
                let row = Row { uid: c.pos, last_change: c.pos, fields: fields.iter().cloned().collect::<PTree<_, _>>() };
                for (ix, probe) in &r.probes {
                    let Ok(def) = tx.base.index_def(*ix) else {
                        return ConflictReport::conflict(*ix, ConflictReason::ObjectChanged, c.pos);
                    };
                    if let Some(k) = key_of(&row, &def.columns) {
                        if entry_key(def, k, row.uid).has_prefix(probe) || probe_matches(probe, &row, &def.columns) {
                            return ConflictReport::conflict(*table, ConflictReason::RowReadUpdated, c.pos);
                        }
                    }
                }
            }
            Payload::Update { table, row, fields } => {
                if written.contains(&(*table, *row)) {
                    return ConflictReport::conflict(*row, ConflictReason::RowReadUpdated, c.pos);
                }
                let Some(r) = reads.table(*table) else { continue };
                let touches_read = fields.iter().any(|(col, _)| r.columns.contains_key(col));
                if r.rows.contains_key(row) && touches_read {
                    return ConflictReport::conflict(*row, ConflictReason::RowReadUpdated, c.pos);
                }
                if r.whole && touches_read {
                    return ConflictReport::conflict(*table, ConflictReason::ColumnReadUpdated, c.pos);
                }
                for (ix, _) in &r.probes {
                    let hits = tx.base.index_def(*ix).map(|d| fields.iter().any(|(col, _)| d.columns.contains(col)));
                    if hits.unwrap_or(true) {
                        return ConflictReport::conflict(*row, ConflictReason::RowReadUpdated, c.pos);
                    }
                }
            }
            Payload::Delete { table, row } => {
                if written.contains(&(*table, *row)) {
                    return ConflictReport::conflict(*row, ConflictReason::RowReadUpdated, c.pos);
                }
                let Some(r) = reads.table(*table) else { continue };
                if r.rows.contains_key(row) {
                    return ConflictReport::conflict(*row, ConflictReason::RowReadUpdated, c.pos);
                }
                if r.whole {
                    return ConflictReport::conflict(*table, ConflictReason::ColumnReadUpdated, c.pos);
                }
            }
            other => {
                for o in changed_objects(other) {
                    if reads.objects.contains_key(&o) || changed.contains(&o) {
                        return ConflictReport::conflict(o, ConflictReason::ObjectChanged, c.pos);
                    }
                }
            }
        }
    }
    ConflictReport::ok()
}

/// Does a unique-index probe equal the row's key?
fn probe_matches(probe: &Key, row: &Row, columns: &[Uid]) -> bool {
    key_of(row, columns).is_some_and(|k| &k == probe)
}
