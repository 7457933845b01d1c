//! Snapshots, transactions and the commit path.
//!
//! A [`Database`] is an immutable value; a [`Transaction`] copies its root,
//! stages physicals under temporary uids and records what it reads. Commit
//! holds one lock per database while it validates against the physicals
//! committed since the snapshot, enforces constraints, relocates, appends
//! and publishes the new snapshot.

mod classmodel;
mod constraints;
mod database;
mod handle;
mod schema;
mod security;
mod transaction;
mod validate;

pub use classmodel::{generate_class_model, ClassModel, FieldModel, ForeignKeyModel, Navigation};
pub use constraints::enforce_constraints;
pub use database::{Author, Database};
pub use handle::{replay, CommitInfo, Engine, RING_CAPACITY};
pub use schema::{
    entry_key, key_of, key_of_values, CheckDef, ColumnDef, Detail, IndexDef, ObjectKind, RestViewDef, Row,
    SchemaObject, TableDef, TableData, ViewDef,
};
pub use security::{check_privilege, default_role_for, may_use_role, password_hash, privilege_named};
pub use transaction::{begin_tx, ReadSet, RemoteWrite, RowsRead, TableReads, Transaction};
pub use validate::{changed_objects, validate, ConflictReason, ConflictReport, Outcome};
