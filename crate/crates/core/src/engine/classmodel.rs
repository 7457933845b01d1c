//! Language-neutral class models for the versioned client.

use serde::{Deserialize, Serialize};

use super::schema::IndexDef;
use super::security::check_privilege;
use super::Database;
use crate::error::{Error, Result};
use crate::physlog::{Domain, FkAction, IndexKind, Privileges, Uid};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassModel {
    pub database: String,
    pub role: String,
    pub table: String,
    pub defining_pos: i64,
    pub schema_key: i64,
    pub fields: Vec<FieldModel>,
    pub primary_key: Vec<String>,
    pub unique: Vec<Vec<String>>,
    pub foreign_keys: Vec<ForeignKeyModel>,
    pub navigation: Vec<Navigation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldModel {
    pub name: String,
    /// Broad type: Integer, Decimal, Real, String, Boolean or Date.
    pub type_name: String,
    /// Full domain, e.g. `NUMERIC(6,2)`.
    pub domain: String,
    pub key: bool,
    pub autokey: bool,
    pub not_null: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKeyModel {
    pub columns: Vec<String>,
    pub references: String,
    pub on_delete: String,
    pub on_update: String,
}

/// A navigation link. The related records are those of `target` whose
/// `remote` fields equal this record's `local` fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Navigation {
    pub name: String,
    pub target: String,
    pub local: Vec<String>,
    pub remote: Vec<String>,
    /// To-many (the target references this table) or to-one.
    pub many: bool,
}

impl Navigation {
    /// Short form such as `orders via CUST`.
    pub fn describe(&self) -> String {
        format!("{} via {}", self.name, self.remote.join(","))
    }
}

impl ClassModel {
    pub fn field(&self, name: &str) -> Option<&FieldModel> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn navigation(&self, name: &str) -> Option<&Navigation> {
        self.navigation.iter().find(|n| n.name == name)
    }
}

fn action_name(a: FkAction) -> String {
    match a {
        FkAction::Cascade => "CASCADE",
        FkAction::Restrict => "RESTRICT",
        FkAction::SetNull => "SET NULL",
    }
    .into()
}

fn names(db: &Database, cols: &[Uid]) -> Vec<String> {
    cols.iter().map(|c| db.name_of(*c)).collect()
}

/// Describe `table` as seen by `role`.
pub fn generate_class_model(db: &Database, user: Uid, role: Uid, table: &str) -> Result<ClassModel> {
    let uid = db.resolve(role, table).ok_or_else(|| Error::not_found(format!("table {table}")))?;
    let obj = db.require(uid)?;
    let def = obj.table().ok_or_else(|| Error::not_found(format!("table {table}")))?;
    if !check_privilege(db, user, role, uid, Privileges::SELECT) {
        return Err(Error::auth(format!("no SELECT privilege on {table}")));
    }
    let mut primary = vec![];
    let mut unique = vec![];
    let mut foreign = vec![];
    let mut navigation = vec![];
    for ix in &def.indexes {
        let d = db.index_def(*ix)?;
        match &d.kind {
            IndexKind::Primary => primary = d.columns.clone(),
            IndexKind::Unique => unique.push(names(db, &d.columns)),
            IndexKind::Foreign { refers, on_delete, on_update } => {
                let r = db.index_def(*refers)?;
                let target = db.name_of(r.table);
                foreign.push(ForeignKeyModel {
                    columns: names(db, &d.columns),
                    references: target.clone(),
                    on_delete: action_name(*on_delete),
                    on_update: action_name(*on_update),
                });
                navigation.push(Navigation {
                    name: target.to_lowercase(),
                    target,
                    local: names(db, &d.columns),
                    remote: names(db, &r.columns),
                    many: false,
                });
            }
        }
    }
    for (_, fk) in db.referencing(uid) {
        let Some(IndexDef { table: child, columns, kind: IndexKind::Foreign { refers, .. } }) = fk.index() else {
            continue;
        };
        let r = db.index_def(*refers)?;
        let target = db.name_of(*child);
        navigation.push(Navigation {
            name: format!("{}s", target.to_lowercase()),
            target,
            local: names(db, &r.columns),
            remote: names(db, columns),
            many: true,
        });
    }
    let single_int_key = primary.len() == 1;
    let fields = def
        .columns
        .iter()
        .map(|c| {
            let cd = db.column_def(*c)?;
            let key = primary.contains(c);
            Ok(FieldModel {
                name: db.name_of(*c),
                type_name: cd.domain.type_name().into(),
                domain: cd.domain.to_string(),
                key,
                autokey: key && single_int_key && cd.domain == Domain::Integer,
                not_null: cd.not_null || key,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassModel {
        database: db.name.clone(),
        role: db.name_of(role),
        table: obj.name.clone(),
        defining_pos: uid.0,
        schema_key: obj.schema_key.0,
        fields,
        primary_key: names(db, &primary),
        unique,
        foreign_keys: foreign,
        navigation,
    })
}
