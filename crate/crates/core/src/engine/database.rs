use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::schema::*;
use crate::error::{Error, Result};
use crate::pbtree::{Key, PTree};
use crate::physlog::{AlterChange, Domain, IndexKind, Payload, Physical, Privileges, Uid, Value, LOG_START};

/// Who a physical is attributed to: the user and role of its transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Author {
    pub user: Uid,
    pub role: Uid,
}

/// An immutable database state. Cloning copies only tree roots.
#[derive(Clone, Debug)]
pub struct Database {
    pub name: String,
    pub objects: PTree<Uid, Arc<SchemaObject>>,
    pub tables: PTree<Uid, TableData>,
    /// Relation names per role: (role, name) to table/view uid.
    pub names: PTree<(Uid, String), Uid>,
    pub roles: PTree<String, Uid>,
    pub users: PTree<String, Uid>,
    /// Role usage granted to users: (user, role).
    pub user_roles: PTree<(Uid, Uid), ()>,
    /// Privileges held: (grantee, object) to actions.
    pub privileges: PTree<(Uid, Uid), Privileges>,
    /// First user defined: the database owner.
    pub owner: Uid,
    /// Role created with the database and named after it.
    pub default_role: Uid,
    /// File length that produced this state.
    pub watermark: u64,
}

impl Database {
    pub fn empty(name: impl Into<String>) -> Database {
        Database {
            name: name.into(),
            objects: PTree::new(),
            tables: PTree::new(),
            names: PTree::new(),
            roles: PTree::new(),
            users: PTree::new(),
            user_roles: PTree::new(),
            privileges: PTree::new(),
            owner: Uid::NONE,
            default_role: Uid::NONE,
            watermark: LOG_START,
        }
    }

    pub fn object(&self, uid: Uid) -> Option<&Arc<SchemaObject>> {
        self.objects.get(&uid)
    }

    pub fn require(&self, uid: Uid) -> Result<&Arc<SchemaObject>> {
        self.object(uid).ok_or_else(|| Error::not_found(format!("object {uid:?}")))
    }

    pub fn table_def(&self, uid: Uid) -> Result<&TableDef> {
        self.require(uid)?.table().ok_or_else(|| Error::not_found(format!("table {uid:?}")))
    }

    pub fn column_def(&self, uid: Uid) -> Result<&ColumnDef> {
        self.require(uid)?.column().ok_or_else(|| Error::not_found(format!("column {uid:?}")))
    }

    pub fn index_def(&self, uid: Uid) -> Result<&IndexDef> {
        self.require(uid)?.index().ok_or_else(|| Error::not_found(format!("index {uid:?}")))
    }

    pub fn name_of(&self, uid: Uid) -> String {
        if uid == Uid::PUBLIC {
            return "PUBLIC".into();
        }
        self.object(uid).map(|o| o.name.clone()).unwrap_or_else(|| format!("{uid:?}"))
    }

    pub fn data(&self, table: Uid) -> Option<&TableData> {
        self.tables.get(&table)
    }

    pub fn row(&self, table: Uid, row: Uid) -> Option<&Row> {
        self.tables.get(&table)?.rows.get(&row)
    }

    /// Column uid by name within a table.
    pub fn column_named(&self, table: Uid, name: &str) -> Option<Uid> {
        let t = self.table_def(table).ok()?;
        t.columns.iter().copied().find(|c| self.object(*c).is_some_and(|o| o.name == name))
    }

    /// Column uids and names of a table in order.
    pub fn columns(&self, table: Uid) -> Vec<(Uid, String)> {
        match self.table_def(table) {
            Ok(t) => t.columns.iter().map(|c| (*c, self.name_of(*c))).collect(),
            Err(_) => vec![],
        }
    }

    pub fn role_named(&self, name: &str) -> Option<Uid> {
        self.roles.get(name).copied()
    }

    pub fn user_named(&self, name: &str) -> Option<Uid> {
        self.users.get(name).copied()
    }

    /// Relation visible to `role` under `name`: the role's own namespace,
    /// then PUBLIC, then the database's default role.
    pub fn resolve(&self, role: Uid, name: &str) -> Option<Uid> {
        [role, Uid::PUBLIC, self.default_role]
            .iter()
            .find_map(|r| self.names.get(&(*r, name.to_string())).copied())
    }

    /// Unique index of a table covering exactly `columns`, primary first.
    pub fn unique_index_on(&self, table: Uid, columns: &[Uid]) -> Option<Uid> {
        let t = self.table_def(table).ok()?;
        let mut found = None;
        for ix in &t.indexes {
            let d = self.index_def(*ix).ok()?;
            if d.is_unique() && d.columns == columns {
                if d.kind == IndexKind::Primary {
                    return Some(*ix);
                }
                found.get_or_insert(*ix);
            }
        }
        found
    }

    /// Foreign-key indexes (in any table) whose referenced index belongs to
    /// `table`.
    pub fn referencing(&self, table: Uid) -> Vec<(Uid, Arc<SchemaObject>)> {
        let mut out = Vec::new();
        for (uid, obj) in self.objects.iter() {
            if let Some(IndexDef { kind: IndexKind::Foreign { refers, .. }, .. }) = obj.index() {
                if self.index_def(*refers).is_ok_and(|r| r.table == table) {
                    out.push((*uid, obj.clone()));
                }
            }
        }
        out
    }

    /// Apply one physical. `p.pos` becomes the uid of whatever it defines.
    pub fn install(&self, p: &Physical, by: Author) -> Result<Database> {
        let mut db = self.clone();
        let pos = p.pos;
        let new_obj = |name: &str, detail: Detail| SchemaObject {
            uid: pos,
            name: name.to_string(),
            owner: by.user,
            definer: by.role,
            schema_key: pos,
            metadata: vec![],
            detail,
        };
        match &p.payload {
            Payload::Transaction { .. } => {}
            Payload::Table { name } => {
                db.claim_name(by.role, name, pos)?;
                db.put(new_obj(name, Detail::Table(TableDef::default())));
                db.tables = db.tables.add(pos, TableData { last_change: pos, ..Default::default() });
            }
            Payload::Column { table, name, seq, domain, not_null } => {
                let dom = db.domain(*domain)?;
                if db.column_named(*table, name).is_some() {
                    return Err(Error::statement(format!("column {name} already exists")));
                }
                let mut t = (**db.require(*table)?).clone();
                let Detail::Table(def) = &mut t.detail else {
                    return Err(Error::not_found(format!("table {table:?}")));
                };
                let at = def
                    .columns
                    .iter()
                    .position(|c| db.column_def(*c).is_ok_and(|cd| cd.seq > *seq))
                    .unwrap_or(def.columns.len());
                def.columns.insert(at, pos);
                t.schema_key = pos;
                db.put(t);
                db.put(new_obj(
                    name,
                    Detail::Column(ColumnDef {
                        table: *table,
                        seq: *seq,
                        domain: dom,
                        domain_uid: *domain,
                        not_null: *not_null,
                    }),
                ));
            }
            Payload::Domain { domain } => {
                db.put(new_obj(&domain.to_string(), Detail::Domain(domain.clone())));
            }
            Payload::Index { table, columns, kind } => {
                let mut t = (**db.require(*table)?).clone();
                let tname = t.name.clone();
                let Detail::Table(def) = &mut t.detail else {
                    return Err(Error::not_found(format!("table {table:?}")));
                };
                for c in columns {
                    if !def.columns.contains(c) {
                        return Err(Error::not_found(format!("column {c:?} of {tname}")));
                    }
                }
                if let IndexKind::Foreign { refers, .. } = kind {
                    let r = self.index_def(*refers)?;
                    if !r.is_unique() || r.columns.len() != columns.len() {
                        return Err(Error::statement("foreign key must reference a primary or unique key"));
                    }
                }
                if *kind == IndexKind::Primary {
                    if def.primary.is_some() {
                        return Err(Error::statement(format!("table {tname} already has a primary key")));
                    }
                    def.primary = Some(pos);
                }
                def.indexes.push(pos);
                t.schema_key = pos;
                db.put(t);
                let label = match kind {
                    IndexKind::Primary => "PRIMARY",
                    IndexKind::Unique => "UNIQUE",
                    IndexKind::Foreign { .. } => "FOREIGN",
                };
                let idef = IndexDef { table: *table, columns: columns.clone(), kind: kind.clone() };
                let name = format!("{label}_{tname}_{}", pos.0);
                // build the index over existing rows
                let mut data = db.tables.get(table).cloned().unwrap_or_default();
                let mut tree = PTree::new();
                for (ruid, row) in data.rows.iter() {
                    if let Some(k) = key_of(row, columns) {
                        let ek = entry_key(&idef, k, *ruid);
                        if idef.is_unique() && tree.contains_key(&ek) {
                            return Err(Error::Constraint {
                                constraint: name,
                                row: format!("{ruid:?}"),
                                message: "duplicate key in existing rows".into(),
                            });
                        }
                        tree = tree.add(ek, *ruid);
                    } else if *kind == IndexKind::Primary {
                        return Err(Error::Constraint {
                            constraint: name,
                            row: format!("{ruid:?}"),
                            message: "primary key column is null".into(),
                        });
                    }
                }
                data.indexes = data.indexes.add(pos, tree);
                db.tables = db.tables.add(*table, data);
                db.put(new_obj(&name, Detail::Index(idef)));
            }
            Payload::Record { table, fields } => {
                let row = Row {
                    uid: pos,
                    last_change: pos,
                    fields: db.checked_fields(*table, PTree::new(), fields)?,
                };
                db.put_row(*table, None, Some(row), pos)?;
            }
            Payload::Update { table, row, fields } => {
                let old = db.row(*table, *row).cloned().ok_or_else(|| Error::not_found(format!("row {row:?}")))?;
                let new = Row {
                    uid: *row,
                    last_change: pos,
                    fields: db.checked_fields(*table, old.fields.clone(), fields)?,
                };
                db.put_row(*table, Some(old), Some(new), pos)?;
            }
            Payload::Delete { table, row } => {
                let old = db.row(*table, *row).cloned().ok_or_else(|| Error::not_found(format!("row {row:?}")))?;
                db.put_row(*table, Some(old), None, pos)?;
            }
            Payload::View { name, columns, source } => {
                db.claim_name(by.role, name, pos)?;
                db.put(new_obj(name, Detail::View(ViewDef { columns: columns.clone(), source: source.clone() })));
            }
            Payload::RestView { name, columns, using, url } => {
                let mut cols = Vec::new();
                for (c, d) in columns {
                    cols.push((c.clone(), db.domain(*d)?));
                }
                if let Some(u) = using {
                    db.table_def(*u)?;
                }
                db.claim_name(by.role, name, pos)?;
                let mut obj = new_obj(name, Detail::RestView(RestViewDef { columns: cols, using: *using }));
                if let Some(u) = url {
                    obj.metadata.push(crate::physlog::MetaItem::with_arg("URL", u.clone()));
                }
                db.put(obj);
            }
            Payload::Role { name } => {
                if db.roles.contains_key(name.as_str()) {
                    return Err(Error::statement(format!("role {name} already exists")));
                }
                db.roles = db.roles.add(name.clone(), pos);
                if db.default_role == Uid::NONE {
                    db.default_role = pos;
                }
                db.put(new_obj(name, Detail::Role));
            }
            Payload::User { name, password } => {
                if db.users.contains_key(name.as_str()) {
                    return Err(Error::statement(format!("user {name} already exists")));
                }
                db.users = db.users.add(name.clone(), pos);
                if db.owner == Uid::NONE {
                    db.owner = pos;
                }
                db.put(new_obj(name, Detail::User { password: password.clone() }));
            }
            Payload::Grant { privileges, object, grantee, revoke } => {
                let target = db.require(*object)?.clone();
                if *grantee != Uid::PUBLIC {
                    db.require(*grantee)?;
                }
                if target.kind() == ObjectKind::Role {
                    let k = (*grantee, *object);
                    db.user_roles = if *revoke { db.user_roles.remove(&k) } else { db.user_roles.add(k, ()) };
                } else {
                    let k = (*grantee, *object);
                    let had = db.privileges.get(&k).copied().unwrap_or_default();
                    let now = if *revoke { had.minus(*privileges) } else { had.union(*privileges) };
                    db.privileges = if now.is_empty() { db.privileges.remove(&k) } else { db.privileges.add(k, now) };
                    let relation = matches!(target.kind(), ObjectKind::Table | ObjectKind::View | ObjectKind::RestView);
                    let grantee_is_role = *grantee == Uid::PUBLIC
                        || db.object(*grantee).is_some_and(|g| g.kind() == ObjectKind::Role);
                    let nk = (*grantee, target.name.clone());
                    if !*revoke && relation && grantee_is_role && !db.names.contains_key(&nk) {
                        db.names = db.names.add(nk, *object);
                    }
                }
            }
            Payload::Metadata { target, items } => {
                let mut o = (**db.require(*target)?).clone();
                for m in items {
                    o.metadata.retain(|x| !x.word.eq_ignore_ascii_case(&m.word));
                    o.metadata.push(m.clone());
                }
                o.schema_key = pos;
                db.put(o);
            }
            Payload::Drop { target } => db.drop_object(*target)?,
            Payload::Alter { target, change } => {
                let mut o = (**db.require(*target)?).clone();
                match change {
                    AlterChange::Rename(n) => {
                        let old: Vec<(Uid, String)> =
                            db.names.iter().filter(|(_, u)| **u == *target).map(|(k, _)| k.clone()).collect();
                        for k in old {
                            db.names = db.names.remove(&k);
                            db.claim_name(k.0, n, *target)?;
                        }
                        o.name = n.clone();
                    }
                    AlterChange::AddCheck { name, source } => match &mut o.detail {
                        Detail::Table(t) => t.checks.push(CheckDef {
                            name: name.clone(),
                            source: source.clone(),
                            definer: by.role,
                            pos,
                        }),
                        _ => return Err(Error::statement("CHECK applies to tables only")),
                    },
                    AlterChange::ViewSource(s) => match &mut o.detail {
                        Detail::View(v) => v.source = s.clone(),
                        _ => return Err(Error::statement("not a view")),
                    },
                }
                o.schema_key = pos;
                if let Detail::Column(c) = &o.detail {
                    let t = c.table;
                    let mut to = (**db.require(t)?).clone();
                    to.schema_key = pos;
                    db.put(to);
                }
                db.put(o);
            }
        }
        Ok(db)
    }

    fn put(&mut self, o: SchemaObject) {
        self.objects = self.objects.add(o.uid, Arc::new(o));
    }

    fn claim_name(&mut self, role: Uid, name: &str, uid: Uid) -> Result<()> {
        let k = (role, name.to_string());
        if self.names.contains_key(&k) {
            return Err(Error::statement(format!("{name} already exists")));
        }
        self.names = self.names.add(k, uid);
        Ok(())
    }

    fn domain(&self, uid: Uid) -> Result<Domain> {
        if let Some(d) = Domain::from_builtin(uid) {
            return Ok(d);
        }
        match &self.require(uid)?.detail {
            Detail::Domain(d) => Ok(d.clone()),
            _ => Err(Error::not_found(format!("domain {uid:?}"))),
        }
    }

    fn checked_fields(&self, table: Uid, mut fields: PTree<Uid, Value>, new: &[(Uid, Value)]) -> Result<PTree<Uid, Value>> {
        let t = self.table_def(table)?;
        for (c, v) in new {
            if !t.columns.contains(c) {
                return Err(Error::not_found(format!("column {c:?} in {}", self.name_of(table))));
            }
            let cd = self.column_def(*c)?;
            let v = cd.domain.coerce(v.clone())?;
            fields = if v.is_null() { fields.remove(c) } else { fields.add(*c, v) };
        }
        Ok(fields)
    }

    /// Replace `old` by `new` in a table and its indexes.
    fn put_row(&mut self, table: Uid, old: Option<Row>, new: Option<Row>, pos: Uid) -> Result<()> {
        let t = self.table_def(table)?.clone();
        let mut data = self.tables.get(&table).cloned().unwrap_or_default();
        for ix in &t.indexes {
            let def = self.index_def(*ix)?;
            let mut tree = data.indexes.get(ix).cloned().unwrap_or_default();
            if let Some(o) = &old {
                if let Some(k) = key_of(o, &def.columns) {
                    tree = tree.remove(&entry_key(def, k, o.uid));
                }
            }
            if let Some(n) = &new {
                match key_of(n, &def.columns) {
                    Some(k) => {
                        let ek = entry_key(def, k, n.uid);
                        if def.is_unique() && tree.get(&ek).is_some_and(|r| *r != n.uid) {
                            let obj = self.require(*ix)?;
                            return Err(Error::Constraint {
                                constraint: obj.name.clone(),
                                row: format!("{:?}", n.uid),
                                message: format!("duplicate key {ek} in {}", self.name_of(table)),
                            });
                        }
                        tree = tree.add(ek, n.uid);
                    }
                    None if def.kind == IndexKind::Primary => {
                        return Err(Error::Constraint {
                            constraint: self.require(*ix)?.name.clone(),
                            row: format!("{:?}", n.uid),
                            message: "primary key column is null".into(),
                        });
                    }
                    None => {}
                }
            }
            data.indexes = data.indexes.add(*ix, tree);
        }
        data.rows = match (&old, new) {
            (_, Some(n)) => data.rows.add(n.uid, n),
            (Some(o), None) => data.rows.remove(&o.uid),
            (None, None) => data.rows,
        };
        data.last_change = pos;
        self.tables = self.tables.add(table, data);
        Ok(())
    }

    fn drop_object(&mut self, target: Uid) -> Result<()> {
        let obj = self.require(target)?.clone();
        match &obj.detail {
            Detail::Table(t) => {
                if !self.referencing(target).iter().all(|(_, ix)| ix.index().is_some_and(|d| d.table == target)) {
                    return Err(Error::statement(format!("{} is referenced by a foreign key", obj.name)));
                }
                for c in t.columns.iter().chain(&t.indexes) {
                    self.objects = self.objects.remove(c);
                }
                self.tables = self.tables.remove(&target);
            }
            Detail::Column(c) => {
                let mut to = (**self.require(c.table)?).clone();
                if let Detail::Table(t) = &mut to.detail {
                    let used = t
                        .indexes
                        .iter()
                        .any(|ix| self.index_def(*ix).is_ok_and(|d| d.columns.contains(&target)));
                    if used {
                        return Err(Error::statement(format!("column {} is used by an index", obj.name)));
                    }
                    t.columns.retain(|x| *x != target);
                }
                self.put(to);
            }
            Detail::Index(d) => {
                if d.is_unique() && !self.referencing(d.table).iter().all(|(_, ix)| {
                    !matches!(ix.index().map(|i| &i.kind), Some(IndexKind::Foreign { refers, .. }) if *refers == target)
                }) {
                    return Err(Error::statement("index is referenced by a foreign key"));
                }
                let mut to = (**self.require(d.table)?).clone();
                if let Detail::Table(t) = &mut to.detail {
                    t.indexes.retain(|x| *x != target);
                    if t.primary == Some(target) {
                        t.primary = None;
                    }
                }
                self.put(to);
                if let Some(mut data) = self.tables.get(&d.table).cloned() {
                    data.indexes = data.indexes.remove(&target);
                    self.tables = self.tables.add(d.table, data);
                }
            }
            Detail::Role => {
                self.roles = self.roles.remove(obj.name.as_str());
            }
            Detail::User { .. } => {
                self.users = self.users.remove(obj.name.as_str());
            }
            Detail::View(_) | Detail::RestView(_) | Detail::Domain(_) => {}
        }
        let names: Vec<(Uid, String)> = self.names.iter().filter(|(_, u)| **u == target).map(|(k, _)| k.clone()).collect();
        for k in names {
            self.names = self.names.remove(&k);
        }
        let privs: Vec<(Uid, Uid)> =
            self.privileges.keys().filter(|(g, o)| *o == target || *g == target).cloned().collect();
        for k in privs {
            self.privileges = self.privileges.remove(&k);
        }
        let usage: Vec<(Uid, Uid)> =
            self.user_roles.keys().filter(|(u, r)| *u == target || *r == target).cloned().collect();
        for k in usage {
            self.user_roles = self.user_roles.remove(&k);
        }
        self.objects = self.objects.remove(&target);
        Ok(())
    }

    /// Install every physical of a committed transaction.
    pub fn install_all(&self, physicals: &[Physical], by: Author) -> Result<Database> {
        let mut db = self.clone();
        for p in physicals {
            db = db.install(p, by)?;
        }
        Ok(db)
    }

    /// Hash of the observable state: schema, rows, names and grants. Log
    /// timestamps are not part of the state.
    pub fn state_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        let mut feed = |s: String| {
            h.update((s.len() as u64).to_le_bytes());
            h.update(s.as_bytes());
        };
        feed(format!("{}|{:?}|{:?}|{}", self.name, self.owner, self.default_role, self.watermark));
        for (u, o) in self.objects.iter() {
            feed(format!("{u:?}={o:?}"));
        }
        for (t, d) in self.tables.iter() {
            feed(format!("T{t:?}@{:?}", d.last_change));
            for (r, row) in d.rows.iter() {
                let fields: Vec<String> = row.fields.iter().map(|(c, v)| format!("{c:?}:{v:?}")).collect();
                feed(format!("R{r:?}@{:?}[{}]", row.last_change, fields.join(",")));
            }
            for (ix, tree) in d.indexes.iter() {
                let entries: Vec<String> = tree.iter().map(|(k, r)| format!("{k}>{r:?}")).collect();
                feed(format!("I{ix:?}[{}]", entries.join(",")));
            }
        }
        for (k, v) in self.names.iter() {
            feed(format!("N{k:?}={v:?}"));
        }
        for (k, v) in self.roles.iter() {
            feed(format!("O{k}={v:?}"));
        }
        for (k, v) in self.users.iter() {
            feed(format!("U{k}={v:?}"));
        }
        for (k, _) in self.user_roles.iter() {
            feed(format!("G{k:?}"));
        }
        for (k, v) in self.privileges.iter() {
            feed(format!("P{k:?}={v:?}"));
        }
        h.finalize().into()
    }

    pub fn state_hash_hex(&self) -> String {
        self.state_hash().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Rows of a table in uid order.
    pub fn rows(&self, table: Uid) -> impl Iterator<Item = &Row> {
        self.tables.get(&table).into_iter().flat_map(|d| d.rows.values())
    }

    /// Row found through a unique index.
    pub fn seek_unique(&self, index: Uid, key: &Key) -> Option<Uid> {
        let def = self.index_def(index).ok()?;
        self.tables.get(&def.table)?.indexes.get(&index)?.get(key).copied()
    }
}
