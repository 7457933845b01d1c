use std::collections::BTreeMap;
use std::sync::Arc;

use super::database::{Author, Database};
use super::security::{check_privilege, may_use_role};
use super::schema::ObjectKind;
use crate::error::{Error, Result};
use crate::pbtree::{Key, PTree};
use crate::physlog::{Payload, Physical, Privileges, Uid};
use crate::restsvc::{RemoteClient, RemoteRequest};

/// What a transaction has read from one table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableReads {
    pub columns: PTree<Uid, ()>,
    pub rows: PTree<Uid, ()>,
    /// Every row was read, including rows that did not exist.
    pub whole: bool,
    /// Index lookups: (index, key prefix) sought.
    pub probes: Vec<(Uid, Key)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReadSet {
    pub tables: BTreeMap<Uid, TableReads>,
    /// Schema objects the transaction depended on.
    pub objects: PTree<Uid, ()>,
}

impl ReadSet {
    pub fn table(&self, t: Uid) -> Option<&TableReads> {
        self.tables.get(&t)
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty() && self.objects.is_empty()
    }
}

/// Which rows a read covered.
#[derive(Debug, Clone, Copy)]
pub enum RowsRead<'a> {
    All,
    Some(&'a [Uid]),
}

/// A write to a remote contributor, performed during commit.
#[derive(Debug, Clone)]
pub struct RemoteWrite {
    /// Base URL identifying the contributor.
    pub contributor: String,
    pub request: RemoteRequest,
}

/// A transaction: a snapshot plus staged physicals with temporary uids.
/// `db` is the snapshot with the staged physicals installed, so the
/// transaction reads its own writes.
#[derive(Clone)]
pub struct Transaction {
    pub(crate) base: Database,
    pub(crate) db: Database,
    pub(crate) staged: Vec<Physical>,
    pub(crate) reads: ReadSet,
    next_temp: i64,
    next_heap: i64,
    pub(crate) user: Uid,
    pub(crate) role: Uid,
    pub(crate) remote: Option<Arc<dyn RemoteClient>>,
    pub(crate) remote_writes: Vec<RemoteWrite>,
}

impl std::fmt::Debug for Transaction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transaction")
            .field("base", &self.base.watermark)
            .field("staged", &self.staged)
            .field("reads", &self.reads)
            .field("user", &self.user)
            .field("role", &self.role)
            .finish()
    }
}

/// Start a transaction on `db` for `user` acting in `role`.
pub fn begin_tx(db: &Database, user: Uid, role: Uid) -> Result<Transaction> {
    if db.object(user).map(|o| o.kind()) != Some(ObjectKind::User) {
        return Err(Error::auth(format!("unknown user {user:?}")));
    }
    if !may_use_role(db, user, role) {
        return Err(Error::auth(format!(
            "user {} has not been granted role {}",
            db.name_of(user),
            db.name_of(role)
        )));
    }
    Ok(Transaction {
        base: db.clone(),
        db: db.clone(),
        staged: Vec::new(),
        reads: ReadSet::default(),
        next_temp: 0,
        next_heap: 0,
        user,
        role,
        remote: None,
        remote_writes: Vec::new(),
    })
}

impl Transaction {
    pub fn base(&self) -> &Database {
        &self.base
    }

    /// The snapshot as this transaction sees it.
    pub fn db(&self) -> &Database {
        &self.db
    }

    pub fn staged(&self) -> &[Physical] {
        &self.staged
    }

    pub fn reads(&self) -> &ReadSet {
        &self.reads
    }

    pub fn user(&self) -> Uid {
        self.user
    }

    pub fn role(&self) -> Uid {
        self.role
    }

    pub fn author(&self) -> Author {
        Author { user: self.user, role: self.role }
    }

    pub fn is_read_only(&self) -> bool {
        self.staged.is_empty() && self.remote_writes.is_empty()
    }

    pub fn remote_writes(&self) -> &[RemoteWrite] {
        &self.remote_writes
    }

    pub fn remote_client(&self) -> Option<&Arc<dyn RemoteClient>> {
        self.remote.as_ref()
    }

    pub fn set_remote_client(&mut self, client: Arc<dyn RemoteClient>) {
        self.remote = Some(client);
    }

    /// Switch the declared role. A transaction has one role, so this is
    /// refused once anything is staged.
    pub fn set_role(&mut self, role: Uid) -> Result<()> {
        if !self.staged.is_empty() || !self.remote_writes.is_empty() {
            return Err(Error::statement("cannot change role in a transaction with changes"));
        }
        if !may_use_role(&self.db, self.user, role) {
            return Err(Error::auth(format!("role {} has not been granted", self.db.name_of(role))));
        }
        self.role = role;
        Ok(())
    }

    /// Fresh uid in the heap range, for query instancing.
    pub fn heap_uid(&mut self) -> Uid {
        self.next_heap += 1;
        Uid::heap(self.next_heap)
    }

    /// Stage a physical under a fresh temporary uid and install it into the
    /// transaction's view. Nothing is staged if installation fails.
    pub fn stage(&mut self, payload: Payload) -> Result<Uid> {
        if matches!(payload, Payload::Transaction { .. }) {
            return Err(Error::statement("transaction headers are written by commit"));
        }
        let pos = Uid::temp(self.next_temp);
        let p = Physical::new(pos, payload);
        self.db = self.db.install(&p, self.author())?;
        self.next_temp += 1;
        self.staged.push(p);
        Ok(pos)
    }

    /// Record a read of `columns` over `rows` of `table`, after checking
    /// that `role` may select each column.
    pub fn note_read(&mut self, table: Uid, columns: &[Uid], rows: RowsRead<'_>, role: Uid) -> Result<()> {
        for c in columns {
            if !check_privilege(&self.db, self.user, role, *c, Privileges::SELECT) {
                return Err(Error::auth(format!(
                    "no SELECT privilege on column {}.{}",
                    self.db.name_of(table),
                    self.db.name_of(*c)
                )));
            }
        }
        if !table.is_committed() {
            return Ok(());
        }
        self.reads.objects = self.reads.objects.add(table, ());
        let r = self.reads.tables.entry(table).or_default();
        for c in columns.iter().filter(|c| c.is_committed()) {
            r.columns = r.columns.add(*c, ());
        }
        match rows {
            RowsRead::All => r.whole = true,
            RowsRead::Some(rs) => {
                for row in rs.iter().filter(|u| u.is_committed()) {
                    r.rows = r.rows.add(*row, ());
                }
            }
        }
        Ok(())
    }

    /// Record that every row's `column` was read to choose an automatic
    /// key. No privilege is needed: the values never reach the caller.
    pub fn note_autokey(&mut self, table: Uid, column: Uid) {
        if table.is_committed() {
            self.reads.objects = self.reads.objects.add(table, ());
            let r = self.reads.tables.entry(table).or_default();
            if column.is_committed() {
                r.columns = r.columns.add(column, ());
            }
            r.whole = true;
        }
    }

    /// Record an index lookup, so a concurrent insert of a matching key is
    /// detected even if nothing was found.
    pub fn note_probe(&mut self, table: Uid, index: Uid, key: Key) {
        if table.is_committed() && index.is_committed() {
            let r = self.reads.tables.entry(table).or_default();
            if !r.probes.contains(&(index, key.clone())) {
                r.probes.push((index, key));
            }
        }
    }

    /// Record a dependency on a schema object.
    pub fn note_object(&mut self, uid: Uid) {
        if uid.is_committed() {
            self.reads.objects = self.reads.objects.add(uid, ());
        }
    }

    /// Queue the transaction's single remote write. A second one, to any
    /// contributor, is refused before any network traffic.
    pub fn stage_remote(&mut self, write: RemoteWrite) -> Result<()> {
        if let Some(first) = self.remote_writes.first() {
            let msg = if first.contributor == write.contributor {
                format!("a transaction may make only one remote update ({})", first.contributor)
            } else {
                format!(
                    "a transaction may update at most one remote server: {} and {}",
                    first.contributor, write.contributor
                )
            };
            return Err(Error::SingleMaster(msg));
        }
        self.remote_writes.push(write);
        Ok(())
    }

    pub(crate) fn push_generated(&mut self, payload: Payload) -> Physical {
        let p = Physical::new(Uid::temp(self.next_temp), payload);
        self.next_temp += 1;
        self.staged.push(p.clone());
        p
    }
}
