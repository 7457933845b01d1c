use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};

use super::constraints::enforce_constraints;
use super::database::{Author, Database};
use super::security::{default_role_for, password_hash};
use super::transaction::{begin_tx, Transaction};
use super::validate::{validate, ConflictReason, ConflictReport};
use crate::error::{Error, Result};
use crate::physlog::{layout, read_transactions, Durability, LogFile, Payload, Physical, Privileges, Uid};
use crate::restsvc::RemoteClient;

/// Physicals retained for validating older snapshots.
pub const RING_CAPACITY: usize = 1 << 16;

/// Rebuild a database by installing every logged transaction in order.
pub fn replay(bytes: &[u8], name: &str) -> Result<Database> {
    let mut db = Database::empty(name);
    for tx in read_transactions(bytes)? {
        let by = Author { user: tx.user(), role: tx.role() };
        db = db.install_all(&tx.physicals, by).map_err(|e| Error::Replay {
            last_good: tx.header.pos.0 as u64,
            offset: tx.header.pos.0 as u64,
            message: e.to_string(),
        })?;
        db.watermark = tx.end;
    }
    Ok(db)
}

/// Result of a successful commit.
#[derive(Debug, Clone)]
pub struct CommitInfo {
    pub db: Database,
    /// Header position, or `None` for a transaction with nothing to write.
    pub base: Option<u64>,
    /// The committed physicals after relocation, header first.
    pub physicals: Vec<Physical>,
}

struct CommitState {
    log: LogFile,
    /// Recently committed transactions: (header position, physicals).
    ring: VecDeque<(u64, Arc<Vec<Physical>>)>,
    ring_len: usize,
    /// Snapshots with a watermark below this cannot be validated.
    floor: u64,
    last_timestamp: i64,
}

struct Shared {
    path: PathBuf,
    current: RwLock<Database>,
    commit: Mutex<CommitState>,
    remote: RwLock<Option<Arc<dyn RemoteClient>>>,
}

/// A database opened from its log file. Cheap to clone; clones share state.
#[derive(Clone)]
pub struct Engine {
    shared: Arc<Shared>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("path", &self.shared.path).finish()
    }
}

fn db_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

impl Engine {
    /// Create a new database file whose owner is `owner`. The bootstrap
    /// transaction defines the owner, a role named after the database and
    /// the owner's use of that role.
    pub fn create(path: impl AsRef<Path>, owner: &str, password: Option<&str>) -> Result<Engine> {
        let path = path.as_ref();
        let name = db_name(path);
        let mut log = LogFile::create(path)?;
        let staged = vec![
            Physical::new(
                Uid::temp(0),
                Payload::User { name: owner.to_string(), password: password.map(password_hash) },
            ),
            Physical::new(Uid::temp(1), Payload::Role { name: name.clone() }),
            Physical::new(
                Uid::temp(2),
                Payload::Grant { privileges: Privileges::USAGE, object: Uid::temp(1), grantee: Uid::temp(0), revoke: false },
            ),
        ];
        let ts = now_micros();
        let (phys, bytes, _) = layout(log.len(), Uid::SYSTEM, Uid::SYSTEM, ts, &staged)?;
        let mut db = Database::empty(&name)
            .install_all(&phys[1..], Author { user: Uid::SYSTEM, role: Uid::SYSTEM })?;
        log.append_bytes(&bytes)?;
        db.watermark = log.len();
        Ok(Engine::from_parts(path, log, db, ts))
    }

    /// Open an existing database, replaying its log.
    pub fn open(path: impl AsRef<Path>) -> Result<Engine> {
        let path = path.as_ref();
        let log = LogFile::open(path)?;
        let db = replay(&log.read_all()?, &db_name(path))?;
        Ok(Engine::from_parts(path, log, db, 0))
    }

    pub fn open_or_create(path: impl AsRef<Path>, owner: &str) -> Result<Engine> {
        if path.as_ref().exists() {
            Engine::open(path)
        } else {
            Engine::create(path, owner, None)
        }
    }

    fn from_parts(path: &Path, log: LogFile, db: Database, ts: i64) -> Engine {
        let floor = log.len();
        Engine {
            shared: Arc::new(Shared {
                path: path.to_path_buf(),
                current: RwLock::new(db),
                commit: Mutex::new(CommitState {
                    log,
                    ring: VecDeque::new(),
                    ring_len: 0,
                    floor,
                    last_timestamp: ts,
                }),
                remote: RwLock::new(None),
            }),
        }
    }

    pub fn path(&self) -> &Path {
        &self.shared.path
    }

    pub fn name(&self) -> String {
        self.shared.current.read().name.clone()
    }

    /// The latest published snapshot.
    pub fn snapshot(&self) -> Database {
        self.shared.current.read().clone()
    }

    pub fn log_len(&self) -> u64 {
        self.shared.commit.lock().log.len()
    }

    /// Committed bytes of the log file.
    pub fn log_bytes(&self) -> Result<Vec<u8>> {
        let st = self.shared.commit.lock();
        st.log.read_all()
    }

    pub fn set_durability(&self, d: Durability) {
        self.shared.commit.lock().log.set_durability(d);
    }

    /// Client used for RESTView fetches and remote writes.
    pub fn set_remote_client(&self, client: Arc<dyn RemoteClient>) {
        *self.shared.remote.write() = Some(client);
    }

    pub fn remote_client(&self) -> Option<Arc<dyn RemoteClient>> {
        self.shared.remote.read().clone()
    }

    /// Begin a transaction for a named user, in `role` or the user's
    /// default role.
    pub fn begin(&self, user: &str, role: Option<&str>) -> Result<Transaction> {
        let db = self.snapshot();
        let u = db.user_named(user).ok_or_else(|| Error::auth(format!("unknown user {user}")))?;
        let r = match role {
            Some(r) => db.role_named(r).ok_or_else(|| Error::auth(format!("unknown role {r}")))?,
            None => default_role_for(&db, u).unwrap_or(Uid::PUBLIC),
        };
        self.begin_as(u, r)
    }

    pub fn begin_as(&self, user: Uid, role: Uid) -> Result<Transaction> {
        let mut tx = begin_tx(&self.snapshot(), user, role)?;
        tx.remote = self.remote_client();
        Ok(tx)
    }

    /// Check `tx` against everything committed since its snapshot, without
    /// committing.
    pub fn check(&self, tx: &Transaction) -> ConflictReport {
        let st = self.shared.commit.lock();
        Self::validate_locked(&st, tx)
    }

    fn validate_locked(st: &CommitState, tx: &Transaction) -> ConflictReport {
        if tx.base.watermark < st.floor {
            return ConflictReport::conflict(Uid::NONE, ConflictReason::SnapshotTooOld, Uid(st.floor as i64));
        }
        let since: Vec<Physical> = st
            .ring
            .iter()
            .filter(|(pos, _)| *pos >= tx.base.watermark)
            .flat_map(|(_, ps)| ps.iter().cloned())
            .collect();
        validate(tx, &since)
    }

    /// Run constraint enforcement for `tx` against the current state,
    /// adding any cascaded physicals to it.
    pub fn enforce_constraints(&self, tx: &mut Transaction) -> Result<Database> {
        let current = self.snapshot();
        enforce_constraints(tx, &current)
    }

    /// Validate, enforce constraints, perform the single remote write if
    /// any, append and publish. Nothing is written unless every step
    /// succeeds.
    pub fn commit(&self, mut tx: Transaction) -> Result<CommitInfo> {
        if tx.is_read_only() {
            return Ok(CommitInfo { db: self.snapshot(), base: None, physicals: vec![] });
        }
        // (a) lock
        let mut st = self.shared.commit.lock();
        let current = self.shared.current.read().clone();
        // (b) validate local changes
        let report = Self::validate_locked(&st, &tx);
        if !report.is_ok() {
            return Err(Error::Conflict(report));
        }
        enforce_constraints(&mut tx, &current)?;
        let ts = now_micros().max(st.last_timestamp);
        let laid_out = if tx.staged.is_empty() {
            None
        } else {
            let (phys, bytes, _) = layout(st.log.len(), tx.user, tx.role, ts, &tx.staged)?;
            let mut db = current.install_all(&phys[1..], tx.author())?;
            db.watermark = st.log.len() + bytes.len() as u64;
            Some((phys, bytes, db))
        };
        // (c) the single remote update
        if let Some(w) = tx.remote_writes.first() {
            let client = tx
                .remote
                .clone()
                .ok_or_else(|| Error::Remote("no remote client configured".into()))?;
            crate::restsvc::perform_remote_write(client.as_ref(), w)?;
        }
        // (d) local commit
        let Some((phys, bytes, db)) = laid_out else {
            return Ok(CommitInfo { db: current, base: None, physicals: vec![] });
        };
        let base = st.log.len();
        st.log.append_bytes(&bytes)?;
        st.last_timestamp = ts;
        let n = phys.len();
        st.ring.push_back((base, Arc::new(phys.clone())));
        st.ring_len += n;
        while st.ring_len > RING_CAPACITY {
            let Some((_, old)) = st.ring.pop_front() else { break };
            st.ring_len -= old.len();
            st.floor = st.ring.front().map(|(p, _)| *p).unwrap_or(db.watermark);
        }
        *self.shared.current.write() = db.clone();
        Ok(CommitInfo { db, base: Some(base), physicals: phys })
    }
}

fn now_micros() -> i64 {
    chrono::Utc::now().timestamp_micros()
}
