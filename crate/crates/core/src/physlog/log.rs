//! The log file: `PYRLITE1`, a version byte, then committed transactions,
//! each a Transaction header followed by its physicals.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use super::{Payload, Physical, Uid};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PYRLITE1";
pub const FORMAT_VERSION: u8 = 1;
/// Offset of the first transaction header.
pub const LOG_START: u64 = 9;

/// How hard an append pushes bytes towards the disk before returning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Durability {
    /// Written to the operating system.
    Flush,
    /// Written and `fdatasync`ed.
    Sync,
}

/// One committed transaction as read back from the log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Committed {
    pub header: Physical,
    pub physicals: Vec<Physical>,
    /// Offset just past the last physical.
    pub end: u64,
}

impl Committed {
    pub fn user(&self) -> Uid {
        match self.header.payload {
            Payload::Transaction { user, .. } => user,
            _ => Uid::NONE,
        }
    }

    pub fn role(&self) -> Uid {
        match self.header.payload {
            Payload::Transaction { role, .. } => role,
            _ => Uid::NONE,
        }
    }
}

/// Lay out a transaction at `base`: header first, then each staged
/// physical at the next free offset. Temporary uids are mapped in order,
/// so a physical may refer to any earlier one. Returns the final physicals
/// (header included) and their bytes.
pub fn layout(
    base: u64,
    user: Uid,
    role: Uid,
    timestamp: i64,
    staged: &[Physical],
) -> Result<(Vec<Physical>, Vec<u8>, HashMap<Uid, Uid>)> {
    if staged.is_empty() {
        return Err(Error::EmptyCommit);
    }
    let header = Physical::new(
        Uid(base as i64),
        Payload::Transaction { user, role, timestamp, count: staged.len() as u64 },
    );
    let mut bytes = header.encode()?;
    let mut out = Vec::with_capacity(staged.len() + 1);
    out.push(header);
    let mut map = HashMap::new();
    for p in staged {
        let pos = Uid((base + bytes.len() as u64) as i64);
        if p.pos.is_temporary() {
            map.insert(p.pos, pos);
        }
        let mut q = p.relocate(&map)?;
        q.pos = pos;
        bytes.extend(q.encode()?);
        out.push(q);
    }
    if base + bytes.len() as u64 >= Uid::TRANSACTION_BASE as u64 {
        return Err(Error::Append("log exceeds the committed uid range".into()));
    }
    Ok((out, bytes, map))
}

/// Decode every transaction in `bytes` (a whole log file). On damage the
/// error names the end of the last intact transaction.
pub fn read_transactions(bytes: &[u8]) -> Result<Vec<Committed>> {
    check_magic(bytes)?;
    let mut out = Vec::new();
    let mut pos = LOG_START;
    let end = bytes.len() as u64;
    while pos < end {
        let last_good = pos;
        let fail = |e: Error| match e {
            Error::Corruption { offset, message } => Error::Replay { last_good, offset, message },
            other => Error::Replay { last_good, offset: last_good, message: other.to_string() },
        };
        let (header, mut next) = Physical::decode(bytes, 0, pos).map_err(fail)?;
        let Payload::Transaction { count, .. } = header.payload else {
            return Err(Error::Replay { last_good, offset: pos, message: "expected transaction header".into() });
        };
        if count == 0 {
            return Err(Error::Replay { last_good, offset: pos, message: "empty transaction".into() });
        }
        let mut physicals = Vec::new();
        for _ in 0..count {
            let (p, n) = Physical::decode(bytes, 0, next).map_err(fail)?;
            if matches!(p.payload, Payload::Transaction { .. }) {
                return Err(Error::Replay { last_good, offset: next, message: "nested transaction header".into() });
            }
            physicals.push(p);
            next = n;
        }
        out.push(Committed { header, physicals, end: next });
        pos = next;
    }
    Ok(out)
}

fn check_magic(bytes: &[u8]) -> Result<()> {
    if bytes.len() < LOG_START as usize || &bytes[..8] != MAGIC {
        return Err(Error::Corruption { offset: 0, message: "not a PyrrhoLite log".into() });
    }
    if bytes[8] != FORMAT_VERSION {
        return Err(Error::Corruption { offset: 8, message: format!("unsupported format version {}", bytes[8]) });
    }
    Ok(())
}

/// An open log file. Appends go through `&mut self`; the engine's commit
/// lock makes it the only appender.
#[derive(Debug)]
pub struct LogFile {
    file: File,
    path: PathBuf,
    len: u64,
    durability: Durability,
}

impl LogFile {
    /// Create a new log, failing if the file exists.
    pub fn create(path: impl AsRef<Path>) -> Result<LogFile> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).write(true).create_new(true).open(&path)?;
        file.write_all(MAGIC)?;
        file.write_all(&[FORMAT_VERSION])?;
        file.sync_all()?;
        Ok(LogFile { file, path, len: LOG_START, durability: Durability::Sync })
    }

    pub fn open(path: impl AsRef<Path>) -> Result<LogFile> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).write(true).open(&path)?;
        let mut head = [0u8; LOG_START as usize];
        let len = file.seek(SeekFrom::End(0))?;
        if len < LOG_START {
            return Err(Error::Corruption { offset: 0, message: "not a PyrrhoLite log".into() });
        }
        file.read_exact_at(&mut head, 0)?;
        check_magic(&head)?;
        Ok(LogFile { file, path, len, durability: Durability::Sync })
    }

    pub fn set_durability(&mut self, d: Durability) {
        self.durability = d;
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Committed length in bytes.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == LOG_START
    }

    /// The whole committed file.
    pub fn read_all(&self) -> Result<Vec<u8>> {
        self.read_range(0, self.len)
    }

    pub fn read_range(&self, start: u64, end: u64) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; (end - start) as usize];
        self.file.read_exact_at(&mut buf, start)?;
        Ok(buf)
    }

    /// Relocate and append one transaction. Returns the header position and
    /// the relocated physicals (header first). On failure the file is cut
    /// back to its previous length.
    pub fn append_transaction(
        &mut self,
        staged: &[Physical],
        user: Uid,
        role: Uid,
        timestamp: i64,
    ) -> Result<(u64, Vec<Physical>)> {
        let base = self.len;
        let (phys, bytes, _) = layout(base, user, role, timestamp, staged)?;
        self.append_bytes(&bytes)?;
        Ok((base, phys))
    }

    /// Append already laid-out bytes at the current end.
    pub fn append_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let base = self.len;
        let r = self.write_at_end(base, bytes);
        if let Err(e) = r {
            let _ = self.file.set_len(base);
            return Err(Error::Append(e.to_string()));
        }
        self.len = base + bytes.len() as u64;
        Ok(())
    }

    fn write_at_end(&mut self, base: u64, bytes: &[u8]) -> std::io::Result<()> {
        self.file.write_all_at(bytes, base)?;
        match self.durability {
            Durability::Sync => self.file.sync_data(),
            Durability::Flush => self.file.flush(),
        }
    }
}

/// Read a whole log file from disk.
pub fn read_file(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physlog::Value;

    fn table_tx() -> Vec<Physical> {
        vec![
            Physical::new(Uid::temp(0), Payload::Table { name: "T".into() }),
            Physical::new(
                Uid::temp(1),
                Payload::Column { table: Uid::temp(0), name: "A".into(), seq: 0, domain: Uid::INTEGER, not_null: false },
            ),
            Physical::new(
                Uid::temp(2),
                Payload::Column { table: Uid::temp(0), name: "B".into(), seq: 1, domain: Uid::CHAR, not_null: false },
            ),
            Physical::new(
                Uid::temp(3),
                Payload::Index { table: Uid::temp(0), columns: vec![Uid::temp(1)], kind: crate::physlog::IndexKind::Primary },
            ),
            Physical::new(
                Uid::temp(4),
                Payload::Record { table: Uid::temp(0), fields: vec![(Uid::temp(1), Value::int(1)), (Uid::temp(2), Value::text("x"))] },
            ),
        ]
    }

    #[test]
    fn empty_commit_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = LogFile::create(dir.path().join("a.pyl")).unwrap();
        assert!(matches!(log.append_transaction(&[], Uid(1), Uid(2), 0), Err(Error::EmptyCommit)));
        assert_eq!(log.len(), LOG_START);
    }

    #[test]
    fn five_physicals_relocate_without_temporaries() {
        let (phys, _, _) = layout(LOG_START, Uid::SYSTEM, Uid::SYSTEM, 0, &table_tx()).unwrap();
        assert_eq!(phys.len(), 6);
        for p in &phys {
            assert!(p.pos.is_committed());
            for u in p.payload.references() {
                assert!(!u.is_temporary(), "{p:?}");
                assert!(u.is_builtin() || u < p.pos, "reference {u:?} not backward in {p:?}");
            }
        }
    }

    #[test]
    fn appends_keep_prefix_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pyl");
        let mut log = LogFile::create(&path).unwrap();
        let (b1, _) = log.append_transaction(&table_tx(), Uid(1), Uid(2), 10).unwrap();
        let before = read_file(&path).unwrap();
        let rec = Physical::new(Uid::temp(0), Payload::Delete { table: Uid(20), row: Uid(90) });
        let (b2, _) = log.append_transaction(&[rec], Uid(1), Uid(2), 11).unwrap();
        assert!(b2 > b1);
        let after = read_file(&path).unwrap();
        assert_eq!(&after[..before.len()], &before[..]);
        let txs = read_transactions(&after).unwrap();
        assert_eq!(txs.len(), 2);
        assert_eq!(txs[0].header.pos, Uid(b1 as i64));
        assert_eq!(txs[1].header.pos, Uid(b2 as i64));
        assert_eq!(txs[1].end, after.len() as u64);
        let reopened = LogFile::open(&path).unwrap();
        assert_eq!(reopened.len(), after.len() as u64);
    }

    #[test]
    fn truncated_tail_reports_last_good_boundary() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pyl");
        let mut log = LogFile::create(&path).unwrap();
        log.append_transaction(&table_tx(), Uid(1), Uid(2), 10).unwrap();
        let good = log.len();
        log.append_transaction(&table_tx(), Uid(1), Uid(2), 11).unwrap();
        let bytes = read_file(&path).unwrap();
        let cut = &bytes[..bytes.len() - 3];
        match read_transactions(cut) {
            Err(Error::Replay { last_good, .. }) => assert_eq!(last_good, good),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        assert!(read_transactions(b"NOTALOG!\x01").is_err());
        assert!(read_transactions(b"PYRLITE1\x02").is_err());
        assert!(read_transactions(b"PYRLITE1\x01").unwrap().is_empty());
    }
}
