//! Transactions over a shared engine: conflict granularity, isolation,
//! the audit trail, autokeys under concurrency, and log replay.

use proptest::prelude::*;
use pyrlite::engine::{replay, ConflictReason};
use pyrlite::physlog::read_transactions;
use pyrlite::sqlfront::{Session, StatementResult};
use pyrlite::{Engine, Error, Value};

fn engine(dir: &tempfile::TempDir) -> Engine {
    let e = Engine::create(dir.path().join("T.pyl"), "owner", None).unwrap();
    Session::open(e.clone(), "owner", None)
        .unwrap()
        .execute_script(
            "create table a (id int primary key, v int, w int);
             create table b (id int primary key, a int references a, x int);
             create table audit (id int primary key, note char);
             insert into a values (1, 10, 0), (2, 20, 0), (3, 30, 0);
             insert into b values (1, 1, 5), (2, 2, 6);
             create view big as select id, v from a where v > 15;",
        )
        .unwrap();
    e
}

fn begin(e: &Engine) -> Session {
    let mut s = Session::open(e.clone(), "owner", None).unwrap();
    s.execute("begin").unwrap();
    s
}

fn rows(r: StatementResult) -> Vec<Vec<String>> {
    match r {
        StatementResult::Rows { rows, .. } => rows.iter().map(|r| r.iter().map(Value::to_string).collect()).collect(),
        other => panic!("expected rows, got {other:?}"),
    }
}

fn reason(r: pyrlite::Result<StatementResult>) -> Option<ConflictReason> {
    match r {
        Ok(_) => None,
        Err(Error::Conflict(c)) => c.reason,
        Err(e) => panic!("unexpected error {e}"),
    }
}

#[test]
fn disjoint_row_writers_both_commit() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let mut s1 = begin(&e);
    let mut s2 = begin(&e);
    s1.execute("update a set v = 11 where id = 1").unwrap();
    s2.execute("update a set v = 21 where id = 2").unwrap();
    s1.execute("commit").unwrap();
    s2.execute("commit").unwrap();
    let mut s = Session::open(e, "owner", None).unwrap();
    assert_eq!(rows(s.execute("select v from a order by id").unwrap()), vec![vec!["11"], vec!["21"], vec!["30"]]);
}

#[test]
fn reader_of_an_updated_row_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let mut reader = begin(&e);
    let mut writer = begin(&e);
    reader.execute("select v from a where id = 1").unwrap();
    reader.execute("insert into audit values (1, 'saw a1')").unwrap();
    writer.execute("update a set v = 99 where id = 1").unwrap();
    writer.execute("commit").unwrap();
    assert_eq!(reason(reader.execute("commit")), Some(ConflictReason::RowReadUpdated));
    assert!(!reader.in_transaction());
}

#[test]
fn reader_of_another_row_is_unaffected() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let mut reader = begin(&e);
    let mut writer = begin(&e);
    reader.execute("select v from a where id = 3").unwrap();
    reader.execute("insert into audit values (1, 'saw a3')").unwrap();
    writer.execute("update a set v = 99 where id = 1").unwrap();
    writer.execute("commit").unwrap();
    assert_eq!(reason(reader.execute("commit")), None);
}

#[test]
fn whole_table_aggregate_conflicts_with_any_insert() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let mut reader = begin(&e);
    let mut writer = begin(&e);
    assert_eq!(rows(reader.execute("select sum(v) from a").unwrap()), vec![vec!["60"]]);
    reader.execute("insert into audit values (1, 'sum 60')").unwrap();
    writer.execute("insert into a values (4, 1, 0)").unwrap();
    writer.execute("commit").unwrap();
    assert!(reason(reader.execute("commit")).is_some());
}

#[test]
fn view_redefinition_conflicts_with_its_readers() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let mut reader = begin(&e);
    let mut definer = begin(&e);
    reader.execute("select * from big").unwrap();
    reader.execute("insert into audit values (1, 'read big')").unwrap();
    definer.execute("alter view big as select id, v from a where v > 25").unwrap();
    definer.execute("commit").unwrap();
    assert_eq!(reason(reader.execute("commit")), Some(ConflictReason::ObjectChanged));
}

#[test]
fn read_only_transactions_always_commit() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let mut reader = begin(&e);
    reader.execute("select * from a").unwrap();
    Session::open(e.clone(), "owner", None).unwrap().execute("delete from a where id = 3").unwrap();
    assert_eq!(reason(reader.execute("commit")), None);
}

#[test]
fn uncommitted_changes_are_invisible() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let mut w = begin(&e);
    w.execute("insert into a values (7, 70, 0)").unwrap();
    w.execute("update a set v = 0 where id = 1").unwrap();
    assert_eq!(rows(w.execute("select v from a where id = 7").unwrap()), vec![vec!["70"]]);
    let mut other = Session::open(e.clone(), "owner", None).unwrap();
    assert!(rows(other.execute("select * from a where id = 7").unwrap()).is_empty());
    assert_eq!(rows(other.execute("select v from a where id = 1").unwrap()), vec![vec!["10"]]);
    let before = e.log_len();
    w.execute("rollback").unwrap();
    assert_eq!(e.log_len(), before);
    assert!(rows(other.execute("select * from a where id = 7").unwrap()).is_empty());
}

#[test]
fn every_commit_has_an_attributed_header() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let mut s = Session::open(e.clone(), "owner", None).unwrap();
    s.execute("create role clerk").unwrap();
    s.execute("grant all on audit to clerk").unwrap();
    s.execute("grant clerk to ann").unwrap();
    let mut ann = Session::open(e.clone(), "ANN", Some("CLERK")).unwrap();
    ann.execute("insert into audit values (9, 'by ann')").unwrap();
    let txs = read_transactions(&e.log_bytes().unwrap()).unwrap();
    assert!(txs.len() >= 5);
    let db = e.snapshot();
    let last = txs.last().unwrap();
    assert_eq!(last.user(), db.user_named("ANN").unwrap());
    assert_eq!(last.role(), db.role_named("CLERK").unwrap());
    assert_eq!(txs[0].user(), pyrlite::Uid::SYSTEM);
    for t in &txs[1..] {
        assert!(db.object(t.user()).is_some(), "commit at {} has no known author", t.header.pos.0);
    }
}

#[test]
fn concurrent_autokeys_never_collide() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let mut s1 = begin(&e);
    let mut s2 = begin(&e);
    s1.execute("insert into audit (note) values ('one')").unwrap();
    s2.execute("insert into audit (note) values ('two')").unwrap();
    s1.execute("commit").unwrap();
    assert!(reason(s2.execute("commit")).is_some());
    let mut s = Session::open(e, "owner", None).unwrap();
    s.execute("insert into audit (note) values ('three')").unwrap();
    assert_eq!(rows(s.execute("select id, note from audit").unwrap()), vec![vec!["1", "one"], vec!["2", "three"]]);
}

#[test]
fn cascade_runs_at_commit() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let mut s = Session::open(e, "owner", None).unwrap();
    s.execute("delete from a where id = 1").unwrap();
    assert_eq!(rows(s.execute("select id from b").unwrap()), vec![vec!["2"]]);
}

#[test]
fn replay_reproduces_the_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let mut s = Session::open(e.clone(), "owner", None).unwrap();
    s.execute("update a set w = w + 1 where v > 10").unwrap();
    s.execute("delete from a where id = 2").unwrap();
    s.execute("alter table b add note char").unwrap();
    let live = e.snapshot().state_hash();
    let bytes = e.log_bytes().unwrap();
    assert_eq!(replay(&bytes, "T").unwrap().state_hash(), live);
    assert_eq!(replay(&bytes, "T").unwrap().state_hash(), live);
    drop(s);
    let path = e.path().to_path_buf();
    drop(e);
    assert_eq!(Engine::open(&path).unwrap().snapshot().state_hash(), live);
}

#[test]
fn commits_only_append() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let mut s = Session::open(e.clone(), "owner", None).unwrap();
    for i in 0..20 {
        let before = e.log_bytes().unwrap();
        s.execute(&format!("insert into audit values ({i}, 'n{i}')")).unwrap();
        let after = e.log_bytes().unwrap();
        assert!(after.len() > before.len());
        assert_eq!(&after[..before.len()], &before[..]);
    }
}

#[test]
fn every_physical_decodes_at_its_position() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(&dir);
    let bytes = e.log_bytes().unwrap();
    for t in read_transactions(&bytes).unwrap() {
        for p in std::iter::once(&t.header).chain(&t.physicals) {
            let (q, _) = pyrlite::Physical::decode(&bytes, 0, p.pos.0 as u64).unwrap();
            assert_eq!(&q, p);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Revoking a grant never lets a user do anything it could not do
    /// before.
    #[test]
    fn revoking_never_widens_access(
        grants in proptest::collection::vec((0usize..4, 0usize..3, any::<bool>()), 1..8),
        revoke in (0usize..4, 0usize..3, any::<bool>()),
    ) {
        const PRIVS: [&str; 4] = ["select", "insert", "update", "delete"];
        const TARGETS: [&str; 3] = ["a", "b", "audit"];
        let dir = tempfile::tempdir().unwrap();
        let e = engine(&dir);
        let mut owner = Session::open(e.clone(), "owner", None).unwrap();
        owner.execute_script("create role r; grant r to eve;").unwrap();
        let grantee = |to_user: bool| if to_user { "eve" } else { "r" };
        for (p, t, u) in &grants {
            owner.execute(&format!("grant {} on {} to {}", PRIVS[*p], TARGETS[*t], grantee(*u))).unwrap();
        }
        let probe = |e: &Engine| -> Vec<bool> {
            let mut eve = Session::open(e.clone(), "EVE", Some("R")).unwrap();
            let mut out = vec![];
            for t in TARGETS {
                for stmt in [
                    format!("select * from {t}"),
                    format!("insert into {t} (id) values (1000)"),
                    format!("update {t} set id = id where id = 1"),
                    format!("delete from {t} where id = 1000"),
                ] {
                    eve.execute("begin").unwrap();
                    let r = eve.execute(&stmt);
                    out.push(!matches!(r, Err(Error::Authorization(_))));
                    eve.execute("rollback").unwrap();
                }
            }
            out
        };
        let before = probe(&e);
        let (p, t, u) = revoke;
        owner.execute(&format!("revoke {} on {} from {}", PRIVS[p], TARGETS[t], grantee(u))).unwrap();
        let after = probe(&e);
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(*b || !*a);
        }
    }
}
