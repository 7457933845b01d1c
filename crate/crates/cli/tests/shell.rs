use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::Arc;

use pyrlite::restsvc::{Server, Service};
use pyrlite::sqlfront::Session;
use pyrlite::Engine;
use pyrlite_cli::{render_table, repl, Backend, Local, Output, Remote};

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn run(backend: &mut dyn Backend, input: &str) -> String {
    let mut out = vec![];
    repl(backend, input.as_bytes(), &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

fn local(dir: &tempfile::TempDir) -> (Engine, Local) {
    let path = dir.path().join("L.pyl");
    let l = Local::open(&path, "owner", None).unwrap();
    (l.session().engine().clone(), l)
}

#[test]
fn empty_rowset_renders_header_and_rules() {
    assert_eq!(render_table(&strings(&["A", "BB"]), &[]), "|-|--|\n|A|BB|\n|-|--|\n");
}

#[test]
fn rows_fit_their_widest_cell() {
    let t = render_table(&strings(&["E", "D", "K", "F"]), &[strings(&["5", "C", "1", "Five"])]);
    assert_eq!(t, "|-|-|-|----|\n|E|D|K|F   |\n|-|-|-|----|\n|5|C|1|Five|\n|-|-|-|----|\n");
}

#[test]
fn inserts_report_records_affected() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mut l) = local(&dir);
    let out = run(&mut l, "create table money (cur char, amt int)\ninsert into money values ('$', 34), ('E', 212)\n");
    assert!(out.contains("2 records affected"), "{out}");
}

#[test]
fn table_statement_lists_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mut l) = local(&dir);
    let out = run(
        &mut l,
        "create table vu (d char primary key, k int, u char)
insert into vu values ('B', 4, 'http://localhost:8188/DB/DB/t'), ('C', 1, 'http://localhost:8188/DC/DC/u')
table vu
",
    );
    assert!(out.contains("|D|K|U                            |"), "{out}");
    assert!(out.contains("|B|4|http://localhost:8188/DB/DB/t|"), "{out}");
    assert!(out.contains("|C|1|http://localhost:8188/DC/DC/u|"), "{out}");
}

#[test]
fn rollback_without_a_transaction_warns() {
    let dir = tempfile::tempdir().unwrap();
    let (e, mut l) = local(&dir);
    let before = e.log_len();
    let out = run(&mut l, "rollback\n");
    assert!(out.contains("warning: no transaction is open"), "{out}");
    assert_eq!(e.log_len(), before);
}

#[test]
fn errors_do_not_end_the_session() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mut l) = local(&dir);
    let out = run(&mut l, "selec 1\nselect * from nowhere\ncreate table t (a int)\ninsert into t values (1)\nquit\ninsert into t values (2)\n");
    assert_eq!(out.matches("error:").count(), 2, "{out}");
    assert!(out.contains("1 records affected"), "{out}");
    assert!(!out.contains("2 records"), "{out}");
}

#[test]
fn statements_may_span_lines() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mut l) = local(&dir);
    let out = run(&mut l, "create table t (a int,\n b char);\ninsert into t values (1,\n 'x;y')\nselect b from t\n");
    assert!(out.contains("|x;y|"), "{out}");
}

#[test]
fn conflicting_commit_prints_the_reason() {
    let dir = tempfile::tempdir().unwrap();
    let (e, mut a) = local(&dir);
    run(&mut a, "create table t (id int primary key, v int)\ninsert into t values (1, 0)\n");
    let mut b = Local::from_session(Session::open(e, "owner", None).unwrap());
    a.execute("begin").unwrap();
    b.execute("begin").unwrap();
    a.execute("select v from t where id = 1").unwrap();
    a.execute("update t set v = 1 where id = 1").unwrap();
    b.execute("update t set v = 2 where id = 1").unwrap();
    b.execute("commit").unwrap();
    let err = a.execute("commit").unwrap_err();
    assert!(err.contains("row-read-updated"), "{err}");
}

#[test]
fn remote_shell_matches_local_output() {
    let dir = tempfile::tempdir().unwrap();
    let (e, mut l) = local(&dir);
    run(&mut l, "create table t (id int primary key, name char)\ninsert into t values (1, 'One'), (2, 'Two')\n");
    let server = Server::bind("127.0.0.1:0", Arc::new(Service::with_engine(e))).unwrap().spawn(2);
    let mut r = Remote::new(&format!("http://127.0.0.1:{}/L", server.port), "owner", "", None).unwrap();
    for sql in ["select * from t where id > 0 order by id", "select count(*) from t"] {
        assert_eq!(r.execute(sql).unwrap(), l.execute(sql).unwrap(), "{sql}");
    }
    assert_eq!(r.execute("insert into t values (3, 'Three')").unwrap(), Output::Affected(1));
    assert!(matches!(r.execute("begin").unwrap(), Output::Warning(_)));
    assert!(r.execute("select * from nowhere").unwrap_err().starts_with("404"));
    server.stop();
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pyrlite"))
}

#[test]
fn binary_runs_a_shell_session() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = binary()
        .args(["shell", dir.path().join("S").to_str().unwrap(), "--user", "owner"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"create table t (a int)\ninsert into t values (1), (2)\nselect * from t\nquit\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("2 records affected"), "{text}");
    assert!(text.contains("|A|\n|-|\n|1|\n|2|"), "{text}");
    assert!(dir.path().join("S.pyl").exists());
}

#[test]
fn startup_failures_exit_with_status_one() {
    let dir = tempfile::tempdir().unwrap();
    Engine::create(dir.path().join("D.pyl"), "owner", None).unwrap();
    let status = binary()
        .args(["shell", dir.path().join("D.pyl").to_str().unwrap(), "--user", "stranger"])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let status = binary()
        .args(["serve", "--data-dir", dir.path().join("missing").to_str().unwrap()])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
