//! The HTTP resource service and RESTView federation, served in-process
//! through a router so every contributor request can be counted.

use std::sync::Arc;

use pyrlite::restsvc::{Request, Response, Router, Service};
use pyrlite::sqlfront::{Session, StatementResult};
use pyrlite::{Engine, Error, Value};
use serde_json::Value as Json;

const ORIGIN: &str = "http://localhost:8188";

fn create(dir: &tempfile::TempDir, name: &str) -> Engine {
    Engine::create(dir.path().join(format!("{name}.pyl")), "owner", None).unwrap()
}

fn auth(req: Request, user: &str) -> Request {
    use base64::Engine as _;
    let token = base64::engine::general_purpose::STANDARD.encode(format!("{user}:"));
    Request { headers: [req.headers, vec![("Authorization".into(), format!("Basic {token}"))]].concat(), ..req }
}

fn get(svc: &Service, target: &str) -> Response {
    svc.handle(&auth(Request::new("GET", target), "owner"))
}

fn body(r: &Response) -> Json {
    serde_json::from_str(&r.body).unwrap_or_else(|e| panic!("{e}: {}", r.body))
}

fn rows(r: StatementResult) -> Vec<Vec<String>> {
    match r {
        StatementResult::Rows { rows, .. } => rows.iter().map(|r| r.iter().map(Value::to_string).collect()).collect(),
        other => panic!("expected rows, got {other:?}"),
    }
}

fn sales(dir: &tempfile::TempDir) -> Engine {
    let e = create(dir, "E");
    Session::open(e.clone(), "owner", None)
        .unwrap()
        .execute_script(
            "create table sales (cust char(12) primary key, custSales numeric(8,2));
             insert into sales values ('Bosch', 17000.00), ('Boss', 13000.00), ('Daimler', 20000.00);
             insert into sales values ('Siemens', 9000.00), ('Porsche', 5000.00), ('VW', 8000.00), ('Migros', 4000.00);",
        )
        .unwrap();
    e
}

#[test]
fn get_returns_rows_with_rowset_etag() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::with_engine(sales(&dir));
    let r = get(&svc, "/E/E/sales");
    assert_eq!(r.status, 200, "{}", r.body);
    let custs: Vec<String> =
        body(&r).as_array().unwrap().iter().map(|o| o["CUST"].as_str().unwrap().to_string()).collect();
    assert_eq!(custs.len(), 7);
    for c in ["Bosch", "Boss", "Daimler", "Siemens", "Porsche", "VW", "Migros"] {
        assert!(custs.iter().any(|x| x == c), "{c} missing");
    }
    let etag = r.header("ETag").unwrap().to_string();
    assert_eq!(get(&svc, "/E/E/sales").header("ETag"), Some(etag.as_str()));
    let cond = Request { headers: vec![("If-None-Match".into(), etag)], ..Request::new("GET", "/E/E/sales") };
    let r = svc.handle(&auth(cond, "owner"));
    assert_eq!(r.status, 304);
    assert!(r.body.is_empty());
}

#[test]
fn authentication_and_authorization_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let e = sales(&dir);
    Session::open(e.clone(), "owner", None).unwrap().execute("create user bob").unwrap();
    let svc = Service::with_engine(e);
    assert_eq!(svc.handle(&Request::new("GET", "/E/E/sales")).status, 401);
    assert_eq!(svc.handle(&auth(Request::new("GET", "/E/E/sales"), "nobody")).status, 401);
    assert_eq!(svc.handle(&auth(Request::new("GET", "/E/E/sales"), "bob")).status, 403);
    assert_eq!(get(&svc, "/E/E/nothing").status, 404);
    assert_eq!(get(&svc, "/E/NOROLE/sales").status, 404);
    assert_eq!(get(&svc, "/X/E/sales").status, 404);
    assert_eq!(get(&svc, "/E/E/sales/Nobody").status, 404);
}

#[test]
fn visualisation_selectors_are_not_implemented() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::with_engine(sales(&dir));
    let r = get(&svc, "/E/E/SALES/?PIE(CUST,CUSTSALES)");
    assert_eq!(r.status, 501);
    assert!(r.body.contains("PIE(CUST,CUSTSALES)"));
}

#[test]
fn where_select_and_key_addressing() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::with_engine(sales(&dir));
    let r = get(&svc, "/E/E/sales?select=CUST&where=CUSTSALES%3E10000");
    let b = body(&r);
    let mut custs: Vec<&str> = b.as_array().unwrap().iter().map(|o| o["CUST"].as_str().unwrap()).collect();
    custs.sort();
    assert_eq!(custs, ["Bosch", "Boss", "Daimler"]);
    assert!(b[0].get("CUSTSALES").is_none());
    let r = get(&svc, "/E/E/sales/VW");
    assert_eq!(r.status, 200);
    assert_eq!(body(&r)["CUSTSALES"].to_string(), "8000.00");
    assert!(r.header("ETag").unwrap().contains('-'));
}

#[test]
fn post_assigns_autokey_and_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let e = create(&dir, "D");
    Session::open(e.clone(), "owner", None).unwrap().execute("create table c (id int primary key, name char)").unwrap();
    let svc = Service::with_engine(e);
    let post = |name: &str| {
        let req = Request { body: format!("{{\"NAME\":\"{name}\"}}"), ..Request::new("POST", "/D/D/c") };
        svc.handle(&auth(req, "owner"))
    };
    let r = post("Greta");
    assert_eq!(r.status, 201, "{}", r.body);
    assert_eq!(body(&r)["ID"], 1);
    assert_eq!(post("Hans").status, 201);
    let back = get(&svc, "/D/D/c/2");
    assert_eq!(body(&back)["NAME"], "Hans");
    assert_eq!(back.header("ETag"), svc.handle(&auth(Request::new("GET", "/D/D/c/2"), "owner")).header("ETag"));
}

#[test]
fn stale_put_is_rejected_and_changes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let e = sales(&dir);
    let svc = Service::with_engine(e.clone());
    let old = get(&svc, "/E/E/sales/VW").header("ETag").unwrap().to_string();
    let put = |etag: &str, v: &str| {
        let req = Request {
            headers: vec![("If-Match".into(), etag.to_string())],
            body: format!("{{\"CUSTSALES\":{v}}}"),
            ..Request::new("PUT", "/E/E/sales/VW")
        };
        svc.handle(&auth(req, "owner"))
    };
    let r = put(&old, "8100");
    assert_eq!(r.status, 200, "{}", r.body);
    let new = r.header("ETag").unwrap().to_string();
    assert_ne!(new, old);
    assert_eq!(get(&svc, "/E/E/sales/VW").header("ETag"), Some(new.as_str()));
    let before = (e.snapshot().state_hash_hex(), e.log_len());
    assert_eq!(put(&old, "9999").status, 412);
    assert_eq!((e.snapshot().state_hash_hex(), e.log_len()), before);
    let no_match = svc.handle(&auth(Request { body: "{}".into(), ..Request::new("PUT", "/E/E/sales/VW") }, "owner"));
    assert_eq!(no_match.status, 412);
    assert_eq!((e.snapshot().state_hash_hex(), e.log_len()), before);
}

#[test]
fn row_etags_are_independent() {
    let dir = tempfile::tempdir().unwrap();
    let e = sales(&dir);
    let svc = Service::with_engine(e.clone());
    let vw = get(&svc, "/E/E/sales/VW").header("ETag").unwrap().to_string();
    let bosch = get(&svc, "/E/E/sales/Bosch").header("ETag").unwrap().to_string();
    Session::open(e, "owner", None).unwrap().execute("update sales set custSales = 1 where cust = 'VW'").unwrap();
    assert_ne!(get(&svc, "/E/E/sales/VW").header("ETag").unwrap(), vw);
    assert_eq!(get(&svc, "/E/E/sales/Bosch").header("ETag").unwrap(), bosch);
}

#[test]
fn delete_cascades_to_children() {
    let dir = tempfile::tempdir().unwrap();
    let e = create(&dir, "D");
    Session::open(e.clone(), "owner", None)
        .unwrap()
        .execute_script(
            "create table p (id int primary key);
             create table c (id int primary key, p int references p);
             insert into p values (1), (2);
             insert into c values (10, 1), (11, 1), (12, 2);",
        )
        .unwrap();
    let svc = Service::with_engine(e);
    let etag = get(&svc, "/D/D/p/1").header("ETag").unwrap().to_string();
    let req = Request { headers: vec![("If-Match".into(), etag)], ..Request::new("DELETE", "/D/D/p/1") };
    assert_eq!(svc.handle(&auth(req, "owner")).status, 204);
    assert_eq!(body(&get(&svc, "/D/D/c")).as_array().unwrap().len(), 1);
}

#[test]
fn aggregate_requests_return_registers() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::with_engine(sales(&dir));
    let r = get(&svc, "/E/E/sales?agg=COUNT(*),SUM(CUSTSALES),MAX(CUSTSALES)");
    assert_eq!(r.status, 200, "{}", r.body);
    let regs = &body(&r)["$registers"];
    assert_eq!(regs["COUNT(*)"]["count"], 7);
    assert_eq!(regs["SUM(CUSTSALES)"]["sum"].to_string(), "76000.00");
}

/// Two contributor databases behind one origin, and a local database with
/// the using-table VU and the views VV and WW.
struct Federation {
    _dir: tempfile::TempDir,
    router: Router,
    local: Engine,
    db: Engine,
    dc: Engine,
}

fn federation() -> Federation {
    let dir = tempfile::tempdir().unwrap();
    let db = create(&dir, "DB");
    let dc = create(&dir, "DC");
    Session::open(db.clone(), "owner", None)
        .unwrap()
        .execute_script("create table t (e int primary key, f char); insert into t values (1, 'One'), (2, 'Two');")
        .unwrap();
    Session::open(dc.clone(), "owner", None)
        .unwrap()
        .execute_script("create table u (e int primary key, f char); insert into u values (5, 'Five');")
        .unwrap();
    let service = Service::new(None);
    service.add_engine(db.clone());
    service.add_engine(dc.clone());
    let router = Router::new();
    router.mount(ORIGIN, Arc::new(service));
    let local = create(&dir, "L");
    local.set_remote_client(Arc::new(router.clone()));
    Session::open(local.clone(), "owner", None)
        .unwrap()
        .execute_script(&format!(
            "create table vu (d char primary key, k int, u char);
             insert into vu values ('B', 4, '{ORIGIN}/DB/DB/t'), ('C', 1, '{ORIGIN}/DC/DC/u');
             create view vv of (e int, f char) as get '{ORIGIN}/DB/DB/t' user 'owner';
             create view ww of (e int, d char, k int, f char) as get using vu user 'owner';"
        ))
        .unwrap();
    router.clear_log();
    Federation { _dir: dir, router, local, db, dc }
}

#[test]
fn restview_paper_example() {
    let f = federation();
    let mut s = Session::open(f.local.clone(), "owner", None).unwrap();
    assert_eq!(rows(s.execute("select * from ww where e=5").unwrap()), vec![vec!["5", "C", "1", "Five"]]);
    assert_eq!(f.router.requests_to(&format!("{ORIGIN}/DB/DB/t")).len(), 1);
    assert_eq!(f.router.requests_to(&format!("{ORIGIN}/DC/DC/u")).len(), 1);
    assert!(f.router.requests().iter().all(|r| r.url.contains("where=E%3D5") || r.url.contains("where=E%20%3D%205")));
}

#[test]
fn using_table_filters_skip_contributors() {
    let f = federation();
    let mut s = Session::open(f.local.clone(), "owner", None).unwrap();
    let r = rows(s.execute("select e, f from ww where d='B'").unwrap());
    assert_eq!(r, vec![vec!["1", "One"], vec!["2", "Two"]]);
    assert_eq!(f.router.requests().len(), 1);
    assert!(f.router.requests()[0].url.starts_with(&format!("{ORIGIN}/DB/DB/t")));
}

#[test]
fn projection_limits_transferred_columns() {
    let f = federation();
    let mut s = Session::open(f.local.clone(), "owner", None).unwrap();
    rows(s.execute("select d, f from ww").unwrap());
    for r in f.router.requests() {
        assert!(r.url.contains("select=F"), "{}", r.url);
        assert!(!r.url.contains("select=E"), "{}", r.url);
    }
}

#[test]
fn remote_count_merges_registers() {
    let f = federation();
    let mut s = Session::open(f.local.clone(), "owner", None).unwrap();
    assert_eq!(rows(s.execute("select count(*), sum(e), max(f) from ww").unwrap()), vec![vec!["3", "8", "Two"]]);
    assert_eq!(f.router.requests().len(), 2);
    assert!(f.router.requests().iter().all(|r| r.url.contains("agg=")));
}

#[test]
fn offline_contributor_is_reported() {
    let f = federation();
    f.router.set_online(ORIGIN, false);
    let mut s = Session::open(f.local.clone(), "owner", None).unwrap();
    match s.execute("select * from ww") {
        Err(Error::ContributorOffline { offline, .. }) => assert_eq!(offline.len(), 2),
        other => panic!("expected offline error, got {other:?}"),
    }
}

#[test]
fn local_and_remote_insert_commit_together() {
    let f = federation();
    let mut s = Session::open(f.local.clone(), "owner", None).unwrap();
    s.execute("begin").unwrap();
    s.execute("insert into vu values ('D', 9, 'x')").unwrap();
    s.execute("insert into vv values (3, 'Three')").unwrap();
    assert!(f.router.requests().is_empty());
    s.execute("commit").unwrap();
    let mut remote = Session::open(f.db.clone(), "owner", None).unwrap();
    assert_eq!(rows(remote.execute("select f from t where e = 3").unwrap()), vec![vec!["Three"]]);
    assert_eq!(rows(s.execute("select k from vu where d = 'D'").unwrap()), vec![vec!["9"]]);
}

#[test]
fn remote_precondition_failure_rolls_back_locally() {
    let f = federation();
    let mut s = Session::open(f.local.clone(), "owner", None).unwrap();
    s.execute("begin").unwrap();
    s.execute("insert into vu values ('D', 9, 'x')").unwrap();
    assert_eq!(s.execute("update vv set f = 'Uno' where e = 1").unwrap(), StatementResult::Affected(1));
    Session::open(f.db.clone(), "owner", None).unwrap().execute("update t set f = 'Eins' where e = 1").unwrap();
    let len = f.local.log_len();
    match s.execute("commit") {
        Err(Error::Conflict(_)) => {}
        other => panic!("expected a conflict, got {other:?}"),
    }
    assert_eq!(f.local.log_len(), len);
    let mut remote = Session::open(f.db.clone(), "owner", None).unwrap();
    assert_eq!(rows(remote.execute("select f from t where e = 1").unwrap()), vec![vec!["Eins"]]);
}

#[test]
fn two_remote_targets_are_refused_before_any_request() {
    let f = federation();
    let mut s = Session::open(f.local.clone(), "owner", None).unwrap();
    s.execute(&format!("create view vx of (e int, f char) as get '{ORIGIN}/DC/DC/u' user 'owner'")).unwrap();
    f.router.clear_log();
    s.execute("begin").unwrap();
    s.execute("insert into vv values (3, 'Three')").unwrap();
    assert!(matches!(s.execute("insert into vx values (6, 'Six')"), Err(Error::SingleMaster(_))));
    assert!(f.router.requests().is_empty());
    let _ = &f.dc;
}
