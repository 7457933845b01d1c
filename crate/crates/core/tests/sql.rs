//! End-to-end SQL through sessions on a temporary database.

use pyrlite::sqlfront::{Session, StatementResult};
use pyrlite::{Engine, Error, Value};

fn engine() -> (tempfile::TempDir, Engine) {
    let dir = tempfile::tempdir().unwrap();
    let e = Engine::create(dir.path().join("E.pyl"), "owner", None).unwrap();
    (dir, e)
}

fn rows(r: StatementResult) -> Vec<Vec<Value>> {
    match r {
        StatementResult::Rows { rows, .. } => rows,
        other => panic!("expected rows, got {other:?}"),
    }
}

fn text(rows: &[Vec<Value>]) -> Vec<Vec<String>> {
    rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect()).collect()
}

const SALES: &str = "
create table sales (cust char(12) primary key, custSales numeric(8,2));
insert into sales values ('Bosch', 17000.00), ('Boss', 13000.00), ('Daimler', 20000.00);
insert into sales values ('Siemens', 9000.00), ('Porsche', 5000.00), ('VW', 8000.00), ('Migros', 4000.00);
";

const SALES_V: &str = "
create view sales_V(cust, custSales, runningSalesShare)
as select cust, custSales,
(select sum(custSales) from sales where custSales >= u.custSales) /
(select sum(custSales) from sales)
from sales as u";

const ABC: &str = "
select case when runningSalesShare <= 0.5 then 'A'
when runningSalesShare > 0.5 and runningSalesShare <= 0.85 then 'B'
when runningSalesShare > 0.85 then 'C'
else null
end as Category,
cust, custSales,
cast(cast(custSales / (select sum(custSales) from sales_V) * 100
as decimal(6, 2)) as char(6)) || '%' as share
from sales_V
order by custSales desc";

#[test]
fn abc_categories_and_shares() {
    let (_d, e) = engine();
    let mut s = Session::open(e, "owner", None).unwrap();
    s.execute_script(SALES).unwrap();
    s.execute(SALES_V).unwrap();
    let r = rows(s.execute(ABC).unwrap());
    let t = text(&r);
    let cats: Vec<&str> = t.iter().map(|r| r[0].as_str()).collect();
    let shares: Vec<&str> = t.iter().map(|r| r[3].as_str()).collect();
    assert_eq!(cats, ["A", "A", "B", "B", "C", "C", "C"]);
    assert_eq!(shares, ["26.32%", "22.37%", "17.11%", "11.84%", "10.53%", "6.58%", "5.26%"]);
    let custs: Vec<&str> = t.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(custs, ["Daimler", "Bosch", "Boss", "Siemens", "VW", "Porsche", "Migros"]);
}

#[test]
fn insert_reports_affected_rows_and_table_reads_back() {
    let (_d, e) = engine();
    let mut s = Session::open(e, "owner", None).unwrap();
    s.execute("create table t (a int primary key, b char)").unwrap();
    assert_eq!(s.execute("insert into t values (1,'x'),(2,'y')").unwrap(), StatementResult::Affected(2));
    let r = rows(s.execute("table t").unwrap());
    assert_eq!(text(&r), vec![vec!["1", "x"], vec!["2", "y"]]);
    assert_eq!(s.execute("update t set b = 'z' where a = 2").unwrap(), StatementResult::Affected(1));
    assert_eq!(s.execute("delete from t where b = 'x'").unwrap(), StatementResult::Affected(1));
    assert_eq!(text(&rows(s.execute("select * from t").unwrap())), vec![vec!["2", "z"]]);
}

#[test]
fn autokey_assigns_max_plus_one() {
    let (_d, e) = engine();
    let mut s = Session::open(e, "owner", None).unwrap();
    s.execute("create table c (id int primary key, name char)").unwrap();
    s.execute("insert into c(name) values ('a')").unwrap();
    s.execute("insert into c(name) values ('b')").unwrap();
    let r = rows(s.execute("select id from c order by id").unwrap());
    assert_eq!(text(&r), vec![vec!["1"], vec!["2"]]);
}

#[test]
fn explicit_transactions_and_rollback() {
    let (_d, e) = engine();
    let mut s = Session::open(e.clone(), "owner", None).unwrap();
    s.execute("create table t (a int primary key)").unwrap();
    s.execute("begin").unwrap();
    s.execute("insert into t values (1)").unwrap();
    assert!(s.execute("insert into t values (1)").is_err());
    assert_eq!(text(&rows(s.execute("select count(*) from t").unwrap())), vec![vec!["1"]]);
    s.execute("rollback").unwrap();
    assert_eq!(text(&rows(s.execute("select count(*) from t").unwrap())), vec![vec!["0"]]);
    assert!(matches!(s.execute("rollback").unwrap(), StatementResult::Done(_)));
}

#[test]
fn cascade_delete_and_restrict_update() {
    let (_d, e) = engine();
    let mut s = Session::open(e, "owner", None).unwrap();
    s.execute_script(
        "create table p (id int primary key);
         create table c (id int primary key, p int references p);
         insert into p values (1), (2);
         insert into c values (10, 1), (11, 1), (12, 2);",
    )
    .unwrap();
    s.execute("delete from p where id = 1").unwrap();
    assert_eq!(text(&rows(s.execute("select id from c").unwrap())), vec![vec!["12"]]);
    assert!(s.execute("update p set id = 3 where id = 2").is_err());
}

#[test]
fn scalar_subquery_cardinality() {
    let (_d, e) = engine();
    let mut s = Session::open(e, "owner", None).unwrap();
    s.execute_script("create table t (a int primary key); insert into t values (1), (2);").unwrap();
    assert!(matches!(s.execute("select (select a from t) from t"), Err(Error::Cardinality(_))));
    let r = rows(s.execute("select (select a from t where a = 3) from t where a = 1").unwrap());
    assert_eq!(r, vec![vec![Value::Null]]);
}

#[test]
fn aggregates_over_empty_input() {
    let (_d, e) = engine();
    let mut s = Session::open(e, "owner", None).unwrap();
    s.execute("create table t (a int primary key)").unwrap();
    let r = rows(s.execute("select count(*), sum(a), avg(a), min(a), max(a) from t").unwrap());
    assert_eq!(r, vec![vec![Value::int(0), Value::Null, Value::Null, Value::Null, Value::Null]]);
}
