//! Fixtures shared by the benchmarks.

use pyrlite::sqlfront::Session;
use pyrlite::Engine;

/// A database in a temporary directory; the directory lives as long as
/// the fixture.
pub struct Fixture {
    _dir: tempfile::TempDir,
    pub engine: Engine,
}

impl Fixture {
    pub fn new(setup: &str) -> Fixture {
        let dir = tempfile::tempdir().expect("temporary directory");
        let engine = Engine::create(dir.path().join("B.pyl"), "owner", None).expect("create database");
        let f = Fixture { _dir: dir, engine };
        if !setup.trim().is_empty() {
            f.session().execute_script(setup).expect("setup script");
        }
        f
    }

    pub fn session(&self) -> Session {
        Session::open(self.engine.clone(), "owner", None).expect("session")
    }
}

/// A table `t (id int primary key, g int, v int)` holding `rows` rows, with
/// `g` cycling through 0..10.
pub fn numbered_table(rows: usize) -> Fixture {
    let f = Fixture::new("create table t (id int primary key, g int, v int)");
    let mut s = f.session();
    for chunk in (0..rows).collect::<Vec<_>>().chunks(500) {
        let values: Vec<String> = chunk.iter().map(|i| format!("({i}, {}, {})", i % 10, i * 3)).collect();
        s.execute(&format!("insert into t values {}", values.join(", "))).expect("insert");
    }
    f
}

pub const SALES: &str = "
create table sales (cust char(12) primary key, custSales numeric(8,2));
insert into sales values ('Bosch', 17000.00), ('Boss', 13000.00), ('Daimler', 20000.00);
insert into sales values ('Siemens', 9000.00), ('Porsche', 5000.00), ('VW', 8000.00), ('Migros', 4000.00);
create view sales_V(cust, custSales, runningSalesShare)
as select cust, custSales,
(select sum(custSales) from sales where custSales >= u.custSales) /
(select sum(custSales) from sales)
from sales as u;";

pub const ABC: &str = "
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
