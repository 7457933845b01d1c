//! Properties of the SQL front end: printing round-trips through the
//! parser, review never changes results, the recorded read set is enough
//! to decide whether a result is still valid, and every reference to a
//! table gets its own column uids.

use std::collections::HashSet;

use proptest::prelude::*;
use pyrlite::sqlfront::plan::{Node, Plan};
use pyrlite::sqlfront::{
    parse_query, parse_statement, review, AggFunc, BinOp, Binder, Exec, Expr, Query, Session, Statement,
};
use pyrlite::{Domain, Engine, Uid, Value};

fn ident() -> impl Strategy<Value = String> {
    prop_oneof![
        "[A-Z][A-Z0-9_]{0,6}".prop_filter("reserved", |s| !pyrlite::sqlfront::RESERVED.contains(&s.as_str())),
        "[a-z][a-zA-Z ]{0,6}",
    ]
}

fn literal() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        (0i64..1_000_000).prop_map(Value::int),
        (0i64..100_000, 0u32..4).prop_map(|(m, s)| Value::Real(pyrlite::Decimal::new(m, -(s as i32)))),
        "[a-zA-Z' ]{0,8}".prop_map(Value::text),
        any::<bool>().prop_map(Value::Boolean),
    ]
}

fn domain() -> impl Strategy<Value = Domain> {
    prop_oneof![
        Just(Domain::Integer),
        (1u32..20, 0u32..6).prop_map(|(p, s)| Domain::Numeric { precision: Some(p.max(s)), scale: Some(s) }),
        Just(Domain::Real),
        (1u32..40).prop_map(|n| Domain::Char { length: Some(n) }),
        Just(Domain::Char { length: None }),
        Just(Domain::Boolean),
        Just(Domain::Date),
    ]
}

fn binop() -> impl Strategy<Value = BinOp> {
    prop_oneof![
        Just(BinOp::Or),
        Just(BinOp::And),
        Just(BinOp::Eq),
        Just(BinOp::Ne),
        Just(BinOp::Lt),
        Just(BinOp::Le),
        Just(BinOp::Gt),
        Just(BinOp::Ge),
        Just(BinOp::Concat),
        Just(BinOp::Add),
        Just(BinOp::Sub),
        Just(BinOp::Mul),
        Just(BinOp::Div),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        literal().prop_map(Expr::Literal),
        (proptest::option::of(ident()), ident()).prop_map(|(qualifier, name)| Expr::Column { qualifier, name }),
    ];
    leaf.prop_recursive(4, 32, 4, |e| {
        let b = |e: BoxedStrategy<Expr>| e.prop_map(Box::new);
        let e = e.boxed();
        prop_oneof![
            (binop(), b(e.clone()), b(e.clone())).prop_map(|(op, l, r)| Expr::Binary(op, l, r)),
            b(e.clone()).prop_map(Expr::Neg),
            b(e.clone()).prop_map(Expr::Not),
            (b(e.clone()), any::<bool>()).prop_map(|(expr, negated)| Expr::IsNull { expr, negated }),
            (b(e.clone()), proptest::collection::vec(e.clone(), 1..4), any::<bool>())
                .prop_map(|(expr, list, negated)| Expr::InList { expr, list, negated }),
            (b(e.clone()), b(e.clone()), b(e.clone()), any::<bool>())
                .prop_map(|(expr, low, high, negated)| Expr::Between { expr, low, high, negated }),
            (b(e.clone()), b(e.clone()), any::<bool>()).prop_map(|(expr, pattern, negated)| Expr::Like {
                expr,
                pattern,
                negated
            }),
            (
                proptest::option::of(b(e.clone())),
                proptest::collection::vec((e.clone(), e.clone()), 1..3),
                proptest::option::of(b(e.clone()))
            )
                .prop_map(|(operand, whens, otherwise)| Expr::Case { operand, whens, otherwise }),
            (b(e.clone()), domain()).prop_map(|(expr, domain)| Expr::Cast { expr, domain }),
            (
                prop_oneof![Just(AggFunc::Sum), Just(AggFunc::Avg), Just(AggFunc::Min), Just(AggFunc::Max), Just(AggFunc::Count)],
                b(e.clone())
            )
                .prop_map(|(func, arg)| Expr::Agg { func, arg: Some(arg) }),
            Just(Expr::Agg { func: AggFunc::Count, arg: None }),
            (ident(), b(e)).prop_map(|(t, filter)| Expr::Subquery(Box::new(Query {
                items: vec![pyrlite::sqlfront::ast::SelectItem::Expr { expr: Expr::col("X"), alias: None }],
                from: vec![pyrlite::sqlfront::ast::TableRef { name: t, alias: None }],
                filter: Some(*filter),
                order: vec![],
            }))),
        ]
    })
}

fn query() -> impl Strategy<Value = Query> {
    use pyrlite::sqlfront::ast::{OrderItem, SelectItem, TableRef};
    let item = prop_oneof![
        Just(SelectItem::Star(None)),
        ident().prop_map(|q| SelectItem::Star(Some(q))),
        (expr(), proptest::option::of(ident())).prop_map(|(expr, alias)| SelectItem::Expr { expr, alias }),
    ];
    (
        proptest::collection::vec(item, 1..4),
        proptest::collection::vec((ident(), proptest::option::of(ident())), 1..3),
        proptest::option::of(expr()),
        proptest::collection::vec((expr(), any::<bool>()), 0..3),
    )
        .prop_map(|(items, from, filter, order)| Query {
            items,
            from: from.into_iter().map(|(name, alias)| TableRef { name, alias }).collect(),
            filter,
            order: order.into_iter().map(|(expr, desc)| OrderItem { expr, desc }).collect(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn printed_queries_parse_back(q in query()) {
        let text = q.to_string();
        let back = parse_query(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        prop_assert_eq!(back, q, "{}", text);
    }

    #[test]
    fn printed_statements_parse_back(q in query(), t in ident(), e in expr(), c in ident()) {
        let stmts = vec![
            Statement::Select(q),
            Statement::Update { table: t.clone(), assignments: vec![(c.clone(), e.clone())], filter: Some(e.clone()) },
            Statement::Delete { table: t.clone(), filter: Some(e.clone()) },
            Statement::Insert { table: t, columns: vec![c], rows: vec![vec![e]] },
        ];
        for s in stmts {
            let text = s.to_string();
            let back = parse_statement(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
            prop_assert_eq!(back, s, "{}", text);
        }
    }
}

/// A two-table fixture of at most 100 rows with a primary key, a foreign
/// key and a secondary unique index.
fn fixture(rows: &[(i64, i64, i64)]) -> (tempfile::TempDir, Engine) {
    let dir = tempfile::tempdir().unwrap();
    let e = Engine::create(dir.path().join("P.pyl"), "owner", None).unwrap();
    let mut s = Session::open(e.clone(), "owner", None).unwrap();
    s.execute_script(
        "create table p (id int primary key, name char unique);
         create table c (k int primary key, p int references p, a int, b int);
         insert into p values (0, 'zero'), (1, 'one'), (2, 'two'), (3, 'three');",
    )
    .unwrap();
    let mut seen = HashSet::new();
    for (k, a, b) in rows {
        if seen.insert(*k) {
            s.execute(&format!("insert into c values ({k}, {}, {a}, {b})", a.rem_euclid(4))).unwrap();
        }
    }
    (dir, e)
}

const TEMPLATES: &[&str] = &[
    "select * from c where k = {x}",
    "select k, a from c where a = {x} and b > {y}",
    "select * from c where k = {x} or b = {y}",
    "select c.k, p.name from c, p where c.p = p.id and c.a < {x}",
    "select p.name, c.b from p, c where p.id = c.p and p.id = {y} order by c.b, c.k",
    "select * from p where name = 'two'",
    "select count(*), sum(b), min(a), max(b) from c where p = {y}",
    "select k from c where b = (select max(b) from c where a = {x})",
    "select x.k, y.k from c x, c y where x.k = y.a and y.b = {y}",
    "select k, (select name from p where id = c.p) from c where k between {y} and {x}",
    "select * from c where a in ({x}, {y}, 3)",
];

fn instantiate(t: &str, x: i64, y: i64) -> Query {
    parse_query(&t.replace("{x}", &x.to_string()).replace("{y}", &y.to_string())).unwrap()
}

fn multiset(mut rows: Vec<Vec<Value>>, ordered: bool) -> Vec<Vec<Value>> {
    if !ordered {
        rows.sort_by_key(|r| format!("{r:?}"));
    }
    rows
}

/// Every column-defining node's uids, in visit order.
fn defined_uids(plan: &Plan) -> Vec<Uid> {
    let mut out = vec![];
    plan.visit(&mut |p| match &p.node {
        Node::TableScan { cols, .. } | Node::IndexSeek { cols, .. } => out.extend(cols.iter().map(|(h, _)| *h)),
        Node::Rest(r) => out.extend(r.view_cols.iter().copied()),
        Node::Project { .. } | Node::Aggregate { .. } | Node::ViewInstance { .. } => out.extend(p.uids()),
        _ => {}
    });
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn review_preserves_results(
        rows in proptest::collection::vec((0i64..60, -5i64..10, -5i64..10), 0..40),
        x in -2i64..60,
        y in -2i64..10,
    ) {
        let (_d, e) = fixture(&rows);
        let tx = e.begin("owner", None).unwrap();
        for t in TEMPLATES {
            let q = instantiate(t, x, y);
            let bound = Binder::new(tx.db(), tx.user()).bind_query(&q, tx.role(), None).unwrap();
            let reviewed = review(bound.clone(), tx.db());
            let plain = Exec::detached(tx.db()).run(&bound).unwrap();
            let fast = Exec::detached(tx.db()).run(&reviewed).unwrap();
            let ordered = !q.order.is_empty();
            prop_assert_eq!(multiset(plain, ordered), multiset(fast, ordered), "{}", t);
        }
    }

    #[test]
    fn plans_instance_every_reference(x in -2i64..60, y in -2i64..10) {
        let (_d, e) = fixture(&[(1, 1, 1)]);
        let tx = e.begin("owner", None).unwrap();
        for t in TEMPLATES {
            let q = instantiate(t, x, y);
            let bound = Binder::new(tx.db(), tx.user()).bind_query(&q, tx.role(), None).unwrap();
            for plan in [bound.clone(), review(bound, tx.db())] {
                let uids = defined_uids(&plan);
                let distinct: HashSet<_> = uids.iter().collect();
                prop_assert_eq!(distinct.len(), uids.len(), "{}", t);
                prop_assert!(uids.iter().all(|u| u.is_heap()), "{}", t);
            }
        }
    }

    /// If validation accepts a reader after a concurrent change, the change
    /// was outside what it read, so its results must be unchanged.
    #[test]
    fn read_set_decides_result_validity(
        rows in proptest::collection::vec((0i64..30, -3i64..6, -3i64..6), 1..30),
        x in -1i64..30,
        y in -1i64..6,
        change in 0usize..5,
        target in 0i64..30,
        v in -3i64..6,
    ) {
        let (_d, e) = fixture(&rows);
        let mutation = match change {
            0 => format!("update c set b = {v} where k = {target}"),
            1 => format!("update c set a = {v} where k = {target}"),
            2 => format!("delete from c where k = {target}"),
            3 => format!("insert into c values ({}, 1, {v}, {v})", target + 100),
            _ => format!("update p set name = 'n{v}' where id = {}", target % 4),
        };
        for t in TEMPLATES {
            let q = instantiate(t, x, y);
            let mut tx = e.begin("owner", None).unwrap();
            let before = pyrlite::sqlfront::run_query(&mut tx, &q).unwrap();
            let mut w = Session::open(e.clone(), "owner", None).unwrap();
            w.execute(&mutation).unwrap();
            if e.check(&tx).is_ok() {
                let mut again = e.begin("owner", None).unwrap();
                let after = pyrlite::sqlfront::run_query(&mut again, &q).unwrap();
                prop_assert_eq!(format!("{before:?}"), format!("{after:?}"), "{} after {}", t, mutation);
            }
            let undo = match change {
                3 => format!("delete from c where k = {}", target + 100),
                _ => continue,
            };
            w.execute(&undo).unwrap();
        }
    }
}
