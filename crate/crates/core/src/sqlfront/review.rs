//! RowSet review: rewrite a bound plan using the indexes and filters that
//! are known once every reference is instanced.
//!
//! Rules run bottom-up to a fixpoint; a final top-down pass records which
//! base columns and remote columns each leaf actually needs. Filters never
//! move below an Aggregate.

use std::collections::{BTreeSet, HashMap};

use super::ast::BinOp;
use super::plan::*;
use crate::engine::Database;
use crate::physlog::{IndexKind, Uid};

const MAX_PASSES: usize = 64;

pub fn review(plan: Plan, db: &Database) -> Plan {
    let need: BTreeSet<Uid> = plan.uids().into_iter().collect();
    review_with_need(plan, db, &need)
}

/// Review a plan whose consumer reads only the columns in `need`.
pub fn review_with_need(plan: Plan, db: &Database, need: &BTreeSet<Uid>) -> Plan {
    let mut p = plan;
    for _ in 0..MAX_PASSES {
        let next = rewrite(p.clone(), db);
        if next == p {
            break;
        }
        p = next;
    }
    prune(p, need, db)
}

/// Apply `f` to every subquery plan directly inside `e`.
fn map_plans(e: BExpr, f: &mut dyn FnMut(Plan) -> Plan) -> BExpr {
    let mut m = |x: BExpr| map_plans(x, f);
    match e {
        BExpr::Lit(_) | BExpr::Col(_) => e,
        BExpr::Binary(op, l, r) => {
            let l = m(*l);
            let r = m(*r);
            BExpr::bin(op, l, r)
        }
        BExpr::Neg(x) => BExpr::Neg(Box::new(m(*x))),
        BExpr::Not(x) => BExpr::Not(Box::new(m(*x))),
        BExpr::IsNull(x, n) => BExpr::IsNull(Box::new(m(*x)), n),
        BExpr::InList(x, l, n) => {
            let x = m(*x);
            BExpr::InList(Box::new(x), l.into_iter().map(&mut m).collect(), n)
        }
        BExpr::Like(x, p, n) => {
            let x = m(*x);
            BExpr::Like(Box::new(x), Box::new(m(*p)), n)
        }
        BExpr::Case { operand, whens, otherwise } => {
            let operand = operand.map(|o| Box::new(m(*o)));
            let whens = whens.into_iter().map(|(a, b)| (m(a), m(b))).collect();
            let otherwise = otherwise.map(|o| Box::new(m(*o)));
            BExpr::Case { operand, whens, otherwise }
        }
        BExpr::Cast(x, d) => BExpr::Cast(Box::new(m(*x)), d),
        BExpr::Subquery(p) => BExpr::Subquery(Box::new(f(*p))),
    }
}

/// Rebuild `plan` with `f` applied to each child and `g` to each expression.
fn map_node(plan: Plan, f: &mut dyn FnMut(Plan) -> Plan, g: &mut dyn FnMut(BExpr) -> BExpr) -> Plan {
    let Plan { node, columns } = plan;
    let node = match node {
        Node::IndexSeek { table, index, key, cols, used, role } => {
            Node::IndexSeek { table, index, key: key.into_iter().map(&mut *g).collect(), cols, used, role }
        }
        Node::Rest(mut r) => {
            r.remote_filter = std::mem::take(&mut r.remote_filter).into_iter().map(&mut *g).collect();
            r.using_filter = std::mem::take(&mut r.using_filter).into_iter().map(&mut *g).collect();
            Node::Rest(r)
        }
        Node::Filter { input, predicate } => Node::Filter { input: Box::new(f(*input)), predicate: g(predicate) },
        Node::Project { input, exprs } => {
            let input = Box::new(f(*input));
            Node::Project { input, exprs: exprs.into_iter().map(&mut *g).collect() }
        }
        Node::Order { input, keys } => {
            let input = Box::new(f(*input));
            Node::Order { input, keys: keys.into_iter().map(|(k, d)| (g(k), d)).collect() }
        }
        Node::Aggregate { input, aggs } => {
            let input = Box::new(f(*input));
            let aggs = aggs.into_iter().map(|a| AggSpec { arg: a.arg.map(&mut *g), ..a }).collect();
            Node::Aggregate { input, aggs }
        }
        Node::Cross { inputs } => Node::Cross { inputs: inputs.into_iter().map(&mut *f).collect() },
        Node::ViewInstance { view, input } => Node::ViewInstance { view, input: Box::new(f(*input)) },
        n @ (Node::TableScan { .. } | Node::Single) => n,
    };
    Plan { node, columns }
}

fn rewrite(plan: Plan, db: &Database) -> Plan {
    let plan = map_node(plan, &mut |c| rewrite(c, db), &mut |e| map_plans(e, &mut |p| rewrite(p, db)));
    let Plan { node, columns } = plan;
    match node {
        Node::Filter { input, predicate } => filter_rule(*input, predicate, columns, db),
        Node::Aggregate { input, aggs } => aggregate_rule(*input, aggs, columns),
        node => Plan { node, columns },
    }
}

fn filter(input: Plan, parts: Vec<BExpr>) -> Plan {
    match BExpr::and_all(parts) {
        Some(predicate) => {
            let cols = input.columns.clone();
            Plan::new(Node::Filter { input: Box::new(input), predicate }, cols)
        }
        None => input,
    }
}

fn filter_rule(input: Plan, predicate: BExpr, columns: Vec<PlanCol>, db: &Database) -> Plan {
    let unchanged = |input: Plan, predicate: BExpr| Plan::new(Node::Filter { input: Box::new(input), predicate }, columns.clone());
    let Plan { node, columns: in_cols } = input;
    match node {
        Node::Filter { input: inner, predicate: p0 } => {
            Plan::new(Node::Filter { input: inner, predicate: BExpr::bin(BinOp::And, p0, predicate) }, columns)
        }
        Node::Project { input: pi, exprs } => {
            let map: HashMap<Uid, BExpr> = in_cols.iter().map(|c| c.uid).zip(exprs.iter().cloned()).collect();
            let mut below = vec![];
            let mut above = vec![];
            for c in predicate.conjuncts() {
                let s = c.substitute(&map);
                if s.has_subquery() {
                    above.push(c);
                } else {
                    below.push(s);
                }
            }
            if below.is_empty() {
                return unchanged(Plan::new(Node::Project { input: pi, exprs }, in_cols), BExpr::and_all(above).expect("nonempty"));
            }
            let p = Plan::new(Node::Project { input: Box::new(filter(*pi, below)), exprs }, in_cols);
            filter(p, above)
        }
        Node::Order { input: oi, keys } => {
            Plan::new(Node::Order { input: Box::new(filter(*oi, vec![predicate])), keys }, in_cols)
        }
        Node::ViewInstance { view, input: vi } => {
            let map: HashMap<Uid, BExpr> =
                in_cols.iter().map(|c| c.uid).zip(vi.columns.iter().map(|c| BExpr::Col(c.uid))).collect();
            let inner = filter(*vi, vec![predicate.substitute(&map)]);
            Plan::new(Node::ViewInstance { view, input: Box::new(inner) }, in_cols)
        }
        Node::Cross { mut inputs } => {
            let sets: Vec<BTreeSet<Uid>> = inputs.iter().map(Plan::produced).collect();
            let all: BTreeSet<Uid> = sets.iter().flatten().copied().collect();
            let mut pushed: Vec<Vec<BExpr>> = vec![vec![]; inputs.len()];
            let mut above = vec![];
            for c in predicate.conjuncts() {
                let local: BTreeSet<Uid> = c.refs().intersection(&all).copied().collect();
                match sets.iter().position(|s| !local.is_empty() && local.is_subset(s)) {
                    Some(i) => pushed[i].push(c),
                    None => above.push(c),
                }
            }
            if pushed.iter().all(Vec::is_empty) {
                return unchanged(Plan::new(Node::Cross { inputs }, in_cols), BExpr::and_all(above).expect("nonempty"));
            }
            inputs = inputs.into_iter().zip(pushed).map(|(p, parts)| filter(p, parts)).collect();
            filter(Plan::new(Node::Cross { inputs }, in_cols), above)
        }
        Node::TableScan { table, cols, used, role } => match seek(db, table, &cols, predicate.clone()) {
            Some((index, key, rest)) => {
                let p = Plan::new(Node::IndexSeek { table, index, key, cols, used, role }, in_cols);
                filter(p, rest)
            }
            None => unchanged(Plan::new(Node::TableScan { table, cols, used, role }, in_cols), predicate),
        },
        Node::Rest(mut r) if r.aggs.is_empty() => {
            let mut above = vec![];
            let mut moved = false;
            for c in predicate.conjuncts() {
                let refs = c.refs();
                let pos: Option<Vec<usize>> =
                    refs.iter().map(|u| r.view_cols.iter().position(|v| v == u)).collect();
                match pos {
                    Some(pos) if !pos.is_empty() && !c.has_subquery() => {
                        if pos.iter().all(|i| matches!(r.sources[*i], RestSourceCol::Using(_))) {
                            r.using_filter.push(c);
                            moved = true;
                        } else if pos.iter().all(|i| matches!(r.sources[*i], RestSourceCol::Remote(_))) {
                            r.remote_filter.push(c);
                            moved = true;
                        } else {
                            above.push(c);
                        }
                    }
                    _ => above.push(c),
                }
            }
            let p = Plan::new(Node::Rest(r), in_cols);
            if moved {
                filter(p, above)
            } else {
                unchanged(p, BExpr::and_all(above).expect("nonempty"))
            }
        }
        node => unchanged(Plan::new(node, in_cols), predicate),
    }
}

/// Choose an index whose every column is fixed by an equality conjunct
/// whose other side does not depend on the scanned row.
fn seek(db: &Database, table: Uid, cols: &[(Uid, Uid)], predicate: BExpr) -> Option<(Uid, Vec<BExpr>, Vec<BExpr>)> {
    let def = db.table_def(table).ok()?;
    let mine: BTreeSet<Uid> = cols.iter().map(|(h, _)| *h).collect();
    let base_of = |h: Uid| cols.iter().find(|(x, _)| *x == h).map(|(_, b)| *b);
    let conj = predicate.conjuncts();
    // (conjunct index, base column, value expression)
    let mut eqs: Vec<(usize, Uid, BExpr)> = vec![];
    for (i, c) in conj.iter().enumerate() {
        if let BExpr::Binary(BinOp::Eq, l, r) = c {
            for (a, b) in [(l, r), (r, l)] {
                if let BExpr::Col(h) = **a {
                    let Some(base) = base_of(h) else { continue };
                    if b.has_subquery() || b.refs().iter().any(|u| mine.contains(u)) {
                        continue;
                    }
                    eqs.push((i, base, (**b).clone()));
                    break;
                }
            }
        }
    }
    if eqs.is_empty() {
        return None;
    }
    let rank = |k: &IndexKind| match k {
        IndexKind::Primary => 0,
        IndexKind::Unique => 1,
        IndexKind::Foreign { .. } => 2,
    };
    let mut candidates: Vec<(u8, Uid)> = def
        .indexes
        .iter()
        .filter_map(|ix| db.index_def(*ix).ok().map(|d| (rank(&d.kind), *ix)))
        .collect();
    candidates.sort();
    for (_, ix) in candidates {
        let idef = db.index_def(ix).ok()?;
        let mut used = vec![];
        let mut key = vec![];
        for c in &idef.columns {
            match eqs.iter().find(|(i, b, _)| b == c && !used.contains(i)) {
                Some((i, _, e)) => {
                    used.push(*i);
                    key.push(e.clone());
                }
                None => break,
            }
        }
        if key.len() == idef.columns.len() {
            let rest = conj.iter().enumerate().filter(|(i, _)| !used.contains(i)).map(|(_, c)| c.clone()).collect();
            return Some((ix, key, rest));
        }
    }
    None
}

fn aggregate_rule(input: Plan, aggs: Vec<AggSpec>, columns: Vec<PlanCol>) -> Plan {
    if let Node::Rest(r) = &input.node {
        let remote_arg = |a: &AggSpec| match &a.arg {
            None => true,
            Some(BExpr::Col(u)) => r
                .view_cols
                .iter()
                .position(|v| v == u)
                .is_some_and(|i| matches!(r.sources[i], RestSourceCol::Remote(_))),
            Some(_) => false,
        };
        if r.aggs.is_empty() && aggs.iter().all(remote_arg) {
            let mut r = r.clone();
            r.aggs = aggs;
            return Plan::new(Node::Rest(r), columns);
        }
    }
    Plan::new(Node::Aggregate { input: Box::new(input), aggs }, columns)
}

/// Record the base columns each scan needs and the remote columns each
/// RESTView fetch needs, given the uids needed above `plan`.
fn prune(plan: Plan, need: &BTreeSet<Uid>, db: &Database) -> Plan {
    let sub = |e: BExpr| map_plans(e, &mut |p| {
        let n = p.uids().into_iter().collect();
        prune(p, &n, db)
    });
    let mut need = need.clone();
    for e in plan.exprs() {
        need.extend(e.refs());
    }
    let Plan { node, columns } = plan;
    let node = match node {
        Node::TableScan { table, cols, role, .. } => {
            let used = cols.iter().filter(|(h, _)| need.contains(h)).map(|(_, b)| *b).collect();
            Node::TableScan { table, cols, used: Some(used), role }
        }
        Node::IndexSeek { table, index, key, cols, role, .. } => {
            let ix = db.index_def(index).map(|d| d.columns.clone()).unwrap_or_default();
            let used = cols.iter().filter(|(h, b)| need.contains(h) || ix.contains(b)).map(|(_, b)| *b).collect();
            Node::IndexSeek { table, index, key, cols, used: Some(used), role }
        }
        Node::Rest(mut r) => {
            r.fetch = if r.aggs.is_empty() {
                Some(
                    r.view_cols
                        .iter()
                        .zip(&r.sources)
                        .filter_map(|(u, s)| match s {
                            RestSourceCol::Remote(n) if need.contains(u) => Some(n.clone()),
                            _ => None,
                        })
                        .collect(),
                )
            } else {
                None
            };
            Node::Rest(r)
        }
        Node::ViewInstance { view, input } => {
            let inner: BTreeSet<Uid> = columns
                .iter()
                .zip(&input.columns)
                .filter(|(o, _)| need.contains(&o.uid))
                .map(|(_, i)| i.uid)
                .collect();
            Node::ViewInstance { view, input: Box::new(prune(*input, &inner, db)) }
        }
        node => {
            let p = map_node(Plan { node, columns: vec![] }, &mut |c| prune(c, &need, db), &mut |e| e);
            p.node
        }
    };
    map_node(Plan { node, columns }, &mut |c| c, &mut |e| sub(e))
}
