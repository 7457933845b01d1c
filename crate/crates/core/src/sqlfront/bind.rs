//! Name resolution and instancing: AST to uid-addressed plans.

use super::ast::*;
use super::parser::parse_query;
use super::plan::*;
use crate::engine::{check_privilege, Database, Detail};
use crate::error::{Error, Result};
use crate::physlog::{Domain, Privileges, Uid, Value};

/// Columns in scope for expression binding, chained to enclosing queries.
pub struct Scope<'s> {
    pub cols: Vec<PlanCol>,
    pub parent: Option<&'s Scope<'s>>,
}

/// Binds statements against one snapshot for one user. Heap uids are
/// allocated from a counter private to the binder, so every reference
/// bound by one binder is distinct.
pub struct Binder<'a> {
    pub db: &'a Database,
    pub user: Uid,
    next: i64,
}

impl<'a> Binder<'a> {
    pub fn new(db: &'a Database, user: Uid) -> Binder<'a> {
        Binder { db, user, next: 0 }
    }

    pub fn fresh(&mut self) -> Uid {
        self.next += 1;
        Uid::heap(self.next)
    }

    fn require_select(&self, object: Uid, role: Uid, name: &str) -> Result<()> {
        if check_privilege(self.db, self.user, role, object, Privileges::SELECT) {
            Ok(())
        } else {
            Err(Error::auth(format!("no SELECT privilege on {name}")))
        }
    }

    /// Resolve a relation name visible to `role`.
    pub fn resolve(&self, role: Uid, name: &str) -> Result<Uid> {
        self.db.resolve(role, name).ok_or_else(|| Error::not_found(format!("table or view {name}")))
    }

    /// Instance a FROM-clause reference.
    pub fn bind_from(&mut self, t: &TableRef, role: Uid) -> Result<Plan> {
        let uid = self.resolve(role, &t.name)?;
        let obj = self.db.require(uid)?.clone();
        let qual = Some(t.alias.clone().unwrap_or_else(|| t.name.clone()));
        match &obj.detail {
            Detail::Table(def) => {
                let mut cols = vec![];
                let mut pcs = vec![];
                for c in &def.columns {
                    let h = self.fresh();
                    let cd = self.db.column_def(*c)?;
                    cols.push((h, *c));
                    pcs.push(PlanCol {
                        uid: h,
                        name: self.db.name_of(*c),
                        qualifier: qual.clone(),
                        domain: Some(cd.domain.clone()),
                    });
                }
                Ok(Plan::new(Node::TableScan { table: uid, cols, used: None, role }, pcs))
            }
            Detail::View(v) => {
                self.require_select(uid, role, &obj.name)?;
                let q = parse_query(&v.source)?;
                let input = self.bind_query(&q, obj.definer, None)?;
                if !v.columns.is_empty() && v.columns.len() != input.columns.len() {
                    return Err(Error::statement(format!(
                        "view {} declares {} columns but its query yields {}",
                        obj.name,
                        v.columns.len(),
                        input.columns.len()
                    )));
                }
                let pcs = input
                    .columns
                    .iter()
                    .enumerate()
                    .map(|(i, c)| PlanCol {
                        uid: self.fresh(),
                        name: v.columns.get(i).cloned().unwrap_or_else(|| c.name.clone()),
                        qualifier: qual.clone(),
                        domain: c.domain.clone(),
                    })
                    .collect();
                Ok(Plan::new(Node::ViewInstance { view: uid, input: Box::new(input) }, pcs))
            }
            Detail::RestView(rv) => {
                self.require_select(uid, role, &obj.name)?;
                let using_cols = match rv.using {
                    Some(u) => self.db.table_def(u)?.columns.clone(),
                    None => vec![],
                };
                let copied = &using_cols[..using_cols.len().saturating_sub(1)];
                let mut sources = vec![];
                let mut pcs: Vec<PlanCol> = vec![];
                for (name, dom) in &rv.columns {
                    let src = match copied.iter().find(|c| self.db.name_of(**c) == *name) {
                        Some(c) => RestSourceCol::Using(*c),
                        None => RestSourceCol::Remote(name.clone()),
                    };
                    sources.push(src);
                    pcs.push(PlanCol { uid: self.fresh(), name: name.clone(), qualifier: qual.clone(), domain: Some(dom.clone()) });
                }
                let node = RestNode {
                    view: uid,
                    url: obj.meta_arg("URL").map(str::to_string),
                    using: rv.using,
                    using_cols,
                    view_cols: pcs.iter().map(|c| c.uid).collect(),
                    sources,
                    domains: rv.columns.iter().map(|(_, d)| d.clone()).collect(),
                    remote_filter: vec![],
                    using_filter: vec![],
                    fetch: None,
                    aggs: vec![],
                    user: obj.meta_arg("USER").map(str::to_string),
                    password: obj.meta_arg("PASSWORD").map(str::to_string),
                    role: obj.definer,
                };
                Ok(Plan::new(Node::Rest(Box::new(node)), pcs))
            }
            _ => Err(Error::statement(format!("{} is not a table or view", t.name))),
        }
    }

    pub fn bind_query(&mut self, q: &Query, role: Uid, parent: Option<&Scope>) -> Result<Plan> {
        let mut inputs = q.from.iter().map(|t| self.bind_from(t, role)).collect::<Result<Vec<_>>>()?;
        let mut plan = match inputs.len() {
            0 => Plan::new(Node::Single, vec![]),
            1 => inputs.pop().expect("one input"),
            _ => {
                let cols = inputs.iter().flat_map(|p| p.columns.clone()).collect();
                Plan::new(Node::Cross { inputs }, cols)
            }
        };
        let scope = Scope { cols: plan.columns.clone(), parent };
        if let Some(w) = &q.filter {
            let predicate = self.bind_expr(w, &scope, role, None)?;
            let cols = plan.columns.clone();
            plan = Plan::new(Node::Filter { input: Box::new(plan), predicate }, cols);
        }
        let agg_mode = q.items.iter().any(|i| matches!(i, SelectItem::Expr { expr, .. } if expr.contains_aggregate()))
            || q.order.iter().any(|o| o.expr.contains_aggregate());
        let mut aggs = vec![];
        let mut outs: Vec<(BExpr, String, Option<Domain>)> = vec![];
        for item in &q.items {
            match item {
                SelectItem::Star(qual) => {
                    if agg_mode {
                        return Err(Error::statement("* cannot be combined with aggregates"));
                    }
                    let mut any = false;
                    for c in &scope.cols {
                        if qual.is_none() || c.qualifier == *qual {
                            outs.push((BExpr::Col(c.uid), c.name.clone(), c.domain.clone()));
                            any = true;
                        }
                    }
                    if let (Some(q), false) = (qual, any) {
                        return Err(Error::not_found(format!("table {q} in FROM")));
                    }
                }
                SelectItem::Expr { expr, alias } => {
                    let b = self.bind_expr(expr, &scope, role, agg_mode.then_some(&mut aggs))?;
                    let name = match (alias, expr) {
                        (Some(a), _) => a.clone(),
                        (None, Expr::Column { name, .. }) => name.clone(),
                        (None, e) => e.to_string(),
                    };
                    let dom = self.domain_of(&b, &scope, &aggs);
                    outs.push((b, name, dom));
                }
            }
        }
        let mut keys = vec![];
        for o in &q.order {
            let alias_hit = match &o.expr {
                Expr::Column { qualifier: None, name } => {
                    let hits: Vec<usize> = q
                        .items
                        .iter()
                        .enumerate()
                        .filter(|(_, it)| matches!(it, SelectItem::Expr { alias: Some(a), .. } if a == name))
                        .map(|(i, _)| i)
                        .collect();
                    hits.first().map(|i| self.item_index(&q.items, *i))
                }
                _ => None,
            };
            let k = match alias_hit {
                Some(i) => outs[i].0.clone(),
                None => self.bind_expr(&o.expr, &scope, role, agg_mode.then_some(&mut aggs))?,
            };
            keys.push((k, o.desc));
        }
        if agg_mode {
            let cols = aggs
                .iter()
                .map(|a: &AggSpec| PlanCol { uid: a.out, name: a.func.name().into(), qualifier: None, domain: None })
                .collect();
            plan = Plan::new(Node::Aggregate { input: Box::new(plan), aggs }, cols);
        }
        if !keys.is_empty() {
            let cols = plan.columns.clone();
            plan = Plan::new(Node::Order { input: Box::new(plan), keys }, cols);
        }
        let mut exprs = vec![];
        let mut cols = vec![];
        for (e, name, domain) in outs {
            exprs.push(e);
            cols.push(PlanCol { uid: self.fresh(), name, qualifier: None, domain });
        }
        Ok(Plan::new(Node::Project { input: Box::new(plan), exprs }, cols))
    }

    /// Position in the expanded output list of select item `i`.
    fn item_index(&self, items: &[SelectItem], i: usize) -> usize {
        // stars are rejected before aliases can be combined with them in
        // ambiguous ways, so count expanded columns conservatively
        items[..i].iter().filter(|it| matches!(it, SelectItem::Expr { .. })).count()
            + items[..i].iter().filter(|it| matches!(it, SelectItem::Star(_))).count()
    }

    fn domain_of(&self, e: &BExpr, scope: &Scope, aggs: &[AggSpec]) -> Option<Domain> {
        match e {
            BExpr::Col(u) => {
                let mut s = Some(scope);
                while let Some(sc) = s {
                    if let Some(c) = sc.cols.iter().find(|c| c.uid == *u) {
                        return c.domain.clone();
                    }
                    s = sc.parent;
                }
                let a = aggs.iter().find(|a| a.out == *u)?;
                match a.func {
                    AggFunc::Count => Some(Domain::Integer),
                    AggFunc::Avg => None,
                    _ => self.domain_of(a.arg.as_ref()?, scope, &[]),
                }
            }
            BExpr::Cast(_, d) => Some(d.clone()),
            BExpr::Lit(Value::Char(_)) => Some(Domain::Char { length: None }),
            BExpr::Lit(Value::Integer(_)) => Some(Domain::Integer),
            _ => None,
        }
    }

    fn resolve_column(&self, qualifier: &Option<String>, name: &str, scope: &Scope) -> Result<(Uid, usize)> {
        let mut s = Some(scope);
        let mut depth = 0;
        while let Some(sc) = s {
            let hits: Vec<&PlanCol> = sc
                .cols
                .iter()
                .filter(|c| c.name == name && (qualifier.is_none() || c.qualifier == *qualifier))
                .collect();
            match hits.len() {
                0 => {}
                1 => return Ok((hits[0].uid, depth)),
                _ => return Err(Error::statement(format!("column reference {name} is ambiguous"))),
            }
            s = sc.parent;
            depth += 1;
        }
        let full = match qualifier {
            Some(q) => format!("{q}.{name}"),
            None => name.to_string(),
        };
        Err(Error::not_found(format!("column {full}")))
    }

    /// Bind an expression. In aggregate mode (`aggs` given) aggregate calls
    /// become references to new aggregate outputs and plain references to
    /// local columns are rejected.
    pub fn bind_expr(&mut self, e: &Expr, scope: &Scope, role: Uid, mut aggs: Option<&mut Vec<AggSpec>>) -> Result<BExpr> {
        macro_rules! rec {
            ($x:expr) => {
                self.bind_expr($x, scope, role, aggs.as_deref_mut())?
            };
        }
        Ok(match e {
            Expr::Literal(v) => BExpr::Lit(v.clone()),
            Expr::Column { qualifier, name } => {
                let (uid, depth) = self.resolve_column(qualifier, name, scope)?;
                if aggs.is_some() && depth == 0 {
                    return Err(Error::statement(format!(
                        "column {name} must be inside an aggregate (there is no GROUP BY)"
                    )));
                }
                BExpr::Col(uid)
            }
            Expr::Binary(op, l, r) => {
                let l = rec!(l);
                let r = rec!(r);
                BExpr::bin(*op, l, r)
            }
            Expr::Neg(x) => BExpr::Neg(Box::new(rec!(x))),
            Expr::Not(x) => BExpr::Not(Box::new(rec!(x))),
            Expr::IsNull { expr, negated } => BExpr::IsNull(Box::new(rec!(expr)), *negated),
            Expr::InList { expr, list, negated } => {
                let x = rec!(expr);
                let mut l = vec![];
                for i in list {
                    l.push(rec!(i));
                }
                BExpr::InList(Box::new(x), l, *negated)
            }
            Expr::Between { expr, low, high, negated } => {
                let x = rec!(expr);
                let lo = rec!(low);
                let hi = rec!(high);
                let b = BExpr::bin(BinOp::And, BExpr::bin(BinOp::Ge, x.clone(), lo), BExpr::bin(BinOp::Le, x, hi));
                if *negated {
                    BExpr::Not(Box::new(b))
                } else {
                    b
                }
            }
            Expr::Like { expr, pattern, negated } => {
                let x = rec!(expr);
                let p = rec!(pattern);
                BExpr::Like(Box::new(x), Box::new(p), *negated)
            }
            Expr::Case { operand, whens, otherwise } => {
                let operand = match operand {
                    Some(o) => Some(Box::new(rec!(o))),
                    None => None,
                };
                let mut ws = vec![];
                for (w, t) in whens {
                    let w = rec!(w);
                    let t = rec!(t);
                    ws.push((w, t));
                }
                let otherwise = match otherwise {
                    Some(o) => Some(Box::new(rec!(o))),
                    None => None,
                };
                BExpr::Case { operand, whens: ws, otherwise }
            }
            Expr::Cast { expr, domain } => BExpr::Cast(Box::new(rec!(expr)), domain.clone()),
            Expr::Agg { func, arg } => {
                let Some(list) = aggs else {
                    return Err(Error::statement(format!("aggregate {} is not allowed here", func.name())));
                };
                if arg.as_ref().is_some_and(|a| a.contains_aggregate()) {
                    return Err(Error::statement("aggregates cannot be nested"));
                }
                let arg = match arg {
                    Some(a) => Some(self.bind_expr(a, scope, role, None)?),
                    None => None,
                };
                let out = self.fresh();
                list.push(AggSpec { out, func: *func, arg });
                BExpr::Col(out)
            }
            Expr::Subquery(q) => {
                let p = self.bind_query(q, role, Some(scope))?;
                if p.columns.len() != 1 {
                    return Err(Error::Cardinality(format!(
                        "scalar subquery must yield one column, not {}",
                        p.columns.len()
                    )));
                }
                BExpr::Subquery(Box::new(p))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Author, Database};
    use crate::physlog::{Payload, Physical};

    fn db_with_table() -> Database {
        let by = Author { user: Uid(100), role: Uid(101) };
        let ps = vec![
            Physical::new(Uid(100), Payload::User { name: "o".into(), password: None }),
            Physical::new(Uid(101), Payload::Role { name: "r".into() }),
            Physical::new(Uid(102), Payload::Table { name: "T".into() }),
            Physical::new(Uid(103), Payload::Column { table: Uid(102), name: "A".into(), seq: 0, domain: Uid::INTEGER, not_null: false }),
        ];
        Database::empty("d").install_all(&ps, by).unwrap()
    }

    #[test]
    fn self_join_gets_distinct_instances() {
        let db = db_with_table();
        let mut b = Binder::new(&db, Uid(100));
        let q = parse_query("select t.a, u.a from t, t as u").unwrap();
        let p = b.bind_query(&q, Uid(101), None).unwrap();
        let mut scans = vec![];
        p.visit(&mut |n| {
            if let Node::TableScan { table, cols, .. } = &n.node {
                scans.push((*table, cols.clone()));
            }
        });
        assert_eq!(scans.len(), 2);
        assert_eq!(scans[0].0, scans[1].0);
        assert_ne!(scans[0].1[0].0, scans[1].1[0].0);
    }

    #[test]
    fn unknown_names_are_rejected() {
        let db = db_with_table();
        let mut b = Binder::new(&db, Uid(100));
        assert!(b.bind_query(&parse_query("select b from t").unwrap(), Uid(101), None).is_err());
        assert!(b.bind_query(&parse_query("select a from nowhere").unwrap(), Uid(101), None).is_err());
        assert!(b.bind_query(&parse_query("select a, count(*) from t").unwrap(), Uid(101), None).is_err());
    }
}
