//! Bound, uid-addressed row set pipelines.
//!
//! Every reference to a table or view in a query is instanced: its columns
//! get fresh uids from the heap range, so two references to one table never
//! share a column uid. Expressions address columns only by uid.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::ast::{AggFunc, BinOp};
use crate::physlog::{Domain, Uid, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanCol {
    pub uid: Uid,
    pub name: String,
    /// Name the column can be qualified by in the enclosing query.
    pub qualifier: Option<String>,
    pub domain: Option<Domain>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub node: Node,
    /// Output columns in order.
    pub columns: Vec<PlanCol>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggSpec {
    pub out: Uid,
    pub func: AggFunc,
    /// `None` for `COUNT(*)`.
    pub arg: Option<BExpr>,
}

/// Where a RESTView column's values come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RestSourceCol {
    /// Fetched from the contributor under this name.
    Remote(String),
    /// Copied from this column of the using-table row.
    Using(Uid),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestNode {
    pub view: Uid,
    /// Contributor URL for a single-contributor view.
    pub url: Option<String>,
    pub using: Option<Uid>,
    /// Base columns of the using table in order; the last holds the
    /// contributor URL.
    pub using_cols: Vec<Uid>,
    /// Uids of the view's columns, aligned with `sources`. They are the
    /// node's output columns unless aggregates were absorbed.
    pub view_cols: Vec<Uid>,
    pub sources: Vec<RestSourceCol>,
    /// Declared domains of the view's columns, aligned with `sources`.
    pub domains: Vec<Domain>,
    /// Conjuncts over remote columns, sent to every contributor.
    pub remote_filter: Vec<BExpr>,
    /// Conjuncts over using-table columns, evaluated locally to choose
    /// contributors.
    pub using_filter: Vec<BExpr>,
    /// Remote column names requested; `None` requests all.
    pub fetch: Option<Vec<String>>,
    /// Aggregates computed remotely as registers. When present the node
    /// yields one row whose columns are the aggregate outputs.
    pub aggs: Vec<AggSpec>,
    pub user: Option<String>,
    pub password: Option<String>,
    /// Role under which the using table is read.
    pub role: Uid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    /// Full scan of an instanced table reference. `cols` pairs each output
    /// uid with the base column it reads.
    TableScan { table: Uid, cols: Vec<(Uid, Uid)>, used: Option<Vec<Uid>>, role: Uid },
    /// Rows whose `index` key equals `key` (a prefix for non-unique indexes).
    IndexSeek { table: Uid, index: Uid, key: Vec<BExpr>, cols: Vec<(Uid, Uid)>, used: Option<Vec<Uid>>, role: Uid },
    Rest(Box<RestNode>),
    Filter { input: Box<Plan>, predicate: BExpr },
    /// Output column `i` is `exprs[i]`.
    Project { input: Box<Plan>, exprs: Vec<BExpr> },
    Order { input: Box<Plan>, keys: Vec<(BExpr, bool)> },
    /// One output row; column `i` is `aggs[i]`.
    Aggregate { input: Box<Plan>, aggs: Vec<AggSpec> },
    Cross { inputs: Vec<Plan> },
    /// A view reference; output column `i` renames input column `i`.
    ViewInstance { view: Uid, input: Box<Plan> },
    /// One row with no columns.
    Single,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BExpr {
    Lit(Value),
    Col(Uid),
    Binary(BinOp, Box<BExpr>, Box<BExpr>),
    Neg(Box<BExpr>),
    Not(Box<BExpr>),
    IsNull(Box<BExpr>, bool),
    InList(Box<BExpr>, Vec<BExpr>, bool),
    Like(Box<BExpr>, Box<BExpr>, bool),
    Case { operand: Option<Box<BExpr>>, whens: Vec<(BExpr, BExpr)>, otherwise: Option<Box<BExpr>> },
    Cast(Box<BExpr>, Domain),
    /// Scalar subquery; may reference enclosing columns.
    Subquery(Box<Plan>),
}

impl BExpr {
    pub fn bin(op: BinOp, l: BExpr, r: BExpr) -> BExpr {
        BExpr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Split a predicate into its AND-ed conjuncts.
    pub fn conjuncts(self) -> Vec<BExpr> {
        match self {
            BExpr::Binary(BinOp::And, l, r) => {
                let mut v = l.conjuncts();
                v.extend(r.conjuncts());
                v
            }
            e => vec![e],
        }
    }

    pub fn and_all(mut parts: Vec<BExpr>) -> Option<BExpr> {
        if parts.is_empty() {
            return None;
        }
        let first = parts.remove(0);
        Some(parts.into_iter().fold(first, |a, b| BExpr::bin(BinOp::And, a, b)))
    }

    pub fn has_subquery(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, BExpr::Subquery(_)));
        found
    }

    fn walk(&self, f: &mut impl FnMut(&BExpr)) {
        f(self);
        match self {
            BExpr::Lit(_) | BExpr::Col(_) | BExpr::Subquery(_) => {}
            BExpr::Binary(_, l, r) | BExpr::Like(l, r, _) => {
                l.walk(f);
                r.walk(f);
            }
            BExpr::Neg(e) | BExpr::Not(e) | BExpr::IsNull(e, _) | BExpr::Cast(e, _) => e.walk(f),
            BExpr::InList(e, list, _) => {
                e.walk(f);
                list.iter().for_each(|x| x.walk(f));
            }
            BExpr::Case { operand, whens, otherwise } => {
                if let Some(o) = operand {
                    o.walk(f);
                }
                for (a, b) in whens {
                    a.walk(f);
                    b.walk(f);
                }
                if let Some(o) = otherwise {
                    o.walk(f);
                }
            }
        }
    }

    /// Column uids this expression reads, including free references made
    /// by its subqueries.
    pub fn refs(&self) -> BTreeSet<Uid> {
        let mut out = BTreeSet::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs(&self, out: &mut BTreeSet<Uid>) {
        self.walk(&mut |e| match e {
            BExpr::Col(u) => {
                out.insert(*u);
            }
            BExpr::Subquery(p) => out.extend(p.free_refs()),
            _ => {}
        });
    }

    /// Replace column references by expressions.
    pub fn substitute(&self, map: &HashMap<Uid, BExpr>) -> BExpr {
        let s = |e: &BExpr| e.substitute(map);
        let b = |e: &BExpr| Box::new(e.substitute(map));
        match self {
            BExpr::Lit(v) => BExpr::Lit(v.clone()),
            BExpr::Col(u) => map.get(u).cloned().unwrap_or(BExpr::Col(*u)),
            BExpr::Binary(op, l, r) => BExpr::Binary(*op, b(l), b(r)),
            BExpr::Neg(e) => BExpr::Neg(b(e)),
            BExpr::Not(e) => BExpr::Not(b(e)),
            BExpr::IsNull(e, n) => BExpr::IsNull(b(e), *n),
            BExpr::InList(e, l, n) => BExpr::InList(b(e), l.iter().map(s).collect(), *n),
            BExpr::Like(e, p, n) => BExpr::Like(b(e), b(p), *n),
            BExpr::Case { operand, whens, otherwise } => BExpr::Case {
                operand: operand.as_ref().map(|o| b(o)),
                whens: whens.iter().map(|(x, y)| (s(x), s(y))).collect(),
                otherwise: otherwise.as_ref().map(|o| b(o)),
            },
            BExpr::Cast(e, d) => BExpr::Cast(b(e), d.clone()),
            BExpr::Subquery(p) => BExpr::Subquery(Box::new(p.substitute_free(map))),
        }
    }

    /// Every subquery plan directly inside this expression.
    pub fn subplans(&self) -> Vec<&Plan> {
        let mut out = vec![];
        self.walk_subplans(&mut out);
        out
    }

    fn walk_subplans<'a>(&'a self, out: &mut Vec<&'a Plan>) {
        match self {
            BExpr::Subquery(p) => out.push(p),
            BExpr::Lit(_) | BExpr::Col(_) => {}
            BExpr::Binary(_, l, r) | BExpr::Like(l, r, _) => {
                l.walk_subplans(out);
                r.walk_subplans(out);
            }
            BExpr::Neg(e) | BExpr::Not(e) | BExpr::IsNull(e, _) | BExpr::Cast(e, _) => e.walk_subplans(out),
            BExpr::InList(e, list, _) => {
                e.walk_subplans(out);
                list.iter().for_each(|x| x.walk_subplans(out));
            }
            BExpr::Case { operand, whens, otherwise } => {
                if let Some(o) = operand {
                    o.walk_subplans(out);
                }
                for (a, b) in whens {
                    a.walk_subplans(out);
                    b.walk_subplans(out);
                }
                if let Some(o) = otherwise {
                    o.walk_subplans(out);
                }
            }
        }
    }
}

impl Plan {
    pub fn new(node: Node, columns: Vec<PlanCol>) -> Plan {
        Plan { node, columns }
    }

    pub fn uids(&self) -> Vec<Uid> {
        self.columns.iter().map(|c| c.uid).collect()
    }

    pub fn position(&self, uid: Uid) -> Option<usize> {
        self.columns.iter().position(|c| c.uid == uid)
    }

    pub fn children(&self) -> Vec<&Plan> {
        match &self.node {
            Node::TableScan { .. } | Node::IndexSeek { .. } | Node::Rest(_) | Node::Single => vec![],
            Node::Filter { input, .. }
            | Node::Project { input, .. }
            | Node::Order { input, .. }
            | Node::Aggregate { input, .. }
            | Node::ViewInstance { input, .. } => vec![input],
            Node::Cross { inputs } => inputs.iter().collect(),
        }
    }

    /// Expressions held directly by this node.
    pub fn exprs(&self) -> Vec<&BExpr> {
        match &self.node {
            Node::IndexSeek { key, .. } => key.iter().collect(),
            Node::Rest(r) => {
                r.remote_filter.iter().chain(&r.using_filter).chain(r.aggs.iter().filter_map(|a| a.arg.as_ref())).collect()
            }
            Node::Filter { predicate, .. } => vec![predicate],
            Node::Project { exprs, .. } => exprs.iter().collect(),
            Node::Order { keys, .. } => keys.iter().map(|(k, _)| k).collect(),
            Node::Aggregate { aggs, .. } => aggs.iter().filter_map(|a| a.arg.as_ref()).collect(),
            _ => vec![],
        }
    }

    /// Every uid defined anywhere in this plan: output columns of every
    /// node (excluding subquery plans).
    pub fn produced(&self) -> BTreeSet<Uid> {
        let mut out = BTreeSet::new();
        self.collect_produced(&mut out);
        out
    }

    fn collect_produced(&self, out: &mut BTreeSet<Uid>) {
        out.extend(self.uids());
        if let Node::Rest(r) = &self.node {
            out.extend(r.view_cols.iter().copied());
        }
        for c in self.children() {
            c.collect_produced(out);
        }
    }

    /// Uids referenced in this plan (including its subqueries) that it does
    /// not define: references to enclosing queries.
    pub fn free_refs(&self) -> BTreeSet<Uid> {
        let mut refs = BTreeSet::new();
        self.collect_all_refs(&mut refs);
        let produced = self.produced();
        refs.retain(|u| !produced.contains(u));
        refs
    }

    fn collect_all_refs(&self, out: &mut BTreeSet<Uid>) {
        for e in self.exprs() {
            out.extend(e.refs());
        }
        for c in self.children() {
            c.collect_all_refs(out);
        }
    }

    /// Substitute free references throughout the plan.
    pub fn substitute_free(&self, map: &HashMap<Uid, BExpr>) -> Plan {
        let sub = |e: &BExpr| e.substitute(map);
        let subp = |p: &Plan| Box::new(p.substitute_free(map));
        let node = match &self.node {
            Node::IndexSeek { table, index, key, cols, used, role } => Node::IndexSeek {
                table: *table,
                index: *index,
                key: key.iter().map(sub).collect(),
                cols: cols.clone(),
                used: used.clone(),
                role: *role,
            },
            Node::Rest(r) => {
                let mut r = r.clone();
                r.remote_filter = r.remote_filter.iter().map(sub).collect();
                r.using_filter = r.using_filter.iter().map(sub).collect();
                Node::Rest(r)
            }
            Node::Filter { input, predicate } => Node::Filter { input: subp(input), predicate: sub(predicate) },
            Node::Project { input, exprs } => Node::Project { input: subp(input), exprs: exprs.iter().map(sub).collect() },
            Node::Order { input, keys } => {
                Node::Order { input: subp(input), keys: keys.iter().map(|(k, d)| (sub(k), *d)).collect() }
            }
            Node::Aggregate { input, aggs } => Node::Aggregate {
                input: subp(input),
                aggs: aggs
                    .iter()
                    .map(|a| AggSpec { out: a.out, func: a.func, arg: a.arg.as_ref().map(sub) })
                    .collect(),
            },
            Node::Cross { inputs } => Node::Cross { inputs: inputs.iter().map(|p| p.substitute_free(map)).collect() },
            Node::ViewInstance { view, input } => Node::ViewInstance { view: *view, input: subp(input) },
            n @ (Node::TableScan { .. } | Node::Single) => n.clone(),
        };
        Plan { node, columns: self.columns.clone() }
    }

    /// Visit this plan, its descendants and every subquery plan.
    pub fn visit(&self, f: &mut impl FnMut(&Plan)) {
        f(self);
        for e in self.exprs() {
            for p in e.subplans() {
                p.visit(f);
            }
        }
        for c in self.children() {
            c.visit(f);
        }
    }

    /// Does the plan contain a node satisfying `pred`?
    pub fn any(&self, pred: impl Fn(&Node) -> bool) -> bool {
        let mut found = false;
        self.visit(&mut |p| found |= pred(&p.node));
        found
    }

    fn label(&self) -> String {
        let cols = |cs: &[(Uid, Uid)]| cs.iter().map(|(h, b)| format!("{h:?}={b:?}")).collect::<Vec<_>>().join(",");
        match &self.node {
            Node::TableScan { table, cols: c, .. } => format!("TableScan {table:?} [{}]", cols(c)),
            Node::IndexSeek { table, index, cols: c, .. } => format!("IndexSeek {table:?} via {index:?} [{}]", cols(c)),
            Node::Rest(r) => format!(
                "Rest {:?} filter={} using_filter={} aggs={} fetch={:?}",
                r.view,
                r.remote_filter.len(),
                r.using_filter.len(),
                r.aggs.len(),
                r.fetch
            ),
            Node::Filter { .. } => "Filter".into(),
            Node::Project { .. } => "Project".into(),
            Node::Order { .. } => "Order".into(),
            Node::Aggregate { .. } => "Aggregate".into(),
            Node::Cross { .. } => "Cross".into(),
            Node::ViewInstance { view, .. } => format!("ViewInstance {view:?}"),
            Node::Single => "Single".into(),
        }
    }

    fn fmt_indent(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        let names: Vec<String> = self.columns.iter().map(|c| format!("{}:{:?}", c.name, c.uid)).collect();
        writeln!(f, "{}{} -> ({})", "  ".repeat(depth), self.label(), names.join(", "))?;
        for c in self.children() {
            c.fmt_indent(f, depth + 1)?;
        }
        Ok(())
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_indent(f, 0)
    }
}
