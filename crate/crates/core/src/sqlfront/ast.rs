//! Abstract syntax. `Display` prints SQL that parses back to an equal tree.

use std::fmt;

use crate::physlog::{Domain, FkAction, MetaItem, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Concat,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "OR",
            BinOp::And => "AND",
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Concat => "||",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Concat => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul | BinOp::Div => 7,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        }
    }

    pub fn from_name(s: &str) -> Option<AggFunc> {
        Some(match s.to_ascii_uppercase().as_str() {
            "COUNT" => AggFunc::Count,
            "SUM" => AggFunc::Sum,
            "AVG" => AggFunc::Avg,
            "MIN" => AggFunc::Min,
            "MAX" => AggFunc::Max,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Literal(Value),
    Column { qualifier: Option<String>, name: String },
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    IsNull { expr: Box<Expr>, negated: bool },
    InList { expr: Box<Expr>, list: Vec<Expr>, negated: bool },
    Between { expr: Box<Expr>, low: Box<Expr>, high: Box<Expr>, negated: bool },
    Like { expr: Box<Expr>, pattern: Box<Expr>, negated: bool },
    Case { operand: Option<Box<Expr>>, whens: Vec<(Expr, Expr)>, otherwise: Option<Box<Expr>> },
    Cast { expr: Box<Expr>, domain: Domain },
    /// `arg` is `None` for `COUNT(*)`.
    Agg { func: AggFunc, arg: Option<Box<Expr>> },
    Subquery(Box<Query>),
}

impl Expr {
    pub fn col(name: &str) -> Expr {
        Expr::Column { qualifier: None, name: name.to_string() }
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn contains_aggregate(&self) -> bool {
        match self {
            Expr::Agg { .. } => true,
            Expr::Literal(_) | Expr::Column { .. } | Expr::Subquery(_) => false,
            Expr::Binary(_, l, r) => l.contains_aggregate() || r.contains_aggregate(),
            Expr::Neg(e) | Expr::Not(e) | Expr::IsNull { expr: e, .. } | Expr::Cast { expr: e, .. } => {
                e.contains_aggregate()
            }
            Expr::InList { expr, list, .. } => expr.contains_aggregate() || list.iter().any(Expr::contains_aggregate),
            Expr::Between { expr, low, high, .. } => {
                expr.contains_aggregate() || low.contains_aggregate() || high.contains_aggregate()
            }
            Expr::Like { expr, pattern, .. } => expr.contains_aggregate() || pattern.contains_aggregate(),
            Expr::Case { operand, whens, otherwise } => {
                operand.as_ref().is_some_and(|e| e.contains_aggregate())
                    || whens.iter().any(|(a, b)| a.contains_aggregate() || b.contains_aggregate())
                    || otherwise.as_ref().is_some_and(|e| e.contains_aggregate())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectItem {
    /// `*` or `q.*`.
    Star(Option<String>),
    Expr { expr: Expr, alias: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRef {
    pub name: String,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderItem {
    pub expr: Expr,
    pub desc: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub items: Vec<SelectItem>,
    pub from: Vec<TableRef>,
    pub filter: Option<Expr>,
    pub order: Vec<OrderItem>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub table: String,
    pub columns: Vec<String>,
    pub on_delete: Option<FkAction>,
    pub on_update: Option<FkAction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub domain: Domain,
    pub not_null: bool,
    pub primary: bool,
    pub unique: bool,
    pub references: Option<Reference>,
    pub check: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableConstraint {
    Primary(Vec<String>),
    Unique(Vec<String>),
    Foreign { columns: Vec<String>, reference: Reference },
    Check { name: Option<String>, expr: Expr },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RestSource {
    Url(String),
    Using(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropKind {
    Table,
    View,
    Role,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GrantTarget {
    /// Privileges, each optionally limited to columns, on an object.
    Privileges { privileges: Vec<(String, Vec<String>)>, object: String },
    Roles(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlterAction {
    AddColumn(ColumnSpec),
    AddConstraint(TableConstraint),
    Metadata(Vec<MetaItem>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    CreateTable { name: String, columns: Vec<ColumnSpec>, constraints: Vec<TableConstraint>, metadata: Vec<MetaItem> },
    CreateView { name: String, columns: Vec<String>, query: Query, metadata: Vec<MetaItem> },
    CreateRestView { name: String, columns: Vec<(String, Domain)>, source: RestSource, metadata: Vec<MetaItem> },
    CreateRole { name: String },
    CreateUser { name: String, password: Option<String> },
    Grant { target: GrantTarget, grantees: Vec<String> },
    Revoke { target: GrantTarget, grantees: Vec<String> },
    Insert { table: String, columns: Vec<String>, rows: Vec<Vec<Expr>> },
    Update { table: String, assignments: Vec<(String, Expr)>, filter: Option<Expr> },
    Delete { table: String, filter: Option<Expr> },
    Select(Query),
    Table(String),
    SetRole(String),
    AlterTable { table: String, action: AlterAction },
    AlterView { name: String, query: Query },
    Drop { kind: DropKind, name: String },
    Begin,
    Commit,
    Rollback,
}

/// Print an identifier so that it lexes back to the same name.
pub struct Ident<'a>(pub &'a str);

fn is_reserved(s: &str) -> bool {
    super::parser::RESERVED.contains(&s)
}

impl fmt::Display for Ident<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.0;
        let plain = !s.is_empty()
            && s.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$')
            && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$')
            && s.to_uppercase() == s
            && !is_reserved(s);
        if plain {
            f.write_str(s)
        } else {
            write!(f, "\"{}\"", s.replace('"', "\"\""))
        }
    }
}

fn list<T>(f: &mut fmt::Formatter<'_>, items: &[T], each: impl Fn(&mut fmt::Formatter<'_>, &T) -> fmt::Result) -> fmt::Result {
    for (i, x) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        each(f, x)?;
    }
    Ok(())
}

fn idents(f: &mut fmt::Formatter<'_>, names: &[String]) -> fmt::Result {
    list(f, names, |f, n| write!(f, "{}", Ident(n)))
}

/// SQL literal for a value.
pub fn literal(v: &Value) -> String {
    match v {
        Value::Null => "NULL".into(),
        Value::Integer(i) => i.to_string(),
        Value::Real(d) => {
            let s = d.to_string();
            if s.contains('.') {
                s
            } else {
                format!("{s}.0")
            }
        }
        Value::Char(s) => format!("'{}'", s.replace('\'', "''")),
        Value::Boolean(b) => if *b { "TRUE" } else { "FALSE" }.into(),
        Value::Date(d) => format!("DATE '{}'", d.format("%Y-%m-%d")),
    }
}

impl Expr {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        match self {
            Expr::Literal(v) => {
                let s = literal(v);
                if s.starts_with('-') && outer > 0 {
                    write!(f, "({s})")
                } else {
                    f.write_str(&s)
                }
            }
            Expr::Column { qualifier: Some(q), name } => write!(f, "{}.{}", Ident(q), Ident(name)),
            Expr::Column { qualifier: None, name } => write!(f, "{}", Ident(name)),
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                let paren = p < outer;
                if paren {
                    f.write_str("(")?;
                }
                l.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_prec(f, p + 1)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Neg(e) => {
                f.write_str("-")?;
                if matches!(**e, Expr::Neg(_)) {
                    write!(f, "({e})")
                } else {
                    e.fmt_prec(f, 8)
                }
            }
            Expr::Not(e) => {
                let paren = outer > 3;
                if paren {
                    f.write_str("(")?;
                }
                f.write_str("NOT ")?;
                e.fmt_prec(f, 3)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::IsNull { expr, negated } => {
                f.write_str("(")?;
                expr.fmt_prec(f, 5)?;
                write!(f, " IS {}NULL)", if *negated { "NOT " } else { "" })
            }
            Expr::InList { expr, list: items, negated } => {
                f.write_str("(")?;
                expr.fmt_prec(f, 5)?;
                write!(f, " {}IN (", if *negated { "NOT " } else { "" })?;
                list(f, items, |f, e| write!(f, "{e}"))?;
                f.write_str("))")
            }
            Expr::Between { expr, low, high, negated } => {
                f.write_str("(")?;
                expr.fmt_prec(f, 5)?;
                write!(f, " {}BETWEEN ", if *negated { "NOT " } else { "" })?;
                low.fmt_prec(f, 5)?;
                f.write_str(" AND ")?;
                high.fmt_prec(f, 5)?;
                f.write_str(")")
            }
            Expr::Like { expr, pattern, negated } => {
                f.write_str("(")?;
                expr.fmt_prec(f, 5)?;
                write!(f, " {}LIKE ", if *negated { "NOT " } else { "" })?;
                pattern.fmt_prec(f, 5)?;
                f.write_str(")")
            }
            Expr::Case { operand, whens, otherwise } => {
                f.write_str("CASE")?;
                if let Some(o) = operand {
                    write!(f, " {o}")?;
                }
                for (w, t) in whens {
                    write!(f, " WHEN {w} THEN {t}")?;
                }
                if let Some(e) = otherwise {
                    write!(f, " ELSE {e}")?;
                }
                f.write_str(" END")
            }
            Expr::Cast { expr, domain } => write!(f, "CAST({expr} AS {domain})"),
            Expr::Agg { func, arg: None } => write!(f, "{}(*)", func.name()),
            Expr::Agg { func, arg: Some(a) } => write!(f, "{}({a})", func.name()),
            Expr::Subquery(q) => write!(f, "({q})"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        list(f, &self.items, |f, it| match it {
            SelectItem::Star(None) => f.write_str("*"),
            SelectItem::Star(Some(q)) => write!(f, "{}.*", Ident(q)),
            SelectItem::Expr { expr, alias: None } => write!(f, "{expr}"),
            SelectItem::Expr { expr, alias: Some(a) } => write!(f, "{expr} AS {}", Ident(a)),
        })?;
        if !self.from.is_empty() {
            f.write_str(" FROM ")?;
            list(f, &self.from, |f, t| match &t.alias {
                None => write!(f, "{}", Ident(&t.name)),
                Some(a) => write!(f, "{} AS {}", Ident(&t.name), Ident(a)),
            })?;
        }
        if let Some(w) = &self.filter {
            write!(f, " WHERE {w}")?;
        }
        if !self.order.is_empty() {
            f.write_str(" ORDER BY ")?;
            list(f, &self.order, |f, o| write!(f, "{}{}", o.expr, if o.desc { " DESC" } else { "" }))?;
        }
        Ok(())
    }
}

fn action(a: FkAction) -> &'static str {
    match a {
        FkAction::Cascade => "CASCADE",
        FkAction::Restrict => "RESTRICT",
        FkAction::SetNull => "SET NULL",
    }
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "REFERENCES {}", Ident(&self.table))?;
        if !self.columns.is_empty() {
            f.write_str(" (")?;
            idents(f, &self.columns)?;
            f.write_str(")")?;
        }
        if let Some(a) = self.on_delete {
            write!(f, " ON DELETE {}", action(a))?;
        }
        if let Some(a) = self.on_update {
            write!(f, " ON UPDATE {}", action(a))?;
        }
        Ok(())
    }
}

impl fmt::Display for ColumnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", Ident(&self.name), self.domain)?;
        if self.not_null {
            f.write_str(" NOT NULL")?;
        }
        if self.primary {
            f.write_str(" PRIMARY KEY")?;
        }
        if self.unique {
            f.write_str(" UNIQUE")?;
        }
        if let Some(r) = &self.references {
            write!(f, " {r}")?;
        }
        if let Some(c) = &self.check {
            write!(f, " CHECK ({c})")?;
        }
        Ok(())
    }
}

impl fmt::Display for TableConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableConstraint::Primary(c) => {
                f.write_str("PRIMARY KEY (")?;
                idents(f, c)?;
                f.write_str(")")
            }
            TableConstraint::Unique(c) => {
                f.write_str("UNIQUE (")?;
                idents(f, c)?;
                f.write_str(")")
            }
            TableConstraint::Foreign { columns, reference } => {
                f.write_str("FOREIGN KEY (")?;
                idents(f, columns)?;
                write!(f, ") {reference}")
            }
            TableConstraint::Check { name: Some(n), expr } => write!(f, "CONSTRAINT {} CHECK ({expr})", Ident(n)),
            TableConstraint::Check { name: None, expr } => write!(f, "CHECK ({expr})"),
        }
    }
}

fn metadata(f: &mut fmt::Formatter<'_>, items: &[MetaItem]) -> fmt::Result {
    for m in items {
        write!(f, " {}", m.word)?;
        if !m.ids.is_empty() {
            f.write_str("(")?;
            idents(f, &m.ids)?;
            f.write_str(")")?;
        }
        if let Some(a) = &m.arg {
            write!(f, " {}", literal(&Value::Char(a.clone())))?;
        }
    }
    Ok(())
}

impl fmt::Display for GrantTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrantTarget::Privileges { privileges, object } => {
                list(f, privileges, |f, (p, cols)| {
                    f.write_str(p)?;
                    if !cols.is_empty() {
                        f.write_str(" (")?;
                        idents(f, cols)?;
                        f.write_str(")")?;
                    }
                    Ok(())
                })?;
                write!(f, " ON {}", Ident(object))
            }
            GrantTarget::Roles(r) => idents(f, r),
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::CreateTable { name, columns, constraints, metadata: m } => {
                write!(f, "CREATE TABLE {} (", Ident(name))?;
                list(f, columns, |f, c| write!(f, "{c}"))?;
                for c in constraints {
                    write!(f, ", {c}")?;
                }
                f.write_str(")")?;
                metadata(f, m)
            }
            Statement::CreateView { name, columns, query, metadata: m } => {
                write!(f, "CREATE VIEW {}", Ident(name))?;
                if !columns.is_empty() {
                    f.write_str(" (")?;
                    idents(f, columns)?;
                    f.write_str(")")?;
                }
                write!(f, " AS {query}")?;
                metadata(f, m)
            }
            Statement::CreateRestView { name, columns, source, metadata: m } => {
                write!(f, "CREATE VIEW {} OF (", Ident(name))?;
                list(f, columns, |f, (c, d)| write!(f, "{} {d}", Ident(c)))?;
                f.write_str(") AS GET")?;
                match source {
                    RestSource::Url(u) => write!(f, " {}", literal(&Value::Char(u.clone())))?,
                    RestSource::Using(t) => write!(f, " USING {}", Ident(t))?,
                }
                metadata(f, m)
            }
            Statement::CreateRole { name } => write!(f, "CREATE ROLE {}", Ident(name)),
            Statement::CreateUser { name, password: None } => write!(f, "CREATE USER {}", Ident(name)),
            Statement::CreateUser { name, password: Some(p) } => {
                write!(f, "CREATE USER {} PASSWORD {}", Ident(name), literal(&Value::Char(p.clone())))
            }
            Statement::Grant { target, grantees } => {
                write!(f, "GRANT {target} TO ")?;
                idents(f, grantees)
            }
            Statement::Revoke { target, grantees } => {
                write!(f, "REVOKE {target} FROM ")?;
                idents(f, grantees)
            }
            Statement::Insert { table, columns, rows } => {
                write!(f, "INSERT INTO {}", Ident(table))?;
                if !columns.is_empty() {
                    f.write_str(" (")?;
                    idents(f, columns)?;
                    f.write_str(")")?;
                }
                f.write_str(" VALUES ")?;
                list(f, rows, |f, r| {
                    f.write_str("(")?;
                    list(f, r, |f, e| write!(f, "{e}"))?;
                    f.write_str(")")
                })
            }
            Statement::Update { table, assignments, filter } => {
                write!(f, "UPDATE {} SET ", Ident(table))?;
                list(f, assignments, |f, (c, e)| write!(f, "{} = {e}", Ident(c)))?;
                if let Some(w) = filter {
                    write!(f, " WHERE {w}")?;
                }
                Ok(())
            }
            Statement::Delete { table, filter } => {
                write!(f, "DELETE FROM {}", Ident(table))?;
                if let Some(w) = filter {
                    write!(f, " WHERE {w}")?;
                }
                Ok(())
            }
            Statement::Select(q) => write!(f, "{q}"),
            Statement::Table(t) => write!(f, "TABLE {}", Ident(t)),
            Statement::SetRole(r) => write!(f, "SET ROLE {}", Ident(r)),
            Statement::AlterTable { table, action } => {
                write!(f, "ALTER TABLE {} ", Ident(table))?;
                match action {
                    AlterAction::AddColumn(c) => write!(f, "ADD {c}"),
                    AlterAction::AddConstraint(c) => write!(f, "ADD {c}"),
                    AlterAction::Metadata(m) => {
                        f.write_str("SET")?;
                        metadata(f, m)
                    }
                }
            }
            Statement::AlterView { name, query } => write!(f, "ALTER VIEW {} AS {query}", Ident(name)),
            Statement::Drop { kind, name } => {
                let k = match kind {
                    DropKind::Table => "TABLE",
                    DropKind::View => "VIEW",
                    DropKind::Role => "ROLE",
                    DropKind::User => "USER",
                };
                write!(f, "DROP {k} {}", Ident(name))
            }
            Statement::Begin => f.write_str("BEGIN"),
            Statement::Commit => f.write_str("COMMIT"),
            Statement::Rollback => f.write_str("ROLLBACK"),
        }
    }
}
