//! Recursive-descent parser for the SQL subset.

use num_bigint::BigInt;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use crate::error::{Error, Result};
use crate::physlog::{Domain, FkAction, MetaItem, Value};

/// Words that cannot be used as undelimited identifiers.
pub const RESERVED: &[&str] = &[
    "AND", "AS", "ASC", "BETWEEN", "BY", "CASE", "CAST", "DESC", "ELSE", "END", "FALSE", "FROM", "GET", "IN", "IS",
    "LIKE", "NOT", "NULL", "OF", "ON", "OR", "ORDER", "SELECT", "SET", "THEN", "TO", "TRUE", "USING", "VALUES", "WHEN",
    "WHERE",
];

/// Accepted metadata words.
pub const METADATA_WORDS: &[&str] = &[
    "CAPTION", "LEGEND", "X", "Y", "HISTOGRAM", "LINE", "PIE", "POINTS", "URL", "MIME", "SQLAGENT", "USER", "PASSWORD",
    "JSON", "CSV", "ETAG", "MILLI", "MONOTONIC", "INVERTS", "FORMATS", "ATTRIBUTE", "ENTITY", "SUFFIX", "PREFIX", "IRI",
];

const CHART_WORDS: &[&str] = &["HISTOGRAM", "LINE", "PIE", "POINTS"];
const STRING_WORDS: &[&str] = &["URL", "MIME", "SQLAGENT", "USER", "PASSWORD", "IRI"];
const ID_WORDS: &[&str] = &["INVERTS", "FORMATS", "SUFFIX", "PREFIX"];

pub fn parse_statement(src: &str) -> Result<Statement> {
    let mut p = Parser::new(src)?;
    let s = p.statement()?;
    p.eat_sym(";");
    p.expect_eof()?;
    Ok(s)
}

/// Parse `;`-separated statements.
pub fn parse_statements(src: &str) -> Result<Vec<Statement>> {
    let mut p = Parser::new(src)?;
    let mut out = Vec::new();
    loop {
        while p.eat_sym(";") {}
        if p.peek() == &Tok::Eof {
            return Ok(out);
        }
        out.push(p.statement()?);
        if !p.eat_sym(";") {
            p.expect_eof()?;
        }
    }
}

pub fn parse_query(src: &str) -> Result<Query> {
    let mut p = Parser::new(src)?;
    let q = p.query()?;
    p.expect_eof()?;
    Ok(q)
}

pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

/// Parse a domain as written in a column definition, e.g. `numeric(8,2)`.
pub fn parse_domain(src: &str) -> Result<Domain> {
    let mut p = Parser::new(src)?;
    let d = p.domain()?;
    p.expect_eof()?;
    Ok(d)
}

/// Parse a selector such as `PIE(CUST,CUSTSALES)` into a metadata item.
pub fn parse_metadata(src: &str) -> Result<Vec<MetaItem>> {
    let mut p = Parser::new(src)?;
    let m = p.metadata()?;
    p.expect_eof()?;
    Ok(m)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Inside a view definition, metadata words cannot be implicit aliases.
    in_view: bool,
}

impl Parser {
    fn new(src: &str) -> Result<Parser> {
        Ok(Parser { toks: tokenize(src)?, pos: 0, in_view: false })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, what: &str) -> Result<T> {
        let t = &self.toks[self.pos];
        let found = match &t.tok {
            Tok::Word(w) => format!("\"{w}\""),
            Tok::Quoted(q) => format!("\"{q}\""),
            Tok::Str(s) => format!("'{s}'"),
            Tok::Num(n) => n.clone(),
            Tok::Sym(s) => format!("\"{s}\""),
            Tok::Eof => "end of input".into(),
        };
        Err(Error::Syntax { line: t.line, column: t.column, message: format!("expected {what}, found {found}") })
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(x) if x == w)
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<()> {
        if self.eat_word(w) {
            Ok(())
        } else {
            self.err(w)
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(x) if *x == s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(&format!("\"{s}\""))
        }
    }

    fn expect_eof(&self) -> Result<()> {
        if self.peek() == &Tok::Eof {
            Ok(())
        } else {
            self.err("end of statement")
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Word(w) if !RESERVED.contains(&w.as_str()) => {
                self.bump();
                Ok(w)
            }
            Tok::Quoted(q) => {
                self.bump();
                Ok(q)
            }
            _ => self.err("identifier"),
        }
    }

    fn ident_list(&mut self) -> Result<Vec<String>> {
        let mut v = vec![self.ident()?];
        while self.eat_sym(",") {
            v.push(self.ident()?);
        }
        Ok(v)
    }

    fn paren_idents(&mut self) -> Result<Vec<String>> {
        self.expect_sym("(")?;
        let v = self.ident_list()?;
        self.expect_sym(")")?;
        Ok(v)
    }

    fn string(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err("string literal"),
        }
    }

    fn unsigned(&mut self) -> Result<u32> {
        match self.peek().clone() {
            Tok::Num(n) => match n.parse::<u32>() {
                Ok(v) => {
                    self.bump();
                    Ok(v)
                }
                Err(_) => self.err("unsigned integer"),
            },
            _ => self.err("unsigned integer"),
        }
    }

    /// An alias not introduced by AS.
    fn implicit_alias(&mut self) -> Option<String> {
        match self.peek().clone() {
            Tok::Word(w) if !RESERVED.contains(&w.as_str()) => {
                if self.in_view && METADATA_WORDS.contains(&w.as_str()) {
                    return None;
                }
                self.bump();
                Some(w)
            }
            Tok::Quoted(q) => {
                self.bump();
                Some(q)
            }
            _ => None,
        }
    }

    fn statement(&mut self) -> Result<Statement> {
        let Tok::Word(w) = self.peek().clone() else {
            return self.err("statement");
        };
        match w.as_str() {
            "CREATE" => {
                self.bump();
                self.create()
            }
            "GRANT" | "REVOKE" => {
                self.bump();
                let target = self.grant_target()?;
                let grant = w == "GRANT";
                self.expect_word(if grant { "TO" } else { "FROM" })?;
                let grantees = self.ident_list()?;
                Ok(if grant { Statement::Grant { target, grantees } } else { Statement::Revoke { target, grantees } })
            }
            "INSERT" => {
                self.bump();
                self.expect_word("INTO")?;
                let table = self.ident()?;
                let columns = if matches!(self.peek(), Tok::Sym("(")) { self.paren_idents()? } else { vec![] };
                self.expect_word("VALUES")?;
                let mut rows = vec![];
                loop {
                    self.expect_sym("(")?;
                    rows.push(self.expr_list()?);
                    self.expect_sym(")")?;
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                Ok(Statement::Insert { table, columns, rows })
            }
            "UPDATE" => {
                self.bump();
                let table = self.ident()?;
                self.expect_word("SET")?;
                let mut assignments = vec![];
                loop {
                    let c = self.ident()?;
                    self.expect_sym("=")?;
                    assignments.push((c, self.expr()?));
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                let filter = if self.eat_word("WHERE") { Some(self.expr()?) } else { None };
                Ok(Statement::Update { table, assignments, filter })
            }
            "DELETE" => {
                self.bump();
                self.expect_word("FROM")?;
                let table = self.ident()?;
                let filter = if self.eat_word("WHERE") { Some(self.expr()?) } else { None };
                Ok(Statement::Delete { table, filter })
            }
            "SELECT" => Ok(Statement::Select(self.query()?)),
            "TABLE" => {
                self.bump();
                Ok(Statement::Table(self.ident()?))
            }
            "SET" => {
                self.bump();
                self.expect_word("ROLE")?;
                Ok(Statement::SetRole(self.ident()?))
            }
            "ALTER" => {
                self.bump();
                self.alter()
            }
            "DROP" => {
                self.bump();
                let kind = match self.bump() {
                    Tok::Word(k) if k == "TABLE" => DropKind::Table,
                    Tok::Word(k) if k == "VIEW" => DropKind::View,
                    Tok::Word(k) if k == "ROLE" => DropKind::Role,
                    Tok::Word(k) if k == "USER" => DropKind::User,
                    _ => {
                        self.pos -= 1;
                        return self.err("TABLE, VIEW, ROLE or USER");
                    }
                };
                Ok(Statement::Drop { kind, name: self.ident()? })
            }
            "BEGIN" | "START" => {
                self.bump();
                self.eat_word("TRANSACTION");
                Ok(Statement::Begin)
            }
            "COMMIT" | "ROLLBACK" => {
                self.bump();
                self.eat_word("WORK");
                Ok(if w == "COMMIT" { Statement::Commit } else { Statement::Rollback })
            }
            _ => self.err("statement"),
        }
    }

    fn create(&mut self) -> Result<Statement> {
        if self.eat_word("TABLE") {
            let name = self.ident()?;
            self.expect_sym("(")?;
            let mut columns = vec![];
            let mut constraints = vec![];
            loop {
                match self.table_constraint()? {
                    Some(c) => constraints.push(c),
                    None => columns.push(self.column_spec()?),
                }
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(")")?;
            let metadata = self.metadata()?;
            return Ok(Statement::CreateTable { name, columns, constraints, metadata });
        }
        if self.eat_word("VIEW") {
            let name = self.ident()?;
            if self.eat_word("OF") {
                self.expect_sym("(")?;
                let mut columns = vec![];
                loop {
                    let c = self.ident()?;
                    columns.push((c, self.domain()?));
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(")")?;
                self.expect_word("AS")?;
                self.expect_word("GET")?;
                let source = if self.eat_word("USING") {
                    RestSource::Using(self.ident()?)
                } else {
                    RestSource::Url(self.string()?)
                };
                let metadata = self.metadata()?;
                return Ok(Statement::CreateRestView { name, columns, source, metadata });
            }
            let columns = if matches!(self.peek(), Tok::Sym("(")) { self.paren_idents()? } else { vec![] };
            self.expect_word("AS")?;
            self.in_view = true;
            let query = self.query();
            self.in_view = false;
            let query = query?;
            let metadata = self.metadata()?;
            return Ok(Statement::CreateView { name, columns, query, metadata });
        }
        if self.eat_word("ROLE") {
            return Ok(Statement::CreateRole { name: self.ident()? });
        }
        if self.eat_word("USER") {
            let name = self.ident()?;
            let password = if self.eat_word("PASSWORD") { Some(self.string()?) } else { None };
            return Ok(Statement::CreateUser { name, password });
        }
        self.err("TABLE, VIEW, ROLE or USER")
    }

    fn alter(&mut self) -> Result<Statement> {
        if self.eat_word("VIEW") {
            let name = self.ident()?;
            self.expect_word("AS")?;
            self.in_view = true;
            let query = self.query();
            self.in_view = false;
            return Ok(Statement::AlterView { name, query: query? });
        }
        self.expect_word("TABLE")?;
        let table = self.ident()?;
        let action = if self.eat_word("ADD") {
            match self.table_constraint()? {
                Some(c) => AlterAction::AddConstraint(c),
                None => {
                    self.eat_word("COLUMN");
                    AlterAction::AddColumn(self.column_spec()?)
                }
            }
        } else if self.eat_word("SET") {
            let m = self.metadata()?;
            if m.is_empty() {
                return self.err("metadata");
            }
            AlterAction::Metadata(m)
        } else {
            return self.err("ADD or SET");
        };
        Ok(Statement::AlterTable { table, action })
    }

    fn grant_target(&mut self) -> Result<GrantTarget> {
        let mut items = vec![];
        loop {
            let name = match self.bump() {
                Tok::Word(w) => w,
                Tok::Quoted(q) => q,
                _ => {
                    self.pos -= 1;
                    return self.err("privilege or role");
                }
            };
            if name == "ALL" {
                self.eat_word("PRIVILEGES");
            }
            let cols = if matches!(self.peek(), Tok::Sym("(")) { self.paren_idents()? } else { vec![] };
            items.push((name, cols));
            if !self.eat_sym(",") {
                break;
            }
        }
        if self.eat_word("ON") {
            if !self.eat_word("TABLE") {
                self.eat_word("VIEW");
            }
            let object = self.ident()?;
            return Ok(GrantTarget::Privileges { privileges: items, object });
        }
        if items.iter().any(|(_, c)| !c.is_empty()) {
            return self.err("ON");
        }
        Ok(GrantTarget::Roles(items.into_iter().map(|(n, _)| n).collect()))
    }

    fn table_constraint(&mut self) -> Result<Option<TableConstraint>> {
        let named = if self.is_word("CONSTRAINT") {
            self.bump();
            Some(self.ident()?)
        } else {
            None
        };
        let c = if self.is_word("PRIMARY") {
            self.bump();
            self.expect_word("KEY")?;
            TableConstraint::Primary(self.paren_idents()?)
        } else if self.is_word("UNIQUE") && matches!(self.peek_at(1), Tok::Sym("(")) {
            self.bump();
            TableConstraint::Unique(self.paren_idents()?)
        } else if self.is_word("FOREIGN") {
            self.bump();
            self.expect_word("KEY")?;
            let columns = self.paren_idents()?;
            let reference = self.reference()?;
            TableConstraint::Foreign { columns, reference }
        } else if self.is_word("CHECK") {
            self.bump();
            self.expect_sym("(")?;
            let expr = self.expr()?;
            self.expect_sym(")")?;
            return Ok(Some(TableConstraint::Check { name: named, expr }));
        } else if named.is_some() {
            return self.err("PRIMARY KEY, UNIQUE, FOREIGN KEY or CHECK");
        } else {
            return Ok(None);
        };
        Ok(Some(c))
    }

    fn reference(&mut self) -> Result<Reference> {
        self.expect_word("REFERENCES")?;
        let table = self.ident()?;
        let columns = if matches!(self.peek(), Tok::Sym("(")) { self.paren_idents()? } else { vec![] };
        let (mut on_delete, mut on_update) = (None, None);
        while self.is_word("ON") {
            self.bump();
            let del = if self.eat_word("DELETE") {
                true
            } else if self.eat_word("UPDATE") {
                false
            } else {
                return self.err("DELETE or UPDATE");
            };
            let a = if self.eat_word("CASCADE") {
                FkAction::Cascade
            } else if self.eat_word("RESTRICT") {
                FkAction::Restrict
            } else if self.eat_word("SET") {
                self.expect_word("NULL")?;
                FkAction::SetNull
            } else if self.eat_word("NO") {
                self.expect_word("ACTION")?;
                FkAction::Restrict
            } else {
                return self.err("CASCADE, RESTRICT or SET NULL");
            };
            if del {
                on_delete = Some(a);
            } else {
                on_update = Some(a);
            }
        }
        Ok(Reference { table, columns, on_delete, on_update })
    }

    fn column_spec(&mut self) -> Result<ColumnSpec> {
        let name = self.ident()?;
        let domain = self.domain()?;
        let mut c = ColumnSpec { name, domain, not_null: false, primary: false, unique: false, references: None, check: None };
        loop {
            if self.eat_word("NOT") {
                self.expect_word("NULL")?;
                c.not_null = true;
            } else if self.eat_word("NULL") {
            } else if self.eat_word("PRIMARY") {
                self.expect_word("KEY")?;
                c.primary = true;
            } else if self.eat_word("UNIQUE") {
                c.unique = true;
            } else if self.is_word("REFERENCES") {
                c.references = Some(self.reference()?);
            } else if self.eat_word("CHECK") {
                self.expect_sym("(")?;
                c.check = Some(self.expr()?);
                self.expect_sym(")")?;
            } else {
                return Ok(c);
            }
        }
    }

    fn domain(&mut self) -> Result<Domain> {
        let Tok::Word(w) = self.peek().clone() else {
            return self.err("data type");
        };
        self.bump();
        let d = match w.as_str() {
            "INT" | "INTEGER" | "BIGINT" | "SMALLINT" => Domain::Integer,
            "NUMERIC" | "DECIMAL" | "DEC" => {
                let (mut precision, mut scale) = (None, None);
                if self.eat_sym("(") {
                    precision = Some(self.unsigned()?);
                    if self.eat_sym(",") {
                        scale = Some(self.unsigned()?);
                    }
                    self.expect_sym(")")?;
                }
                Domain::Numeric { precision, scale }
            }
            "REAL" | "FLOAT" => Domain::Real,
            "DOUBLE" => {
                self.eat_word("PRECISION");
                Domain::Real
            }
            "CHAR" | "CHARACTER" | "VARCHAR" | "STRING" => {
                self.eat_word("VARYING");
                let mut length = None;
                if self.eat_sym("(") {
                    length = Some(self.unsigned()?);
                    self.expect_sym(")")?;
                }
                Domain::Char { length }
            }
            "BOOLEAN" | "BOOL" => Domain::Boolean,
            "DATE" => Domain::Date,
            _ => {
                self.pos -= 1;
                return self.err("data type");
            }
        };
        Ok(d)
    }

    fn metadata(&mut self) -> Result<Vec<MetaItem>> {
        let mut out = vec![];
        loop {
            let word = match self.peek() {
                Tok::Eof | Tok::Sym(";") => return Ok(out),
                Tok::Word(w) if METADATA_WORDS.contains(&w.as_str()) => w.clone(),
                Tok::Word(w) => {
                    let t = &self.toks[self.pos];
                    return Err(Error::Syntax {
                        line: t.line,
                        column: t.column,
                        message: format!("unknown metadata word {w}; accepted words are {}", METADATA_WORDS.join(", ")),
                    });
                }
                _ => return self.err("metadata word"),
            };
            self.bump();
            let mut item = MetaItem::flag(&word);
            if CHART_WORDS.contains(&word.as_str()) && matches!(self.peek(), Tok::Sym("(")) {
                item.ids = self.paren_idents()?;
            } else if ID_WORDS.contains(&word.as_str()) {
                item.ids = vec![self.ident()?];
            }
            if STRING_WORDS.contains(&word.as_str()) {
                item.arg = Some(self.string()?);
            } else if let Tok::Str(s) = self.peek().clone() {
                self.bump();
                item.arg = Some(s);
            }
            out.push(item);
        }
    }

    fn query(&mut self) -> Result<Query> {
        self.expect_word("SELECT")?;
        let mut items = vec![];
        loop {
            if self.eat_sym("*") {
                items.push(SelectItem::Star(None));
            } else if matches!(self.peek(), Tok::Word(_) | Tok::Quoted(_))
                && matches!(self.peek_at(1), Tok::Sym("."))
                && matches!(self.peek_at(2), Tok::Sym("*"))
            {
                let q = self.ident()?;
                self.bump();
                self.bump();
                items.push(SelectItem::Star(Some(q)));
            } else {
                let expr = self.expr()?;
                let alias = if self.eat_word("AS") { Some(self.ident()?) } else { self.implicit_alias() };
                items.push(SelectItem::Expr { expr, alias });
            }
            if !self.eat_sym(",") {
                break;
            }
        }
        let mut from = vec![];
        if self.eat_word("FROM") {
            loop {
                let name = self.ident()?;
                let alias = if self.eat_word("AS") { Some(self.ident()?) } else { self.implicit_alias() };
                from.push(TableRef { name, alias });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let filter = if self.eat_word("WHERE") { Some(self.expr()?) } else { None };
        let mut order = vec![];
        if self.eat_word("ORDER") {
            self.expect_word("BY")?;
            loop {
                let expr = self.expr()?;
                let desc = if self.eat_word("DESC") {
                    true
                } else {
                    self.eat_word("ASC");
                    false
                };
                order.push(OrderItem { expr, desc });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        Ok(Query { items, from, filter, order })
    }

    fn expr_list(&mut self) -> Result<Vec<Expr>> {
        let mut v = vec![self.expr()?];
        while self.eat_sym(",") {
            v.push(self.expr()?);
        }
        Ok(v)
    }

    pub fn expr(&mut self) -> Result<Expr> {
        let mut l = self.and_expr()?;
        while self.eat_word("OR") {
            let r = self.and_expr()?;
            l = Expr::bin(BinOp::Or, l, r);
        }
        Ok(l)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut l = self.not_expr()?;
        while self.eat_word("AND") {
            let r = self.not_expr()?;
            l = Expr::bin(BinOp::And, l, r);
        }
        Ok(l)
    }

    fn not_expr(&mut self) -> Result<Expr> {
        if self.eat_word("NOT") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr> {
        let mut l = self.predicate()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("=") => BinOp::Eq,
                Tok::Sym("<>") | Tok::Sym("!=") => BinOp::Ne,
                Tok::Sym("<") => BinOp::Lt,
                Tok::Sym("<=") => BinOp::Le,
                Tok::Sym(">") => BinOp::Gt,
                Tok::Sym(">=") => BinOp::Ge,
                _ => return Ok(l),
            };
            self.bump();
            let r = self.predicate()?;
            l = Expr::bin(op, l, r);
        }
    }

    /// An operand followed by IS NULL, IN, BETWEEN or LIKE.
    fn predicate(&mut self) -> Result<Expr> {
        let e = self.additive(5)?;
        if self.eat_word("IS") {
            let negated = self.eat_word("NOT");
            self.expect_word("NULL")?;
            return Ok(Expr::IsNull { expr: Box::new(e), negated });
        }
        let negated = if self.is_word("NOT")
            && matches!(self.peek_at(1), Tok::Word(w) if w == "IN" || w == "BETWEEN" || w == "LIKE")
        {
            self.bump();
            true
        } else {
            false
        };
        if self.eat_word("IN") {
            self.expect_sym("(")?;
            let list = self.expr_list()?;
            self.expect_sym(")")?;
            return Ok(Expr::InList { expr: Box::new(e), list, negated });
        }
        if self.eat_word("BETWEEN") {
            let low = self.additive(5)?;
            self.expect_word("AND")?;
            let high = self.additive(5)?;
            return Ok(Expr::Between { expr: Box::new(e), low: Box::new(low), high: Box::new(high), negated });
        }
        if self.eat_word("LIKE") {
            let pattern = self.additive(5)?;
            return Ok(Expr::Like { expr: Box::new(e), pattern: Box::new(pattern), negated });
        }
        if negated {
            return self.err("IN, BETWEEN or LIKE");
        }
        Ok(e)
    }

    /// Binary operators of precedence `min` and above (concatenation,
    /// additive, multiplicative), left associative.
    fn additive(&mut self, min: u8) -> Result<Expr> {
        let mut l = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("||") => BinOp::Concat,
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                Tok::Sym("*") => BinOp::Mul,
                Tok::Sym("/") => BinOp::Div,
                _ => return Ok(l),
            };
            if op.precedence() < min {
                return Ok(l);
            }
            self.bump();
            let r = self.additive(op.precedence() + 1)?;
            l = Expr::bin(op, l, r);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_sym("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_sym("+") {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                let v = if n.contains(['.', 'e', 'E']) {
                    Value::Real(n.parse().map_err(|_| Error::typ(format!("bad number {n}")))?)
                } else {
                    Value::Integer(n.parse::<BigInt>().map_err(|_| Error::typ(format!("bad number {n}")))?)
                };
                v.check_bounds()?;
                Ok(Expr::Literal(v))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Literal(Value::Char(s)))
            }
            Tok::Sym("(") => {
                self.bump();
                if self.is_word("SELECT") {
                    let q = self.query()?;
                    self.expect_sym(")")?;
                    return Ok(Expr::Subquery(Box::new(q)));
                }
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Word(w) => match w.as_str() {
                "NULL" => {
                    self.bump();
                    Ok(Expr::Literal(Value::Null))
                }
                "TRUE" | "FALSE" => {
                    self.bump();
                    Ok(Expr::Literal(Value::Boolean(w == "TRUE")))
                }
                "DATE" if matches!(self.peek_at(1), Tok::Str(_)) => {
                    self.bump();
                    let s = self.string()?;
                    let d = chrono::NaiveDate::parse_from_str(&s, "%Y-%m-%d")
                        .map_err(|_| Error::typ(format!("bad date literal '{s}'")))?;
                    Ok(Expr::Literal(Value::Date(d)))
                }
                "CASE" => {
                    self.bump();
                    let operand = if self.is_word("WHEN") { None } else { Some(Box::new(self.expr()?)) };
                    let mut whens = vec![];
                    while self.eat_word("WHEN") {
                        let c = self.expr()?;
                        self.expect_word("THEN")?;
                        whens.push((c, self.expr()?));
                    }
                    if whens.is_empty() {
                        return self.err("WHEN");
                    }
                    let otherwise = if self.eat_word("ELSE") { Some(Box::new(self.expr()?)) } else { None };
                    self.expect_word("END")?;
                    Ok(Expr::Case { operand, whens, otherwise })
                }
                "CAST" => {
                    self.bump();
                    self.expect_sym("(")?;
                    let e = self.expr()?;
                    self.expect_word("AS")?;
                    let domain = self.domain()?;
                    self.expect_sym(")")?;
                    Ok(Expr::Cast { expr: Box::new(e), domain })
                }
                _ => {
                    if let (Some(func), Tok::Sym("(")) = (AggFunc::from_name(&w), self.peek_at(1)) {
                        self.bump();
                        self.bump();
                        let arg = if func == AggFunc::Count && self.eat_sym("*") {
                            None
                        } else {
                            Some(Box::new(self.expr()?))
                        };
                        self.expect_sym(")")?;
                        return Ok(Expr::Agg { func, arg });
                    }
                    self.column_ref()
                }
            },
            Tok::Quoted(_) => self.column_ref(),
            _ => self.err("expression"),
        }
    }

    fn column_ref(&mut self) -> Result<Expr> {
        let first = self.ident()?;
        if matches!(self.peek(), Tok::Sym(".")) && !matches!(self.peek_at(1), Tok::Sym("*")) {
            self.bump();
            let name = self.ident()?;
            return Ok(Expr::Column { qualifier: Some(first), name });
        }
        Ok(Expr::Column { qualifier: None, name: first })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sales_table() {
        let s = parse_statement("create table sales (cust char(12) primary key, custSales numeric(8,2))").unwrap();
        let Statement::CreateTable { name, columns, .. } = s else { panic!() };
        assert_eq!(name, "SALES");
        assert_eq!(columns[0].name, "CUST");
        assert!(columns[0].primary);
        assert_eq!(columns[1].domain, Domain::Numeric { precision: Some(8), scale: Some(2) });
    }

    #[test]
    fn rest_views() {
        let s = parse_statement("create view VV of (E int, F char) as get 'http://localhost:8188/DB/DB/t'").unwrap();
        assert_eq!(
            s,
            Statement::CreateRestView {
                name: "VV".into(),
                columns: vec![("E".into(), Domain::Integer), ("F".into(), Domain::Char { length: None })],
                source: RestSource::Url("http://localhost:8188/DB/DB/t".into()),
                metadata: vec![],
            }
        );
        let s = parse_statement("create view WW of (E int, D char, K int, F char) as get using VU").unwrap();
        assert!(matches!(s, Statement::CreateRestView { source: RestSource::Using(ref t), .. } if t == "VU"));
    }

    #[test]
    fn misspelt_keyword_is_located() {
        match parse_statement("select * frm t") {
            Err(Error::Syntax { line: 1, column: 10, message }) => assert!(message.contains("FRM"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_metadata_lists_words() {
        let e = parse_statement("create table t (a int) SPARKLE").unwrap_err().to_string();
        assert!(e.contains("SPARKLE") && e.contains("CAPTION") && e.contains("ETAG"), "{e}");
        let s = parse_statement("create table t (a int) ETAG PIE(A,B) URL 'http://x'").unwrap();
        let Statement::CreateTable { metadata, .. } = s else { panic!() };
        assert_eq!(metadata.len(), 3);
        assert_eq!(metadata[1].ids, vec!["A", "B"]);
    }

    #[test]
    fn delimited_identifiers_keep_case() {
        let s = parse_statement(
            r#"create table "Order"(id int primary key, cust int references "Customer", "OrderDate" date, "Total" numeric(6,2))"#,
        )
        .unwrap();
        let Statement::CreateTable { name, columns, .. } = s else { panic!() };
        assert_eq!(name, "Order");
        assert_eq!(columns[1].references.as_ref().unwrap().table, "Customer");
        assert_eq!(columns[2].name, "OrderDate");
    }

    #[test]
    fn precedence() {
        let e = parse_expr("a + b * c || 'x' = d and not e or f").unwrap();
        assert_eq!(e.to_string(), "A + B * C || 'x' = D AND NOT E OR F");
        let Expr::Binary(BinOp::Or, l, _) = e else { panic!() };
        assert!(matches!(*l, Expr::Binary(BinOp::And, _, _)));
    }

    #[test]
    fn view_metadata_is_not_an_alias() {
        let s = parse_statement("create view v as select a from t ETAG").unwrap();
        let Statement::CreateView { query, metadata, .. } = s else { panic!() };
        assert_eq!(query.from[0].alias, None);
        assert_eq!(metadata, vec![MetaItem::flag("ETAG")]);
        let q = parse_query("select a from t x").unwrap();
        assert_eq!(q.from[0].alias.as_deref(), Some("X"));
    }
}
