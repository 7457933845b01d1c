//! The read-evaluate-print loop and its two backends: an embedded engine
//! and a remote server reached over HTTP.

use std::io::{BufRead, Write};
use std::sync::Arc;

use pyrlite::restsvc::{HttpClient, RemoteClient, RemoteRequest};
use pyrlite::sqlfront::{parse_statement, Session, Statement, StatementResult};
use pyrlite::{Engine, Error, Value};
use serde_json::Value as Json;

use crate::render::{render_affected, render_table};

/// What a statement produced, ready to print.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Output {
    Rows { columns: Vec<String>, rows: Vec<Vec<String>> },
    Affected(usize),
    Message(String),
    Warning(String),
}

impl Output {
    pub fn render(&self) -> String {
        match self {
            Output::Rows { columns, rows } => render_table(columns, rows),
            Output::Affected(n) => render_affected(*n),
            Output::Message(m) => format!("{m}\n"),
            Output::Warning(m) => format!("warning: {m}\n"),
        }
    }
}

pub trait Backend {
    fn execute(&mut self, sql: &str) -> Result<Output, String>;
    /// Prompt shown before each statement.
    fn prompt(&self) -> String {
        "SQL> ".into()
    }
}

fn from_result(r: StatementResult) -> Output {
    match r {
        StatementResult::Rows { columns, rows } => Output::Rows {
            columns,
            rows: rows.iter().map(|r| r.iter().map(Value::to_string).collect()).collect(),
        },
        StatementResult::Affected(n) => Output::Affected(n),
        StatementResult::Done(m) => Output::Message(m),
    }
}

/// A shell over a database file opened in this process.
pub struct Local {
    session: Session,
}

impl Local {
    /// Open `path`, creating it with `user` as owner if it does not exist.
    pub fn open(path: &std::path::Path, user: &str, role: Option<&str>) -> pyrlite::Result<Local> {
        let engine = if path.exists() { Engine::open(path)? } else { Engine::create(path, user, None)? };
        Ok(Local { session: Session::open(engine, user, role)? })
    }

    pub fn from_session(session: Session) -> Local {
        Local { session }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }
}

impl Backend for Local {
    fn execute(&mut self, sql: &str) -> Result<Output, String> {
        let stmt = parse_statement(sql).map_err(|e| e.to_string())?;
        if matches!(stmt, Statement::Commit | Statement::Rollback) && !self.session.in_transaction() {
            return Ok(Output::Warning("no transaction is open".into()));
        }
        self.session.run(&stmt).map(from_result).map_err(|e| match e {
            Error::Conflict(c) => format!("transaction conflict: {c}; the transaction was rolled back"),
            e => e.to_string(),
        })
    }

    fn prompt(&self) -> String {
        if self.session.in_transaction() {
            "SQL-T> ".into()
        } else {
            "SQL> ".into()
        }
    }
}

/// A shell over `POST /{db}/{role}` on a running server. Every statement
/// commits on its own.
pub struct Remote {
    client: Arc<dyn RemoteClient>,
    url: String,
    user: String,
    password: String,
}

impl Remote {
    /// `base` is `http://host:port/{db}`; `role` defaults to the database
    /// name.
    pub fn new(base: &str, user: &str, password: &str, role: Option<&str>) -> Result<Remote, String> {
        Remote::with_client(Arc::new(HttpClient::default()), base, user, password, role)
    }

    pub fn with_client(
        client: Arc<dyn RemoteClient>,
        base: &str,
        user: &str,
        password: &str,
        role: Option<&str>,
    ) -> Result<Remote, String> {
        let base = base.trim_end_matches('/');
        let rest = base.split_once("://").map(|(_, r)| r).ok_or("expected an http:// URL")?;
        let db = rest.split('/').nth(1).filter(|d| !d.is_empty()).ok_or("the URL must name a database")?;
        let url = format!("{base}/{}", role.unwrap_or(db));
        Ok(Remote { client, url, user: user.to_string(), password: password.to_string() })
    }
}

fn json_text(v: &Json) -> String {
    match v {
        Json::Null => String::new(),
        Json::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl Backend for Remote {
    fn execute(&mut self, sql: &str) -> Result<Output, String> {
        match parse_statement(sql).map_err(|e| e.to_string())? {
            Statement::Begin | Statement::Commit | Statement::Rollback | Statement::SetRole(_) => {
                return Ok(Output::Warning(
                    "transaction control is not available over HTTP; each statement commits on its own".into(),
                ))
            }
            _ => {}
        }
        let req = RemoteRequest::new("POST", self.url.clone()).body(sql).basic_auth(&self.user, &self.password);
        let resp = self.client.send(&req).map_err(|e| e.to_string())?;
        let body: Json = serde_json::from_str(&resp.body).unwrap_or(Json::String(resp.body.clone()));
        if resp.status != 200 {
            let msg = body.get("message").map(json_text).unwrap_or_else(|| json_text(&body));
            return Err(format!("{}: {msg}", resp.status));
        }
        if let Some(n) = body.get("affected").and_then(Json::as_u64) {
            return Ok(Output::Affected(n as usize));
        }
        if let Some(m) = body.get("done") {
            return Ok(Output::Message(json_text(m)));
        }
        let columns: Vec<String> = body
            .get("columns")
            .and_then(Json::as_array)
            .map(|c| c.iter().map(json_text).collect())
            .unwrap_or_default();
        let rows = body
            .get("rows")
            .and_then(Json::as_array)
            .map(|rows| {
                rows.iter()
                    .map(|r| columns.iter().map(|c| r.get(c).map(json_text).unwrap_or_default()).collect())
                    .collect()
            })
            .unwrap_or_default();
        Ok(Output::Rows { columns, rows })
    }
}

/// Does `buf` close every parenthesis and quote it opens?
fn complete(buf: &str) -> bool {
    let (mut depth, mut quote) = (0i32, None::<char>);
    for c in buf.chars() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '\'' || c == '"' => quote = Some(c),
            None if c == '(' => depth += 1,
            None if c == ')' => depth -= 1,
            None => {}
        }
    }
    quote.is_none() && depth <= 0
}

fn is_quit(line: &str) -> bool {
    matches!(line.trim().trim_end_matches(';').to_ascii_lowercase().as_str(), "quit" | "exit" | "\\q")
}

/// Read statements from `input` until end of input or `quit`, printing
/// results and errors to `out`. A statement ends at the end of a line
/// once its parentheses and quotes balance; a trailing `;` is dropped.
pub fn repl(backend: &mut dyn Backend, input: impl BufRead, out: &mut impl Write) -> std::io::Result<()> {
    let mut buf = String::new();
    write!(out, "{}", backend.prompt())?;
    out.flush()?;
    for line in input.lines() {
        let line = line?;
        if buf.is_empty() && is_quit(&line) {
            return Ok(());
        }
        if !buf.is_empty() {
            buf.push('\n');
        }
        buf.push_str(&line);
        if !complete(&buf) {
            write!(out, "   > ")?;
            out.flush()?;
            continue;
        }
        let sql = buf.trim().trim_end_matches(';').trim().to_string();
        buf.clear();
        if !sql.is_empty() {
            match backend.execute(&sql) {
                Ok(o) => write!(out, "{}", o.render())?,
                Err(e) => writeln!(out, "error: {e}")?,
            }
        }
        write!(out, "{}", backend.prompt())?;
        out.flush()?;
    }
    writeln!(out)?;
    Ok(())
}
