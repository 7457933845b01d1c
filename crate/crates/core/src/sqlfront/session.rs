//! A connection-like session: autocommit per statement, or an explicit
//! transaction between BEGIN and COMMIT/ROLLBACK.

use super::ast::Statement;
use super::parser::{parse_statement, parse_statements};
use super::stmt::{execute, StatementResult};
use crate::engine::{may_use_role, Engine, Transaction};
use crate::error::{Error, Result};
use crate::physlog::Uid;

pub struct Session {
    engine: Engine,
    user: Uid,
    role: Uid,
    tx: Option<Transaction>,
}

impl Session {
    /// Open a session for `user` in `role` (or the user's default role).
    pub fn open(engine: Engine, user: &str, role: Option<&str>) -> Result<Session> {
        let tx = engine.begin(user, role)?;
        Ok(Session { user: tx.user(), role: tx.role(), engine, tx: None })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn user(&self) -> Uid {
        self.user
    }

    pub fn role(&self) -> Uid {
        self.role
    }

    pub fn in_transaction(&self) -> bool {
        self.tx.is_some()
    }

    /// The open explicit transaction, if any.
    pub fn transaction(&self) -> Option<&Transaction> {
        self.tx.as_ref()
    }

    pub fn execute(&mut self, sql: &str) -> Result<StatementResult> {
        let stmt = parse_statement(sql)?;
        self.run(&stmt)
    }

    /// Run a script, stopping at the first failure.
    pub fn execute_script(&mut self, sql: &str) -> Result<Vec<StatementResult>> {
        parse_statements(sql)?.iter().map(|s| self.run(s)).collect()
    }

    pub fn run(&mut self, stmt: &Statement) -> Result<StatementResult> {
        match stmt {
            Statement::Begin => {
                if self.tx.is_some() {
                    return Err(Error::statement("a transaction is already open"));
                }
                self.tx = Some(self.engine.begin_as(self.user, self.role)?);
                Ok(StatementResult::Done("transaction started".into()))
            }
            Statement::Commit => match self.tx.take() {
                Some(tx) => {
                    self.engine.commit(tx)?;
                    Ok(StatementResult::Done("committed".into()))
                }
                None => Ok(StatementResult::Done("no transaction is open".into())),
            },
            Statement::Rollback => match self.tx.take() {
                Some(_) => Ok(StatementResult::Done("rolled back".into())),
                None => Ok(StatementResult::Done("no transaction is open".into())),
            },
            Statement::SetRole(name) => {
                let db = self.engine.snapshot();
                let r = db.role_named(name).ok_or_else(|| Error::not_found(format!("role {name}")))?;
                if !may_use_role(&db, self.user, r) {
                    return Err(Error::auth(format!("role {name} has not been granted")));
                }
                if let Some(tx) = self.tx.as_mut() {
                    tx.set_role(r)?;
                }
                self.role = r;
                Ok(StatementResult::Done(format!("role set to {name}")))
            }
            _ => match self.tx.as_mut() {
                Some(tx) => {
                    // a failed statement leaves the transaction as it was
                    let before = tx.clone();
                    let r = execute(tx, stmt);
                    if r.is_err() {
                        *tx = before;
                    }
                    r
                }
                None => {
                    let mut tx = self.engine.begin_as(self.user, self.role)?;
                    let r = execute(&mut tx, stmt)?;
                    self.engine.commit(tx)?;
                    Ok(r)
                }
            },
        }
    }
}
