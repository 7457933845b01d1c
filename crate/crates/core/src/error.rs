use thiserror::Error;

use crate::engine::ConflictReport;
use crate::numeric::DecimalError;
use crate::pbtree::{KeyError, RangeError};
use crate::physlog::Uid;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Range(#[from] RangeError),
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("log corruption at offset {offset}: {message}")]
    Corruption { offset: u64, message: String },
    #[error("log corrupt at offset {offset} ({message}); last good transaction boundary is {last_good}")]
    Replay { last_good: u64, offset: u64, message: String },
    #[error("relocation error: temporary uid {0:?} has no final position")]
    Relocation(Uid),
    #[error("empty commit")]
    EmptyCommit,
    #[error("durable append failed: {0}")]
    Append(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("authorization error: {0}")]
    Authorization(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("transaction conflict: {0}")]
    Conflict(ConflictReport),
    #[error("constraint {constraint} violated by row {row}: {message}")]
    Constraint { constraint: String, row: String, message: String },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{0}")]
    Statement(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("cardinality error: {0}")]
    Cardinality(String),
    #[error("contributor offline: {}; available: [{}]", offline.join(", "), available.join(", "))]
    ContributorOffline { offline: Vec<String>, available: Vec<String> },
    #[error("single transaction master: {0}")]
    SingleMaster(String),
    #[error("remote error: {0}")]
    Remote(String),
    #[error("schema drift on table {table}: expected ({expected_pos},{expected_key}), server has ({actual_pos},{actual_key})")]
    SchemaDrift { table: String, expected_pos: i64, expected_key: i64, actual_pos: i64, actual_key: i64 },
    #[error("version conflict: {0}")]
    VersionConflict(String),
    #[error("not implemented: {0}")]
    NotImplemented(String),
}

impl From<DecimalError> for Error {
    fn from(e: DecimalError) -> Self {
        match e {
            DecimalError::DivisionByZero => Error::DivisionByZero,
            other => Error::Type(other.to_string()),
        }
    }
}

impl Error {
    pub fn statement(msg: impl Into<String>) -> Self {
        Error::Statement(msg.into())
    }

    pub fn typ(msg: impl Into<String>) -> Self {
        Error::Type(msg.into())
    }

    pub fn auth(msg: impl Into<String>) -> Self {
        Error::Authorization(msg.into())
    }

    pub fn not_found(msg: impl Into<String>) -> Self {
        Error::NotFound(msg.into())
    }
}
