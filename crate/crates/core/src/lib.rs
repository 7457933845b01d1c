//! PyrrhoLite: an embedded relational engine whose only durable artifact is
//! an append-only transaction log.
//!
//! Everything in memory is an immutable, shareable value. A transaction
//! starts from a copy of the database root, stages "physicals" with
//! temporary uids, and at commit is validated against whatever was committed
//! since it began, relocated to its final file positions and appended to the
//! log in one contiguous run.
//!
//! The crate is organised bottom-up:
//!
//! * [`pbtree`]: persistent B-tree and positional list with bookmarks.
//! * [`physlog`]: values, uids, physical records, the log file and replay.
//! * [`engine`]: snapshots, transactions, validation, constraints, security.
//! * [`sqlfront`]: SQL lexer/parser, binding with instancing, review, execution.
//! * [`restsvc`]: HTTP resource service, RESTView federation, remote commit.
//! * [`vclient`]: versioned typed-record client over the HTTP service.

pub mod engine;
pub mod error;
pub mod numeric;
pub mod pbtree;
pub mod physlog;
pub mod restsvc;
pub mod sqlfront;
pub mod vclient;

pub use engine::{Database, Engine, Transaction};
pub use error::{Error, Result};
pub use numeric::Decimal;
pub use pbtree::{Bookmark, Key, PList, PTree};
pub use physlog::{Domain, Physical, Uid, Value};
