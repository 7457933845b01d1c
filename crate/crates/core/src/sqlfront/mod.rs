//! SQL front end: lexer, parser, binder with instancing, review of the
//! bound plan, and execution against a transaction.

mod agg;
pub mod ast;
mod bind;
mod eval;
mod exec;
mod lexer;
mod parser;
pub mod plan;
mod review;
mod session;
mod stmt;

pub use agg::Register;
pub use ast::{AggFunc, BinOp, Expr, Query, Statement};
pub use bind::{Binder, Scope};
pub use eval::Env;
pub use exec::{Cursor, Exec, Rows};
pub use lexer::{tokenize, Tok, Token};
pub use parser::{parse_domain, parse_expr, parse_metadata, parse_query, parse_statement, parse_statements, METADATA_WORDS, RESERVED};
pub use review::{review, review_with_need};
pub use session::Session;
pub use stmt::{check_holds, execute, plan_query, resolve, run_query, select_rows, StatementResult};
