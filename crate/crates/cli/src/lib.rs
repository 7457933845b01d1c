//! The `pyrlite` command: an interactive SQL shell over a database file or
//! a running server, and the HTTP server itself.

pub mod render;
pub mod shell;

pub use render::{render_affected, render_table};
pub use shell::{repl, Backend, Local, Output, Remote};

/// The login name of the current operating-system user.
pub fn os_user() -> String {
    ["USER", "USERNAME", "LOGNAME"]
        .iter()
        .find_map(|k| std::env::var(k).ok().filter(|v| !v.is_empty()))
        .unwrap_or_else(|| "user".into())
}
