use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use pyrlite::restsvc::{Server, Service};
use pyrlite_cli::{os_user, repl, Backend, Local, Remote};

#[derive(Parser)]
#[command(name = "pyrlite", version, about = "SQL shell and HTTP server for pyrlite databases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Interactive SQL against a database file or a server URL
    /// (`http://host:port/DB`). A missing file is created.
    Shell {
        target: String,
        /// Act as this user instead of the operating-system login.
        #[arg(long)]
        user: Option<String>,
        /// Declared role; defaults to the user's default role.
        #[arg(long)]
        role: Option<String>,
        /// Password for a remote server.
        #[arg(long, default_value = "")]
        password: String,
    },
    /// Serve every `*.pyl` database in a directory over HTTP.
    Serve {
        #[arg(long, default_value_t = 8180)]
        port: u16,
        #[arg(long, default_value = ".")]
        data_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, default_value_t = 4)]
        threads: usize,
    },
}

fn shell(target: &str, user: Option<String>, role: Option<String>, password: &str) -> ExitCode {
    let user = user.unwrap_or_else(os_user);
    let backend: Result<Box<dyn Backend>, String> = if target.starts_with("http://") || target.starts_with("https://") {
        Remote::new(target, &user, password, role.as_deref()).map(|r| Box::new(r) as Box<dyn Backend>)
    } else {
        let mut path = PathBuf::from(target);
        if path.extension().is_none() {
            path.set_extension(pyrlite::restsvc::DB_EXTENSION);
        }
        Local::open(&path, &user, role.as_deref()).map(|l| Box::new(l) as Box<dyn Backend>).map_err(|e| e.to_string())
    };
    let mut backend = match backend {
        Ok(b) => b,
        Err(e) => {
            eprintln!("pyrlite: cannot open {target}: {e}");
            return ExitCode::FAILURE;
        }
    };
    let stdin = std::io::stdin();
    match repl(backend.as_mut(), stdin.lock(), &mut std::io::stdout()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pyrlite: {e}");
            ExitCode::FAILURE
        }
    }
}

fn serve(port: u16, data_dir: PathBuf, bind: &str, threads: usize) -> ExitCode {
    if !data_dir.is_dir() {
        eprintln!("pyrlite: {} is not a directory", data_dir.display());
        return ExitCode::FAILURE;
    }
    let service = Arc::new(Service::new(Some(data_dir.clone())));
    let server = match Server::bind(&format!("{bind}:{port}"), service) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("pyrlite: cannot listen on {bind}:{port}: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("serving {} on http://{bind}:{}", data_dir.display(), server.port());
    server.run(threads);
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Shell { target, user, role, password } => shell(&target, user, role, &password),
        Command::Serve { port, data_dir, bind, threads } => serve(port, data_dir, &bind, threads),
    }
}
