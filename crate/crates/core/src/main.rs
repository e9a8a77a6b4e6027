use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kahlerlab::cli::{execute, CliError, Command, QUAD_ORDER_ENV};

/// Numerical experiments on torus-symmetric Fano models.
#[derive(Parser)]
#[command(name = "kahlerlab", version)]
struct Args {
    command: Command,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config {
            key: "config".into(),
            message: format!("{}: {e}", args.config.display()),
        })
        .and_then(|text| {
            let env = std::env::var(QUAD_ORDER_ENV).ok();
            execute(args.command, &text, env.as_deref(), args.out.as_deref())
        });
    match result {
        Ok(paths) => {
            let list: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
            println!("{}", serde_json::json!({ "artifacts": list }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
