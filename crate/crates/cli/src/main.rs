mod args;
mod commands;
mod error;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    let json = cli.json;
    let result = commands::run(cli);
    let mut stdout = std::io::stdout().lock();
    match result {
        Ok(out) => {
            let printed = if json {
                serde_json::to_writer_pretty(&mut stdout, &out.json).map_err(std::io::Error::from)
            } else {
                stdout.write_all(out.text.as_bytes())
            };
            if printed.and_then(|_| writeln!(stdout)).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            if json {
                let report = serde_json::json!({ "error": { "kind": e.kind(), "message": e.message() } });
                let _ = serde_json::to_writer_pretty(&mut stdout, &report);
                let _ = writeln!(stdout);
            }
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
