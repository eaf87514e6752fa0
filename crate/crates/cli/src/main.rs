use std::process::ExitCode;

use nmext_lab::{execute, parse_args, CliError};

fn main() -> ExitCode {
    let config = match parse_args(std::env::args_os()) {
        Ok(c) => c,
        Err(CliError::Usage(e)) => e.exit(),
        Err(e) => {
            let record = serde_json::json!({"error": {"kind": "config", "message": e.to_string()}, "pass": false});
            eprintln!("{record}");
            return ExitCode::from(2);
        }
    };
    let run = execute(&config);
    let text = serde_json::to_string_pretty(&run.report).expect("reports serialize") + "\n";
    match &config.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(run.exit_code as u8)
}
