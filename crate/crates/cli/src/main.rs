use std::io::{self, Write};
use std::process::ExitCode;

use qlm_bench::{execute, parse_run_spec, CliError};

fn main() -> ExitCode {
    let status = match parse_run_spec(std::env::args_os().skip(1)) {
        Err(CliError::Info(text)) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!(
                "error: {}",
                e.to_string().trim_start_matches("error: ").trim_end()
            );
            1
        }
        Ok(spec) => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            match execute(&spec, &mut out) {
                Ok(status) => status,
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
    };
    let _ = io::stdout().flush();
    ExitCode::from(status as u8)
}
