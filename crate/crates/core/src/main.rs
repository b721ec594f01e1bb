use std::io::{ErrorKind, Write};
use std::process::ExitCode;

use archvol::cli::{error_exit_code, run, RunConfig};
use archvol::Error;
use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let config = match RunConfig::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match run(&config, &mut out) {
        Ok(outcome) => outcome.exit_code(),
        Err(Error::Io(e)) if e.kind() == ErrorKind::BrokenPipe => 1,
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    };
    let _ = out.flush();
    ExitCode::from(code as u8)
}
