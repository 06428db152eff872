use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;

use clap::Parser;
use resynth_cli::args::Cli;
use resynth_cli::exit;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::SUCCESS });
        }
    };
    match panic::catch_unwind(AssertUnwindSafe(|| resynth_cli::run(cli))) {
        Ok(Ok(())) => ExitCode::from(exit::SUCCESS),
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code_for(&e))
        }
        Err(_) => ExitCode::from(exit::INTERNAL),
    }
}
