//! The `resynth` command-line tool.

pub mod args;
pub mod commands;
pub mod dataset;
pub mod exit;

use anyhow::{Context, Result};

use args::Cli;
use exit::usage;

fn init_threads(global: &args::GlobalArgs) -> Result<()> {
    let threads = match (global.deterministic, global.threads) {
        (true, Some(n)) if n != 1 => {
            log::warn!("--deterministic runs single-threaded; ignoring --threads {n}");
            1
        }
        (true, _) => 1,
        (false, Some(0)) => return usage("--threads must be at least 1"),
        (false, Some(n)) => n,
        (false, None) => return Ok(()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("cannot configure the worker pool")
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let global = cli.global;
    if global.dump_config {
        let cfg = commands::effective_config(&global)?;
        print!("{}", cfg.to_toml_string()?);
        return Ok(());
    }
    let Some(command) = cli.command else {
        return usage("no subcommand given; see --help");
    };
    init_threads(&global)?;
    commands::dispatch(command, &global)
}
