//! Command-line front end: problem ingestion, subcommand dispatch and
//! reproducible artifact output.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

use config::{Cli, RunConfig};
use error::RunResult;

/// Resolve the configuration and run one subcommand inside a sized thread pool.
pub fn run(cli: &Cli) -> RunResult<commands::Outcome> {
    let cfg = RunConfig::resolve(&cli.command, &cli.run)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| error::RunError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| commands::execute(&cli.command, &cfg))
}
