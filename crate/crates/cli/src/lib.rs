//! Experiment runner for the spectral embedding toolkit.
//!
//! Five subcommands cover the full workflow: `gen-data` writes point
//! clouds, `build-graph` persists affinity matrices, `solve-la` runs the
//! linear-algebra eigensolvers, `train-nn` trains the network pipelines
//! over replica seeds, and `eval` scores a checkpoint. Every run echoes its
//! resolved configuration into the output directory; re-running from the
//! echo reproduces the outputs bit-for-bit.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};

/// Runs one subcommand against a resolved configuration.
pub fn run(command: &str, cfg: &ExperimentConfig) -> Result<()> {
    match command {
        "gen-data" => commands::cmd_gen_data(cfg),
        "build-graph" => commands::cmd_build_graph(cfg),
        "solve-la" => commands::cmd_solve_la(cfg),
        "train-nn" => commands::cmd_train_nn(cfg),
        "eval" => commands::cmd_eval(cfg),
        other => Err(CliError::config(format!("unknown command '{other}'"))),
    }
}
