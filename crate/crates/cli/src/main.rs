mod args;
mod cluster;
mod eval;
mod failure;
mod settings;
mod sweep;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Cluster(a) => cluster::cmd_cluster(a),
        Command::Eval(a) => eval::cmd_eval(a),
        Command::Sweep(a) => sweep::cmd_sweep(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
