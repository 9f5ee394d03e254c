mod args;
mod commands;
mod config;
mod format;
mod reproduce;

use args::{Cli, Command};
use clap::Parser;
use dqlab::DqError;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &DqError) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

pub fn dispatch(cli: Cli) -> dqlab::Result<()> {
    let fmt = cli.format;
    match cli.command {
        Command::Elliptical(a) => commands::elliptical(&a, fmt),
        Command::Empirical(a) => commands::empirical(&a, fmt),
        Command::Sample(a) => commands::sample(&a),
        Command::Construct(a) => commands::construct(&a),
        Command::Optimize(a) => commands::optimize(&a, fmt),
        Command::Mrv(a) => commands::mrv(&a, fmt),
        Command::Reproduce(a) => reproduce::run(&a),
        Command::Run(a) => config::run(&a),
    }
}
