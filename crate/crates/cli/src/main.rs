mod args;
mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{ArgMatches, CommandFactory, FromArgMatches};

use crate::args::{Cli, Command};
use crate::config::merge_config;
use crate::error::{CliError, Status};
use crate::output::Sink;

fn run(cli: &Cli, sub: &ArgMatches) -> Result<Status, CliError> {
    let stem = cli
        .name
        .clone()
        .unwrap_or_else(|| cli.command.name().to_string());
    let mut sink = Sink::new(&cli.out_dir, &stem)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let file = cli.config.as_deref();
    let status = match &cli.command {
        Command::Simulate(a) => {
            commands::simulate(&merge_config(a.clone(), sub, file)?, &mut sink, &pool)
        }
        Command::Solve(a) => commands::solve(&merge_config(a.clone(), sub, file)?, &mut sink),
        Command::Exact(a) => commands::exact(&merge_config(a.clone(), sub, file)?, &mut sink),
        Command::Moments(a) => commands::moments(&merge_config(a.clone(), sub, file)?, &mut sink),
        Command::Classes(a) => commands::classes(&merge_config(a.clone(), sub, file)?, &mut sink),
        Command::Heatmap(a) => {
            commands::heatmap(&merge_config(a.clone(), sub, file)?, &mut sink, &pool)
        }
        Command::Compare(a) => commands::compare(&merge_config(a.clone(), sub, file)?, &mut sink),
    };
    for path in sink.written() {
        println!("{}", path.display());
    }
    status
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    let (_, sub) = matches.subcommand().expect("a subcommand is required");
    match run(&cli, sub) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Exhausted) => {
            eprintln!("coagem: exhausted before t_end; output covers the run up to exhaustion");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("coagem: {e}");
            e.exit_code()
        }
    }
}
