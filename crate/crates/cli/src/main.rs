mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use game_core::GameError;
use manifest::Manifest;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Core(GameError),
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) => f.write_str(msg),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    let from_env = match std::env::var("GAME_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
            CliError::Input(format!("GAME_THREADS must be a positive integer, got `{v}`"))
        })?),
        Err(_) => None,
    };
    match from_env.or(flag) {
        Some(0) => Err(CliError::Input("thread count must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn execute(cli: Cli, args: Vec<String>) -> Result<(), CliError> {
    let threads = thread_count(cli.threads)?;
    if let Command::Replay(r) = &cli.command {
        let recorded = commands::replay_args(r)?;
        let replayed = Cli::try_parse_from(std::iter::once("game".to_string()).chain(recorded.clone()))
            .map_err(|e| CliError::Input(format!("manifest arguments no longer parse: {e}")))?;
        if matches!(replayed.command, Command::Replay(_)) {
            return Err(CliError::Input("a manifest cannot record another replay".into()));
        }
        return execute(replayed, recorded);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Input(format!("cannot start worker threads: {e}")))?;

    let name = match &cli.command {
        Command::Complete(_) => "complete",
        Command::Synth(_) => "synth",
        Command::Mask(_) => "mask",
        Command::Calibrate(_) => "calibrate",
        Command::Eval(_) => "eval",
        Command::Replay(_) => unreachable!("handled above"),
    };
    let mut manifest = Manifest::start(name, args, threads);
    match &cli.command {
        Command::Complete(a) => commands::complete(a, &mut manifest)?,
        Command::Synth(a) => commands::synth(a, &mut manifest)?,
        Command::Mask(a) => commands::mask(a, &mut manifest)?,
        Command::Calibrate(a) => commands::calibrate(a, &mut manifest)?,
        Command::Eval(a) => commands::eval(a, &mut manifest)?,
        Command::Replay(_) => unreachable!("handled above"),
    }
    let dir = commands::out_dir(&cli.command).expect("every workflow has an output directory");
    manifest.finish(&dir)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args: Vec<String> = std::env::args().skip(1).collect();
    match execute(cli, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
