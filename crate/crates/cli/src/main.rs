//! `npsn`: command-line driver for the npsn-core experiments.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

use args::{Cli, Command};
use commands::RunContext;
use output::{sidecar_path, Sidecar};

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("NPSN_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("NPSN_THREADS must be a positive integer, got '{value}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the worker pool")
}

fn resolve(command: Command) -> Result<Command> {
    let Command::Replay(replay) = command else {
        return Ok(command);
    };
    let sidecar = Sidecar::load(&replay.sidecar)?;
    if sidecar.tool != "npsn" {
        bail!("{} was not written by npsn", replay.sidecar.display());
    }
    let mut command = sidecar.command;
    if let Some(out) = replay.out {
        match command.output_mut() {
            Some(slot) => *slot = out,
            None => bail!("the recorded command has no output to redirect"),
        }
    }
    if let Some(seed) = replay.seed {
        match command.seed_mut() {
            Some(slot) => *slot = seed,
            None => bail!("the recorded command takes no seed"),
        }
    }
    Ok(command)
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let mut command = resolve(cli.command)?;
    eprintln!("config: {}", serde_json::to_string(&command)?);
    let mut outputs = commands::execute(&command, &RunContext { quiet: cli.quiet })?;
    if let Some(out) = command.output_mut().cloned() {
        let sidecar = serde_json::to_string_pretty(&Sidecar::new(&command))? + "\n";
        outputs.add(sidecar_path(&out), sidecar);
    }
    for path in outputs.commit()? {
        if !cli.quiet {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
