//! Command line front end: argument parsing, configuration layering and
//! result files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

use config::{resolve, Options};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "dyadnet", version, about = "Two-way fixed effects network models with jackknife bias correction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit the model and report coefficients with dyad-clustered standard errors
    Estimate(Options),
    /// Bias-corrected coefficients
    Jackknife(Options),
    /// Plug-in and jackknifed fixed-effect averages
    Effects(Options),
    /// Transitivity or reciprocity specification test
    Test(Options),
    /// Monte Carlo experiment on a standard design
    Simulate(Options),
    /// Write the leave-out partition for audit
    PartitionDump(Options),
}

impl Command {
    fn parts(&self) -> (&'static str, &Options) {
        match self {
            Command::Estimate(o) => ("estimate", o),
            Command::Jackknife(o) => ("jackknife", o),
            Command::Effects(o) => ("effects", o),
            Command::Test(o) => ("test", o),
            Command::Simulate(o) => ("simulate", o),
            Command::PartitionDump(o) => ("partition-dump", o),
        }
    }
}

fn execute(cmd: &Command) -> Result<(), CliError> {
    let (name, flags) = cmd.parts();
    let (cfg, prov) = resolve(name, flags)?;
    commands::validate(&cfg)?;
    let _ = env_logger::Builder::new().parse_filters(&cfg.log_level).try_init();
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", cfg.out.display())))?;
    output::write_manifest(&cfg.out, &cfg, &prov)?;
    let out = cfg.out.clone();
    match cmd {
        Command::Estimate(_) => commands::estimate(&cfg, &out),
        Command::Jackknife(_) => commands::jackknife(&cfg, &out),
        Command::Effects(_) => commands::effects(&cfg, &out),
        Command::Test(_) => commands::test(&cfg, &out),
        Command::Simulate(_) => commands::simulate(&cfg, &out),
        Command::PartitionDump(_) => commands::partition_dump(&cfg, &out),
    }
}

/// Run with the given arguments (program name first) and return the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
