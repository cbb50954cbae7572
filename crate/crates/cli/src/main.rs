#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;
mod report;

use std::process::ExitCode;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, Format};
use config::{merge, FileConfig};

/// Bad input or configuration; exits with status 1.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

const EXIT_USAGE: u8 = 1;
const EXIT_COMPUTATION: u8 = 2;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<spdc_core::Error>() {
            return if e.is_usage() { EXIT_USAGE } else { EXIT_COMPUTATION };
        }
    }
    EXIT_USAGE
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let crystal_path = cli
        .crystal
        .clone()
        .or_else(|| file.crystal.as_ref().map(|p| file.resolve(p)));
    let crystal = commands::load_crystal(crystal_path.as_deref())?;
    let out = cli.out.clone().or_else(|| file.out.as_ref().map(|p| file.resolve(p)));
    let resolve_input = |p: Option<std::path::PathBuf>, from_flag: bool| {
        if from_flag {
            p
        } else {
            p.map(|p| file.resolve(&p))
        }
    };

    let (report, default_format) = match cli.command {
        Command::Angles(a) => (
            commands::angles(&crystal, merge(&a, file.angles.as_ref())?)?,
            Format::Csv,
        ),
        Command::Design(a) => (
            commands::design(&crystal, merge(&a, file.design.as_ref())?)?,
            Format::Json,
        ),
        Command::Stats(a) => {
            let from_flag = a.input.is_some();
            let mut m = merge(&a, file.stats.as_ref())?;
            m.input = resolve_input(m.input, from_flag);
            (commands::stats(m)?, Format::Json)
        }
        Command::Fit(a) => {
            let from_flag = a.input.is_some();
            let mut m = merge(&a, file.fit.as_ref())?;
            m.input = resolve_input(m.input, from_flag);
            (commands::fit(m)?, Format::Json)
        }
        Command::Bell(a) => {
            let from_flag = a.input.is_some();
            let mut m = merge(&a, file.bell.as_ref())?;
            m.input = resolve_input(m.input, from_flag);
            (commands::bell(m)?, Format::Json)
        }
        Command::Simulate(a) => (commands::simulate(merge(&a, file.simulate.as_ref())?)?, Format::Csv),
    };
    let format = cli.format.or(file.format).unwrap_or(default_format);
    let text = report.render(format)?;
    match out {
        Some(path) => report::write_atomic(&path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
