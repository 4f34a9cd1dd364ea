use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dgpw_core::{report, RunSpec, PRESET_NAMES};

/// Discontinuous Galerkin plane wave network solver.
#[derive(Parser)]
#[command(name = "dgpw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML spec.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run a built-in experiment.
    Preset {
        name: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// List built-in experiments.
    ListPresets,
}

#[derive(Args)]
struct RunOpts {
    /// Output prefix; writes <prefix>.csv, <prefix>_epochs.csv and <prefix>_summary.txt.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the trainer seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the direction-solve system [A | b] of every iteration into this directory.
    #[arg(long, value_name = "DIR")]
    dump_system: Option<PathBuf>,
    /// Face quadrature points per axis.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=64))]
    quad_order: Option<u64>,
}

fn execute(mut spec: RunSpec, opts: RunOpts, default_prefix: &str) -> Result<bool> {
    if let Some(seed) = opts.seed {
        spec.run.train.seed = seed;
    }
    if let Some(q) = opts.quad_order {
        spec.run.quad_order = Some(q as usize);
    }
    spec.run.dump_dir = opts.dump_system;
    let prefix = opts
        .output
        .or(spec.output.clone())
        .unwrap_or_else(|| PathBuf::from(default_prefix));

    let (report, failure) = match spec.execute() {
        Ok(r) => (r, None),
        Err(f) => match f.report {
            Some(r) => (*r, Some(f.error)),
            None => return Err(f.error.into()),
        },
    };
    let files = report::write_outputs(&report, &prefix).context("writing outputs")?;
    print!("{}", report::summary(&report));
    for f in &files {
        println!("wrote {}", f.display());
    }
    if let Some(e) = failure {
        eprintln!("run stopped early: {e}");
        return Ok(false);
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListPresets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(true)
        }
        Command::Run { spec, opts } => std::fs::read_to_string(&spec)
            .with_context(|| format!("reading {}", spec.display()))
            .and_then(|text| Ok(dgpw_core::parse_spec(&text)?))
            .and_then(|s| {
                let stem = Path::new(&spec).file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string();
                execute(s, opts, &stem)
            }),
        Command::Preset { name, opts } => dgpw_core::preset(&name)
            .map_err(anyhow::Error::from)
            .and_then(|s| execute(s, opts, &name)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
