use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use outage_core::config::{ConfigFile, Scheme};
use outage_core::mcengine::Engine;
use outage_core::report::{analyze, run_figure, simulate, Figure, RunManifest, Table};
use outage_core::Error;

/// Outage analysis and simulation for deadline-constrained downlink
/// broadcasting.
#[derive(Parser)]
#[command(name = "outage", version)]
struct Cli {
    /// TOML configuration; missing keys take the reference defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials per grid point (overrides the config).
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output directory. `analyze` and `simulate` print to stdout without it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form failure probabilities and outage bounds.
    Analyze,
    /// Monte Carlo estimates over the configured sweep grid.
    Simulate {
        /// Simulate only this scheme.
        #[arg(long)]
        scheme: Option<Scheme>,
    },
    /// CSV data for one figure.
    Figure {
        /// bounds, training, payload, backoff, benchmark or diversity.
        #[arg(value_parser = parse_figure)]
        name: Figure,
    },
}

fn parse_figure(s: &str) -> Result<Figure, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

fn emit(table: &Table, file: &ConfigFile, out: Option<&Path>, name: &str) -> Result<(), Error> {
    match out {
        None => {
            print!("{}", table.to_csv());
            Ok(())
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
            let path = dir.join(name);
            table.write(&path)?;
            RunManifest::new(file, std::slice::from_ref(&path)).write(dir)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if let Some(s) = cli.seed {
        file.seed = s;
    }
    if let Some(n) = cli.trials {
        file.trials = n;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Analyze => {
            let a = analyze(&file.system()?, file.seed)?;
            emit(&a.table, &file, out, "analyze.csv")?;
            eprintln!("{}", a.summary);
            if !a.all_ok {
                return Err(Error::Domain {
                    func: "analyze",
                    reason: "bound invariants violated".into(),
                });
            }
        }
        Command::Simulate { scheme } => {
            if let Some(s) = scheme {
                file.scheme = s;
                file.sweep_schemes.clear();
            }
            let engine = Engine::new(cli.threads)?;
            emit(&simulate(&engine, &file)?, &file, out, "simulate.csv")?;
        }
        Command::Figure { name } => {
            let engine = Engine::new(cli.threads)?;
            let dir = out.unwrap_or(Path::new("out"));
            for p in run_figure(&engine, name, &file, dir)? {
                eprintln!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
