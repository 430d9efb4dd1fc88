use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use neutral_cli::{cmd_depol, cmd_effective, cmd_pack, cmd_sweep, cmd_verify, exit_code, load_config, write_csv, ConfigError};
use neutral_core::config::ProblemConfig;
use neutral_core::Axis;

const THREADS_ENV: &str = "NEUTRAL_INCLUSIONS_THREADS";

#[derive(Parser)]
#[command(name = "neutral-inclusions", version, about = "Design and verify neutral coated-ellipsoid inclusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Depolarization factors and K per axis.
    Depol(Common),
    /// Matching root, coating coefficients and effective conductivity.
    Effective(Common),
    /// Analytic residuals and a finite-difference neutrality check.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Use the coating conductivity for the matrix instead of sigma*.
        #[arg(long)]
        control: bool,
    },
    /// Pack scaled copies of the prototype into the unit cell.
    Pack(Common),
    /// Effective conductivity over a range of one parameter, as CSV.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON problem description.
    #[arg(long)]
    config: PathBuf,
    /// Field direction (1, 2 or 3).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    axis: Option<u8>,
    /// Cells per axis for finite-difference runs.
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV output path (field values for verify, rows for sweep).
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ProblemConfig> {
        let mut cfg = load_config(&self.config)?;
        if let Some(a) = self.axis {
            cfg.run.axis = Some(Axis::try_from(a).map_err(|e| ConfigError(e.to_string()))?);
        }
        if let Some(n) = self.grid_n {
            cfg.run.grid_n = n;
        }
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }
}

fn emit<T: Serialize>(report: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => writeln!(std::io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| ConfigError(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Depol(c) => emit(&cmd_depol(&c.load()?)?, c.out.as_deref()),
        Command::Effective(c) => emit(&cmd_effective(&c.load()?)?, c.out.as_deref()),
        Command::Verify { common, control } => {
            let (report, cell) = cmd_verify(&common.load()?, control)?;
            if let Some(path) = &common.csv {
                write_csv(&cell, path)?;
            }
            emit(&report, common.out.as_deref())
        }
        Command::Pack(c) => emit(&cmd_pack(&c.load()?)?, c.out.as_deref()),
        Command::Sweep(c) => {
            let cfg = c.load()?;
            match &c.csv {
                Some(path) => {
                    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                    let mut w = std::io::BufWriter::new(file);
                    cmd_sweep(&cfg, &mut w)?;
                    w.flush()?;
                }
                None => {
                    let stdout = std::io::stdout();
                    cmd_sweep(&cfg, stdout.lock())?;
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
