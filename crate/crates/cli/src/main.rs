//! # `soliton`
//!
//! Shoots expanding gradient Ricci solitons on multiple warped products out
//! of the collapsing orbit and writes plot-ready tables. Stored runs can be
//! re-read and checked against the inequalities they must satisfy.
//!
//! # Usage
//!
//! ```text
//! $ soliton solve run.json --output-dir out/run
//! $ soliton verify out/run
//! $ soliton einstein hyperbolic.json
//! $ soliton portrait run.json --grid 41,41
//! $ soliton critical-points run.json
//! ```
//!
//! A configuration is a JSON document such as
//!
//! ```text
//! { "dims": [2, 3], "epsilon": 1.0,
//!   "shoot": { "h": 0.01, "coeffs": [1, 1, -1] },
//!   "integrate": { "rtol": 1e-9, "s_max": 2000 } }
//! ```
//!
//! Exit status is 0 on success, 1 for unreadable or invalid input, 2 when an
//! invariant fails or the start point is rejected, and 3 when the integrator
//! gives up.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Run configuration files.
mod config;

/// Exit codes.
mod exit;

/// CSV tables with lossless float formatting.
mod table;

/// The `solve` and `einstein` subcommands.
mod run;

/// The `verify` subcommand.
mod check;

/// Planar portraits and the critical-point catalogue.
mod portrait;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use soliton_core::shoot::Mode;

use config::RunConfigFile;
use exit::{CliError, CliResult, OK, VIOLATION};
use portrait::{parse_pair, PortraitSpec};

#[derive(Parser, Debug)]
#[command(
    name = "soliton",
    version,
    about = "Expanding Ricci solitons on multiple warped products"
)]
struct Cli {
    /// Where to write artifacts. With several configurations each run gets
    /// a subdirectory named after its file.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Number of runs to execute concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate soliton trajectories.
    Solve {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Integrate trajectories inside the Einstein submanifold.
    Einstein {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Re-read a run directory and check it.
    Verify { run_dir: PathBuf },
    /// Sample the planar reduced flow.
    Portrait {
        config: PathBuf,
        /// Grid resolution as X1_STEPS,W_STEPS.
        #[arg(long, default_value = "21,21")]
        grid: String,
        /// Lower edge of the W range.
        #[arg(long)]
        w0: Option<f64>,
        /// Restrict X1 to LO,HI.
        #[arg(long)]
        x1_range: Option<String>,
        /// Restrict W to LO,HI.
        #[arg(long)]
        w_range: Option<String>,
    },
    /// List the critical points with their linearisations.
    CriticalPoints { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG } else { OK });
        }
    };
    let code = match dispatch(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    };
    ExitCode::from(code)
}

fn dispatch(cli: &Cli) -> CliResult<u8> {
    if cli.jobs == 0 {
        return Err(CliError::config("--jobs must be at least 1"));
    }
    match &cli.command {
        Command::Solve { configs } => sweep(cli, configs, Mode::Soliton),
        Command::Einstein { configs } => sweep(cli, configs, Mode::Einstein),
        Command::Verify { run_dir } => {
            let rep = check::verify_dir(run_dir)?;
            emit(cli, "verification.json", &to_json(&rep))?;
            for c in rep.failures() {
                eprintln!(
                    "FAIL {}: measured {:e}, target {:e}, tol {:e}",
                    c.name, c.measured, c.target, c.tol
                );
            }
            Ok(if rep.pass { OK } else { VIOLATION })
        }
        Command::Portrait {
            config,
            grid,
            w0,
            x1_range,
            w_range,
        } => {
            let cfg = RunConfigFile::load(config)?.model()?;
            let (x1_steps, w_steps) = parse_pair::<usize>("--grid", grid)?;
            let spec = PortraitSpec {
                x1_steps,
                w_steps,
                w0: *w0,
                x1_range: x1_range
                    .as_deref()
                    .map(|t| parse_pair("--x1-range", t))
                    .transpose()?,
                w_range: w_range
                    .as_deref()
                    .map(|t| parse_pair("--w-range", t))
                    .transpose()?,
            };
            let rows = portrait::portrait(&cfg, &spec)?;
            emit(cli, "portrait.csv", &portrait::portrait_csv(&rows))?;
            Ok(OK)
        }
        Command::CriticalPoints { config } => {
            let cfg = RunConfigFile::load(config)?.model()?;
            emit(
                cli,
                "critical_points.json",
                &to_json(&portrait::critical_points(&cfg)?),
            )?;
            Ok(OK)
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

/// Writes to `name` inside `--output-dir` when given, else to stdout.
fn emit(cli: &Cli, name: &str, text: &str) -> CliResult<()> {
    match &cli.output_dir {
        Some(dir) => {
            let path = dir.join(name);
            std::fs::create_dir_all(dir)
                .and_then(|_| std::fs::write(&path, text))
                .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_dir(cli: &Cli, file: &RunConfigFile, path: &Path, several: bool) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    match (&cli.output_dir, &file.output.dir) {
        (Some(d), _) if several => d.join(stem),
        (Some(d), _) => d.clone(),
        (None, Some(d)) => d.clone(),
        (None, None) => PathBuf::from("runs").join(stem),
    }
}

/// Runs every configuration and returns the largest exit code.
fn sweep(cli: &Cli, configs: &[PathBuf], mode: Mode) -> CliResult<u8> {
    let several = configs.len() > 1;
    let one = |path: &PathBuf| -> u8 {
        let result = RunConfigFile::load(path).and_then(|file| {
            let run = file.resolve(mode)?;
            let dir = run_dir(cli, &file, path, several);
            run::execute(&run, &dir).map(|code| (code, dir))
        });
        match result {
            Ok((code, dir)) => {
                eprintln!("{}: wrote {}", path.display(), dir.display());
                code
            }
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                e.code
            }
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::config(format!("cannot start {} workers: {e}", cli.jobs)))?;
    let codes: Vec<u8> = pool.install(|| configs.par_iter().map(one).collect());
    Ok(codes.into_iter().max().unwrap_or(OK))
}
