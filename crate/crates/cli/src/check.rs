//! The `verify` subcommand: re-reads a run directory and runs the
//! verification suites on the stored trajectory.

use std::path::Path;

use serde::Deserialize;
use soliton_core::integrate::{Sample, Termination, Trajectory, TrajectoryStats};
use soliton_core::shoot::Mode;
use soliton_core::verify::{verify_einstein, verify_soliton, Check, VerificationReport, Where};

use crate::config::RunConfigFile;
use crate::exit::{CliError, CliResult};
use crate::run::{SUMMARY, TRAJECTORY};
use crate::table::{diagnostics, read_trajectory};

/// The parts of a summary needed to rebuild the run.
#[derive(Deserialize)]
struct StoredSummary {
    config: RunConfigFile,
    termination: Termination,
    stats: TrajectoryStats,
    samples: usize,
}

pub fn verify_dir(dir: &Path) -> CliResult<VerificationReport> {
    let summary_path = dir.join(SUMMARY);
    let text = std::fs::read_to_string(&summary_path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", summary_path.display())))?;
    let summary: StoredSummary = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("malformed {}: {e}", summary_path.display())))?;
    let mode = summary.config.mode.ok_or_else(|| {
        CliError::config(format!(
            "{} does not record the mode",
            summary_path.display()
        ))
    })?;
    let cfg = summary.config.model()?;
    let stored = read_trajectory(&dir.join(TRAJECTORY), &cfg)?;

    let mut rep = VerificationReport::new();
    rep.push(Check::close(
        "row count",
        summary.samples as f64,
        stored.states.len() as f64,
        0.0,
        None,
    ));
    let mut mismatches = 0usize;
    let mut first = None;
    for (st, d) in stored.states.iter().zip(&stored.diagnostics) {
        let again = diagnostics(st, &cfg);
        let same = again
            .iter()
            .zip(d)
            .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        if !same {
            mismatches += 1;
            first.get_or_insert(st.s);
        }
    }
    rep.push(Check::close(
        "round trip",
        0.0,
        mismatches as f64,
        0.0,
        first.map(Where::S),
    ));

    let traj = Trajectory {
        samples: stored
            .states
            .into_iter()
            .map(|s| Sample::from_state(s, &cfg))
            .collect(),
        termination: summary.termination,
        stats: summary.stats,
    };
    rep.extend(match mode {
        Mode::Soliton => verify_soliton(&traj, &cfg),
        Mode::Einstein => verify_einstein(&traj, &cfg),
    });
    Ok(rep)
}
