//! The `solve` and `einstein` subcommands.

use std::path::Path;

use serde::Serialize;
use soliton_core::equilibria::e_plus_point;
use soliton_core::integrate::{IntegrationControls, Termination, Trajectory, TrajectoryStats};
use soliton_core::model::AugmentedState;
use soliton_core::reconstruct::{
    asymptotics, origin_limits, point_geometry, profile, AsymptoticReport, LimitReport,
};
use soliton_core::shoot::{is_success, solve_einstein, solve_soliton, Mode, ShootingParams};
use soliton_core::verify::{conservation_check, hyperbolic_error, Conservation, Worst};

use crate::config::{Format, Run, RunConfigFile};
use crate::exit::{CliError, CliResult, INTEGRATION, OK, VIOLATION};
use crate::table;

pub const TRAJECTORY: &str = "trajectory.csv";
pub const PROFILE: &str = "profile.csv";
pub const SUMMARY: &str = "summary.json";

/// Most entries kept in the distance-to-`E₊` series of a summary.
const SERIES_LEN: usize = 400;

/// An Einstein run succeeds when it ends this close to `E₊`.
const E_PLUS_RADIUS: f64 = 1e-6;

/// A computed value, or the reason it is missing.
#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Outcome<T> {
    Value(T),
    Missing { error: String },
}

impl<T, E: ToString> From<Result<T, E>> for Outcome<T> {
    fn from(r: Result<T, E>) -> Self {
        match r {
            Ok(v) => Outcome::Value(v),
            Err(e) => Outcome::Missing {
                error: e.to_string(),
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ProfileSummary {
    pub rows: usize,
    pub t_offset: f64,
    pub t_end: f64,
    pub g_discrepancy: f64,
}

#[derive(Debug, Serialize)]
pub struct MeanCurvature {
    pub measured: f64,
    pub target: f64,
}

#[derive(Debug, Serialize)]
pub struct EinsteinSummary {
    /// `(s, ‖z − E₊‖)` pairs, thinned to at most a few hundred entries.
    pub distance_to_e_plus: Vec<[f64; 2]>,
    pub final_distance: f64,
    pub mean_curvature: MeanCurvature,
    /// Largest relative error of `g_1` against the hyperbolic metric on
    /// `t ∈ [0.1, 10]`, for one factor only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyperbolic_error: Option<Worst>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub config: RunConfigFile,
    pub params: ShootingParams,
    pub controls: IntegrationControls,
    pub termination: Termination,
    /// Soliton runs: no violation and decay to the origin. Einstein runs: no
    /// violation and arrival at `E₊`.
    pub success: bool,
    pub stats: TrajectoryStats,
    pub samples: usize,
    pub first: AugmentedState,
    pub last: AugmentedState,
    pub conservation: Outcome<Conservation>,
    pub profile: Outcome<ProfileSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limits: Option<Outcome<LimitReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotics: Option<Outcome<AsymptoticReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub einstein: Option<EinsteinSummary>,
}

/// Runs one configuration and writes its artifacts into `dir`. Returns the
/// exit code of the run.
pub fn execute(run: &Run, dir: &Path) -> CliResult<u8> {
    let cfg = &run.cfg;
    let traj = match run.mode {
        Mode::Soliton => solve_soliton(cfg, &run.params, &run.controls),
        Mode::Einstein => solve_einstein(cfg, &run.params, &run.controls),
    }?;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;

    let prof = profile(&traj, cfg);
    if run.wants(Format::Csv) {
        table::write_trajectory(&dir.join(TRAJECTORY), &traj.samples, cfg)?;
        if let Ok(p) = &prof {
            table::write_profile(&dir.join(PROFILE), p, cfg)?;
        }
    }
    if run.wants(Format::Json) {
        let summary = summarize(run, &traj, prof.as_ref().map_err(|e| e.to_string()));
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        std::fs::write(dir.join(SUMMARY), text + "\n")
            .map_err(|e| CliError::config(format!("cannot write summary: {e}")))?;
    }

    match &traj.termination {
        Termination::InvariantViolated { name, s } => Err(CliError::new(
            VIOLATION,
            format!(
                "invariant violated: {name} at s = {s}; artifacts in {}",
                dir.display()
            ),
        )),
        Termination::StepFailure(m) => Err(CliError::new(
            INTEGRATION,
            format!("integration failed: {m}; artifacts in {}", dir.display()),
        )),
        _ => Ok(OK),
    }
}

fn summarize(
    run: &Run,
    traj: &Trajectory,
    prof: Result<&soliton_core::reconstruct::SolitonProfile, String>,
) -> Summary {
    let cfg = &run.cfg;
    let profile_summary = prof.clone().map(|p| ProfileSummary {
        rows: p.rows.len(),
        t_offset: p.t_offset,
        t_end: p.rows.last().map_or(f64::NAN, |r| r.t),
        g_discrepancy: p.g_discrepancy,
    });
    let (limits, asy, einstein) = match run.mode {
        Mode::Soliton => (
            Some(origin_limits(traj, cfg, &run.params).into()),
            Some(asymptotics(traj, cfg).into()),
            None,
        ),
        Mode::Einstein => (None, None, Some(einstein_summary(traj, run, prof.ok()))),
    };
    Summary {
        config: run.resolved.clone(),
        params: run.params.clone(),
        controls: run.controls,
        termination: traj.termination.clone(),
        success: match run.mode {
            Mode::Soliton => is_success(traj, &run.controls),
            Mode::Einstein => {
                !traj.is_violation()
                    && einstein
                        .as_ref()
                        .is_some_and(|e| e.final_distance <= E_PLUS_RADIUS)
            }
        },
        stats: traj.stats,
        samples: traj.samples.len(),
        first: traj.first().state.clone(),
        last: traj.last().state.clone(),
        conservation: match run.mode {
            Mode::Soliton => conservation_check(traj, cfg).into(),
            Mode::Einstein => Outcome::Missing {
                error: "C vanishes identically in einstein mode".into(),
            },
        },
        profile: profile_summary.into(),
        limits,
        asymptotics: asy,
        einstein,
    }
}

fn einstein_summary(
    traj: &Trajectory,
    run: &Run,
    prof: Option<&soliton_core::reconstruct::SolitonProfile>,
) -> EinsteinSummary {
    let cfg = &run.cfg;
    let ep = e_plus_point(cfg).to_dvector();
    let dist: Vec<[f64; 2]> = traj
        .samples
        .iter()
        .map(|smp| [smp.state.s, (smp.state.phase.to_dvector() - &ep).norm()])
        .collect();
    let stride = dist.len().div_ceil(SERIES_LEN).max(1);
    let mut series: Vec<[f64; 2]> = dist.iter().step_by(stride).copied().collect();
    let last = *dist.last().expect("trajectory has samples");
    if series.last() != Some(&last) {
        series.push(last);
    }
    EinsteinSummary {
        distance_to_e_plus: series,
        final_distance: last[1],
        mean_curvature: MeanCurvature {
            measured: point_geometry(&traj.last().state.phase, cfg).trl,
            target: (cfg.nf() * cfg.epsilon() / 2.0).sqrt(),
        },
        hyperbolic_error: match (cfg.r(), prof) {
            (1, Some(p)) => Some(hyperbolic_error(p, cfg, 0.1, 10.0)),
            _ => None,
        },
    }
}
