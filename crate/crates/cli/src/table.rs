//! CSV tables. Floats are written with 17 significant digits, which
//! round-trips every `f64` exactly.

use std::path::Path;

use soliton_core::integrate::Sample;
use soliton_core::model::{quantities_from_slice, AugmentedState, ModelConfig, PhaseState};
use soliton_core::reconstruct::{point_geometry, SolitonProfile};

use crate::exit::{CliError, CliResult};

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn numbered(prefix: &str, r: usize) -> impl Iterator<Item = String> + '_ {
    (1..=r).map(move |i| format!("{prefix}_{i}"))
}

pub fn trajectory_header(r: usize) -> Vec<String> {
    let mut h = vec!["s".to_string(), "t".into(), "W".into()];
    h.extend(numbered("X", r));
    h.extend(numbered("Y", r));
    h.push("u".into());
    h.extend(numbered("g", r));
    h.extend(["L", "H", "Q", "G", "J", "C", "udot", "uddot", "trL"].map(String::from));
    h
}

/// Diagnostic columns of a state, in table order.
pub fn diagnostics(state: &AugmentedState, cfg: &ModelConfig) -> [f64; 9] {
    let q = quantities_from_slice(&state.phase.to_vec(), state.u, cfg);
    let geo = point_geometry(&state.phase, cfg);
    [
        q.l,
        q.h,
        q.q,
        q.g,
        q.j,
        q.c.unwrap_or(f64::NAN),
        geo.udot,
        geo.uddot,
        geo.trl,
    ]
}

pub fn trajectory_row(smp: &Sample, cfg: &ModelConfig) -> Vec<f64> {
    let st = &smp.state;
    let mut row = vec![st.s, st.t, st.phase.w];
    row.extend(&st.phase.x);
    row.extend(&st.phase.y);
    row.push(st.u);
    row.extend(st.g());
    row.extend(diagnostics(st, cfg));
    row
}

pub fn profile_header(r: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for p in ["g", "gdot", "gddot", "gdddot"] {
        h.extend(numbered(p, r));
    }
    h.extend(["u", "udot", "uddot", "trL", "W"].map(String::from));
    h.extend(numbered("X", r));
    h.extend(numbered("Y", r));
    h
}

pub fn write_rows<I>(path: &Path, header: &[String], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let io = |e: csv::Error| CliError::config(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

pub fn write_trajectory(path: &Path, samples: &[Sample], cfg: &ModelConfig) -> CliResult<()> {
    let rows = samples
        .iter()
        .map(|smp| trajectory_row(smp, cfg).into_iter().map(fmt).collect());
    write_rows(path, &trajectory_header(cfg.r()), rows)
}

pub fn write_profile(path: &Path, prof: &SolitonProfile, cfg: &ModelConfig) -> CliResult<()> {
    let rows = prof.rows.iter().map(|row| {
        let mut v = vec![row.t];
        v.extend(&row.g);
        v.extend(&row.gdot);
        v.extend(&row.gddot);
        v.extend(&row.gdddot);
        v.extend([row.u, row.udot, row.uddot, row.trl, row.w]);
        v.extend(&row.x);
        v.extend(&row.y);
        v.into_iter().map(fmt).collect()
    });
    write_rows(path, &profile_header(cfg.r()), rows)
}

/// A trajectory table as read back from disk.
pub struct StoredTrajectory {
    pub states: Vec<AugmentedState>,
    /// The stored diagnostic columns of each row.
    pub diagnostics: Vec<[f64; 9]>,
}

pub fn read_trajectory(path: &Path, cfg: &ModelConfig) -> CliResult<StoredTrajectory> {
    let bad = |m: String| CliError::config(format!("{}: {m}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let r = cfg.r();
    let expected = trajectory_header(r);
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    if header != expected {
        return Err(bad(format!("unexpected columns {header:?}")));
    }
    let mut states = Vec::new();
    let mut diagnostics = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let v = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", k + 1)))?;
        let p = 2 * r + 1;
        states.push(AugmentedState {
            s: v[0],
            phase: PhaseState::from_slice(&v[2..2 + p]),
            t: v[1],
            u: v[2 + p],
            log_g: v[3 + p..3 + p + r].iter().map(|g| g.ln()).collect(),
        });
        let mut d = [0.0; 9];
        d.copy_from_slice(&v[3 + p + r..]);
        diagnostics.push(d);
    }
    if states.is_empty() {
        return Err(bad("no rows".into()));
    }
    if states.windows(2).any(|w| !(w[1].s > w[0].s)) {
        return Err(bad("s is not strictly increasing".into()));
    }
    Ok(StoredTrajectory {
        states,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [
            1.0 / 3.0,
            -2.0f64.sqrt(),
            1e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            0.1 + 0.2,
        ] {
            assert_eq!(fmt(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert!(fmt(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn headers_have_the_documented_order() {
        assert_eq!(
            trajectory_header(2).join(","),
            "s,t,W,X_1,X_2,Y_1,Y_2,u,g_1,g_2,L,H,Q,G,J,C,udot,uddot,trL"
        );
        assert_eq!(
            profile_header(1).join(","),
            "t,g_1,gdot_1,gddot_1,gdddot_1,u,udot,uddot,trL,W,X_1,Y_1"
        );
    }
}
