//! Samples of the reduced planar flow in the `(X_1, W)` box and the
//! catalogue of critical points.

use serde::Serialize;
use soliton_core::equilibria::{
    e_minus, e_plus, e_plus_point, origin, planar_nullcline_slope, planar_reduced_field,
    soliton_seed, sphere_fixed_linearization, Equilibrium, Linearization,
};
use soliton_core::model::{ModelConfig, PhaseState};

use crate::exit::{CliError, CliResult};
use crate::table::fmt;

/// Parses `A,B` into two numbers.
pub fn parse_pair<T: std::str::FromStr>(flag: &str, text: &str) -> CliResult<(T, T)> {
    let bad = || {
        CliError::config(format!(
            "{flag} expects two comma-separated values, got {text:?}"
        ))
    };
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

#[derive(Clone, Debug)]
pub struct PortraitSpec {
    pub x1_steps: usize,
    pub w_steps: usize,
    pub w0: Option<f64>,
    pub x1_range: Option<(f64, f64)>,
    pub w_range: Option<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Grid,
    Nullcline,
    Critical,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Grid => "grid",
            Kind::Nullcline => "nullcline",
            Kind::Critical => "critical",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PortraitRow {
    pub x1: f64,
    pub w: f64,
    pub dx1: f64,
    pub dw: f64,
    pub kind: Kind,
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| {
        if k + 1 == n {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        }
    })
}

fn intersect(user: Option<(f64, f64)>, lo: f64, hi: f64, name: &str) -> CliResult<(f64, f64)> {
    let (a, b) = user.unwrap_or((lo, hi));
    let (a, b) = (a.max(lo), b.min(hi));
    if !(a <= b) {
        return Err(CliError::config(format!(
            "{name} range does not meet the box [{lo}, {hi}]"
        )));
    }
    Ok((a, b))
}

/// Grid samples over the user range intersected with the box
/// `0 ≤ X_1 ≤ sqrt(d_1)/n`, `w₀ ≤ W ≤ sqrt(2/ε)`, followed by samples on
/// the `W`-nullcline and the point `E₊` when they fall inside.
pub fn portrait(cfg: &ModelConfig, spec: &PortraitSpec) -> CliResult<Vec<PortraitRow>> {
    if spec.x1_steps < 2 || spec.w_steps < 2 {
        return Err(CliError::config("--grid needs at least 2 steps per axis"));
    }
    let w_top = cfg.w_max();
    let w0 = spec.w0.unwrap_or(0.01 * w_top);
    if !(w0 > 0.0 && w0 < w_top) {
        return Err(CliError::config(format!("--w0 must lie in (0, {w_top})")));
    }
    let (x_lo, x_hi) = intersect(spec.x1_range, 0.0, cfg.sqrt_d()[0] / cfg.nf(), "X1")?;
    let (w_lo, w_hi) = intersect(spec.w_range, w0, w_top, "W")?;
    let row = |x1: f64, w: f64, kind| {
        let (dx1, dw) = planar_reduced_field(x1, w, cfg);
        PortraitRow {
            x1,
            w,
            dx1,
            dw,
            kind,
        }
    };
    let mut rows = Vec::with_capacity(spec.x1_steps * spec.w_steps + spec.w_steps + 1);
    for x1 in linspace(x_lo, x_hi, spec.x1_steps) {
        for w in linspace(w_lo, w_hi, spec.w_steps) {
            rows.push(row(x1, w, Kind::Grid));
        }
    }
    let slope = planar_nullcline_slope(cfg);
    for w in linspace(w_lo, w_hi, spec.w_steps) {
        let x1 = slope * w;
        if (x_lo..=x_hi).contains(&x1) {
            rows.push(row(x1, w, Kind::Nullcline));
        }
    }
    let ep = e_plus_point(cfg);
    if (x_lo..=x_hi).contains(&ep.x[0]) && (w_lo..=w_hi).contains(&ep.w) {
        rows.push(row(ep.x[0], ep.w, Kind::Critical));
    }
    Ok(rows)
}

pub fn portrait_csv(rows: &[PortraitRow]) -> String {
    let mut out = String::from("X1,W,dX1,dW,kind\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(r.x1),
            fmt(r.w),
            fmt(r.dx1),
            fmt(r.dw),
            r.kind.name()
        ));
    }
    out
}

#[derive(Debug, Serialize)]
pub struct PointJson {
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "X")]
    pub x: Vec<f64>,
    #[serde(rename = "Y")]
    pub y: Vec<f64>,
}

impl From<&PhaseState> for PointJson {
    fn from(p: &PhaseState) -> Self {
        Self {
            w: p.w,
            x: p.x.clone(),
            y: p.y.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EigenJson {
    pub value: f64,
    pub vector: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct CriticalPoint {
    pub name: String,
    pub point: PointJson,
    /// Ascending, with multiplicity.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<EigenJson>,
    pub unstable_dimension: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub special: Option<EigenJson>,
}

fn entry(name: String, (eq, lin): (Equilibrium, Linearization)) -> CriticalPoint {
    let json = |p: &soliton_core::equilibria::EigenPair| EigenJson {
        value: p.value,
        vector: p.vector.iter().copied().collect(),
    };
    let pairs = lin.sorted_pairs();
    CriticalPoint {
        name,
        point: (&eq.point).into(),
        eigenvalues: lin.eigenvalues(),
        eigenvectors: pairs.iter().map(json).collect(),
        unstable_dimension: pairs.iter().filter(|p| p.value > 0.0).count(),
        special: lin.special.as_ref().map(json),
    }
}

/// The origin, the soliton seed, `E±` and the coordinate points of the
/// critical sphere `{ΣX² = 1, W = Y = 0}`.
pub fn critical_points(cfg: &ModelConfig) -> CliResult<Vec<CriticalPoint>> {
    let mut out = vec![
        entry("origin".into(), origin(cfg)),
        entry("soliton_seed".into(), soliton_seed(cfg)),
        entry("e_plus".into(), e_plus(cfg)),
        entry("e_minus".into(), e_minus(cfg)),
    ];
    for i in 0..cfg.r() {
        let mut p = vec![0.0; cfg.r()];
        p[i] = 1.0;
        out.push(entry(
            format!("sphere_e{}", i + 1),
            sphere_fixed_linearization(&p, cfg)?,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(x: usize, w: usize) -> PortraitSpec {
        PortraitSpec {
            x1_steps: x,
            w_steps: w,
            w0: None,
            x1_range: None,
            w_range: None,
        }
    }

    #[test]
    fn grid_covers_the_box_corners() {
        let cfg = ModelConfig::new(&[2, 3], 1.0).unwrap();
        let rows = portrait(&cfg, &spec(3, 4)).unwrap();
        let grid: Vec<_> = rows.iter().filter(|r| r.kind == Kind::Grid).collect();
        assert_eq!(grid.len(), 12);
        assert_eq!(grid[0].x1, 0.0);
        assert_eq!(grid[0].w, 0.01 * cfg.w_max());
        assert_eq!(grid[11].x1, 2f64.sqrt() / 5.0);
        assert_eq!(grid[11].w, cfg.w_max());
    }

    #[test]
    fn user_range_is_clipped_to_the_box() {
        let cfg = ModelConfig::new(&[2], 2.0).unwrap();
        let s = PortraitSpec {
            x1_range: Some((-1.0, 0.5)),
            w_range: Some((0.2, 5.0)),
            ..spec(2, 2)
        };
        let rows = portrait(&cfg, &s).unwrap();
        assert_eq!(rows[0].x1, 0.0);
        assert_eq!(rows[1].w, 1.0);
        let s = PortraitSpec {
            x1_range: Some((2.0, 3.0)),
            ..spec(2, 2)
        };
        assert!(portrait(&cfg, &s).is_err());
    }

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair::<usize>("--grid", "10,20").unwrap(), (10, 20));
        assert!(parse_pair::<usize>("--grid", "10").is_err());
        assert!(parse_pair::<usize>("--grid", "10,x").is_err());
        assert!(parse_pair::<usize>("--grid", "-1,4").is_err());
    }
}
