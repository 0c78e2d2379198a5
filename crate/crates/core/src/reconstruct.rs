//! Geometric data from trajectories: the metric coefficients `g_i(t)`, the
//! potential `u(t)` and their derivatives, limits at the collapsing end and
//! the asymptotically conical end.

use serde::Serialize;

use crate::error::{Result, SolitonError};
use crate::fd::slope;
use crate::integrate::{
    integrate, IntegrationControls, MonitorProfile, RunOptions, Sample, Trajectory,
};
use crate::model::{quantities_from_slice, ModelConfig, PhaseState};
use crate::shoot::{initial_state_with, Mode, ShootingParams, UnstableChart};

/// Geometric derivatives at one phase point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointGeometry {
    /// `g_i = sqrt(d_i λ_i) W / Y_i`
    pub g: Vec<f64>,
    pub gdot: Vec<f64>,
    pub gddot: Vec<f64>,
    pub gdddot: Vec<f64>,
    pub udot: f64,
    pub uddot: f64,
    /// Mean curvature `tr L = H / W`.
    pub trl: f64,
}

/// Evaluates the closed-form `t`-derivatives of `g_i` and `u` at `z`.
/// Requires `W ≠ 0` and `Y_i ≠ 0`.
pub fn point_geometry(z: &PhaseState, cfg: &ModelConfig) -> PointGeometry {
    let r = cfg.r();
    let eps = cfg.epsilon();
    let w = z.w;
    let w2 = w * w;
    let gsum: f64 = z.x.iter().map(|x| x * x).sum();
    let h: f64 = (0..r).map(|i| cfg.sqrt_d()[i] * z.x[i]).sum();
    let mut out = PointGeometry {
        g: Vec::with_capacity(r),
        gdot: Vec::with_capacity(r),
        gddot: Vec::with_capacity(r),
        gdddot: Vec::with_capacity(r),
        udot: (h - 1.0) / w,
        uddot: -0.5 * eps,
        trl: h / w,
    };
    for i in 0..r {
        let (x, y) = (z.x[i], z.y[i]);
        let d = cfg.dims()[i] as f64;
        let sd = cfg.sqrt_d()[i];
        let lam = cfg.lambdas()[i];
        let g = (d * lam).sqrt() * w / y;
        let pre = lam / (g * y * y);
        let gddot = pre * (x * x + y * y - sd * x + 0.5 * eps * d * w2);
        let third = x * (x * x + y * y) / sd - 3.0 * x * x - y * y
            + sd * x * (1.0 + gsum)
            + 0.5 * eps * w2 * (2.0 * sd * x - d);
        out.g.push(g);
        out.gdot.push(lam.sqrt() * x / y);
        out.gddot.push(gddot);
        out.gdddot.push(pre / w * third);
        out.uddot += d * gddot / g;
    }
    out
}

/// One row of a [`SolitonProfile`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileRow {
    pub s: f64,
    /// Geodesic distance from the collapsing orbit.
    pub t: f64,
    pub g: Vec<f64>,
    /// `exp(log g_i)` from the integrated logarithms.
    pub g_log: Vec<f64>,
    pub gdot: Vec<f64>,
    pub gddot: Vec<f64>,
    pub gdddot: Vec<f64>,
    pub u: f64,
    pub udot: f64,
    pub uddot: f64,
    pub trl: f64,
    pub w: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolitonProfile {
    pub rows: Vec<ProfileRow>,
    /// Largest relative gap between the two `g_i` reconstructions.
    pub g_discrepancy: f64,
    /// Added to the integrated `t` so that `t = 0` on the collapsing orbit.
    pub t_offset: f64,
}

/// Estimate of the geodesic distance from the collapsing orbit at the first
/// sample, from `g_1 = t + g⃛_1(0) t³/6 + O(t⁵)`.
pub fn t_offset(first: &Sample, cfg: &ModelConfig) -> f64 {
    let geo = point_geometry(&first.state.phase, cfg);
    let g1 = geo.g[0];
    g1 - geo.gdddot[0] * g1.powi(3) / 6.0
}

/// Reconstructs the geometric data on the sample grid of `traj`.
pub fn profile(traj: &Trajectory, cfg: &ModelConfig) -> Result<SolitonProfile> {
    for smp in &traj.samples {
        let ph = &smp.state.phase;
        if !(ph.w > 0.0) || ph.y.iter().any(|y| !(*y > 0.0)) {
            return Err(SolitonError::Input(format!(
                "profile needs W > 0 and Y_i > 0; violated at s = {}",
                smp.state.s
            )));
        }
    }
    let t0 = t_offset(traj.first(), cfg);
    let mut disc = 0.0f64;
    let rows = traj
        .samples
        .iter()
        .map(|smp| {
            let st = &smp.state;
            let geo = point_geometry(&st.phase, cfg);
            let g_log = st.g();
            for (a, b) in geo.g.iter().zip(&g_log) {
                disc = disc.max((a - b).abs() / a.abs());
            }
            ProfileRow {
                s: st.s,
                t: st.t + t0,
                g: geo.g,
                g_log,
                gdot: geo.gdot,
                gddot: geo.gddot,
                gdddot: geo.gdddot,
                u: st.u,
                udot: geo.udot,
                uddot: geo.uddot,
                trl: geo.trl,
                w: st.phase.w,
                x: st.phase.x.clone(),
                y: st.phase.y.clone(),
            }
        })
        .collect();
    Ok(SolitonProfile {
        rows,
        g_discrepancy: disc,
        t_offset: t0,
    })
}

/// A limit estimated from values at `h`, `h/2`, `h/4`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Extrapolated {
    pub value: f64,
    /// Values at `h`, `h/2`, `h/4`.
    pub samples: [f64; 3],
    /// `|value − v(h/4)|`, an error bar for the limit.
    pub error: f64,
    pub converged: bool,
}

impl Extrapolated {
    /// Quadratic Richardson extrapolation in `h`. The successive differences
    /// must shrink by a factor between 1.5 and 5 (first or second order),
    /// unless they are already at rounding level.
    pub fn from_samples(v: [f64; 3]) -> Self {
        let r1 = 2.0 * v[1] - v[0];
        let r2 = 2.0 * v[2] - v[1];
        let value = (4.0 * r2 - r1) / 3.0;
        let (d1, d2) = (v[0] - v[1], v[1] - v[2]);
        let noise = 1e-12 * v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let converged = if d1.abs() <= noise && d2.abs() <= noise {
            true
        } else {
            let ratio = d1 / d2;
            ratio.is_finite() && (1.5..=5.0).contains(&ratio)
        };
        Self {
            value,
            samples: v,
            error: (value - v[2]).abs(),
            converged,
        }
    }
}

/// Limits at the collapsing orbit (`s → −∞`) and at infinity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitReport {
    pub h: [f64; 3],
    /// `μ_i = lim W/Y_i`.
    pub mu: Vec<Extrapolated>,
    /// `g_i(0) = sqrt(λ_i d_i) μ_i`.
    pub g0: Vec<f64>,
    pub gdot0: Vec<Extrapolated>,
    pub gddot0: Vec<Extrapolated>,
    /// Only boundedness is meaningful.
    pub gdddot0: Vec<Extrapolated>,
    pub udot0: Extrapolated,
    /// `u(0)` relative to the normalisation `u(s₀) = 0` of the actual run.
    pub u0: f64,
    pub rho: Extrapolated,
    /// `lim (X_1 − β)/W²`.
    pub x1_limit: Extrapolated,
    /// `(βρ + (ε/2)β(d_1 − 1))/(1 + β²)` with the measured `ρ`.
    pub x1_predicted: f64,
    /// `lim X_i/Y_i²`.
    pub xy_limits: Vec<Extrapolated>,
    /// `β/(1 − β²)` for `i = 1`, `(1/sqrt(d_i) + (ε/2) sqrt(d_i) μ_i²)/(1 + β²)` otherwise.
    pub xy_predicted: Vec<f64>,
    /// Relative mismatch between the `h` start and the `h/4` start flowed
    /// forward by `ln 4 / β²`.
    pub chart_consistency: f64,
    /// `X_i/W²` at the last sample.
    pub lambda: Vec<f64>,
    /// Growth exponent of `W/Y_i` against `s` over the second half of the run.
    pub sigma_exponents: Vec<f64>,
    pub sigma_diverges: Vec<bool>,
}

/// Exponent above which `W/Y_i` is treated as unbounded.
pub const SIGMA_EXPONENT_MIN: f64 = 0.25;

struct StartValues {
    mu: Vec<f64>,
    gdot: Vec<f64>,
    gddot: Vec<f64>,
    gdddot: Vec<f64>,
    udot: f64,
    rho: f64,
    x1: f64,
    xy: Vec<f64>,
}

fn start_values(z: &PhaseState, cfg: &ModelConfig) -> StartValues {
    let r = cfg.r();
    let eps = cfg.epsilon();
    let geo = point_geometry(z, cfg);
    let qs = quantities_from_slice(&z.to_vec(), 0.0, cfg);
    let w2 = z.w * z.w;
    let c = qs.c.unwrap_or(f64::NAN);
    let tail: f64 = (1..r).map(|j| (z.y[j] / z.w).powi(2)).sum();
    StartValues {
        mu: z.y.iter().map(|y| z.w / y).collect(),
        gdot: geo.gdot,
        gddot: geo.gddot,
        gdddot: geo.gdddot,
        udot: geo.udot,
        rho: -tail + c - 0.5 * (cfg.nf() - 1.0) * eps,
        x1: (z.x[0] - cfg.beta()) / w2,
        xy: (0..r).map(|i| z.x[i] / (z.y[i] * z.y[i])).collect(),
    }
}

/// Estimates the limits of the soliton trajectory `traj` shot with `params`
/// as `s → −∞` by Richardson extrapolation over start points at `h`, `h/2`
/// and `h/4`, together with the limits at the far end.
pub fn origin_limits(
    traj: &Trajectory,
    cfg: &ModelConfig,
    params: &ShootingParams,
) -> Result<LimitReport> {
    let params = params.validated(cfg, Mode::Soliton)?;
    let chart = UnstableChart::new(cfg);
    let r = cfg.r();
    let eps = cfg.epsilon();
    let b = cfg.beta();
    let b2 = b * b;
    let hs = [params.h, params.h / 2.0, params.h / 4.0];
    let mut starts = Vec::with_capacity(3);
    let mut vals = Vec::with_capacity(3);
    for &h in &hs {
        let p = ShootingParams {
            h,
            ..params.clone()
        };
        let st = initial_state_with(cfg, &p, &chart)?;
        vals.push(start_values(&st.phase, cfg));
        starts.push(st);
    }
    let ex = |f: &dyn Fn(&StartValues) -> f64| {
        Extrapolated::from_samples([f(&vals[0]), f(&vals[1]), f(&vals[2])])
    };
    let per = |f: &dyn Fn(&StartValues, usize) -> f64| -> Vec<Extrapolated> {
        (0..r).map(|i| ex(&|v| f(v, i))).collect()
    };

    let mu = per(&|v, i| v.mu[i]);
    let rho = ex(&|v| v.rho);
    let x1_predicted = (b * rho.value + 0.5 * eps * b * (cfg.dims()[0] as f64 - 1.0)) / (1.0 + b2);
    let xy_predicted = (0..r)
        .map(|i| {
            if i == 0 {
                b / (1.0 - b2)
            } else {
                let sd = cfg.sqrt_d()[i];
                (1.0 / sd + 0.5 * eps * sd * mu[i].value.powi(2)) / (1.0 + b2)
            }
        })
        .collect();

    // The eigenvalue-weighted chart makes h ↦ h/4 a shift by ln 4 / β² in s.
    let shift = 4f64.ln() / b2;
    let mut ctl = IntegrationControls::soliton_defaults(cfg);
    ctl.rtol = 1e-12;
    ctl.atol = 1e-15;
    ctl.s_max = starts[2].s + shift;
    ctl.record_every = shift;
    let run = RunOptions {
        profile: MonitorProfile::None,
        projector: None,
        w_ref: None,
    };
    let flowed = integrate(cfg, &starts[2], &ctl, run)?;
    let za = starts[0].phase.to_dvector();
    let zb = flowed.last().state.phase.to_dvector();
    let (seed, _) = crate::equilibria::soliton_seed(cfg);
    let chart_consistency = (&zb - &za).amax() / (&za - seed.point.to_dvector()).amax();

    let first = traj.first();
    let h_first = quantities_from_slice(&first.state.phase.to_vec(), 0.0, cfg).h;
    let (lambda, sigma_exponents) = far_end(traj, cfg);

    Ok(LimitReport {
        h: hs,
        g0: (0..r)
            .map(|i| (cfg.dims()[i] as f64 * cfg.lambdas()[i]).sqrt() * mu[i].value)
            .collect(),
        gdot0: per(&|v, i| v.gdot[i]),
        gddot0: per(&|v, i| v.gddot[i]),
        gdddot0: per(&|v, i| v.gdddot[i]),
        udot0: ex(&|v| v.udot),
        u0: first.state.u - (h_first - 1.0) / (2.0 * b2),
        x1_limit: ex(&|v| v.x1),
        xy_limits: per(&|v, i| v.xy[i]),
        mu,
        rho,
        x1_predicted,
        xy_predicted,
        chart_consistency,
        sigma_diverges: sigma_exponents
            .iter()
            .map(|e| *e > SIGMA_EXPONENT_MIN)
            .collect(),
        lambda,
        sigma_exponents,
    })
}

fn second_half(traj: &Trajectory) -> &[Sample] {
    let s0 = traj.first().state.s;
    let s_mid = 0.5 * (s0 + traj.last().state.s);
    let k = traj.samples.partition_point(|x| x.state.s < s_mid);
    &traj.samples[k..]
}

fn far_end(traj: &Trajectory, cfg: &ModelConfig) -> (Vec<f64>, Vec<f64>) {
    let last = &traj.last().state.phase;
    let lambda = last.x.iter().map(|x| x / (last.w * last.w)).collect();
    let s0 = traj.first().state.s;
    let tail = second_half(traj);
    let ls: Vec<f64> = tail.iter().map(|x| (x.state.s - s0).ln()).collect();
    let sig = (0..cfg.r())
        .map(|i| {
            let v: Vec<f64> = tail
                .iter()
                .map(|x| (x.state.phase.w / x.state.phase.y[i]).ln())
                .collect();
            slope(&ls, &v)
        })
        .collect();
    (lambda, sig)
}

/// Far-end behaviour of a soliton trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub s: f64,
    pub t: f64,
    /// `(X_i/W²)/(ε sqrt(d_i)/2)`, target 1.
    pub lambda_ratio: Vec<f64>,
    /// `W εt/2`, target 1.
    pub w_eps_t: f64,
    /// `t tr L / n`, target 1.
    pub t_trl: f64,
    /// Centre-manifold residual ratio at mid-run and at the end.
    pub centre_mid: f64,
    pub centre_end: f64,
    /// Exponents of `g_i` against `t` over the second half, target 1.
    pub g_exponents: Vec<f64>,
    /// Exponents of `W/Y_i` against `s` over the second half.
    pub sigma_exponents: Vec<f64>,
}

/// `max_i |X_i − Y_i²/sqrt(d_i) − (ε sqrt(d_i)/2) W²| / (Y_i² + W²)`.
pub fn centre_manifold_residual(z: &PhaseState, cfg: &ModelConfig) -> f64 {
    let eps = cfg.epsilon();
    let w2 = z.w * z.w;
    (0..cfg.r())
        .map(|i| {
            let sd = cfg.sqrt_d()[i];
            let y2 = z.y[i] * z.y[i];
            (z.x[i] - y2 / sd - 0.5 * eps * sd * w2).abs() / (y2 + w2)
        })
        .fold(0.0, f64::max)
}

/// Fits the asymptotically conical regime. Fails with
/// [`SolitonError::Regime`] unless `W` has passed its maximum and the run
/// ends with `W² ≤ 0.01·(2/ε)`.
pub fn asymptotics(traj: &Trajectory, cfg: &ModelConfig) -> Result<AsymptoticReport> {
    let eps = cfg.epsilon();
    let last = traj.last();
    let w_end = last.state.phase.w;
    let w_peak = traj
        .samples
        .iter()
        .map(|x| x.state.phase.w)
        .fold(0.0, f64::max);
    let past_peak = w_end < 0.5 * w_peak && last.quantities.j < 0.0;
    if !past_peak || !(w_end * w_end <= 0.01 * 2.0 / eps) || traj.samples.len() < 4 {
        return Err(SolitonError::Regime(format!(
            "W² = {:.3e} at s = {} exceeds 0.01·(2/ε) = {:.3e}",
            w_end * w_end,
            last.state.s,
            0.02 / eps
        )));
    }
    let t0 = t_offset(traj.first(), cfg);
    let t_end = last.state.t + t0;
    let z = &last.state.phase;
    let h: f64 = (0..cfg.r()).map(|i| cfg.sqrt_d()[i] * z.x[i]).sum();
    let tail = second_half(traj);
    let lt: Vec<f64> = tail.iter().map(|x| (x.state.t + t0).ln()).collect();
    let g_exponents = (0..cfg.r())
        .map(|i| {
            let lg: Vec<f64> = tail
                .iter()
                .map(|x| point_geometry(&x.state.phase, cfg).g[i].ln())
                .collect();
            slope(&lt, &lg)
        })
        .collect();
    let (_, sigma_exponents) = far_end(traj, cfg);
    Ok(AsymptoticReport {
        s: last.state.s,
        t: t_end,
        lambda_ratio: (0..cfg.r())
            .map(|i| z.x[i] / (z.w * z.w) / (0.5 * eps * cfg.sqrt_d()[i]))
            .collect(),
        w_eps_t: w_end * eps * t_end / 2.0,
        t_trl: t_end * h / w_end / cfg.nf(),
        centre_mid: centre_manifold_residual(&tail[0].state.phase, cfg),
        centre_end: centre_manifold_residual(z, cfg),
        g_exponents,
        sigma_exponents,
    })
}
