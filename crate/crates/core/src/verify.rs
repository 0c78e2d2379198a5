//! Independent checks of runs: soliton-equation residuals in `t`, the
//! conservation law, the proved inequalities, the eigenstructure of the
//! critical points and the hyperbolic closed form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::equilibria::{
    e_minus, e_plus, e_plus_planar_eigenvalues, eigen_residual, origin, planar_jacobian,
    soliton_seed, sphere_fixed_linearization, Equilibrium, Linearization,
};
use crate::error::{Result, SolitonError};
use crate::fd::derivative5;
use crate::integrate::{IntegrationControls, Trajectory, EINSTEIN_TOL, STRICT_SLACK};
use crate::model::{
    grad_h, grad_q, quantities_from_slice, vector_field_into, ModelConfig, PhaseState,
};
use crate::reconstruct::{point_geometry, profile, SolitonProfile};
use crate::shoot::{solve_einstein, ShootingParams};

/// Location of the worst case of a check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Where {
    S(f64),
    T(f64),
}

/// One named check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub target: f64,
    pub measured: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(rename = "where")]
    pub location: Option<Where>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn build(
        name: &str,
        target: f64,
        measured: f64,
        tol: f64,
        pass: bool,
        location: Option<Where>,
    ) -> Self {
        Self {
            name: name.to_string(),
            target,
            measured,
            tol,
            pass,
            location,
            note: None,
        }
    }

    /// A check that could not be evaluated.
    pub fn failed(name: &str, note: impl Into<String>) -> Self {
        Self {
            note: Some(note.into()),
            ..Self::build(name, 0.0, f64::NAN, 0.0, false, None)
        }
    }

    /// `|measured − target| ≤ tol`.
    pub fn close(
        name: &str,
        target: f64,
        measured: f64,
        tol: f64,
        location: Option<Where>,
    ) -> Self {
        Self::build(
            name,
            target,
            measured,
            tol,
            (measured - target).abs() <= tol,
            location,
        )
    }

    /// `measured > bound + margin`.
    pub fn greater(
        name: &str,
        bound: f64,
        measured: f64,
        margin: f64,
        location: Option<Where>,
    ) -> Self {
        Self::build(
            name,
            bound,
            measured,
            margin,
            measured > bound + margin,
            location,
        )
    }

    /// `measured < bound − margin`.
    pub fn less(
        name: &str,
        bound: f64,
        measured: f64,
        margin: f64,
        location: Option<Where>,
    ) -> Self {
        Self::build(
            name,
            bound,
            measured,
            margin,
            measured < bound - margin,
            location,
        )
    }

    /// `measured ≥ bound − slack`.
    pub fn not_below(
        name: &str,
        bound: f64,
        measured: f64,
        slack: f64,
        location: Option<Where>,
    ) -> Self {
        Self::build(
            name,
            bound,
            measured,
            slack,
            measured >= bound - slack,
            location,
        )
    }

    /// `measured ≤ bound + slack`.
    pub fn not_above(
        name: &str,
        bound: f64,
        measured: f64,
        slack: f64,
        location: Option<Where>,
    ) -> Self {
        Self::build(
            name,
            bound,
            measured,
            slack,
            measured <= bound + slack,
            location,
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self {
            checks: Vec::new(),
            pass: true,
        }
    }

    pub fn push(&mut self, c: Check) {
        self.pass &= c.pass;
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        for c in other.checks {
            self.push(c);
        }
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Running extremum together with its location.
#[derive(Clone, Copy, Debug)]
struct Extreme {
    value: f64,
    at: f64,
}

impl Extreme {
    fn max() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            at: f64::NAN,
        }
    }
    fn min() -> Self {
        Self {
            value: f64::INFINITY,
            at: f64::NAN,
        }
    }
    fn up(&mut self, v: f64, at: f64) {
        if v > self.value || v.is_nan() {
            *self = Self { value: v, at };
        }
    }
    fn down(&mut self, v: f64, at: f64) {
        if v < self.value || v.is_nan() {
            *self = Self { value: v, at };
        }
    }
}

/// Maximum residual and the `t` where it occurs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Worst {
    pub value: f64,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Residuals {
    /// `|ü_FD − Σ d_i g̈_i/g_i + ε/2|`.
    pub trace: Worst,
    /// `|λ_i/g_i² − g̈_i,FD/g_i − (ġ_i/g_i)(tr L − ġ_i/g_i) + u̇ ġ_i/g_i + ε/2|`.
    pub factor: Vec<Worst>,
    pub interior_samples: usize,
}

/// Fewest interior samples a residual window must contain.
pub const MIN_INTERIOR: usize = 10;

/// Residuals of the soliton equations on the rows of `profile` with
/// `t ∈ [t_lo, t_hi]`. Second derivatives come from five-point differences
/// of the first derivatives on the actual `t`-grid, so the two samples at
/// each end of the window are excluded.
pub fn soliton_residual(
    profile: &SolitonProfile,
    cfg: &ModelConfig,
    window: (f64, f64),
) -> Result<Residuals> {
    let rows: Vec<_> = profile
        .rows
        .iter()
        .filter(|r| r.t >= window.0 && r.t <= window.1)
        .collect();
    if rows.len() < MIN_INTERIOR + 4 {
        return Err(SolitonError::Input(format!(
            "residual window [{}, {}] has {} samples; at least {} interior samples are needed",
            window.0,
            window.1,
            rows.len().saturating_sub(4),
            MIN_INTERIOR
        )));
    }
    let eps = cfg.epsilon();
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let udot: Vec<f64> = rows.iter().map(|r| r.udot).collect();
    let uddot_fd = derivative5(&t, &udot);
    let gddot_fd: Vec<Vec<Option<f64>>> = (0..cfg.r())
        .map(|i| {
            let gd: Vec<f64> = rows.iter().map(|r| r.gdot[i]).collect();
            derivative5(&t, &gd)
        })
        .collect();
    let mut trace = Extreme::max();
    let mut factor = vec![Extreme::max(); cfg.r()];
    let mut interior = 0;
    for (k, row) in rows.iter().enumerate() {
        let Some(ufd) = uddot_fd[k] else { continue };
        interior += 1;
        let rhs: f64 = (0..cfg.r())
            .map(|i| cfg.dims()[i] as f64 * row.gddot[i] / row.g[i])
            .sum::<f64>()
            - 0.5 * eps;
        trace.up((ufd - rhs).abs(), row.t);
        for i in 0..cfg.r() {
            let g = row.g[i];
            let a = row.gdot[i] / g;
            let gdd = gddot_fd[i][k].expect("same stencil support");
            let res =
                cfg.lambdas()[i] / (g * g) - gdd / g - a * (row.trl - a) + row.udot * a + 0.5 * eps;
            factor[i].up(res.abs(), row.t);
        }
    }
    Ok(Residuals {
        trace: Worst {
            value: trace.value,
            t: trace.at,
        },
        factor: factor
            .iter()
            .map(|e| Worst {
                value: e.value,
                t: e.at,
            })
            .collect(),
        interior_samples: interior,
    })
}

/// Interior window `[0.2, 0.8 t_max]` used for soliton runs.
pub fn default_window(profile: &SolitonProfile) -> (f64, f64) {
    let t_max = profile.rows.last().map_or(0.0, |r| r.t);
    (0.2, 0.8 * t_max)
}

/// Drift of the conservation constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Conservation {
    pub c0: f64,
    /// `max |C(s) − C(s₀)| / (1 + |C(s₀)|)`.
    pub drift: f64,
    pub drift_s: f64,
    /// `max |Q − W²(C(s₀) + εu)|`.
    pub identity: f64,
    pub identity_s: f64,
}

/// Recomputes `C` and `Q` from the stored states and measures their drift.
pub fn conservation_check(traj: &Trajectory, cfg: &ModelConfig) -> Result<Conservation> {
    let first = traj.first();
    let q0 = quantities_from_slice(&first.state.phase.to_vec(), first.state.u, cfg);
    let c0 = q0.c.ok_or_else(|| {
        SolitonError::Input("conservation check needs W > 0 at the first sample".into())
    })?;
    let eps = cfg.epsilon();
    let mut drift = Extreme::max();
    let mut ident = Extreme::max();
    for smp in &traj.samples {
        let st = &smp.state;
        if !(st.phase.w > 0.0) {
            return Err(SolitonError::Input(format!(
                "conservation check needs W > 0; s = {}",
                st.s
            )));
        }
        let q = quantities_from_slice(&st.phase.to_vec(), st.u, cfg);
        let c = q.c.unwrap_or(f64::NAN);
        drift.up((c - c0).abs() / (1.0 + c0.abs()), st.s);
        ident.up((q.q - st.phase.w.powi(2) * (c0 + eps * st.u)).abs(), st.s);
    }
    Ok(Conservation {
        c0,
        drift: drift.value,
        drift_s: drift.at,
        identity: ident.value,
        identity_s: ident.at,
    })
}

/// The proved inequalities along a soliton trajectory, each tested with the
/// strict slack. `H < 1` is tested from `s₀ + 1` on, since `H → 1` at the
/// start.
pub fn invariant_suite(traj: &Trajectory, cfg: &ModelConfig) -> VerificationReport {
    let slack = STRICT_SLACK;
    let s0 = traj.first().state.s;
    let mut x_min = Extreme::min();
    let mut y_min = Extreme::min();
    let mut w_min = Extreme::min();
    let mut w_max = Extreme::max();
    let mut l_max = Extreme::max();
    let mut h_max = Extreme::max();
    let mut q_max = Extreme::max();
    let mut udot_max = Extreme::max();
    let mut uddot_max = Extreme::max();
    let mut hess_max = Extreme::max();
    let mut ratio_step = Extreme::min();
    let mut prev_ratio: Option<Vec<f64>> = None;
    for smp in &traj.samples {
        let st = &smp.state;
        let z = &st.phase;
        let s = st.s;
        let q = quantities_from_slice(&z.to_vec(), st.u, cfg);
        z.x.iter().for_each(|v| x_min.down(*v, s));
        z.y.iter().for_each(|v| y_min.down(*v, s));
        w_min.down(z.w, s);
        w_max.up(z.w, s);
        l_max.up(q.l, s);
        q_max.up(q.q, s);
        if s >= s0 + 1.0 {
            h_max.up(q.h, s);
        }
        if s > s0 {
            let geo = point_geometry(z, cfg);
            udot_max.up(geo.udot, s);
            uddot_max.up(geo.uddot, s);
            for i in 0..cfg.r() {
                hess_max.up(geo.udot * geo.gdot[i] / geo.g[i], s);
            }
        }
        let ratio: Vec<f64> = z.y.iter().map(|y| z.w / y).collect();
        if let Some(p) = &prev_ratio {
            for (a, b) in p.iter().zip(&ratio) {
                ratio_step.down((b - a) / a.abs(), s);
            }
        }
        prev_ratio = Some(ratio);
    }
    let at = |e: &Extreme| Some(Where::S(e.at));
    let mut rep = VerificationReport::new();
    rep.push(Check::greater(
        "X positivity",
        0.0,
        x_min.value,
        slack,
        at(&x_min),
    ));
    rep.push(Check::greater(
        "Y positivity",
        0.0,
        y_min.value,
        slack,
        at(&y_min),
    ));
    rep.push(Check::greater(
        "W positivity",
        0.0,
        w_min.value,
        slack,
        at(&w_min),
    ));
    rep.push(Check::less(
        "W upper bound",
        cfg.w_max(),
        w_max.value,
        slack,
        at(&w_max),
    ));
    rep.push(Check::less(
        "L negativity",
        0.0,
        l_max.value,
        slack,
        at(&l_max),
    ));
    rep.push(Check::less("H bound", 1.0, h_max.value, slack, at(&h_max)));
    rep.push(Check::less(
        "Q negativity",
        0.0,
        q_max.value,
        slack,
        at(&q_max),
    ));
    rep.push(Check::not_below(
        "W/Y monotone",
        0.0,
        ratio_step.value,
        slack,
        at(&ratio_step),
    ));
    rep.push(Check::not_above(
        "udot sign",
        0.0,
        udot_max.value,
        slack,
        at(&udot_max),
    ));
    rep.push(Check::less(
        "uddot negativity",
        0.0,
        uddot_max.value,
        slack,
        at(&uddot_max),
    ));
    rep.push(Check::not_above(
        "hessian sign",
        0.0,
        hess_max.value,
        slack,
        at(&hess_max),
    ));
    rep
}

/// Agreement of the two `g_i` reconstructions. Einstein runs are
/// projected after every step while `log g_i` is not, so this applies to
/// soliton runs only.
pub fn reconstruction_check(profile: &SolitonProfile) -> Check {
    Check::not_above("g reconstruction", 0.0, profile.g_discrepancy, 1e-7, None)
}

/// The identity `ü W² = Q + 1 − H` on every row.
pub fn uddot_identity_check(profile: &SolitonProfile, cfg: &ModelConfig) -> Check {
    let mut worst = Extreme::max();
    for row in &profile.rows {
        let z = PhaseState {
            w: row.w,
            x: row.x.clone(),
            y: row.y.clone(),
        };
        let q = quantities_from_slice(&z.to_vec(), row.u, cfg);
        worst.up((row.uddot * row.w * row.w - (q.q + 1.0 - q.h)).abs(), row.s);
    }
    Check::not_above(
        "uddot identity",
        0.0,
        worst.value,
        1e-12,
        Some(Where::S(worst.at)),
    )
}

/// Central-difference Jacobian of the phase field.
pub fn fd_jacobian(z: &PhaseState, cfg: &ModelConfig, step: f64) -> DMatrix<f64> {
    let base = z.to_vec();
    let n = base.len();
    let mut m = DMatrix::zeros(n, n);
    let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
    for j in 0..n {
        let mut zp = base.clone();
        let mut zm = base.clone();
        zp[j] += step;
        zm[j] -= step;
        vector_field_into(&zp, cfg, &mut fp);
        vector_field_into(&zm, cfg, &mut fm);
        for i in 0..n {
            m[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    m
}

fn multiset_gap(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn catalogue(cfg: &ModelConfig) -> Vec<(String, Equilibrium, Linearization)> {
    let r = cfg.r();
    let mut out = Vec::new();
    let (e, l) = origin(cfg);
    out.push(("origin".into(), e, l));
    let (e, l) = soliton_seed(cfg);
    out.push(("seed".into(), e, l));
    let (e, l) = e_plus(cfg);
    out.push(("E+".into(), e, l));
    let (e, l) = e_minus(cfg);
    out.push(("E-".into(), e, l));
    let mut p = vec![0.0; r];
    p[0] = 1.0;
    let (e, l) = sphere_fixed_linearization(&p, cfg).expect("unit vector");
    out.push(("sphere e1".into(), e, l));
    let u = vec![1.0 / (r as f64).sqrt(); r];
    let (e, l) = sphere_fixed_linearization(&u, cfg).expect("unit vector");
    out.push(("sphere diagonal".into(), e, l));
    out
}

/// Eigenstructure of every catalogued critical point against the analytic
/// and the finite-difference Jacobian, and the sign conditions at `E₊`.
pub fn equilibrium_suite(cfg: &ModelConfig) -> VerificationReport {
    let r = cfg.r();
    let nf = cfg.nf();
    let eps = cfg.epsilon();
    let b2 = cfg.beta().powi(2);
    let mut rep = VerificationReport::new();
    for (name, eq, lin) in catalogue(cfg) {
        let z = eq.point.to_vec();
        let mut f = vec![0.0; z.len()];
        vector_field_into(&z, cfg, &mut f);
        let fmax = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        rep.push(Check::not_above(
            &format!("field at {name}"),
            0.0,
            fmax,
            1e-14,
            None,
        ));
        rep.push(Check::not_above(
            &format!("eigen residual {name}"),
            0.0,
            lin.max_residual(),
            1e-10,
            None,
        ));
        let fd = fd_jacobian(&eq.point, cfg, 1e-6);
        let fd_res = lin
            .pairs
            .iter()
            .map(|p| eigen_residual(&fd, p) / p.vector.amax())
            .fold(0.0, f64::max);
        rep.push(Check::not_above(
            &format!("FD eigen residual {name}"),
            0.0,
            fd_res,
            1e-6,
            None,
        ));
        rep.push(Check::close(
            &format!("eigenvector count {name}"),
            (2 * r + 1) as f64,
            lin.pairs.len() as f64,
            0.0,
            None,
        ));
    }

    let (_, seed) = soliton_seed(cfg);
    let mut expect = vec![2.0 * b2];
    expect.extend(std::iter::repeat_n(b2, r));
    expect.extend(std::iter::repeat_n(b2 - 1.0, r));
    rep.push(Check::not_above(
        "seed spectrum",
        0.0,
        multiset_gap(seed.eigenvalues(), expect),
        1e-12,
        None,
    ));

    let (ep, ep_lin) = e_plus(cfg);
    let (lp, lm) = e_plus_planar_eigenvalues(cfg);
    let mut expect = vec![lp, lm];
    expect.extend(std::iter::repeat_n(-1.0 / nf, r));
    expect.extend(std::iter::repeat_n(-1.0, r - 1));
    rep.push(Check::not_above(
        "E+ spectrum",
        0.0,
        multiset_gap(ep_lin.eigenvalues(), expect.clone()),
        1e-12,
        None,
    ));
    let positive = ep_lin.eigenvalues().iter().filter(|v| **v > 0.0).count();
    rep.push(Check::close(
        "E+ unstable dimension",
        1.0,
        positive as f64,
        0.0,
        None,
    ));

    let pj = planar_jacobian(ep.point.x[0], ep.point.w, cfg);
    let tr = pj[0][0] + pj[1][1];
    let det = pj[0][0] * pj[1][1] - pj[0][1] * pj[1][0];
    let disc = (tr * tr - 4.0 * det).sqrt();
    let planar = vec![0.5 * (tr + disc), 0.5 * (tr - disc)];
    rep.push(Check::not_above(
        "E+ planar spectrum",
        0.0,
        multiset_gap(planar, vec![lp, lm]),
        1e-12,
        None,
    ));

    let zq = ep.point.to_vec();
    let qs = quantities_from_slice(&zq, 0.0, cfg);
    rep.push(Check::close("E+ H", 1.0, qs.h, 1e-14, None));
    rep.push(Check::close("E+ Q", 0.0, qs.q, 1e-14, None));
    let gq = grad_q(&zq, cfg);
    let mut gq_closed = DVector::zeros(zq.len());
    gq_closed[0] = eps * (nf - 1.0) * ep.point.w;
    for i in 0..r {
        gq_closed[cfg.ix(i)] = 2.0 * cfg.sqrt_d()[i] / nf;
    }
    rep.push(Check::not_above(
        "E+ grad Q",
        0.0,
        (&gq - &gq_closed).amax(),
        1e-14,
        None,
    ));
    let v = &ep_lin.special.as_ref().expect("E+ special vector").vector;
    rep.push(Check::greater("E+ v.gradQ", 0.0, v.dot(&gq), 0.0, None));
    rep.push(Check::less(
        "E+ v.gradH",
        0.0,
        v.dot(&grad_h(cfg)),
        0.0,
        None,
    ));

    let (se, _) = soliton_seed(cfg);
    let mut q = DVector::zeros(zq.len());
    q[cfg.ix(0)] = 2.0 * cfg.beta();
    q[cfg.iy(0)] = cfg.beta_hat();
    let q_hat = q.normalize();
    let q_worst = [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|d| {
            let z = se.point.to_dvector() - &q_hat * *d;
            quantities_from_slice(z.as_slice(), 0.0, cfg).q
        })
        .fold(f64::NEG_INFINITY, f64::max);
    rep.push(Check::less("seed -q decreases Q", 0.0, q_worst, 0.0, None));
    rep
}

/// `c sinh(t/c)` with `c = sqrt(2 d_1/ε)`.
pub fn hyperbolic_g(t: f64, cfg: &ModelConfig) -> f64 {
    let c = (2.0 * cfg.dims()[0] as f64 / cfg.epsilon()).sqrt();
    c * (t / c).sinh()
}

/// Largest relative deviation of `g_1` from the hyperbolic closed form on
/// `t ∈ [t_lo, t_hi]`.
pub fn hyperbolic_error(
    profile: &SolitonProfile,
    cfg: &ModelConfig,
    t_lo: f64,
    t_hi: f64,
) -> Worst {
    let mut e = Extreme::max();
    for row in profile.rows.iter().filter(|r| r.t >= t_lo && r.t <= t_hi) {
        e.up((row.g[0] / hyperbolic_g(row.t, cfg) - 1.0).abs(), row.t);
    }
    Worst {
        value: e.value,
        t: e.at,
    }
}

/// Checks of an Einstein profile for `r = 1` against the hyperbolic metric.
pub fn hyperbolic_checks(profile: &SolitonProfile, cfg: &ModelConfig) -> VerificationReport {
    let mut rep = VerificationReport::new();
    let t_end = profile.rows.last().map_or(0.0, |r| r.t);
    rep.push(Check::not_below(
        "hyperbolic t range",
        10.0,
        t_end,
        0.0,
        None,
    ));
    let err = hyperbolic_error(profile, cfg, 0.1, 10.0);
    rep.push(Check::not_above(
        "hyperbolic g",
        0.0,
        err.value,
        1e-6,
        Some(Where::T(err.t)),
    ));
    rep
}

/// Runs the `r = 1` Einstein shot and compares it with `c sinh(t/c)`.
pub fn hyperbolic_oracle(
    cfg: &ModelConfig,
    controls: &IntegrationControls,
) -> Result<VerificationReport> {
    if cfg.r() != 1 {
        return Err(SolitonError::Input(
            "the hyperbolic oracle needs r = 1".into(),
        ));
    }
    let traj = solve_einstein(cfg, &ShootingParams::einstein_default(cfg), controls)?;
    let prof = profile(&traj, cfg)?;
    let mut rep = hyperbolic_checks(&prof, cfg);
    rep.extend(einstein_suite(&traj, cfg));
    Ok(rep)
}

/// Einstein-mode checks: convergence to `E₊`, constant potential, the
/// equalities `H = 1`, `Q = 0`, `C = 0` and the mean-curvature limit.
pub fn einstein_suite(traj: &Trajectory, cfg: &ModelConfig) -> VerificationReport {
    let ep = crate::equilibria::e_plus_point(cfg).to_dvector();
    let mut u_max = Extreme::max();
    let mut h_dev = Extreme::max();
    let mut q_dev = Extreme::max();
    let mut c_dev = Extreme::max();
    let mut increases = 0usize;
    let mut first_increase = None;
    let mut prev: Option<f64> = None;
    let mut close = false;
    for smp in &traj.samples {
        let st = &smp.state;
        let q = quantities_from_slice(&st.phase.to_vec(), st.u, cfg);
        u_max.up(st.u.abs(), st.s);
        h_dev.up((q.h - 1.0).abs(), st.s);
        q_dev.up(q.q.abs(), st.s);
        if let Some(c) = q.c {
            c_dev.up(c.abs(), st.s);
        }
        let d = (st.phase.to_dvector() - &ep).norm();
        if let Some(p) = prev {
            // Below 1e-10 the distance is at the rounding level of W and X.
            if close && d > p && p > 1e-10 {
                increases += 1;
                first_increase.get_or_insert(st.s);
            }
        }
        close |= d < 1e-6;
        prev = Some(d);
    }
    let last = traj.last();
    let d_end = (last.state.phase.to_dvector() - &ep).norm();
    let trl = point_geometry(&last.state.phase, cfg).trl;
    let s_end = Some(Where::S(last.state.s));
    let mut rep = VerificationReport::new();
    rep.push(Check::not_above("distance to E+", 0.0, d_end, 1e-6, s_end));
    rep.push(Check::close(
        "distance monotone",
        0.0,
        increases as f64,
        0.0,
        first_increase.map(Where::S),
    ));
    rep.push(Check::not_above(
        "u constancy",
        0.0,
        u_max.value,
        1e-7,
        Some(Where::S(u_max.at)),
    ));
    rep.push(Check::not_above(
        "H equality",
        0.0,
        h_dev.value,
        EINSTEIN_TOL,
        Some(Where::S(h_dev.at)),
    ));
    rep.push(Check::not_above(
        "Q equality",
        0.0,
        q_dev.value,
        EINSTEIN_TOL,
        Some(Where::S(q_dev.at)),
    ));
    rep.push(Check::not_above(
        "C vanishes",
        0.0,
        c_dev.value,
        1e-7,
        Some(Where::S(c_dev.at)),
    ));
    rep.push(Check::close(
        "mean curvature limit",
        (cfg.nf() * cfg.epsilon() / 2.0).sqrt(),
        trl,
        1e-4,
        s_end,
    ));
    rep
}

/// Termination, conservation, invariants, reconstruction and residual
/// checks of a soliton run.
///
/// Steps that cannot be evaluated on the given data, such as a profile with
/// `W ≤ 0`, are reported as failed checks.
pub fn verify_soliton(traj: &Trajectory, cfg: &ModelConfig) -> VerificationReport {
    let mut rep = VerificationReport::new();
    rep.push(Check::close(
        "no monitor violation",
        0.0,
        traj.is_violation() as u8 as f64,
        0.0,
        None,
    ));
    rep.extend(or_failed("conservation", conservation_checks(traj, cfg)));
    rep.extend(invariant_suite(traj, cfg));
    match profile(traj, cfg) {
        Ok(prof) => {
            rep.push(reconstruction_check(&prof));
            rep.push(uddot_identity_check(&prof, cfg));
            rep.extend(or_failed(
                "residuals",
                residual_checks(&prof, cfg, default_window(&prof)),
            ));
        }
        Err(e) => rep.push(Check::failed("profile", e.to_string())),
    }
    if let Ok(asy) = crate::reconstruct::asymptotics(traj, cfg) {
        rep.push(Check::less(
            "centre manifold tightens",
            asy.centre_mid,
            asy.centre_end,
            0.0,
            None,
        ));
    }
    rep
}

/// Einstein-suite, conservation and residual checks of an Einstein run, and
/// the hyperbolic comparison when `r = 1`.
pub fn verify_einstein(traj: &Trajectory, cfg: &ModelConfig) -> VerificationReport {
    let mut rep = VerificationReport::new();
    rep.push(Check::close(
        "no monitor violation",
        0.0,
        traj.is_violation() as u8 as f64,
        0.0,
        None,
    ));
    rep.extend(einstein_suite(traj, cfg));
    match profile(traj, cfg) {
        Ok(prof) => {
            rep.push(uddot_identity_check(&prof, cfg));
            if cfg.r() == 1 {
                rep.extend(hyperbolic_checks(&prof, cfg));
            }
        }
        Err(e) => rep.push(Check::failed("profile", e.to_string())),
    }
    rep
}

fn or_failed(name: &str, r: Result<VerificationReport>) -> VerificationReport {
    r.unwrap_or_else(|e| {
        let mut rep = VerificationReport::new();
        rep.push(Check::failed(name, e.to_string()));
        rep
    })
}

fn conservation_checks(traj: &Trajectory, cfg: &ModelConfig) -> Result<VerificationReport> {
    let c = conservation_check(traj, cfg)?;
    let mut rep = VerificationReport::new();
    rep.push(Check::not_above(
        "C drift",
        0.0,
        c.drift,
        1e-6,
        Some(Where::S(c.drift_s)),
    ));
    rep.push(Check::not_above(
        "Q identity",
        0.0,
        c.identity,
        1e-9,
        Some(Where::S(c.identity_s)),
    ));
    Ok(rep)
}

fn residual_checks(
    prof: &SolitonProfile,
    cfg: &ModelConfig,
    window: (f64, f64),
) -> Result<VerificationReport> {
    let res = soliton_residual(prof, cfg, window)?;
    let mut rep = VerificationReport::new();
    rep.push(Check::not_above(
        "trace residual",
        0.0,
        res.trace.value,
        1e-5,
        Some(Where::T(res.trace.t)),
    ));
    for (i, f) in res.factor.iter().enumerate() {
        rep.push(Check::not_above(
            &format!("factor residual {}", i + 1),
            0.0,
            f.value,
            1e-5,
            Some(Where::T(f.t)),
        ));
    }
    Ok(rep)
}
