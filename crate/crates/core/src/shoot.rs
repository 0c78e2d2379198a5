//! Initial conditions on the unstable manifold of the soliton seed, the
//! soliton shot and the Einstein-submanifold shot.
//!
//! Points are placed with a second-order expansion of the unstable manifold
//! `z = z* + Σ θ_k v_k + Σ_{k≤l} θ_k θ_l P_kl`. In the default
//! [`ChartScaling::Eigenvalue`] chart `θ_k = h^{μ_k/β²} c_k`, so changing `h`
//! moves the start point along one and the same trajectory and the
//! coefficients alone select the member of the family.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::equilibria::soliton_seed;
use crate::error::{Result, SolitonError};
use crate::integrate::{integrate, IntegrationControls, MonitorProfile, RunOptions, Trajectory};
use crate::model::{
    grad_h, grad_q, q_weights, quantities_from_slice, second_variation, AugmentedState,
    ModelConfig, PhaseState,
};

/// Largest accepted ratio between the second-order correction and the
/// linear displacement of the start point.
pub const CHART_MAX_RATIO: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Soliton,
    Einstein,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartScaling {
    /// `θ_k = h c_k`.
    Linear,
    /// `θ_k = h^{μ_k/β²} c_k`.
    Eigenvalue,
}

/// Cone coordinates `(c_W, c_{Y_2}, …, c_{Y_r}, c_q)` and step `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingParams {
    pub coeffs: Vec<f64>,
    pub h: f64,
    pub s0: f64,
    pub scaling: ChartScaling,
}

impl ShootingParams {
    pub const DEFAULT_H: f64 = 1e-2;

    /// `(1, …, 1, −1)/sqrt(r + 1)`.
    pub fn soliton_default(cfg: &ModelConfig) -> Self {
        let r = cfg.r();
        let mut coeffs = vec![1.0; r + 1];
        coeffs[r] = -1.0;
        Self::with_coeffs(coeffs)
    }

    /// `(1, …, 1, 0)/sqrt(r)`.
    pub fn einstein_default(cfg: &ModelConfig) -> Self {
        let r = cfg.r();
        let mut coeffs = vec![1.0; r + 1];
        coeffs[r] = 0.0;
        Self::with_coeffs(coeffs)
    }

    fn with_coeffs(coeffs: Vec<f64>) -> Self {
        let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        Self {
            coeffs: coeffs.iter().map(|c| c / norm).collect(),
            h: Self::DEFAULT_H,
            s0: 0.0,
            scaling: ChartScaling::Eigenvalue,
        }
    }

    /// Checks the sign pattern for `mode` and returns a copy with unit-length
    /// coefficients.
    pub fn validated(&self, cfg: &ModelConfig, mode: Mode) -> Result<Self> {
        let r = cfg.r();
        let bad = |m: String| Err(SolitonError::Params(m));
        if self.coeffs.len() != r + 1 {
            return bad(format!(
                "expected {} coefficients (c_W, c_Y2..c_Yr, c_q), got {}",
                r + 1,
                self.coeffs.len()
            ));
        }
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return bad("coefficients must be finite".into());
        }
        if !(self.h.is_finite() && self.h >= 0.0) {
            return bad(format!(
                "h must be non-negative and finite (got {})",
                self.h
            ));
        }
        if self.h == 0.0 {
            return bad("h = 0 places the start exactly on the critical point".into());
        }
        if !self.s0.is_finite() {
            return bad("s0 must be finite".into());
        }
        if self.coeffs[0] <= 0.0 {
            return bad("c_W must be positive".into());
        }
        if let Some(k) = (1..r).find(|&k| self.coeffs[k] <= 0.0) {
            return bad(format!("c_Y{} must be positive", k + 1));
        }
        let cq = self.coeffs[r];
        match mode {
            Mode::Soliton if cq >= 0.0 => {
                return bad(format!("c_q must be negative in soliton mode (got {cq})"))
            }
            Mode::Einstein if cq != 0.0 => {
                return bad(format!("c_q must be zero in einstein mode (got {cq})"))
            }
            _ => {}
        }
        let norm = self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        Ok(Self {
            coeffs: self.coeffs.iter().map(|c| c / norm).collect(),
            ..self.clone()
        })
    }
}

/// Second-order expansion of the unstable manifold of the soliton seed.
#[derive(Clone, Debug)]
pub struct UnstableChart {
    pub seed: DVector<f64>,
    /// Unit eigenvectors `(e_W, e_{Y_2}, …, e_{Y_r}, q̂)`.
    pub vectors: Vec<DVector<f64>>,
    pub exponents: Vec<f64>,
    /// `P_kl` for `k ≤ l`, stored at `[k][l]`.
    pub second: Vec<Vec<DVector<f64>>>,
}

impl UnstableChart {
    pub fn new(cfg: &ModelConfig) -> Self {
        let (eq, lin) = soliton_seed(cfg);
        let seed = eq.point.to_dvector();
        let dim = seed.len();
        let b2 = cfg.beta() * cfg.beta();
        let vectors: Vec<DVector<f64>> = lin
            .unstable_basis
            .iter()
            .map(|p| p.vector.clone())
            .collect();
        let exponents: Vec<f64> = lin.unstable_basis.iter().map(|p| p.value).collect();
        let q_hat = vectors.last().expect("q direction").clone();
        let mut ell = DVector::zeros(dim);
        ell[cfg.ix(0)] = cfg.beta();
        ell[cfg.iy(0)] = cfg.beta_hat();
        let gq = grad_q(seed.as_slice(), cfg);
        let wq = q_weights(cfg);
        let a = &lin.matrix;
        let k_count = vectors.len();
        let mut second = vec![vec![DVector::zeros(dim); k_count]; k_count];
        for k in 0..k_count {
            for l in k..k_count {
                let mut f = DVector::from_vec(second_variation(
                    seed.as_slice(),
                    vectors[k].as_slice(),
                    vectors[l].as_slice(),
                    cfg,
                ));
                if k == l {
                    f *= 0.5;
                }
                let mu = exponents[k] + exponents[l];
                let mut m = DMatrix::identity(dim, dim) * mu - a;
                let resonant = (mu - 2.0 * b2).abs() < 1e-12;
                if resonant {
                    // The q-component is free at resonance; fix it so that
                    // the pair adds nothing to Q at second order.
                    m += &q_hat * ell.transpose();
                }
                let mut p = m.lu().solve(&f).expect("non-singular homological equation");
                if resonant {
                    let mut q2: f64 = (0..dim)
                        .map(|i| wq[i] * vectors[k][i] * vectors[l][i])
                        .sum();
                    if k != l {
                        q2 *= 2.0;
                    }
                    let alpha = -(gq.dot(&p) + q2) / gq.dot(&q_hat);
                    p += &q_hat * alpha;
                }
                second[k][l] = p;
            }
        }
        Self {
            seed,
            vectors,
            exponents,
            second,
        }
    }

    /// Chart coordinates `θ_k` for the given parameters.
    pub fn thetas(&self, params: &ShootingParams, cfg: &ModelConfig) -> Vec<f64> {
        let b2 = cfg.beta() * cfg.beta();
        params
            .coeffs
            .iter()
            .zip(&self.exponents)
            .map(|(c, mu)| match params.scaling {
                ChartScaling::Linear => params.h * c,
                ChartScaling::Eigenvalue => params.h.powf(mu / b2) * c,
            })
            .collect()
    }

    /// Returns `(linear displacement, second-order correction)`.
    pub fn displacement(&self, thetas: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let dim = self.seed.len();
        let mut lin = DVector::zeros(dim);
        let mut quad = DVector::zeros(dim);
        for (k, th) in thetas.iter().enumerate() {
            lin += &self.vectors[k] * *th;
            for l in k..thetas.len() {
                quad += &self.second[k][l] * (th * thetas[l]);
            }
        }
        (lin, quad)
    }

    pub fn point(&self, thetas: &[f64]) -> DVector<f64> {
        let (lin, quad) = self.displacement(thetas);
        &self.seed + lin + quad
    }
}

/// Projects the phase part of `y` onto `{Q = 0, H = 1}`: rescaling restores
/// `Q = 0`, a Newton step along `∇H` restricted to the tangent of `{Q = 0}`
/// corrects `H`.
pub fn project_einstein(y: &mut [f64], cfg: &ModelConfig) {
    let p = cfg.phase_dim();
    let wq = q_weights(cfg);
    let gh = grad_h(cfg);
    let rescale = |z: &mut [f64]| {
        let s: f64 = (0..p).map(|i| wq[i] * z[i] * z[i]).sum::<f64>().sqrt();
        z[..p].iter_mut().for_each(|v| *v /= s);
    };
    for _ in 0..3 {
        rescale(y);
        let z = &y[..p];
        let h: f64 = (0..p).map(|i| gh[i] * z[i]).sum();
        let gq = grad_q(z, cfg);
        let v = &gh - &gq * (gh.dot(&gq) / gq.norm_squared());
        let delta = (1.0 - h) / gh.dot(&v);
        for i in 0..p {
            y[i] += delta * v[i];
        }
    }
    rescale(y);
}

fn augmented_start(z: &DVector<f64>, params: &ShootingParams, cfg: &ModelConfig) -> AugmentedState {
    let phase = PhaseState::from_slice(z.as_slice());
    let log_g = (0..cfg.r())
        .map(|i| ((cfg.dims()[i] as f64 * cfg.lambdas()[i]).sqrt() * phase.w / phase.y[i]).ln())
        .collect();
    AugmentedState {
        s: params.s0,
        phase,
        t: 0.0,
        u: 0.0,
        log_g,
    }
}

fn check_chart(lin: &DVector<f64>, quad: &DVector<f64>) -> Result<()> {
    let ratio = quad.amax() / lin.amax();
    if ratio > CHART_MAX_RATIO {
        return Err(SolitonError::ChartRejected(format!(
            "the second-order manifold correction is {:.1}% of the linear displacement \
             (limit {:.0}%); Q < 0 near the seed is no longer controlled by c_q",
            100.0 * ratio,
            100.0 * CHART_MAX_RATIO
        )));
    }
    Ok(())
}

/// Start point of a soliton trajectory.
pub fn initial_state(cfg: &ModelConfig, params: &ShootingParams) -> Result<AugmentedState> {
    let params = params.validated(cfg, Mode::Soliton)?;
    let chart = UnstableChart::new(cfg);
    initial_state_with(cfg, &params, &chart)
}

/// As [`initial_state`], reusing a precomputed chart. `params` must already
/// be validated for soliton mode.
pub fn initial_state_with(
    cfg: &ModelConfig,
    params: &ShootingParams,
    chart: &UnstableChart,
) -> Result<AugmentedState> {
    let th = chart.thetas(params, cfg);
    let (lin, quad) = chart.displacement(&th);
    check_chart(&lin, &quad)?;
    let z = &chart.seed + lin + quad;
    let p = PhaseState::from_slice(z.as_slice());
    let qs = quantities_from_slice(z.as_slice(), 0.0, cfg);
    if !(qs.q < 0.0) {
        return Err(SolitonError::ChartRejected(format!(
            "start point has Q = {:e} >= 0",
            qs.q
        )));
    }
    if !(qs.h < 1.0) {
        return Err(SolitonError::ChartRejected(format!(
            "start point has H = {} >= 1",
            qs.h
        )));
    }
    if !(p.w > 0.0) || p.y.iter().any(|y| !(*y > 0.0)) {
        return Err(SolitonError::ChartRejected(
            "start point leaves W > 0, Y > 0".into(),
        ));
    }
    Ok(augmented_start(&z, params, cfg))
}

/// Start point of an Einstein trajectory, projected onto `{Q = 0, H = 1}`.
pub fn einstein_initial_state(
    cfg: &ModelConfig,
    params: &ShootingParams,
) -> Result<AugmentedState> {
    let params = params.validated(cfg, Mode::Einstein)?;
    let chart = UnstableChart::new(cfg);
    let th = chart.thetas(&params, cfg);
    let (lin, quad) = chart.displacement(&th);
    check_chart(&lin, &quad)?;
    let mut z = &chart.seed + lin + quad;
    project_einstein(z.as_mut_slice(), cfg);
    let p = PhaseState::from_slice(z.as_slice());
    if !(p.w > 0.0) || p.y.iter().any(|y| !(*y > 0.0)) {
        return Err(SolitonError::ChartRejected(
            "start point leaves W > 0, Y > 0".into(),
        ));
    }
    Ok(augmented_start(&z, &params, cfg))
}

/// Runs a soliton shot with the strict monitor profile.
pub fn solve_soliton(
    cfg: &ModelConfig,
    params: &ShootingParams,
    controls: &IntegrationControls,
) -> Result<Trajectory> {
    let init = initial_state(cfg, params)?;
    let run = RunOptions {
        profile: MonitorProfile::strict(),
        projector: None,
        w_ref: Some(cfg.w_max()),
    };
    integrate(cfg, &init, controls, run)
}

/// Runs a shot inside `{H = 1, Q = 0}`, projecting after every step.
pub fn solve_einstein(
    cfg: &ModelConfig,
    params: &ShootingParams,
    controls: &IntegrationControls,
) -> Result<Trajectory> {
    let init = einstein_initial_state(cfg, params)?;
    let proj = |y: &mut [f64]| project_einstein(y, cfg);
    let run = RunOptions {
        profile: MonitorProfile::einstein(),
        projector: Some(&proj),
        w_ref: Some(cfg.w_max()),
    };
    integrate(cfg, &init, controls, run)
}

/// A run counts as successful when no monitor tripped and the phase norm
/// either ends below `10 × stop_radius` or decreases strictly over the last
/// tenth of the `s`-span.
pub fn is_success(traj: &Trajectory, controls: &IntegrationControls) -> bool {
    use crate::integrate::Termination::*;
    match traj.termination {
        InvariantViolated { .. } | StepFailure(_) => return false,
        OriginReached { .. } | HorizonReached => {}
    }
    let last = traj.last();
    if last.state.phase.norm() < 10.0 * controls.stop_radius {
        return true;
    }
    let s_first = traj.first().state.s;
    let cut = last.state.s - 0.1 * (last.state.s - s_first);
    let norms: Vec<f64> = traj
        .samples
        .iter()
        .filter(|s| s.state.s >= cut)
        .map(|s| s.state.phase.norm())
        .collect();
    norms.len() >= 2 && norms.windows(2).all(|w| w[1] < w[0])
}
