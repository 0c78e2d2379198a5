//! Problem instance, phase-space vector field and scalar diagnostics.
//!
//! Phase points are stored flat as `(W, X_1..X_r, Y_1..Y_r)`; the augmented
//! state appends `(t, u, log g_1..log g_r)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolitonError};

/// Below this value of `W²` the conservation constant is not reported.
pub const C_FLOOR: f64 = 1e-300;

/// Unvalidated problem description, as read from a configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub dims: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    pub epsilon: f64,
}

/// A validated problem instance: factor dimensions `d_i`, Einstein constants
/// `λ_i` with `λ_1 = d_1 - 1`, and the soliton constant `ε > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    dims: Vec<usize>,
    lambdas: Vec<f64>,
    epsilon: f64,
    sqrt_d: Vec<f64>,
    n: usize,
    beta: f64,
    beta_hat: f64,
}

/// Validates a candidate configuration, forcing `λ_1 = d_1 - 1` and
/// defaulting the remaining Einstein constants to 1.
pub fn validate_config(raw: &RawConfig) -> Result<ModelConfig> {
    if raw.dims.is_empty() {
        return Err(SolitonError::Config("dims must be non-empty".into()));
    }
    if raw.dims[0] < 2 {
        return Err(SolitonError::Config(format!(
            "d_1 must exceed 1 (got {})",
            raw.dims[0]
        )));
    }
    if let Some(bad) = raw.dims.iter().find(|&&d| d < 1) {
        return Err(SolitonError::Config(format!(
            "factor dimensions must be at least 1 (got {bad})"
        )));
    }
    if !(raw.epsilon.is_finite() && raw.epsilon > 0.0) {
        return Err(SolitonError::Config(format!(
            "epsilon must be positive and finite (got {})",
            raw.epsilon
        )));
    }
    let dims: Vec<usize> = raw.dims.iter().map(|&d| d as usize).collect();
    let r = dims.len();
    let mut lambdas = vec![1.0; r];
    if let Some(given) = &raw.lambdas {
        if given.len() != r {
            return Err(SolitonError::Config(format!(
                "lambdas has {} entries but dims has {r}",
                given.len()
            )));
        }
        if let Some(bad) = given.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(SolitonError::Config(format!(
                "Einstein constants must be positive (got {bad})"
            )));
        }
        lambdas.copy_from_slice(given);
    }
    lambdas[0] = (dims[0] - 1) as f64;
    let n = dims.iter().sum();
    let beta = 1.0 / (dims[0] as f64).sqrt();
    Ok(ModelConfig {
        sqrt_d: dims.iter().map(|&d| (d as f64).sqrt()).collect(),
        dims,
        lambdas,
        epsilon: raw.epsilon,
        n,
        beta,
        beta_hat: (1.0 - beta * beta).sqrt(),
    })
}

impl ModelConfig {
    /// Shorthand for `validate_config` with default Einstein constants.
    pub fn new(dims: &[i64], epsilon: f64) -> Result<Self> {
        validate_config(&RawConfig {
            dims: dims.to_vec(),
            lambdas: None,
            epsilon,
        })
    }

    pub fn r(&self) -> usize {
        self.dims.len()
    }
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn sqrt_d(&self) -> &[f64] {
        &self.sqrt_d
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn nf(&self) -> f64 {
        self.n as f64
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn beta_hat(&self) -> f64 {
        self.beta_hat
    }
    /// Dimension `2r + 1` of the phase space.
    pub fn phase_dim(&self) -> usize {
        2 * self.r() + 1
    }
    /// Dimension `3r + 3` of the augmented state (without `s`).
    pub fn augmented_dim(&self) -> usize {
        3 * self.r() + 3
    }
    /// Index of `X_i` (zero-based `i`) in the flat phase vector.
    pub fn ix(&self, i: usize) -> usize {
        1 + i
    }
    /// Index of `Y_i` (zero-based `i`) in the flat phase vector.
    pub fn iy(&self, i: usize) -> usize {
        1 + self.r() + i
    }
    /// Upper bound `sqrt(2/ε)` for `W` on soliton trajectories.
    pub fn w_max(&self) -> f64 {
        (2.0 / self.epsilon).sqrt()
    }

    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            dims: self.dims.iter().map(|&d| d as i64).collect(),
            lambdas: Some(self.lambdas.clone()),
            epsilon: self.epsilon,
        }
    }
}

/// A phase point `(W, X, Y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub w: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PhaseState {
    pub fn zeros(r: usize) -> Self {
        Self {
            w: 0.0,
            x: vec![0.0; r],
            y: vec![0.0; r],
        }
    }

    /// Reads a flat `(W, X, Y)` slice of length `2r + 1`.
    pub fn from_slice(z: &[f64]) -> Self {
        let r = (z.len() - 1) / 2;
        Self {
            w: z[0],
            x: z[1..=r].to_vec(),
            y: z[r + 1..=2 * r].to_vec(),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(1 + 2 * self.x.len());
        z.push(self.w);
        z.extend_from_slice(&self.x);
        z.extend_from_slice(&self.y);
        z
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_vec(self.to_vec())
    }

    pub fn r(&self) -> usize {
        self.x.len()
    }

    /// Euclidean norm of `(W, X, Y)`.
    pub fn norm(&self) -> f64 {
        self.to_vec().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

/// Phase point together with the reconstruction variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    pub s: f64,
    pub phase: PhaseState,
    pub t: f64,
    pub u: f64,
    pub log_g: Vec<f64>,
}

impl AugmentedState {
    /// Flat layout `(W, X, Y, t, u, log g)`, excluding `s`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut y = self.phase.to_vec();
        y.push(self.t);
        y.push(self.u);
        y.extend_from_slice(&self.log_g);
        y
    }

    pub fn from_slice(s: f64, y: &[f64]) -> Self {
        let r = (y.len() - 3) / 3;
        let p = 2 * r + 1;
        Self {
            s,
            phase: PhaseState::from_slice(&y[..p]),
            t: y[p],
            u: y[p + 1],
            log_g: y[p + 2..].to_vec(),
        }
    }

    /// Metric coefficients `g_i = exp(log g_i)`.
    pub fn g(&self) -> Vec<f64> {
        self.log_g.iter().map(|l| l.exp()).collect()
    }
}

/// Derivative of an [`AugmentedState`] with respect to `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedRate {
    pub phase: PhaseState,
    pub t: f64,
    pub u: f64,
    pub log_g: Vec<f64>,
}

/// Scalar diagnostics of a phase point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantities {
    /// `ΣX² + ΣY² - 1`
    pub l: f64,
    /// `Σ sqrt(d_i) X_i`
    pub h: f64,
    /// `L + (ε/2)(n-1)W²`
    pub q: f64,
    /// `ΣX²`
    pub g: f64,
    /// `G - (ε/2)W²`
    pub j: f64,
    /// `L/W² - ε(u - (n-1)/2)`, absent when `W²` is below [`C_FLOOR`].
    pub c: Option<f64>,
}

/// Evaluates the phase-space field on a flat slice, writing into `out`.
pub fn vector_field_into(z: &[f64], cfg: &ModelConfig, out: &mut [f64]) {
    let r = cfg.r();
    let eps2 = 0.5 * cfg.epsilon;
    let w = z[0];
    let x = &z[1..=r];
    let y = &z[r + 1..=2 * r];
    let g: f64 = x.iter().map(|v| v * v).sum();
    let w2 = w * w;
    out[0] = w * (g - eps2 * w2);
    for i in 0..r {
        let sd = cfg.sqrt_d[i];
        out[1 + i] = x[i] * (g - 1.0) + y[i] * y[i] / sd + eps2 * (sd - x[i]) * w2;
        out[1 + r + i] = y[i] * (g - x[i] / sd - eps2 * w2);
    }
}

/// The phase-space vector field `(W', X_i', Y_i')`.
pub fn vector_field(state: &PhaseState, cfg: &ModelConfig) -> PhaseState {
    let z = state.to_vec();
    let mut out = vec![0.0; z.len()];
    vector_field_into(&z, cfg, &mut out);
    PhaseState::from_slice(&out)
}

/// Evaluates the augmented field on the flat layout `(W, X, Y, t, u, log g)`.
pub fn augmented_field_into(y: &[f64], cfg: &ModelConfig, out: &mut [f64]) {
    let r = cfg.r();
    let p = 2 * r + 1;
    vector_field_into(&y[..p], cfg, &mut out[..p]);
    let mut h = 0.0;
    for i in 0..r {
        h += cfg.sqrt_d[i] * y[1 + i];
        out[p + 2 + i] = y[1 + i] / cfg.sqrt_d[i];
    }
    out[p] = y[0];
    out[p + 1] = h - 1.0;
}

/// The augmented field: phase part plus `t' = W`, `u' = H - 1`,
/// `(log g_i)' = X_i / sqrt(d_i)`.
pub fn augmented_field(state: &AugmentedState, cfg: &ModelConfig) -> AugmentedRate {
    let y = state.to_vec();
    let mut out = vec![0.0; y.len()];
    augmented_field_into(&y, cfg, &mut out);
    let p = cfg.phase_dim();
    AugmentedRate {
        phase: PhaseState::from_slice(&out[..p]),
        t: out[p],
        u: out[p + 1],
        log_g: out[p + 2..].to_vec(),
    }
}

/// Diagnostics from a flat phase slice.
pub fn quantities_from_slice(z: &[f64], u: f64, cfg: &ModelConfig) -> Quantities {
    let r = cfg.r();
    let w = z[0];
    let x = &z[1..=r];
    let y = &z[r + 1..=2 * r];
    let g: f64 = x.iter().map(|v| v * v).sum();
    let sy: f64 = y.iter().map(|v| v * v).sum();
    let h: f64 = x.iter().zip(&cfg.sqrt_d).map(|(a, b)| a * b).sum();
    let w2 = w * w;
    let eps = cfg.epsilon;
    let nf = cfg.nf();
    let l = g + sy - 1.0;
    let c = (w2 > C_FLOOR).then(|| l / w2 - eps * (u - 0.5 * (nf - 1.0)));
    Quantities {
        l,
        h,
        q: l + 0.5 * eps * (nf - 1.0) * w2,
        g,
        j: g - 0.5 * eps * w2,
        c,
    }
}

pub fn quantities(state: &PhaseState, u: f64, cfg: &ModelConfig) -> Quantities {
    quantities_from_slice(&state.to_vec(), u, cfg)
}

/// Right-hand sides of the evolution equations for `L`, `H - 1` and `Q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantityRates {
    pub l: f64,
    pub h: f64,
    pub q: f64,
}

pub fn quantity_rates(state: &PhaseState, cfg: &ModelConfig) -> QuantityRates {
    let qs = quantities(state, 0.0, cfg);
    let ew2 = cfg.epsilon * state.w * state.w;
    let hm1 = qs.h - 1.0;
    QuantityRates {
        l: 2.0 * qs.l * (qs.g - 0.5 * ew2) + ew2 * hm1,
        h: (qs.g - 1.0 - 0.5 * ew2) * hm1 + qs.q,
        q: ew2 * hm1 + 2.0 * (qs.g - 0.5 * ew2) * qs.q,
    }
}

/// Analytic Jacobian of the phase-space field.
pub fn jacobian(state: &PhaseState, cfg: &ModelConfig) -> DMatrix<f64> {
    let r = cfg.r();
    let dim = 2 * r + 1;
    let eps = cfg.epsilon;
    let w = state.w;
    let x = &state.x;
    let y = &state.y;
    let g: f64 = x.iter().map(|v| v * v).sum();
    let w2 = w * w;
    let mut m = DMatrix::zeros(dim, dim);
    m[(0, 0)] = g - 1.5 * eps * w2;
    for j in 0..r {
        m[(0, 1 + j)] = 2.0 * w * x[j];
    }
    for i in 0..r {
        let sd = cfg.sqrt_d[i];
        let (xi, yi) = (1 + i, 1 + r + i);
        m[(xi, 0)] = eps * (sd - x[i]) * w;
        m[(yi, 0)] = -eps * w * y[i];
        for j in 0..r {
            m[(xi, 1 + j)] = 2.0 * x[i] * x[j];
            m[(yi, 1 + j)] = 2.0 * y[i] * x[j];
        }
        m[(xi, xi)] += g - 1.0 - 0.5 * eps * w2;
        m[(xi, yi)] = 2.0 * y[i] / sd;
        m[(yi, xi)] -= y[i] / sd;
        m[(yi, yi)] = g - x[i] / sd - 0.5 * eps * w2;
    }
    m
}

/// Symmetric second derivative `D²f(z)[a, b]`.
///
/// The field is cubic, so the symmetric second difference
/// `f(z+w) - 2f(z) + f(z-w)` equals `D²f(z)[w, w]` exactly and polarization
/// recovers the bilinear form.
pub fn second_variation(z: &[f64], a: &[f64], b: &[f64], cfg: &ModelConfig) -> Vec<f64> {
    let dim = z.len();
    let eval = |dir: &[f64]| -> Vec<f64> {
        let plus: Vec<f64> = z.iter().zip(dir).map(|(p, d)| p + d).collect();
        let minus: Vec<f64> = z.iter().zip(dir).map(|(p, d)| p - d).collect();
        let mut fp = vec![0.0; dim];
        let mut f0 = vec![0.0; dim];
        let mut fm = vec![0.0; dim];
        vector_field_into(&plus, cfg, &mut fp);
        vector_field_into(z, cfg, &mut f0);
        vector_field_into(&minus, cfg, &mut fm);
        (0..dim).map(|k| fp[k] - 2.0 * f0[k] + fm[k]).collect()
    };
    let sum: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + q).collect();
    let diff: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    let bp = eval(&sum);
    let bm = eval(&diff);
    bp.iter().zip(&bm).map(|(p, m)| 0.25 * (p - m)).collect()
}

/// Gradient of `Q` with respect to `(W, X, Y)`.
pub fn grad_q(z: &[f64], cfg: &ModelConfig) -> DVector<f64> {
    let mut g = DVector::from_fn(z.len(), |k, _| 2.0 * z[k]);
    g[0] = cfg.epsilon * (cfg.nf() - 1.0) * z[0];
    g
}

/// Gradient of `H` with respect to `(W, X, Y)`; constant in the state.
pub fn grad_h(cfg: &ModelConfig) -> DVector<f64> {
    let mut g = DVector::zeros(cfg.phase_dim());
    for i in 0..cfg.r() {
        g[1 + i] = cfg.sqrt_d[i];
    }
    g
}

/// Diagonal weights of the quadratic form `Q + 1`.
pub fn q_weights(cfg: &ModelConfig) -> Vec<f64> {
    let mut w = vec![1.0; cfg.phase_dim()];
    w[0] = 0.5 * cfg.epsilon * (cfg.nf() - 1.0);
    w
}
