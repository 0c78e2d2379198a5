//! Critical points of the flow and their closed-form eigenstructure.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, SolitonError};
use crate::model::{jacobian, ModelConfig, PhaseState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EquilibriumKind {
    Origin,
    SolitonSeed,
    EPlus,
    EMinus,
    SphereFixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub point: PhaseState,
    /// Unit vector `p` for points of the critical sphere `{ΣX² = 1, W = Y = 0}`.
    pub sphere_p: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: DVector<f64>,
}

/// Jacobian at an equilibrium together with its analytic eigenpairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Linearization {
    pub matrix: DMatrix<f64>,
    pub pairs: Vec<EigenPair>,
    /// Positive-eigenvalue directions, in the order used by the shooting chart.
    pub unstable_basis: Vec<EigenPair>,
    /// The distinguished vector of the point: `q` at the soliton seed, the
    /// vector `v` of the planar analysis at `E±`.
    pub special: Option<EigenPair>,
}

impl Linearization {
    /// Eigenvalues in ascending order, with multiplicity.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.pairs.iter().map(|p| p.value).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Pairs sorted by ascending eigenvalue.
    pub fn sorted_pairs(&self) -> Vec<EigenPair> {
        let mut p = self.pairs.clone();
        p.sort_by(|a, b| a.value.total_cmp(&b.value));
        p
    }

    /// Largest `‖Jv − μv‖∞` over all listed pairs, the special vector included.
    pub fn max_residual(&self) -> f64 {
        self.pairs
            .iter()
            .chain(self.special.iter())
            .map(|p| eigen_residual(&self.matrix, p))
            .fold(0.0, f64::max)
    }
}

pub fn eigen_residual(m: &DMatrix<f64>, pair: &EigenPair) -> f64 {
    (m * &pair.vector - &pair.vector * pair.value).amax()
}

fn unit(dim: usize, k: usize) -> DVector<f64> {
    let mut v = DVector::zeros(dim);
    v[k] = 1.0;
    v
}

fn pair(value: f64, vector: DVector<f64>) -> EigenPair {
    EigenPair { value, vector }
}

pub fn origin(cfg: &ModelConfig) -> (Equilibrium, Linearization) {
    let r = cfg.r();
    let dim = cfg.phase_dim();
    let point = PhaseState::zeros(r);
    let mut pairs = vec![pair(0.0, unit(dim, 0))];
    pairs.extend((0..r).map(|i| pair(-1.0, unit(dim, cfg.ix(i)))));
    pairs.extend((0..r).map(|i| pair(0.0, unit(dim, cfg.iy(i)))));
    let lin = Linearization {
        matrix: jacobian(&point, cfg),
        pairs,
        unstable_basis: vec![],
        special: None,
    };
    let eq = Equilibrium {
        kind: EquilibriumKind::Origin,
        point,
        sphere_p: None,
    };
    (eq, lin)
}

/// The critical point `(0, β e_1, β̂ e_1)` from which soliton trajectories
/// emanate, with unstable basis `{e_W, e_{Y_2}, …, e_{Y_r}, q̂}`.
pub fn soliton_seed(cfg: &ModelConfig) -> (Equilibrium, Linearization) {
    let r = cfg.r();
    let dim = cfg.phase_dim();
    let (b, bh) = (cfg.beta(), cfg.beta_hat());
    let b2 = b * b;
    let mut point = PhaseState::zeros(r);
    point.x[0] = b;
    point.y[0] = bh;

    let mut q = DVector::zeros(dim);
    q[cfg.ix(0)] = 2.0 * b;
    q[cfg.iy(0)] = bh;
    let mut stable_block = DVector::zeros(dim);
    stable_block[cfg.ix(0)] = bh;
    stable_block[cfg.iy(0)] = -b;

    let mut unstable = vec![pair(b2, unit(dim, 0))];
    unstable.extend((1..r).map(|i| pair(b2, unit(dim, cfg.iy(i)))));
    unstable.push(pair(2.0 * b2, q.normalize()));

    let mut pairs = unstable.clone();
    pairs.push(pair(b2 - 1.0, stable_block));
    pairs.extend((1..r).map(|i| pair(b2 - 1.0, unit(dim, cfg.ix(i)))));

    let lin = Linearization {
        matrix: jacobian(&point, cfg),
        pairs,
        unstable_basis: unstable,
        special: Some(pair(2.0 * b2, q)),
    };
    let eq = Equilibrium {
        kind: EquilibriumKind::SolitonSeed,
        point,
        sphere_p: None,
    };
    (eq, lin)
}

/// The two eigenvalues `½(−1 ± sqrt(1 + 8/n))` of the planar system at `E₊`.
pub fn e_plus_planar_eigenvalues(cfg: &ModelConfig) -> (f64, f64) {
    let nf = cfg.nf();
    let root = (1.0 + 8.0 / nf).sqrt();
    (0.5 * (-1.0 + root), 0.5 * (-1.0 - root))
}

/// Coordinates `(sqrt(2/(nε)), sqrt(d_i)/n, 0)` of `E₊`.
pub fn e_plus_point(cfg: &ModelConfig) -> PhaseState {
    let nf = cfg.nf();
    PhaseState {
        w: (2.0 / (nf * cfg.epsilon())).sqrt(),
        x: cfg.sqrt_d().iter().map(|s| s / nf).collect(),
        y: vec![0.0; cfg.r()],
    }
}

fn e_pm(cfg: &ModelConfig, sign: f64) -> (Equilibrium, Linearization) {
    let r = cfg.r();
    let dim = cfg.phase_dim();
    let nf = cfg.nf();
    let eps = cfg.epsilon();
    let mut point = e_plus_point(cfg);
    point.w *= sign;
    let (lp, lm) = e_plus_planar_eigenvalues(cfg);

    // In-plane eigenvector for eigenvalue μ has W-component
    // (n/(n−1))(μ' + 2/n), μ' being the other planar eigenvalue.
    let planar = |other: f64| {
        let mut v = DVector::zeros(dim);
        v[0] = sign * nf / (nf - 1.0) * (other + 2.0 / nf);
        let k = -(2.0 * eps / nf).sqrt();
        for i in 0..r {
            v[cfg.ix(i)] = k * cfg.sqrt_d()[i];
        }
        v
    };
    let mut v_plus = planar(lm);
    if v_plus[cfg.ix(0)] < 0.0 {
        v_plus = -v_plus;
    }
    let mut pairs = vec![pair(lp, v_plus.clone()), pair(lm, planar(lp))];
    pairs.extend((0..r).map(|i| pair(-1.0 / nf, unit(dim, cfg.iy(i)))));
    let sd = cfg.sqrt_d();
    for k in 1..r {
        let mut v = DVector::zeros(dim);
        v[cfg.ix(0)] = sd[k];
        v[cfg.ix(k)] = -sd[0];
        pairs.push(pair(-1.0, v));
    }
    let lin = Linearization {
        matrix: jacobian(&point, cfg),
        special: Some(pair(lm, planar(lp))),
        unstable_basis: vec![pair(lp, v_plus)],
        pairs,
    };
    let kind = if sign > 0.0 {
        EquilibriumKind::EPlus
    } else {
        EquilibriumKind::EMinus
    };
    let eq = Equilibrium {
        kind,
        point,
        sphere_p: None,
    };
    (eq, lin)
}

/// `E₊`, the ω-limit of Einstein trajectories. The special vector is the
/// planar eigenvector `v` whose inner products with `∇Q` and `∇H` carry
/// opposite signs; its eigenvalue is the negative planar one.
pub fn e_plus(cfg: &ModelConfig) -> (Equilibrium, Linearization) {
    e_pm(cfg, 1.0)
}

/// Mirror image of `E₊` under `W ↦ −W`.
pub fn e_minus(cfg: &ModelConfig) -> (Equilibrium, Linearization) {
    e_pm(cfg, -1.0)
}

/// Linearization at the point `(0, p, 0)` of the critical sphere.
pub fn sphere_fixed_linearization(
    p: &[f64],
    cfg: &ModelConfig,
) -> Result<(Equilibrium, Linearization)> {
    let r = cfg.r();
    if p.len() != r {
        return Err(SolitonError::Input(format!(
            "sphere point has {} entries, expected {r}",
            p.len()
        )));
    }
    let norm2: f64 = p.iter().map(|v| v * v).sum();
    if (norm2 - 1.0).abs() > 1e-12 {
        return Err(SolitonError::Input(format!(
            "sphere point must be a unit vector (|p|² = {norm2})"
        )));
    }
    let dim = cfg.phase_dim();
    let point = PhaseState {
        w: 0.0,
        x: p.to_vec(),
        y: vec![0.0; r],
    };
    let embed = |xs: &DVector<f64>| {
        let mut v = DVector::zeros(dim);
        for i in 0..r {
            v[cfg.ix(i)] = xs[i];
        }
        v
    };
    let pv = DVector::from_column_slice(p);
    let mut pairs = vec![pair(2.0, embed(&pv)), pair(1.0, unit(dim, 0))];
    for i in 0..r {
        pairs.push(pair(1.0 - p[i] / cfg.sqrt_d()[i], unit(dim, cfg.iy(i))));
    }
    for t in tangent_basis(&pv) {
        pairs.push(pair(0.0, embed(&t)));
    }
    let unstable_basis = pairs.iter().filter(|e| e.value > 0.0).cloned().collect();
    let lin = Linearization {
        matrix: jacobian(&point, cfg),
        pairs,
        unstable_basis,
        special: None,
    };
    let eq = Equilibrium {
        kind: EquilibriumKind::SphereFixed,
        point,
        sphere_p: Some(p.to_vec()),
    };
    Ok((eq, lin))
}

/// Orthonormal basis of the complement of the unit vector `p`.
fn tangent_basis(p: &DVector<f64>) -> Vec<DVector<f64>> {
    let r = p.len();
    let mut basis: Vec<DVector<f64>> = vec![p.clone()];
    for k in 0..r {
        let mut v = unit(r, k);
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let nv = v.norm();
        if nv > 1e-8 {
            basis.push(v / nv);
        }
        if basis.len() == r {
            break;
        }
    }
    basis.split_off(1)
}

/// The reduced flow in the `(X_1, W)` plane on `{Y = 0, H = 1}`.
pub fn planar_reduced_field(x1: f64, w: f64, cfg: &ModelConfig) -> (f64, f64) {
    let d1 = cfg.dims()[0] as f64;
    let k = cfg.nf() / d1;
    let e2 = 0.5 * cfg.epsilon();
    let w2 = w * w;
    let dx = x1 * (k * x1 * x1 - 1.0) + e2 * (cfg.sqrt_d()[0] - x1) * w2;
    let dw = w * (k * x1 * x1 - e2 * w2);
    (dx, dw)
}

/// Jacobian of [`planar_reduced_field`], rows `(X_1', W')`.
pub fn planar_jacobian(x1: f64, w: f64, cfg: &ModelConfig) -> [[f64; 2]; 2] {
    let d1 = cfg.dims()[0] as f64;
    let k = cfg.nf() / d1;
    let eps = cfg.epsilon();
    let w2 = w * w;
    [
        [
            3.0 * k * x1 * x1 - 1.0 - 0.5 * eps * w2,
            eps * (cfg.sqrt_d()[0] - x1) * w,
        ],
        [2.0 * k * x1 * w, k * x1 * x1 - 1.5 * eps * w2],
    ]
}

/// `W`-nullcline slope: `W' = 0` on `X_1 = sqrt(ε d_1 / (2n)) W`.
pub fn planar_nullcline_slope(cfg: &ModelConfig) -> f64 {
    (cfg.epsilon() * cfg.dims()[0] as f64 / (2.0 * cfg.nf())).sqrt()
}

/// Quadratic centre-manifold coefficients at the origin:
/// `X_i = a_i Y_i² + c_i W² + b_i Y_i W + …`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CentreManifoldCoeffs {
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
}

pub fn centre_manifold_coeffs(cfg: &ModelConfig) -> CentreManifoldCoeffs {
    let sd = cfg.sqrt_d();
    CentreManifoldCoeffs {
        a: sd.iter().map(|s| 1.0 / s).collect(),
        c: sd.iter().map(|s| 0.5 * cfg.epsilon() * s).collect(),
        b: vec![0.0; cfg.r()],
    }
}
