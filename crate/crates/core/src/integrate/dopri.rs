//! Dormand–Prince 5(4) with fourth-order continuous extension.

use crate::error::{Result, SolitonError};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Smallest admissible step size.
pub const MIN_STEP: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step; estimated when `None`.
    pub h0: Option<f64>,
    pub h_max: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 1_000_000,
            h0: None,
            h_max: f64::INFINITY,
        }
    }
}

/// Continuous extension over one accepted step.
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub s0: f64,
    pub h: f64,
    rc: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn s1(&self) -> f64 {
        self.s0 + self.h
    }

    pub fn eval_into(&self, s: f64, out: &mut [f64]) {
        let th = (s - self.s0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rc;
        for k in 0..out.len() {
            out[k] = r1[k] + th * (r2[k] + th1 * (r3[k] + th * (r4[k] + th1 * r5[k])));
        }
    }

    pub fn eval(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.rc[0].len()];
        self.eval_into(s, &mut out);
        out
    }
}

/// What the observer asks the solver to do after an accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepAction {
    Continue,
    /// The observer changed the state in place; derivatives are re-evaluated.
    Modified,
    Stop,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveEnd {
    Reached,
    Stopped,
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub s: f64,
    pub y: Vec<f64>,
    pub stats: SolverStats,
    pub end: SolveEnd,
}

fn rms(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    (v.map(|x| x * x).sum::<f64>() / n as f64).sqrt()
}

fn initial_step<F>(f: &F, s0: f64, y0: &[f64], f0: &[f64], dir: f64, o: &SolverOptions) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let sk: Vec<f64> = y0.iter().map(|y| o.atol + o.rtol * y.abs()).collect();
    let d0 = rms(y0.iter().zip(&sk).map(|(y, s)| y / s), n);
    let d1 = rms(f0.iter().zip(&sk).map(|(y, s)| y / s), n);
    let mut h = if d0 < 1e-10 || d1 < 1e-10 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h = h.min(o.h_max);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, k)| y + dir * h * k).collect();
    let mut f1 = vec![0.0; n];
    f(s0 + dir * h, &y1, &mut f1);
    let d2 = rms(f1.iter().zip(f0).zip(&sk).map(|((a, b), s)| (a - b) / s), n) / h;
    let m = d1.max(d2);
    let h1 = if m <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / m).powf(0.2)
    };
    (100.0 * h).min(h1).min(o.h_max)
}

/// Integrates `y' = f(s, y)` from `s0` to `s_end` (either direction).
///
/// After every accepted step the observer receives the continuous extension
/// and may modify the new state or stop the integration.
pub fn solve<F, O>(
    f: F,
    s0: f64,
    y0: &[f64],
    s_end: f64,
    o: &SolverOptions,
    observer: O,
) -> Result<SolveOutcome>
where
    F: Fn(f64, &[f64], &mut [f64]),
    O: FnMut(&DenseStep, &mut [f64]) -> StepAction,
{
    solve_weighted(f, s0, y0, s_end, o, |_| 1.0, observer)
}

/// As [`solve`], with the error weights `atol + rtol |y|` multiplied by
/// `weight_scale(y) ∈ (0, 1]` (the smaller of its values at both step ends).
pub fn solve_weighted<F, S, O>(
    f: F,
    s0: f64,
    y0: &[f64],
    s_end: f64,
    o: &SolverOptions,
    weight_scale: S,
    mut observer: O,
) -> Result<SolveOutcome>
where
    F: Fn(f64, &[f64], &mut [f64]),
    S: Fn(&[f64]) -> f64,
    O: FnMut(&DenseStep, &mut [f64]) -> StepAction,
{
    if !(o.rtol > 0.0 && o.atol > 0.0) {
        return Err(SolitonError::Controls(
            "rtol and atol must be positive".into(),
        ));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(SolitonError::Input("initial state is not finite".into()));
    }
    let n = y0.len();
    let dir = if s_end >= s0 { 1.0 } else { -1.0 };
    let mut stats = SolverStats::default();
    let mut s = s0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    f(s, &y, &mut k1);
    stats.evaluations += 1;
    if s == s_end {
        return Ok(SolveOutcome {
            s,
            y,
            stats,
            end: SolveEnd::Reached,
        });
    }
    let mut h = match o.h0 {
        Some(h) => h.abs().min(o.h_max),
        None => {
            stats.evaluations += 1;
            initial_step(&f, s, &y, &k1, dir, o)
        }
    };
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut ys = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= o.max_steps {
            return Ok(SolveOutcome {
                s,
                y,
                stats,
                end: SolveEnd::Failed(format!("max_steps ({}) exhausted at s = {s}", o.max_steps)),
            });
        }
        let remaining = (s_end - s).abs();
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h < MIN_STEP && !last {
            return Ok(SolveOutcome {
                s,
                y,
                stats,
                end: SolveEnd::Failed(format!("step size underflow ({h:e}) at s = {s}")),
            });
        }
        let hs = dir * h;
        for i in 0..n {
            ys[i] = y[i] + hs * A21 * k1[i];
        }
        f(s + C2 * hs, &ys, &mut k2);
        for i in 0..n {
            ys[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        f(s + C3 * hs, &ys, &mut k3);
        for i in 0..n {
            ys[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(s + C4 * hs, &ys, &mut k4);
        for i in 0..n {
            ys[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(s + C5 * hs, &ys, &mut k5);
        for i in 0..n {
            ys[i] =
                y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let s_new = if last { s_end } else { s + hs };
        f(s_new, &ys, &mut k6);
        for i in 0..n {
            ynew[i] =
                y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(s_new, &ynew, &mut k7);
        stats.evaluations += 6;

        let scale = weight_scale(&y).min(weight_scale(&ynew));
        let mut err = 0.0f64;
        let mut finite = true;
        for i in 0..n {
            let e =
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = (o.atol + o.rtol * y[i].abs().max(ynew[i].abs())) * scale;
            err = err.max((e / sk).abs());
            finite &= ynew[i].is_finite();
        }
        if !finite || !err.is_finite() {
            err = f64::INFINITY;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            let mut rc5 = vec![0.0; n];
            let mut rc3 = vec![0.0; n];
            let mut rc4 = vec![0.0; n];
            let mut rc2 = vec![0.0; n];
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                rc2[i] = ydiff;
                rc3[i] = bspl;
                rc4[i] = ydiff - hs * k7[i] - bspl;
                rc5[i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let dense = DenseStep {
                s0: s,
                h: hs,
                rc: [y.clone(), rc2, rc3, rc4, rc5],
            };
            s = s_new;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            match observer(&dense, &mut y) {
                StepAction::Continue => {}
                StepAction::Modified => {
                    f(s, &y, &mut k1);
                    stats.evaluations += 1;
                }
                StepAction::Stop => {
                    return Ok(SolveOutcome {
                        s,
                        y,
                        stats,
                        end: SolveEnd::Stopped,
                    })
                }
            }
            if last {
                return Ok(SolveOutcome {
                    s,
                    y,
                    stats,
                    end: SolveEnd::Reached,
                });
            }
            let mut fac = if err == 0.0 {
                10.0
            } else {
                0.9 * err.powf(-0.2)
            };
            fac = fac.clamp(0.2, if last_rejected { 1.0 } else { 10.0 });
            h = (h * fac).min(o.h_max);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
            } else {
                0.2
            };
            h *= fac;
            last_rejected = true;
        }
    }
}
