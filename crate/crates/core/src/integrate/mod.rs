//! Adaptive integration of the augmented system with dense sampling,
//! invariant monitors and event location.

pub mod dopri;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolitonError};
use crate::model::{
    augmented_field_into, quantities_from_slice, AugmentedState, ModelConfig, PhaseState,
    Quantities,
};
use dopri::{DenseStep, SolveEnd, SolverOptions, StepAction};

/// Width of the bracket returned by event bisection.
pub const EVENT_TOL: f64 = 1e-10;

/// Floor of the `W`-dependent error-weight scale.
pub const MIN_WEIGHT_SCALE: f64 = 1e-4;

/// Default slack for strict inequalities.
pub const STRICT_SLACK: f64 = 1e-9;

/// Largest step in `s`. The linearisations of the flow have eigenvalues of
/// order one; once a component decays below `atol` the error estimate no
/// longer limits the step, and this cap keeps `hμ` inside the stability
/// region of the pair so that `Y_i` cannot change sign.
pub const MAX_STEP: f64 = 1.0;

/// Default tolerance for the equalities `H = 1`, `Q = 0` in Einstein mode.
pub const EINSTEIN_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationControls {
    pub rtol: f64,
    pub atol: f64,
    /// Terminal value of the flow parameter `s`.
    pub s_max: f64,
    pub max_steps: usize,
    /// Terminate once `‖(W, X, Y)‖₂` drops below this radius.
    pub stop_radius: f64,
    /// Spacing in `s` of the recorded samples.
    pub record_every: f64,
}

impl IntegrationControls {
    /// Defaults for soliton runs; the horizon scales with `1/min(1, ε)`.
    pub fn soliton_defaults(cfg: &ModelConfig) -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            s_max: 2000.0 / cfg.epsilon().min(1.0),
            max_steps: 2_000_000,
            stop_radius: 1e-6,
            record_every: 0.05,
        }
    }

    /// Defaults for Einstein runs. `Y` decays like `e^{-s/n}` near `E₊`,
    /// so the horizon is a fixed multiple of `n`.
    pub fn einstein_defaults(cfg: &ModelConfig) -> Self {
        let base = Self::soliton_defaults(cfg);
        Self {
            s_max: base.s_max.min(40.0 * cfg.nf()),
            stop_radius: 0.0,
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SolitonError::Controls(m.into()));
        if !(self.rtol > 0.0 && self.rtol.is_finite())
            || !(self.atol > 0.0 && self.atol.is_finite())
        {
            return bad("rtol and atol must be positive");
        }
        if !(self.s_max > 0.0 && self.s_max.is_finite()) {
            return bad("s_max must be positive");
        }
        if !(self.stop_radius >= 0.0) {
            return bad("stop_radius must be non-negative");
        }
        if !(self.record_every > 0.0 && self.record_every.is_finite()) {
            return bad("record_every must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub state: AugmentedState,
    pub quantities: Quantities,
}

impl Sample {
    pub fn from_state(state: AugmentedState, cfg: &ModelConfig) -> Self {
        let quantities = quantities_from_slice(&state.phase.to_vec(), state.u, cfg);
        Self { state, quantities }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    OriginReached { s: f64 },
    HorizonReached,
    InvariantViolated { name: String, s: f64 },
    StepFailure(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub stats: TrajectoryStats,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has samples")
    }
    pub fn is_violation(&self) -> bool {
        matches!(self.termination, Termination::InvariantViolated { .. })
    }
}

/// Which inequalities the monitor enforces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MonitorProfile {
    None,
    /// The strict soliton region with an absolute slack.
    Strict {
        slack: f64,
    },
    /// The Einstein submanifold: `|H − 1|, |Q| ≤ tol`, positivity with slack.
    Einstein {
        tol: f64,
        slack: f64,
    },
}

impl MonitorProfile {
    pub fn strict() -> Self {
        Self::Strict {
            slack: STRICT_SLACK,
        }
    }
    pub fn einstein() -> Self {
        Self::Einstein {
            tol: EINSTEIN_TOL,
            slack: STRICT_SLACK,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub name: String,
    pub value: f64,
    pub bound: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} violated: value {:e}, bound {:e}",
            self.name, self.value, self.bound
        )
    }
}

fn positivity(state: &PhaseState, cfg: &ModelConfig, slack: f64) -> Option<Violation> {
    let v = |name: String, value: f64, bound: f64| Some(Violation { name, value, bound });
    for (i, x) in state.x.iter().enumerate() {
        if *x < -slack {
            return v(format!("X_{} positivity", i + 1), *x, 0.0);
        }
    }
    for (i, y) in state.y.iter().enumerate() {
        if *y < -slack {
            return v(format!("Y_{} positivity", i + 1), *y, 0.0);
        }
    }
    if state.w < -slack {
        return v("W positivity".into(), state.w, 0.0);
    }
    if state.w > cfg.w_max() + slack {
        return v("W upper bound".into(), state.w, cfg.w_max());
    }
    None
}

/// First failed inequality of the chosen profile, if any.
pub fn monitor_bounds(
    state: &PhaseState,
    q: &Quantities,
    cfg: &ModelConfig,
    profile: MonitorProfile,
) -> Option<Violation> {
    let v = |name: &str, value: f64, bound: f64| {
        Some(Violation {
            name: name.into(),
            value,
            bound,
        })
    };
    match profile {
        MonitorProfile::None => None,
        MonitorProfile::Strict { slack } => {
            if let Some(p) = positivity(state, cfg, slack) {
                return Some(p);
            }
            if q.l > slack {
                return v("L negativity", q.l, 0.0);
            }
            if q.h > 1.0 + slack {
                return v("H bound", q.h, 1.0);
            }
            if q.q > slack {
                return v("Q negativity", q.q, 0.0);
            }
            None
        }
        MonitorProfile::Einstein { tol, slack } => {
            if let Some(p) = positivity(state, cfg, slack) {
                return Some(p);
            }
            if q.l > slack {
                return v("L negativity", q.l, 0.0);
            }
            if (q.h - 1.0).abs() > tol {
                return v("H equality", q.h, 1.0);
            }
            if q.q.abs() > tol {
                return v("Q equality", q.q, 0.0);
            }
            None
        }
    }
}

/// In-place map applied to every accepted state and every recorded sample.
pub type Projector<'a> = &'a dyn Fn(&mut [f64]);

/// Monitoring and control hooks for [`integrate`].
#[derive(Clone, Copy)]
pub struct RunOptions<'a> {
    pub profile: MonitorProfile,
    pub projector: Option<Projector<'a>>,
    /// Tighten error weights by `min(1, (W/w_ref)²)`, floored at
    /// [`MIN_WEIGHT_SCALE`]. `C = L/W² − …` amplifies errors in `L` by
    /// `1/W²`, so this keeps the induced error in `C` at the requested level.
    pub w_ref: Option<f64>,
}

impl RunOptions<'_> {
    pub fn monitored(profile: MonitorProfile) -> Self {
        Self {
            profile,
            projector: None,
            w_ref: None,
        }
    }
}

enum Event {
    Violation(Violation),
    Origin,
}

/// Integrates the augmented system from `initial` up to `controls.s_max`.
pub fn integrate(
    cfg: &ModelConfig,
    initial: &AugmentedState,
    controls: &IntegrationControls,
    run: RunOptions<'_>,
) -> Result<Trajectory> {
    controls.validate()?;
    let RunOptions {
        profile,
        projector,
        w_ref,
    } = run;
    let p = cfg.phase_dim();
    let y0 = initial.to_vec();
    if y0.len() != cfg.augmented_dim() {
        return Err(SolitonError::Input(
            "initial state dimension does not match config".into(),
        ));
    }
    let s0 = initial.s;
    if controls.s_max <= s0 {
        return Err(SolitonError::Controls(format!(
            "s_max ({}) must exceed the starting label ({s0})",
            controls.s_max
        )));
    }
    let field = |_: f64, y: &[f64], out: &mut [f64]| augmented_field_into(y, cfg, out);
    let opts = SolverOptions {
        rtol: controls.rtol,
        atol: controls.atol,
        max_steps: controls.max_steps,
        h0: None,
        h_max: MAX_STEP,
    };
    let weight_scale = |y: &[f64]| match w_ref {
        Some(w) => (y[0] / w).powi(2).clamp(MIN_WEIGHT_SCALE, 1.0),
        None => 1.0,
    };
    let project = |y: &mut [f64]| {
        if let Some(pr) = projector {
            pr(y)
        }
    };
    let event_at = |y: &[f64]| -> Option<Event> {
        let qs = quantities_from_slice(&y[..p], y[p + 1], cfg);
        let ph = PhaseState::from_slice(&y[..p]);
        if let Some(v) = monitor_bounds(&ph, &qs, cfg, profile) {
            return Some(Event::Violation(v));
        }
        let r2: f64 = y[..p].iter().map(|v| v * v).sum();
        (r2.sqrt() < controls.stop_radius).then_some(Event::Origin)
    };

    let mut samples = vec![Sample::from_state(initial.clone(), cfg)];
    if let Some(ev) = event_at(&y0) {
        let termination = match ev {
            Event::Violation(v) => Termination::InvariantViolated {
                name: v.name,
                s: s0,
            },
            Event::Origin => Termination::OriginReached { s: s0 },
        };
        return Ok(Trajectory {
            samples,
            termination,
            stats: TrajectoryStats::default(),
        });
    }

    let mut next_k: u64 = 1;
    let grid = |k: u64| s0 + k as f64 * controls.record_every;
    let mut termination: Option<Termination> = None;
    let mut buf = vec![0.0; y0.len()];

    let outcome = dopri::solve_weighted(
        field,
        s0,
        &y0,
        controls.s_max,
        &opts,
        weight_scale,
        |ds: &DenseStep, y: &mut [f64]| {
            project(y);
            let s1 = ds.s1();
            let ev = event_at(y);
            let s_stop = match &ev {
                None => s1,
                Some(_) => {
                    let (mut lo, mut hi) = (ds.s0, s1);
                    while hi - lo > EVENT_TOL {
                        let mid = 0.5 * (lo + hi);
                        ds.eval_into(mid, &mut buf);
                        project(&mut buf);
                        if event_at(&buf).is_some() {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    hi
                }
            };
            while grid(next_k) < s_stop && grid(next_k) < controls.s_max {
                let sg = grid(next_k);
                ds.eval_into(sg, &mut buf);
                project(&mut buf);
                samples.push(Sample::from_state(
                    AugmentedState::from_slice(sg, &buf),
                    cfg,
                ));
                next_k += 1;
            }
            match ev {
                None => {
                    let at_grid = (grid(next_k) - s1).abs() <= 1e-9 * controls.record_every;
                    if at_grid || s1 >= controls.s_max {
                        samples.push(Sample::from_state(AugmentedState::from_slice(s1, y), cfg));
                        if at_grid {
                            next_k += 1;
                        }
                    }
                    if projector.is_some() {
                        StepAction::Modified
                    } else {
                        StepAction::Continue
                    }
                }
                Some(_) => {
                    ds.eval_into(s_stop, &mut buf);
                    project(&mut buf);
                    let ev =
                        event_at(&buf).unwrap_or_else(|| event_at(y).expect("event at step end"));
                    samples.push(Sample::from_state(
                        AugmentedState::from_slice(s_stop, &buf),
                        cfg,
                    ));
                    termination = Some(match ev {
                        Event::Violation(v) => Termination::InvariantViolated {
                            name: v.name,
                            s: s_stop,
                        },
                        Event::Origin => Termination::OriginReached { s: s_stop },
                    });
                    StepAction::Stop
                }
            }
        },
    )?;

    let termination = match (termination, outcome.end) {
        (Some(t), _) => t,
        (None, SolveEnd::Reached) => Termination::HorizonReached,
        (None, SolveEnd::Failed(msg)) => Termination::StepFailure(msg),
        (None, SolveEnd::Stopped) => unreachable!("solver stops only on events"),
    };
    Ok(Trajectory {
        samples,
        termination,
        stats: TrajectoryStats {
            accepted: outcome.stats.accepted,
            rejected: outcome.stats.rejected,
            evaluations: outcome.stats.evaluations,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: &[i64], eps: f64) -> ModelConfig {
        ModelConfig::new(d, eps).unwrap()
    }

    fn state(w: f64, x: &[f64], y: &[f64]) -> PhaseState {
        PhaseState {
            w,
            x: x.to_vec(),
            y: y.to_vec(),
        }
    }

    #[test]
    fn strict_monitor_examples() {
        let c = cfg(&[2], 1.0);
        let inside = state(0.1, &[0.5], &[0.5]);
        let q = quantities_from_slice(&inside.to_vec(), 0.0, &c);
        assert!(monitor_bounds(&inside, &q, &c, MonitorProfile::strict()).is_none());
        let high = state(2f64.sqrt() + 0.01, &[0.1], &[0.1]);
        let q = quantities_from_slice(&high.to_vec(), 0.0, &c);
        let v = monitor_bounds(&high, &q, &c, MonitorProfile::strict()).unwrap();
        assert_eq!(v.name, "W upper bound");
        let neg = state(0.1, &[0.5], &[-0.5]);
        let q = quantities_from_slice(&neg.to_vec(), 0.0, &c);
        assert_eq!(
            monitor_bounds(&neg, &q, &c, MonitorProfile::strict())
                .unwrap()
                .name,
            "Y_1 positivity"
        );
    }

    #[test]
    fn einstein_profile_allows_equalities() {
        let c = cfg(&[2, 3], 1.0);
        let e = crate::equilibria::e_plus_point(&c);
        let q = quantities_from_slice(&e.to_vec(), 0.0, &c);
        assert!(monitor_bounds(&e, &q, &c, MonitorProfile::einstein()).is_none());
        let mut off = e.clone();
        off.x[0] *= 0.99;
        let q = quantities_from_slice(&off.to_vec(), 0.0, &c);
        assert_eq!(
            monitor_bounds(&off, &q, &c, MonitorProfile::einstein())
                .unwrap()
                .name,
            "H equality"
        );
    }

    #[test]
    fn pure_w_decay_matches_closed_form() {
        // Scalar restriction of the W-equation to X = Y = 0.
        let c = cfg(&[3], 2.0);
        let w0 = 0.7;
        let f = |_: f64, y: &[f64], d: &mut [f64]| {
            let mut full = [0.0; 3];
            crate::model::vector_field_into(&[y[0], 0.0, 0.0], &c, &mut full);
            d[0] = full[0];
        };
        let o = SolverOptions {
            rtol: 1e-9,
            atol: 1e-12,
            ..Default::default()
        };
        let mut worst = 0.0f64;
        dopri::solve(f, 0.0, &[w0], 20.0, &o, |ds, _| {
            let s = ds.s1();
            let y = ds.eval(s);
            worst = worst.max((y[0] - w0 / (1.0 + 2.0 * w0 * w0 * s).sqrt()).abs());
            StepAction::Continue
        })
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn samples_are_strictly_increasing() {
        let c = cfg(&[2], 1.0);
        let init = AugmentedState {
            s: 0.0,
            phase: state(0.1, &[0.5], &[0.5]),
            t: 0.0,
            u: 0.0,
            log_g: vec![0.0],
        };
        let ctl = IntegrationControls {
            record_every: 0.3,
            s_max: 10.0,
            ..IntegrationControls::soliton_defaults(&c)
        };
        let tr = integrate(&c, &init, &ctl, RunOptions::monitored(MonitorProfile::None)).unwrap();
        assert!(tr.samples.windows(2).all(|w| w[1].state.s > w[0].state.s));
        assert!(tr
            .samples
            .windows(2)
            .all(|w| w[1].state.s - w[0].state.s <= 0.3 + 1e-12));
        assert_eq!(tr.last().state.s, 10.0);
    }

    #[test]
    fn origin_event_is_located() {
        // X decays like e^{-s} from the origin's stable direction.
        let c = cfg(&[2], 1.0);
        let init = AugmentedState {
            s: 0.0,
            phase: state(0.0, &[0.5], &[0.0]),
            t: 0.0,
            u: 0.0,
            log_g: vec![0.0],
        };
        let ctl = IntegrationControls {
            stop_radius: 1e-3,
            s_max: 50.0,
            ..IntegrationControls::soliton_defaults(&c)
        };
        let tr = integrate(&c, &init, &ctl, RunOptions::monitored(MonitorProfile::None)).unwrap();
        let Termination::OriginReached { s } = tr.termination else {
            panic!("{:?}", tr.termination)
        };
        // X' = X(X² - 1): X² = 1/(1 + 3e^{2s}) with X(0) = 1/2.
        let exact = 0.5 * ((1e-6f64.recip() - 1.0) / 3.0).ln();
        assert!((s - exact).abs() < 1e-6, "{s} vs {exact}");
    }

    #[test]
    fn violation_event_is_located() {
        // W grows past sqrt(2/ε) when started above the W-equilibrium.
        let c = cfg(&[2], 1.0);
        let init = AugmentedState {
            s: 0.0,
            phase: state(0.1, &[1.0], &[0.0]),
            t: 0.0,
            u: 0.0,
            log_g: vec![0.0],
        };
        let ctl = IntegrationControls {
            s_max: 50.0,
            ..IntegrationControls::soliton_defaults(&c)
        };
        let tr = integrate(
            &c,
            &init,
            &ctl,
            RunOptions::monitored(MonitorProfile::strict()),
        )
        .unwrap();
        assert!(tr.is_violation(), "{:?}", tr.termination);
    }
}
