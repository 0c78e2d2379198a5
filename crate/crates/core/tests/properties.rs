use proptest::prelude::*;

use soliton_core::fd::derivative5;
use soliton_core::integrate::dopri::{solve, SolverOptions, StepAction};
use soliton_core::integrate::{IntegrationControls, Trajectory};
use soliton_core::model::{
    jacobian, quantities, quantity_rates, vector_field, vector_field_into, ModelConfig, PhaseState,
};
use soliton_core::reconstruct::profile;
use soliton_core::shoot::{solve_soliton, ShootingParams};
use soliton_core::verify::{conservation_check, fd_jacobian, invariant_suite};

fn shape() -> impl Strategy<Value = (Vec<i64>, f64)> {
    (prop::collection::vec(1i64..8, 1..4), 0.25f64..3.0).prop_map(|(mut d, e)| {
        d[0] = d[0].max(2);
        (d, e)
    })
}

fn config_and_state() -> impl Strategy<Value = (ModelConfig, PhaseState)> {
    shape().prop_flat_map(|(d, e)| {
        let r = d.len();
        let cfg = ModelConfig::new(&d, e).unwrap();
        (
            Just(cfg),
            -2.0f64..2.0,
            prop::collection::vec(-2.0f64..2.0, r),
            prop::collection::vec(-2.0f64..2.0, r),
        )
            .prop_map(|(cfg, w, x, y)| (cfg, PhaseState { w, x, y }))
    })
}

/// A soliton configuration with a random direction in the admissible cone.
fn soliton_case() -> impl Strategy<Value = (ModelConfig, ShootingParams)> {
    shape().prop_flat_map(|(d, e)| {
        let r = d.len();
        let cfg = ModelConfig::new(&d, e).unwrap();
        (
            Just(cfg),
            prop::collection::vec(0.2f64..1.0, r),
            -1.0f64..-0.2,
        )
            .prop_map(|(cfg, pos, cq)| {
                let mut p = ShootingParams::soliton_default(&cfg);
                p.coeffs = pos.into_iter().chain([cq]).collect();
                let p = p
                    .validated(&cfg, soliton_core::shoot::Mode::Soliton)
                    .unwrap();
                (cfg, p)
            })
    })
}

fn short_run(cfg: &ModelConfig, p: &ShootingParams, s_max: f64) -> Trajectory {
    let mut ctl = IntegrationControls::soliton_defaults(cfg);
    ctl.s_max = s_max;
    solve_soliton(cfg, p, &ctl).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn coordinate_planes_are_invariant((cfg, mut z) in config_and_state(), i in 0usize..3) {
        let i = i % cfg.r();
        z.y[i] = 0.0;
        prop_assert_eq!(vector_field(&z, &cfg).y[i], 0.0);
        z.w = 0.0;
        prop_assert_eq!(vector_field(&z, &cfg).w, 0.0);
    }

    #[test]
    fn reflections_negate_exactly_one_component((cfg, z) in config_and_state(), i in 0usize..3) {
        let i = i % cfg.r();
        let f = vector_field(&z, &cfg);
        let mut zy = z.clone();
        zy.y[i] = -zy.y[i];
        let fy = vector_field(&zy, &cfg);
        let mut expect = f.clone();
        expect.y[i] = -expect.y[i];
        prop_assert_eq!(&fy, &expect);
        let mut zw = z.clone();
        zw.w = -zw.w;
        let fw = vector_field(&zw, &cfg);
        let mut expect = f;
        expect.w = -expect.w;
        prop_assert_eq!(fw, expect);
    }

    #[test]
    fn jacobian_matches_central_differences((cfg, z) in config_and_state()) {
        let a = jacobian(&z, &cfg);
        let n = fd_jacobian(&z, &cfg, 1e-5);
        let scale = 1.0 + a.amax();
        prop_assert!((a - n).amax() <= 1e-7 * scale);
    }

    #[test]
    fn quantity_rates_are_directional_derivatives((cfg, z) in config_and_state()) {
        let f = vector_field(&z, &cfg).to_vec();
        let base = z.to_vec();
        let at = |k: f64| {
            let v: Vec<f64> = base.iter().zip(&f).map(|(a, b)| a + k * b).collect();
            quantities(&PhaseState::from_slice(&v), 0.0, &cfg)
        };
        let d = 1e-6;
        let (p, m) = (at(d), at(-d));
        let rates = quantity_rates(&z, &cfg);
        let tol = 1e-6 * (1.0 + f.iter().map(|v| v * v).sum::<f64>()) * (1.0 + z.norm().powi(2));
        prop_assert!(((p.l - m.l) / (2.0 * d) - rates.l).abs() <= tol);
        prop_assert!(((p.h - m.h) / (2.0 * d) - rates.h).abs() <= tol);
        prop_assert!(((p.q - m.q) / (2.0 * d) - rates.q).abs() <= tol);
    }

    /// On `{H = 1, Y = 0}` the function `J` obeys `J' = 2J(J − 1)`.
    #[test]
    fn j_is_logistic_on_the_reduced_set((cfg, z) in config_and_state()) {
        let mut z = z;
        z.y.iter_mut().for_each(|y| *y = 0.0);
        let sd = cfg.sqrt_d();
        let h: f64 = sd.iter().zip(&z.x).map(|(s, x)| s * x).sum();
        let nf = cfg.nf();
        for (x, s) in z.x.iter_mut().zip(sd) {
            *x += (1.0 - h) * s / nf;
        }
        let q = quantities(&z, 0.0, &cfg);
        prop_assert!((q.h - 1.0).abs() < 1e-12);
        let f = vector_field(&z, &cfg);
        let jdot = 2.0 * z.x.iter().zip(&f.x).map(|(x, dx)| x * dx).sum::<f64>()
            - cfg.epsilon() * z.w * f.w;
        let scale = 1.0 + q.j * q.j;
        prop_assert!((jdot - 2.0 * q.j * (q.j - 1.0)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn forward_then_backward_returns_to_the_start((cfg, z) in config_and_state()) {
        let f = |_: f64, y: &[f64], out: &mut [f64]| vector_field_into(y, &cfg, out);
        let o = SolverOptions { rtol: 1e-10, atol: 1e-12, ..SolverOptions::default() };
        let mut z0 = z.to_vec();
        z0.iter_mut().for_each(|v| *v *= 0.3);
        let span = 0.5;
        let fwd = solve(f, 0.0, &z0, span, &o, |_, _| StepAction::Continue).unwrap();
        prop_assume!(fwd.y.iter().all(|v| v.abs() < 10.0));
        let back = solve(f, span, &fwd.y, 0.0, &o, |_, _| StepAction::Continue).unwrap();
        let norm = z0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = z0.iter().zip(&back.y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 100.0 * (o.atol + o.rtol * norm), "{err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn halving_tolerances_moves_the_end_state_within_the_error_budget((cfg, z) in config_and_state()) {
        let f = |_: f64, y: &[f64], out: &mut [f64]| vector_field_into(y, &cfg, out);
        let mut z0 = z.to_vec();
        z0.iter_mut().for_each(|v| *v *= 0.3);
        let run = |rtol: f64| {
            let o = SolverOptions { rtol, atol: rtol * 1e-3, ..SolverOptions::default() };
            solve(f, 0.0, &z0, 2.0, &o, |_, _| StepAction::Continue).unwrap()
        };
        let (a, b) = (run(1e-8), run(5e-9));
        prop_assume!(a.y.iter().all(|v| v.abs() < 10.0));
        let norm = a.y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let budget = a.stats.accepted as f64 * (1e-11 + 1e-8 * norm);
        let diff = a.y.iter().zip(&b.y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(diff <= 10.0 * budget, "{diff} vs {budget}");
    }

    #[test]
    fn soliton_arcs_keep_every_invariant((cfg, p) in soliton_case()) {
        let traj = short_run(&cfg, &p, 80.0);
        prop_assert!(!traj.is_violation(), "{:?}", traj.termination);
        let rep = invariant_suite(&traj, &cfg);
        let failed: Vec<_> = rep.failures().map(|c| c.name.clone()).collect();
        prop_assert!(rep.pass, "{failed:?}");
        let c = conservation_check(&traj, &cfg).unwrap();
        prop_assert!(c.drift <= 1e-6, "{c:?}");
    }

    #[test]
    fn quantity_evolution_matches_finite_differences((cfg, p) in soliton_case()) {
        let traj = short_run(&cfg, &p, 30.0);
        let s: Vec<f64> = traj.samples.iter().map(|x| x.state.s).collect();
        let l: Vec<f64> = traj.samples.iter().map(|x| x.quantities.l).collect();
        let h: Vec<f64> = traj.samples.iter().map(|x| x.quantities.h).collect();
        let q: Vec<f64> = traj.samples.iter().map(|x| x.quantities.q).collect();
        let (dl, dh, dq) = (derivative5(&s, &l), derivative5(&s, &h), derivative5(&s, &q));
        for (k, smp) in traj.samples.iter().enumerate().skip(2).take(traj.samples.len() - 4) {
            let r = quantity_rates(&smp.state.phase, &cfg);
            prop_assert!((dl[k].unwrap() - r.l).abs() <= 1e-5, "L at s = {}", s[k]);
            prop_assert!((dh[k].unwrap() - r.h).abs() <= 1e-5, "H at s = {}", s[k]);
            prop_assert!((dq[k].unwrap() - r.q).abs() <= 1e-5, "Q at s = {}", s[k]);
        }
    }

    #[test]
    fn profile_derivatives_are_consistent((cfg, p) in soliton_case()) {
        let traj = short_run(&cfg, &p, 40.0);
        let prof = profile(&traj, &cfg).unwrap();
        let t: Vec<f64> = prof.rows.iter().map(|r| r.t).collect();
        let col = |f: &dyn Fn(&soliton_core::reconstruct::ProfileRow) -> f64| -> Vec<f64> {
            prof.rows.iter().map(f).collect()
        };
        let du = derivative5(&t, &col(&|r| r.u));
        let ddu = derivative5(&t, &col(&|r| r.udot));
        for i in 0..cfg.r() {
            let dg = derivative5(&t, &col(&|r| r.g[i]));
            let ddg = derivative5(&t, &col(&|r| r.gdot[i]));
            for k in 2..t.len() - 2 {
                let row = &prof.rows[k];
                let scale = 1.0 + row.gddot[i].abs();
                prop_assert!((dg[k].unwrap() - row.gdot[i]).abs() <= 1e-5 * (1.0 + row.gdot[i].abs()));
                prop_assert!((ddg[k].unwrap() - row.gddot[i]).abs() <= 1e-5 * scale, "t = {}", t[k]);
            }
        }
        for k in 2..t.len() - 2 {
            let row = &prof.rows[k];
            prop_assert!((du[k].unwrap() - row.udot).abs() <= 1e-5 * (1.0 + row.udot.abs()));
            prop_assert!((ddu[k].unwrap() - row.uddot).abs() <= 1e-5 * (1.0 + row.uddot.abs()));
        }
    }
}

/// Near the collapsing orbit `W ~ e^{β² s}`, so `e^{−β² s} W` decreases to a
/// positive limit over the first stretch of the run.
#[test]
fn rescaled_w_settles_near_the_collapsing_orbit() {
    for (d, e) in [(vec![2], 1.0), (vec![3, 2], 0.5), (vec![7, 4, 3], 2.0)] {
        let cfg = ModelConfig::new(&d, e).unwrap();
        let traj = short_run(&cfg, &ShootingParams::soliton_default(&cfg), 30.0);
        let b2 = cfg.beta().powi(2);
        let span = 1.0 / b2;
        let v: Vec<f64> = traj
            .samples
            .iter()
            .take_while(|x| x.state.s <= span)
            .map(|x| (-b2 * x.state.s).exp() * x.state.phase.w)
            .collect();
        assert!(v.len() > 10);
        assert!(v.windows(2).all(|w| w[1] <= w[0]), "{d:?}: not monotone");
        let drop = 1.0 - v.last().unwrap() / v[0];
        assert!(drop > 0.0 && drop < 0.05, "{d:?}: relative change {drop}");
    }
}

/// `t` grows without bound: quadrupling the horizon roughly doubles it,
/// as `W² ~ 1/(εs)` predicts.
#[test]
fn distance_keeps_growing_with_the_horizon() {
    for (d, e) in [(vec![2], 1.0), (vec![2, 3], 2.0)] {
        let cfg = ModelConfig::new(&d, e).unwrap();
        let p = ShootingParams::soliton_default(&cfg);
        let t1 = short_run(&cfg, &p, 500.0).last().state.t;
        let t4 = short_run(&cfg, &p, 2000.0).last().state.t;
        let ratio = t4 / t1;
        assert!(ratio > 1.6 && ratio < 2.4, "{d:?}: t ratio {ratio}");
    }
}
