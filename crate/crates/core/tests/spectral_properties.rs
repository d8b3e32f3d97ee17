use ema_core::spectral::{
    ep_regularize, ep_restore, integrate, integrate_ep, monitor_ellipse, monitor_swirl_invariants, Integrator,
    IntegratorConfig, OdeSystem, StepControl, SwirlState, Termination,
};
use ema_core::threshold::{blowup_time_closed_form, sigma_membership};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn subcritical_qnu(rng: &mut ChaCha8Rng, kappa: f64) -> (f64, f64) {
    let nu0 = rng.random_range(-1.0..0.45);
    let bound = (kappa * (1.0 - 2.0 * nu0)).sqrt();
    (rng.random_range(-0.9..0.9) * bound, nu0)
}

#[test]
fn ellipse_drift_scales_with_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let kappa = rng.random_range(0.5..3.0);
        let (q0, nu0) = subcritical_qnu(&mut rng, kappa);
        let mut last = f64::INFINITY;
        for tol in [1e-6, 1e-8, 1e-10] {
            let cfg = IntegratorConfig::default().with_tolerance(tol).with_horizon(50.0);
            let traj = integrate(OdeSystem::Qnu { kappa }, &[q0, nu0], &cfg).unwrap();
            assert_eq!(traj.termination, Termination::HorizonReached);
            let drift = monitor_ellipse(&traj).unwrap();
            assert!(drift <= 100.0 * tol, "tol {tol}: drift {drift}");
            assert!(drift <= last * 1.5, "drift grew when tightening: {last} -> {drift}");
            last = drift;
        }
    }
}

#[test]
fn halving_the_step_cuts_drift_by_four() {
    // Loose tolerances so the step is pinned at max_step; the pair is then a
    // fixed-step fifth-order method and halving the step must pay off.
    let (q0, nu0, kappa) = (0.4, -0.2, 1.0);
    let drift = |max_step: f64| {
        let cfg = IntegratorConfig { rel_tol: 1.0, abs_tol: 1.0, max_step, horizon: 20.0, ..Default::default() };
        monitor_ellipse(&integrate(OdeSystem::Qnu { kappa }, &[q0, nu0], &cfg).unwrap()).unwrap()
    };
    let (coarse, fine) = (drift(0.2), drift(0.1));
    assert!(fine > 0.0 && coarse >= 4.0 * fine, "{coarse} vs {fine}");
}

#[test]
fn swirl_invariants_are_conserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let tol = 1e-10;
    for _ in 0..10 {
        let s = SwirlState {
            p: rng.random_range(-0.5..0.5),
            q: rng.random_range(-1.5..1.5),
            mu: rng.random_range(-0.5..0.3),
            nu: rng.random_range(-0.8..0.6),
            theta_r: rng.random_range(-0.5..0.5),
            theta_over_r: rng.random_range(0.2..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
        };
        let cfg = IntegratorConfig::default().with_tolerance(tol).with_horizon(50.0);
        let traj = integrate(OdeSystem::SwirlQBranch { kappa: 1.0 }, &[s.q, s.nu, s.theta_over_r], &cfg).unwrap();
        assert_eq!(traj.termination, Termination::HorizonReached);
        for (k, d) in monitor_swirl_invariants(&traj).unwrap() {
            assert!(d <= 100.0 * tol, "{k}: {d}");
        }
    }
}

#[test]
fn swirl_prevents_q_branch_blowup() {
    let cfg = IntegratorConfig::default().with_horizon(200.0);
    let traj = integrate(OdeSystem::SwirlQBranch { kappa: 1.0 }, &[-1.2, 0.0, 0.5], &cfg).unwrap();
    assert_eq!(traj.termination, Termination::HorizonReached);
    // Without swirl the same data blows up.
    let flat = integrate(OdeSystem::SwirlQBranch { kappa: 1.0 }, &[-1.2, 0.0, 0.0], &cfg).unwrap();
    let Termination::BlowupDetected { t_est } = flat.termination else { panic!("{:?}", flat.termination) };
    assert!((t_est - blowup_time_closed_form(-1.2, 0.0, 1.0).unwrap()).abs() < 1e-4);
}

#[test]
fn full_swirl_membership_is_horizon_relative() {
    let cfg = IntegratorConfig::default();
    let s = SwirlState { q: -1.2, theta_over_r: 0.5, ..Default::default() };
    let v = sigma_membership(&s, 1.0, 200.0, &cfg).unwrap();
    assert_eq!(v.horizon, Some(200.0));
    assert_eq!(v.class == ema_core::VerdictClass::Subcritical, v.t_blowup.is_none());
}

#[test]
fn euler_poisson_stays_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    // Horizon in regularised time; the physical horizon is 100.
    let cfg = IntegratorConfig::default().with_horizon(1e7);
    for n in [2usize, 3] {
        for _ in 0..100 {
            let nu0 = rng.random_range(-2.0..1.0 / n as f64);
            let q0 = rng.random_range(-5.0..5.0);
            let out = integrate_ep(q0, nu0, 1.0, n, 100.0, &cfg).unwrap();
            assert!(out.reached_horizon, "n={n} q0={q0} nu0={nu0}: {out:?}");
            assert!(out.energy_drift < 1e-7, "n={n} q0={q0} nu0={nu0}: {out:?}");
        }
    }
}

#[test]
fn linearised_variables_reproduce_qnu() {
    let (q0, nu0, kappa) = (-0.3, 0.25, 1.5);
    let cfg = IntegratorConfig::default().with_horizon(7.0);
    let a = integrate(OdeSystem::Qnu { kappa }, &[q0, nu0], &cfg).unwrap();
    let v0 = 1.0 / (1.0 - nu0);
    let b = integrate(OdeSystem::Wv { kappa, c0: 0.0 }, &[q0 * v0, v0], &cfg).unwrap();
    let (sa, sb) = (a.last_state(), b.last_state());
    assert!((sa[0] - sb[0] / sb[1]).abs() < 1e-8);
    assert!((sa[1] - (1.0 - 1.0 / sb[1])).abs() < 1e-8);
}

#[test]
fn euler_poisson_raw_and_regularised_agree_on_mild_data() {
    let cfg = IntegratorConfig::default().with_horizon(10.0);
    for n in [2usize, 3] {
        let (q0, nu0) = (0.3, -0.2);
        let raw = integrate(OdeSystem::EpQnu { kappa: 1.0, n }, &[q0, nu0], &cfg).unwrap();
        assert_eq!(raw.termination, Termination::HorizonReached);
        let y0 = ep_regularize(q0, nu0, n).unwrap();
        let mut last = None;
        let reg = Integrator::new(IntegratorConfig::default().with_horizon(1e4)).unwrap();
        reg.run(&OdeSystem::EpRegularized { kappa: 1.0, n }, &y0, &[], |_, y| {
            last = Some(y.to_vec());
            if y[2] >= 10.0 {
                StepControl::Stop
            } else {
                StepControl::Continue
            }
        });
        let y = last.unwrap();
        let (t, q, nu) = ep_restore(&y, n);
        let raw_cfg = IntegratorConfig::default().with_horizon(t);
        let raw_t = integrate(OdeSystem::EpQnu { kappa: 1.0, n }, &[q0, nu0], &raw_cfg).unwrap();
        let s = raw_t.last_state();
        assert!((s[0] - q).abs() < 1e-7 && (s[1] - nu).abs() < 1e-7, "n={n}: {s:?} vs ({q}, {nu})");
    }
}
