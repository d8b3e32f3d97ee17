//! Dormand–Prince 5(4) with PI step-size control and blowup detection.

use std::collections::BTreeMap;

use super::monitors;
use super::{IntegratorConfig, OdeRhs, OdeSystem, Termination, Trajectory};
use crate::{Error, Result};


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

// PI controller (Hairer & Wanner's DOPRI5 defaults).
const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - 0.75 * BETA;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Observer verdict after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    Stop,
}

/// Result of [`Integrator::run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunEnd {
    Finished(Termination),
    /// The observer asked to stop after the step ending at `t`.
    Interrupted { t: f64 },
}

/// Adaptive explicit integrator for autonomous systems.
#[derive(Debug, Clone)]
pub struct Integrator {
    config: IntegratorConfig,
}

struct Work {
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
}

impl Integrator {
    pub fn new(config: IntegratorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Integrator { config })
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    /// Integrates from `t = 0` to the configured horizon.
    ///
    /// Steps land exactly on every time in `checkpoints` (values outside
    /// `(0, horizon)` are ignored) and on the horizon itself. `observe` sees
    /// every accepted `(t, y)`; the initial state is not reported.
    pub fn run<R, F>(&self, rhs: &R, y0: &[f64], checkpoints: &[f64], mut observe: F) -> RunEnd
    where
        R: OdeRhs + ?Sized,
        F: FnMut(f64, &[f64]) -> StepControl,
    {
        let cfg = &self.config;
        let dim = y0.len();
        debug_assert_eq!(dim, rhs.dim());

        let mut stops: Vec<f64> = checkpoints.iter().copied().filter(|&c| c > 0.0 && c < cfg.horizon).collect();
        stops.sort_by(f64::total_cmp);
        stops.dedup();
        stops.push(cfg.horizon);

        let mut work = Work {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            y_stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
        };
        let mut y = y0.to_vec();
        let mut t = 0.0;
        let mut history = BlowupHistory::default();
        history.push(t, sup_norm(&y));

        if sup_norm(&y) > cfg.blowup_magnitude {
            return RunEnd::Finished(Termination::BlowupDetected { t_est: 0.0 });
        }

        rhs.eval(&y, &mut work.k[0]);
        let mut h = self.initial_step(rhs, &y, &mut work);
        let mut fac_old: f64 = 1e-4;
        let mut rejected_last = false;
        let mut next_stop = 0;

        loop {
            let target = stops[next_stop];
            let remaining = target - t;
            let landing = h >= remaining * (1.0 - 1e-12);
            let h_step = if landing { remaining } else { h };

            let err = self.attempt(rhs, &y, h_step, &mut work);
            let fac11 = err.powf(ALPHA);

            if err <= 1.0 {
                let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = (h_step / fac).min(cfg.max_step);
                if rejected_last {
                    h_new = h_new.min(h_step);
                }
                fac_old = err.max(1e-4);
                rejected_last = false;

                t = if landing { target } else { t + h_step };
                std::mem::swap(&mut y, &mut work.y_new);
                // FSAL: the last stage is f(y_new).
                work.k.swap(0, 6);

                let magnitude = sup_norm(&y);
                history.push(t, magnitude);
                if magnitude > cfg.blowup_magnitude {
                    return RunEnd::Finished(Termination::BlowupDetected { t_est: history.extrapolate(t) });
                }
                if observe(t, &y) == StepControl::Stop {
                    return RunEnd::Interrupted { t };
                }
                if landing {
                    next_stop += 1;
                    if next_stop == stops.len() {
                        return RunEnd::Finished(Termination::HorizonReached);
                    }
                }
                // A landing step may have been clipped far below the controller's proposal.
                h = if landing { h_new.max(h) } else { h_new };
                if h < cfg.min_step {
                    return RunEnd::Finished(history.underflow(t));
                }
            } else {
                let shrink = if err.is_finite() { (fac11 / SAFETY).min(1.0 / FAC_MIN) } else { 1.0 / FAC_MIN };
                h = h_step / shrink;
                rejected_last = true;
                if h < cfg.min_step {
                    return RunEnd::Finished(history.underflow(t));
                }
            }
        }
    }

    /// One trial step; leaves the candidate in `work.y_new` and `f(y_new)` in `k[6]`.
    fn attempt<R: OdeRhs + ?Sized>(&self, rhs: &R, y: &[f64], h: f64, w: &mut Work) -> f64 {
        let dim = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut w.k;
        let ys = &mut w.y_stage;

        for i in 0..dim {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        rhs.eval(ys, k2);
        for i in 0..dim {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs.eval(ys, k3);
        for i in 0..dim {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs.eval(ys, k4);
        for i in 0..dim {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs.eval(ys, k5);
        for i in 0..dim {
            ys[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs.eval(ys, k6);
        let y_new = &mut w.y_new;
        for i in 0..dim {
            y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs.eval(y_new, k7);

        let cfg = &self.config;
        let mut err: f64 = 0.0;
        for i in 0..dim {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            let ratio = e.abs() / scale;
            if !ratio.is_finite() || !y_new[i].is_finite() {
                return f64::INFINITY;
            }
            err = err.max(ratio);
        }
        err
    }

    fn initial_step<R: OdeRhs + ?Sized>(&self, rhs: &R, y0: &[f64], w: &mut Work) -> f64 {
        let cfg = &self.config;
        let scale = |v: f64| cfg.abs_tol + cfg.rel_tol * v.abs();
        let norm = |x: &[f64]| x.iter().zip(y0).fold(0.0_f64, |m, (xi, yi)| m.max(xi.abs() / scale(*yi)));
        let d0 = norm(y0);
        let d1 = norm(&w.k[0]);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(cfg.max_step);
        for ((s, &y), &k) in w.y_stage.iter_mut().zip(y0).zip(&w.k[0]) {
            *s = y + h0 * k;
        }
        rhs.eval(&w.y_stage, &mut w.k[1]);
        let d2 = w.k[1]
            .iter()
            .zip(&w.k[0])
            .zip(y0)
            .fold(0.0_f64, |m, ((a, b), yi)| m.max((a - b).abs() / scale(*yi)))
            / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / dmax).powf(0.2) };
        let h = (100.0 * h0).min(h1).min(cfg.max_step);
        if h.is_finite() && h > 0.0 {
            h.max(cfg.min_step * 10.0)
        } else {
            cfg.min_step * 10.0
        }
    }
}

fn sup_norm(y: &[f64]) -> f64 {
    y.iter().fold(0.0_f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) })
}

/// Last three accepted `(t, max |y|)` pairs, used to extrapolate the pole.
#[derive(Debug, Default)]
struct BlowupHistory {
    samples: [(f64, f64); 3],
    len: usize,
}

impl BlowupHistory {
    fn push(&mut self, t: f64, magnitude: f64) {
        self.samples.rotate_left(1);
        self.samples[2] = (t, magnitude);
        self.len = (self.len + 1).min(3);
    }

    /// Blowup is a simple pole, so `1 / |y|` is locally linear in `t`; fit a
    /// line through the recorded samples and return its zero.
    fn extrapolate(&self, t_last: f64) -> f64 {
        let pts = &self.samples[3 - self.len..];
        if pts.len() < 2 {
            return t_last;
        }
        let m = pts.len() as f64;
        let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let gm = pts.iter().map(|p| 1.0 / p.1).sum::<f64>() / m;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for &(t, mag) in pts {
            sxy += (t - tm) * (1.0 / mag - gm);
            sxx += (t - tm) * (t - tm);
        }
        let slope = sxy / sxx;
        if !(slope < 0.0) || !slope.is_finite() {
            return t_last;
        }
        let root = tm - gm / slope;
        if root.is_finite() {
            root.max(t_last)
        } else {
            t_last
        }
    }

    /// The controller keeps shrinking the step. When the magnitude was still
    /// growing over the last steps this is the signature of an approaching
    /// pole; otherwise it is a genuine stall.
    fn underflow(&self, t: f64) -> Termination {
        let growing = self.len == 3 && self.samples[0].1 < self.samples[1].1 && self.samples[1].1 < self.samples[2].1;
        if growing {
            Termination::BlowupDetected { t_est: self.extrapolate(t) }
        } else {
            Termination::StepUnderflow { t }
        }
    }
}

/// Integrates `system` from `initial` to `config.horizon`, recording every
/// accepted step. Conserved-quantity drifts that apply to the system are
/// attached to the returned trajectory.
pub fn integrate(system: OdeSystem, initial: &[f64], config: &IntegratorConfig) -> Result<Trajectory> {
    if initial.len() != system.dim() {
        return Err(Error::Config(format!(
            "system {} expects {} components, got {}",
            system.name(),
            system.dim(),
            initial.len()
        )));
    }
    if initial.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("initial state must be finite".into()));
    }
    if system.kappa() <= 0.0 {
        return Err(Error::Config("kappa must be positive".into()));
    }
    if let OdeSystem::EpQnu { n: 0, .. } | OdeSystem::EpRegularized { n: 0, .. } = system {
        return Err(Error::Config("dimension must be at least 1".into()));
    }
    let integrator = Integrator::new(*config)?;
    let mut times = vec![0.0];
    let mut states = vec![initial.to_vec()];
    let end = integrator.run(&system, initial, &[], |t, y| {
        times.push(t);
        states.push(y.to_vec());
        StepControl::Continue
    });
    let termination = match end {
        RunEnd::Finished(term) => term,
        RunEnd::Interrupted { .. } => unreachable!("observer never interrupts"),
    };
    let mut trajectory = Trajectory { system, times, states, termination, invariant_drift: BTreeMap::new() };
    trajectory.invariant_drift = monitors::applicable_drifts(&trajectory);
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl OdeRhs for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, y: &[f64], dy: &mut [f64]) {
            dy[0] = -y[0];
        }
    }

    struct Riccati;
    impl OdeRhs for Riccati {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[0] * y[0];
        }
    }

    #[test]
    fn exponential_decay_is_accurate() {
        let cfg = IntegratorConfig::default().with_horizon(5.0);
        let integ = Integrator::new(cfg).unwrap();
        let mut last = (0.0, 1.0);
        let end = integ.run(&Decay, &[1.0], &[], |t, y| {
            last = (t, y[0]);
            StepControl::Continue
        });
        assert_eq!(end, RunEnd::Finished(Termination::HorizonReached));
        assert_eq!(last.0, 5.0);
        assert!((last.1 - (-5.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn lands_on_checkpoints() {
        let cfg = IntegratorConfig::default().with_horizon(3.0);
        let integ = Integrator::new(cfg).unwrap();
        let mut seen = vec![];
        integ.run(&Decay, &[1.0], &[0.25, 1.0, 2.5, 7.0], |t, _| {
            seen.push(t);
            StepControl::Continue
        });
        for c in [0.25, 1.0, 2.5, 3.0] {
            assert!(seen.contains(&c), "missing checkpoint {c}");
        }
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn pole_of_scalar_riccati() {
        // y' = y^2, y(0) = 2 blows up at t = 1/2.
        let cfg = IntegratorConfig::default().with_horizon(10.0);
        let integ = Integrator::new(cfg).unwrap();
        match integ.run(&Riccati, &[2.0], &[], |_, _| StepControl::Continue) {
            RunEnd::Finished(Termination::BlowupDetected { t_est }) => assert!((t_est - 0.5).abs() < 1e-9, "{t_est}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn observer_can_interrupt() {
        let integ = Integrator::new(IntegratorConfig::default()).unwrap();
        let end = integ.run(&Decay, &[1.0], &[], |t, _| if t > 1.0 { StepControl::Stop } else { StepControl::Continue });
        assert!(matches!(end, RunEnd::Interrupted { t } if t > 1.0));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = IntegratorConfig { min_step: 1.0, ..Default::default() };
        assert!(matches!(Integrator::new(cfg), Err(Error::Config(_))));
        cfg = IntegratorConfig::default();
        cfg.rel_tol = 0.0;
        assert!(matches!(integrate(OdeSystem::Qnu { kappa: 1.0 }, &[0.0, 0.0], &cfg), Err(Error::Config(_))));
        assert!(matches!(
            integrate(OdeSystem::Qnu { kappa: 1.0 }, &[0.0], &IntegratorConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn history_extrapolates_linear_reciprocal() {
        let mut h = BlowupHistory::default();
        for t in [0.9, 0.95, 0.99] {
            h.push(t, 1.0 / (1.0 - t));
        }
        assert!((h.extrapolate(0.99) - 1.0).abs() < 1e-12);
    }
}
