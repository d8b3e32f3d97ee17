//! Euler–Poisson comparison dynamics in regularised variables.
//!
//! With `gamma = (1 - n nu)^(-1/n)` and `eta = q gamma`, the `(q, nu)`
//! system becomes `gamma'' = -(kappa/n)(gamma - gamma^(1-n))`, a particle in
//! a potential well. For `n >= 2` the well has a barrier at `gamma = 0` and
//! excursions of `(q, nu)` grow like `exp(E)` in the energy `E`, far beyond
//! floating-point range for moderate data. Switching to the new time `s`
//! with `dt = gamma^(n-1) ds` and `ell = ln(gamma)` gives
//!
//! ```text
//! ell' = exp((n-2) ell) eta,   eta' = -(kappa/n)(exp(n ell) - 1),   t' = exp((n-1) ell)
//! ```
//!
//! which is regular for every finite `ell`. A finite-time blowup of `(q, nu)`
//! is `ell -> -inf` at finite `t`.

use serde::{Deserialize, Serialize};

use super::{Integrator, IntegratorConfig, OdeSystem, RunEnd, StepControl, Termination};
use crate::{Error, Result};

/// Right-hand side of [`OdeSystem::EpRegularized`], state `[ell, eta, t]`.
pub fn rhs_ep_regularized(ell: f64, eta: f64, kappa: f64, n: usize) -> [f64; 3] {
    let nf = n as f64;
    [((nf - 2.0) * ell).exp() * eta, -(kappa / nf) * ((nf * ell).exp() - 1.0), ((nf - 1.0) * ell).exp()]
}

/// `(q, nu)` to `[ell, eta, t = 0]`; needs `n nu < 1`.
pub fn ep_regularize(q: f64, nu: f64, n: usize) -> Result<[f64; 3]> {
    let beta = 1.0 - n as f64 * nu;
    if !(beta > 0.0) || n == 0 {
        return Err(Error::SingularInput(format!("n nu = {} is not below 1", n as f64 * nu)));
    }
    let ell = -beta.ln() / n as f64;
    Ok([ell, q * ell.exp(), 0.0])
}

/// `[ell, eta, t]` back to `(t, q, nu)`; may overflow to infinities on wide excursions.
pub fn ep_restore(state: &[f64], n: usize) -> (f64, f64, f64) {
    let (ell, eta, t) = (state[0], state[1], state[2]);
    let nf = n as f64;
    (t, eta * (-ell).exp(), (1.0 - (-nf * ell).exp()) / nf)
}

/// Energy `eta^2/2 + V(gamma)` of the regularised system.
pub fn ep_energy(ell: f64, eta: f64, kappa: f64, n: usize) -> f64 {
    let nf = n as f64;
    let g2 = (2.0 * ell).exp();
    let v = if n == 2 {
        0.5 * g2 - ell
    } else {
        0.5 * g2 - ((2.0 - nf) * ell).exp() / (2.0 - nf)
    };
    0.5 * eta * eta + (kappa / nf) * v
}

/// Outcome of an Euler–Poisson run measured in physical time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpOutcome {
    /// Physical time reached.
    pub t_reached: f64,
    pub reached_horizon: bool,
    /// Termination in the regularised time `s`.
    pub termination: Termination,
    /// Smallest `ell = ln(gamma)` seen; `|q|` and `|nu|` peak near it.
    pub min_ell: f64,
    pub energy_drift: f64,
}

/// Integrates the Euler–Poisson `(q, nu)` dynamics to physical time `t_horizon`
/// through the regularised variables. `config.horizon` caps the regularised time.
pub fn integrate_ep(q0: f64, nu0: f64, kappa: f64, n: usize, t_horizon: f64, config: &IntegratorConfig) -> Result<EpOutcome> {
    if !(kappa > 0.0) {
        return Err(Error::Config("kappa must be positive".into()));
    }
    if !(t_horizon > 0.0) {
        return Err(Error::Config(format!("horizon must be positive, got {t_horizon}")));
    }
    let y0 = ep_regularize(q0, nu0, n)?;
    let e0 = ep_energy(y0[0], y0[1], kappa, n);
    let scale = e0.abs().max(1.0);
    let integrator = Integrator::new(*config)?;
    let system = OdeSystem::EpRegularized { kappa, n };
    let mut t_reached = 0.0;
    let mut min_ell = y0[0];
    let mut drift: f64 = 0.0;
    let end = integrator.run(&system, &y0, &[], |_, y| {
        t_reached = y[2];
        min_ell = min_ell.min(y[0]);
        drift = drift.max((ep_energy(y[0], y[1], kappa, n) - e0).abs() / scale);
        if y[2] >= t_horizon {
            StepControl::Stop
        } else {
            StepControl::Continue
        }
    });
    let (termination, reached_horizon) = match end {
        RunEnd::Interrupted { .. } => (Termination::HorizonReached, true),
        RunEnd::Finished(term) => (term, false),
    };
    Ok(EpOutcome { t_reached, reached_horizon, termination, min_ell, energy_drift: drift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::rhs_ep_qnu;

    #[test]
    fn round_trip() {
        for n in 1..4 {
            let y = ep_regularize(0.7, -0.4, n).unwrap();
            let (t, q, nu) = ep_restore(&y, n);
            assert_eq!(t, 0.0);
            assert!((q - 0.7).abs() < 1e-15 && (nu + 0.4).abs() < 1e-15);
        }
        assert!(ep_regularize(0.0, 0.5, 2).is_err());
    }

    #[test]
    fn chain_rule_matches_physical_rhs() {
        // d(q, nu)/dt from the regularised field equals the direct field.
        for n in 1..4 {
            let (q, nu, kappa) = (-0.8, 0.1, 1.3);
            let y = ep_regularize(q, nu, n).unwrap();
            let d = rhs_ep_regularized(y[0], y[1], kappa, n);
            let h = 1e-6;
            let plus = [y[0] + h * d[0], y[1] + h * d[1], y[2] + h * d[2]];
            let minus = [y[0] - h * d[0], y[1] - h * d[1], y[2] - h * d[2]];
            let (tp, qp, np) = ep_restore(&plus, n);
            let (tm, qm, nm) = ep_restore(&minus, n);
            let dt = tp - tm;
            let (dq, dnu) = rhs_ep_qnu(q, nu, kappa, n);
            assert!(((qp - qm) / dt - dq).abs() < 1e-6, "n={n}");
            assert!(((np - nm) / dt - dnu).abs() < 1e-6, "n={n}");
        }
    }

    #[test]
    fn wide_excursion_stays_bounded_in_two_dimensions() {
        let cfg = IntegratorConfig::default().with_horizon(1e6);
        let out = integrate_ep(5.0, 0.49, 1.0, 2, 100.0, &cfg).unwrap();
        assert!(out.reached_horizon, "{out:?}");
        // |nu| peaks near exp(-2 min_ell) / 2, far beyond any magnitude cap.
        assert!(out.min_ell < -100.0);
        assert!(out.energy_drift < 1e-8);
    }

    #[test]
    fn one_dimension_blows_up() {
        // n = 1 coincides with the Monge–Ampère dynamics: supercritical data must blow up.
        let cfg = IntegratorConfig::default().with_horizon(1e6);
        let out = integrate_ep(-2.0, 0.0, 1.0, 1, 100.0, &cfg).unwrap();
        assert!(!out.reached_horizon);
        let Termination::BlowupDetected { t_est } = out.termination else { panic!("{out:?}") };
        assert!(t_est > 0.0);
        assert!((out.t_reached - std::f64::consts::PI / 6.0).abs() < 1e-3, "{}", out.t_reached);
    }
}
