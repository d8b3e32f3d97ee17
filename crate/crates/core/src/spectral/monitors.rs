//! Conserved quantities of the characteristic dynamics.
//!
//! With `w = q/(1-nu)` and `v = 1/(1-nu)` the no-swirl dynamics moves on the
//! ellipse `w^2 + kappa (1-v)^2 = const`. With swirl, `(Theta/r) v^2` and
//! `w^2 + kappa (1-v)^2 + C0^2 v^-2` are both conserved.

use std::collections::BTreeMap;

use super::{OdeSystem, Trajectory};
use crate::{Error, Result};

fn linearise(q: f64, nu: f64) -> Result<(f64, f64)> {
    if nu >= 1.0 || !nu.is_finite() {
        return Err(Error::SingularInput(format!("nu = {nu} is not below 1")));
    }
    let v = 1.0 / (1.0 - nu);
    Ok((q * v, v))
}

/// `w^2 + kappa (1 - v)^2` at one `(q, nu)`.
pub fn ellipse_invariant(q: f64, nu: f64, kappa: f64) -> Result<f64> {
    let (w, v) = linearise(q, nu)?;
    Ok(w * w + kappa * (1.0 - v) * (1.0 - v))
}

/// `((Theta/r) v^2, w^2 + kappa (1 - v)^2 + C0^2 v^-2)` for a given `C0`.
pub fn swirl_invariants(q: f64, nu: f64, theta_over_r: f64, c0: f64, kappa: f64) -> Result<(f64, f64)> {
    let (w, v) = linearise(q, nu)?;
    Ok((theta_over_r * v * v, w * w + kappa * (1.0 - v) * (1.0 - v) + c0 * c0 / (v * v)))
}

fn relative_drift(values: impl Iterator<Item = f64>) -> f64 {
    let mut values = values;
    let Some(first) = values.next() else { return 0.0 };
    let scale = first.abs().max(1.0);
    values.fold(0.0_f64, |m, v| m.max((v - first).abs() / scale))
}

/// Max relative drift of the ellipse invariant along a no-swirl trajectory.
///
/// Accepts `qnu`, `pmu` and no-swirl `wv` trajectories.
pub fn monitor_ellipse(trajectory: &Trajectory) -> Result<f64> {
    let kappa = trajectory.system.kappa();
    let values: Vec<f64> = match trajectory.system {
        OdeSystem::Qnu { .. } | OdeSystem::Pmu { .. } => {
            trajectory.states.iter().map(|s| ellipse_invariant(s[0], s[1], kappa)).collect::<Result<_>>()?
        }
        OdeSystem::Wv { c0: 0.0, .. } => {
            trajectory.states.iter().map(|s| s[0] * s[0] + kappa * (1.0 - s[1]) * (1.0 - s[1])).collect()
        }
        other => {
            return Err(Error::Config(format!("ellipse invariant does not apply to system {}", other.name())));
        }
    };
    Ok(relative_drift(values.into_iter()))
}

/// Drifts of `theta_v2 = (Theta/r) v^2` and `swirl_energy = w^2 + kappa (1-v)^2 + C0^2 v^-2`.
pub fn monitor_swirl_invariants(trajectory: &Trajectory) -> Result<BTreeMap<String, f64>> {
    let (iq, inu, irot) = match trajectory.system {
        OdeSystem::Swirl { .. } => (1, 3, 5),
        OdeSystem::SwirlQBranch { .. } => (0, 1, 2),
        other => {
            return Err(Error::Config(format!("swirl invariants do not apply to system {}", other.name())));
        }
    };
    let kappa = trajectory.system.kappa();
    let s0 = &trajectory.states[0];
    let (_, v0) = linearise(s0[iq], s0[inu])?;
    let c0 = s0[irot] * v0 * v0;
    let pairs = trajectory
        .states
        .iter()
        .map(|s| swirl_invariants(s[iq], s[inu], s[irot], c0, kappa))
        .collect::<Result<Vec<_>>>()?;
    let mut out = BTreeMap::new();
    out.insert("theta_v2".to_string(), relative_drift(pairs.iter().map(|p| p.0)));
    out.insert("swirl_energy".to_string(), relative_drift(pairs.iter().map(|p| p.1)));
    Ok(out)
}

/// Drifts attached automatically by [`super::integrate`]; monitors that hit
/// the singular line `nu >= 1` are left out.
pub(crate) fn applicable_drifts(trajectory: &Trajectory) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    match trajectory.system {
        OdeSystem::Qnu { .. } | OdeSystem::Pmu { .. } => {
            if let Ok(d) = monitor_ellipse(trajectory) {
                out.insert("ellipse".to_string(), d);
            }
        }
        OdeSystem::Wv { c0, kappa } => {
            let values = trajectory
                .states
                .iter()
                .map(|s| s[0] * s[0] + kappa * (1.0 - s[1]) * (1.0 - s[1]) + c0 * c0 / (s[1] * s[1]));
            out.insert("ellipse".to_string(), relative_drift(values));
        }
        OdeSystem::Swirl { .. } | OdeSystem::SwirlQBranch { .. } => {
            if let Ok(m) = monitor_swirl_invariants(trajectory) {
                out.extend(m);
            }
        }
        OdeSystem::EpRegularized { kappa, n } => {
            let values = trajectory.states.iter().map(|s| super::ep_energy(s[0], s[1], kappa, n));
            out.insert("ep_energy".to_string(), relative_drift(values));
        }
        OdeSystem::EpQnu { .. } => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{integrate, IntegratorConfig, Termination};

    #[test]
    fn equilibrium_has_zero_drift() {
        let cfg = IntegratorConfig::default().with_horizon(100.0);
        let traj = integrate(OdeSystem::Qnu { kappa: 1.0 }, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(traj.termination, Termination::HorizonReached);
        assert!(traj.states.iter().all(|s| s[0] == 0.0 && s[1] == 0.0));
        assert_eq!(monitor_ellipse(&traj).unwrap(), 0.0);
    }

    #[test]
    fn singular_line_is_reported() {
        let cfg = IntegratorConfig::default().with_horizon(1.0);
        let traj = integrate(OdeSystem::Qnu { kappa: 1.0 }, &[0.0, 1.5], &cfg).unwrap();
        assert!(matches!(monitor_ellipse(&traj), Err(Error::SingularInput(_))));
        assert!(!traj.invariant_drift.contains_key("ellipse"));
    }

    #[test]
    fn invariant_agrees_between_representations() {
        let (q, nu, kappa) = (0.4, -0.3, 2.0);
        let i_qnu = ellipse_invariant(q, nu, kappa).unwrap();
        let v = 1.0 / (1.0 - nu);
        let cfg = IntegratorConfig::default().with_horizon(1.0);
        let traj = integrate(OdeSystem::Wv { kappa, c0: 0.0 }, &[q * v, v], &cfg).unwrap();
        let s = &traj.states[0];
        let i_wv = s[0] * s[0] + kappa * (1.0 - s[1]).powi(2);
        assert!((i_qnu - i_wv).abs() < 1e-10);
        assert!(monitor_ellipse(&traj).unwrap() < 1e-9);
    }

    #[test]
    fn swirl_without_rotation_reduces_to_ellipse() {
        let (q, nu, kappa) = (0.3, 0.2, 1.0);
        let (j1, j2) = swirl_invariants(q, nu, 0.0, 0.0, kappa).unwrap();
        assert_eq!(j1, 0.0);
        assert_eq!(j2, ellipse_invariant(q, nu, kappa).unwrap());
    }

    #[test]
    fn doubling_swirl_constant_quadruples_its_term() {
        let (q, nu, kappa) = (0.3, 0.2, 1.0);
        let base = ellipse_invariant(q, nu, kappa).unwrap();
        let (_, a) = swirl_invariants(q, nu, 0.5, 0.7, kappa).unwrap();
        let (_, b) = swirl_invariants(q, nu, 0.5, 1.4, kappa).unwrap();
        assert!(((b - base) - 4.0 * (a - base)).abs() < 1e-14);
    }

    #[test]
    fn monitors_reject_wrong_systems() {
        let cfg = IntegratorConfig::default().with_horizon(1.0);
        let traj = integrate(OdeSystem::EpQnu { kappa: 1.0, n: 2 }, &[0.1, 0.1], &cfg).unwrap();
        assert!(monitor_ellipse(&traj).is_err());
        assert!(monitor_swirl_invariants(&traj).is_err());
    }
}
