//! Right-hand sides of the characteristic ODE systems.

use crate::spectral::SwirlState;
use crate::{Error, Result};

/// `(q, nu)' = (-q^2 - kappa nu, q (1 - nu))`.
#[inline]
pub fn rhs_qnu(q: f64, nu: f64, kappa: f64) -> (f64, f64) {
    (-q * q - kappa * nu, q * (1.0 - nu))
}

/// `(p, mu)' = (-p^2 - kappa mu, p (1 - mu))`, formally the same system as [`rhs_qnu`].
#[inline]
pub fn rhs_pmu(p: f64, mu: f64, kappa: f64) -> (f64, f64) {
    (-p * p - kappa * mu, p * (1.0 - mu))
}

/// Six-variable dynamics of the 2D system with swirl.
pub fn rhs_swirl(s: &SwirlState, kappa: f64) -> SwirlState {
    let rot = s.theta_over_r;
    SwirlState {
        q: -s.q * s.q - kappa * s.nu + rot * rot,
        nu: s.q * (1.0 - s.nu),
        theta_over_r: -2.0 * s.q * rot,
        p: -s.p * s.p - kappa * s.mu + 2.0 * s.theta_r * rot - rot * rot,
        mu: s.p * (1.0 - s.mu),
        theta_r: -(s.p + s.q) * s.theta_r - (s.p - s.q) * rot,
    }
}

/// Euler–Poisson comparison: `(q, nu)' = (-q^2 - kappa nu, q (1 - n nu))`.
#[inline]
pub fn rhs_ep_qnu(q: f64, nu: f64, kappa: f64, n: usize) -> (f64, f64) {
    (-q * q - kappa * nu, q * (1.0 - n as f64 * nu))
}

/// Linearised variables `w = q/(1-nu)`, `v = 1/(1-nu)`:
/// `(w, v)' = (kappa (1 - v) + c0^2 v^-3, w)`.
pub fn rhs_wv(w: f64, v: f64, kappa: f64, c0: f64) -> Result<(f64, f64)> {
    if c0 == 0.0 {
        return Ok((kappa * (1.0 - v), w));
    }
    if v == 0.0 {
        return Err(Error::SingularInput("v = 0 with nonzero swirl constant".into()));
    }
    Ok((kappa * (1.0 - v) + c0 * c0 / (v * v * v), w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn qnu_examples() {
        assert_eq!(rhs_qnu(0.0, 0.0, 1.0), (-0.0, 0.0));
        assert_eq!(rhs_qnu(1.0, 0.0, 1.0), (-1.0, 1.0));
        let (dq, dnu) = rhs_qnu(0.5, 0.2, 2.0);
        assert!((dq + 0.65).abs() < 1e-15 && (dnu - 0.4).abs() < 1e-15);
    }

    #[test]
    fn pmu_examples() {
        assert_eq!(rhs_pmu(-1.0, 0.5, 1.0), (-1.5, -0.5));
        let (a, b) = rhs_pmu(0.0, 0.0, 1.0);
        assert!(a == 0.0 && b == 0.0);
    }

    #[test]
    fn swirl_examples() {
        let z = rhs_swirl(&SwirlState::default(), 1.0);
        assert_eq!(z.to_array().map(f64::abs), [0.0; 6]);
        let s = SwirlState { theta_over_r: 1.0, ..Default::default() };
        let d = rhs_swirl(&s, 1.0);
        assert_eq!((d.q, d.nu, d.theta_over_r, d.p, d.mu, d.theta_r), (1.0, 0.0, -0.0, -1.0, 0.0, 0.0));
    }

    #[test]
    fn ep_examples() {
        let (dq, dnu) = rhs_ep_qnu(0.3, 0.1, 1.0, 3);
        assert!((dq + 0.19).abs() < 1e-15 && (dnu - 0.21).abs() < 1e-15);
        for n in 1..5 {
            let k = 1.7;
            let (dq, dnu) = rhs_ep_qnu(1.0, 1.0 / n as f64, k, n);
            assert!((dq - (-1.0 - k / n as f64)).abs() < 1e-15);
            assert!(dnu.abs() < 1e-15);
        }
    }

    #[test]
    fn wv_examples() {
        assert_eq!(rhs_wv(0.0, 1.0, 1.0, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(rhs_wv(1.0, 0.0, 1.0, 0.0).unwrap(), (1.0, 1.0));
        assert_eq!(rhs_wv(0.0, 1.0, 1.0, 1.0).unwrap(), (1.0, 0.0));
        assert!(matches!(rhs_wv(0.0, 0.0, 1.0, 1.0), Err(Error::SingularInput(_))));
    }

    proptest! {
        #[test]
        fn pmu_and_qnu_are_the_same_system(x in -1e3f64..1e3, y in -1e3f64..1e3, k in 1e-3f64..10.0) {
            prop_assert_eq!(rhs_pmu(x, y, k), rhs_qnu(x, y, k));
        }

        #[test]
        fn ep_in_one_dimension_is_ema(x in -1e3f64..1e3, y in -1e3f64..1e3, k in 1e-3f64..10.0) {
            prop_assert_eq!(rhs_ep_qnu(x, y, k, 1), rhs_qnu(x, y, k));
        }

        #[test]
        fn swirl_without_rotation_splits(p in -50f64..50.0, q in -50f64..50.0, mu in -5f64..5.0, nu in -5f64..5.0, k in 1e-3f64..10.0) {
            let s = SwirlState { p, q, mu, nu, theta_r: 0.0, theta_over_r: 0.0 };
            let d = rhs_swirl(&s, k);
            prop_assert_eq!((d.p, d.mu), rhs_pmu(p, mu, k));
            prop_assert_eq!((d.q, d.nu), rhs_qnu(q, nu, k));
            prop_assert_eq!(d.theta_r.abs() + d.theta_over_r.abs(), 0.0);
        }
    }
}
