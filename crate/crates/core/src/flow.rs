//! Closed-form characteristic flow of the radial system.
//!
//! Every characteristic is a harmonic oscillator in `r`:
//! `R_t(r0) = (r0 - phi0'(r0)) + phi0'(r0) cos(w t) + u0(r0) sin(w t) / w`
//! with `w = sqrt(kappa)`. The flow gradient has eigenvalues given by the
//! same formula applied to `(p0, mu0)` and `(q0, nu0)`, which yields the
//! density, the potential and the conserved energy without any time stepping.

use serde::{Deserialize, Serialize};

use crate::profiles::{derive_density, gamma_inverse, gamma_inverse_identity, RadialProfile};
use crate::quadrature::gauss_legendre_on;
use crate::spectral::SpectralState;
use crate::threshold::{blowup_time_closed_form, flow_factor, flow_factor_rate};
use crate::{Error, Result};

/// Default node count for energy and mass quadrature.
pub const DEFAULT_ENERGY_NODES: usize = 256;

/// How `Gamma^{-1}` is evaluated when reconstructing the potential.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaRoute {
    /// `Gamma^{-1}(r) = r - phi0'(r)`.
    #[default]
    Identity,
    /// `[n int_0^r s^{n-1} rho0(s) ds]^{1/n}` by adaptive quadrature.
    Quadrature,
}

/// One point of the flow map together with the fields it carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub r0: f64,
    pub t: f64,
    pub r_t: f64,
    pub lam1: f64,
    pub lam2: f64,
    pub density: f64,
    pub velocity: f64,
}

fn check_radius(profile: &RadialProfile, r0: f64) -> Result<()> {
    if r0 >= 0.0 && r0 <= profile.r_max() {
        Ok(())
    } else {
        Err(Error::Domain(format!("r0 = {r0} outside [0, {}]", profile.r_max())))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("t = {t} must be finite and nonnegative")))
    }
}

/// `R_t(r0)`.
pub fn flow_radius(profile: &RadialProfile, r0: f64, t: f64) -> Result<f64> {
    check_radius(profile, r0)?;
    check_time(t)?;
    Ok(radius_unchecked(profile, r0, t))
}

fn radius_unchecked(profile: &RadialProfile, r0: f64, t: f64) -> f64 {
    let w = profile.kappa().sqrt();
    let (s, c) = (w * t).sin_cos();
    let dphi = profile.dphi0(r0);
    (r0 - dphi) + dphi * c + profile.u0(r0) * s / w
}

/// `dR_t/dt`, the velocity carried by the characteristic from `r0`.
pub fn flow_velocity(profile: &RadialProfile, r0: f64, t: f64) -> Result<f64> {
    check_radius(profile, r0)?;
    check_time(t)?;
    Ok(velocity_unchecked(profile, r0, t))
}

fn velocity_unchecked(profile: &RadialProfile, r0: f64, t: f64) -> f64 {
    let w = profile.kappa().sqrt();
    let (s, c) = (w * t).sin_cos();
    -w * profile.dphi0(r0) * s + profile.u0(r0) * c
}

/// Eigenvalues `(lam1, lam2)` of the flow-map gradient; radial first.
///
/// At the origin both branches share the radial data.
pub fn flow_gradient_eigs(profile: &RadialProfile, r0: f64, t: f64) -> Result<(f64, f64)> {
    check_radius(profile, r0)?;
    check_time(t)?;
    let kappa = profile.kappa();
    let lam1 = flow_factor(profile.p0(r0), profile.mu0(r0), kappa, t);
    let lam2 = if r0 == 0.0 { lam1 } else { flow_factor(profile.q0(r0), profile.nu0(r0), kappa, t) };
    Ok((lam1, lam2))
}

fn jacobian(profile: &RadialProfile, r0: f64, t: f64) -> Result<(f64, f64, f64)> {
    let (lam1, lam2) = flow_gradient_eigs(profile, r0, t)?;
    let jac = lam1 * lam2.powi(profile.dimension() as i32 - 1);
    if jac > 0.0 && lam1 > 0.0 && lam2 > 0.0 {
        Ok((lam1, lam2, jac))
    } else {
        Err(Error::FlowSingular { r0, t, jacobian: jac })
    }
}

/// `rho(R_t(r0), t) = rho0(r0) / (lam1 lam2^{n-1})`.
pub fn pushforward_density(profile: &RadialProfile, r0: f64, t: f64) -> Result<f64> {
    let (_, _, jac) = jacobian(profile, r0, t)?;
    Ok(derive_density(profile, r0)? / jac)
}

/// `phi_r(R_t(r0), t) = R_t(r0) - Gamma^{-1}(r0)` via the identity route.
pub fn potential_gradient_on_path(profile: &RadialProfile, r0: f64, t: f64) -> Result<f64> {
    potential_gradient_on_path_with(profile, r0, t, GammaRoute::Identity)
}

pub fn potential_gradient_on_path_with(profile: &RadialProfile, r0: f64, t: f64, route: GammaRoute) -> Result<f64> {
    let r_t = flow_radius(profile, r0, t)?;
    let g = match route {
        GammaRoute::Identity => gamma_inverse_identity(profile, r0)?,
        GammaRoute::Quadrature => gamma_inverse(profile, r0)?,
    };
    Ok(r_t - g)
}

/// Spectral state on the characteristic from `r0`, read off the flow map:
/// `p = lam1'/lam1`, `q = lam2'/lam2`, `(1 - mu) lam1 = 1 - mu0`,
/// `(1 - nu) lam2 = 1 - nu0`.
pub fn spectral_state_on_path(profile: &RadialProfile, r0: f64, t: f64) -> Result<SpectralState> {
    let (lam1, lam2, _) = jacobian(profile, r0, t)?;
    let kappa = profile.kappa();
    let (p0, mu0) = (profile.p0(r0), profile.mu0(r0));
    let (q0, nu0) = if r0 == 0.0 { (p0, mu0) } else { (profile.q0(r0), profile.nu0(r0)) };
    Ok(SpectralState {
        p: flow_factor_rate(p0, mu0, kappa, t) / lam1,
        q: flow_factor_rate(q0, nu0, kappa, t) / lam2,
        mu: 1.0 - (1.0 - mu0) / lam1,
        nu: 1.0 - (1.0 - nu0) / lam2,
    })
}

/// Full sample of the flow map at `(r0, t)`.
pub fn flow_sample(profile: &RadialProfile, r0: f64, t: f64) -> Result<FlowSample> {
    let (lam1, lam2) = flow_gradient_eigs(profile, r0, t)?;
    Ok(FlowSample {
        r0,
        t,
        r_t: radius_unchecked(profile, r0, t),
        lam1,
        lam2,
        density: pushforward_density(profile, r0, t)?,
        velocity: velocity_unchecked(profile, r0, t),
    })
}

/// Gauss–Legendre rule on `[0, r_max]` for energy and mass integrals.
pub fn energy_rule(profile: &RadialProfile, count: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_legendre_on(count, 0.0, profile.r_max())
}

/// Radial Lagrangian energy
/// `1/2 sum_i w_i [(dR_t/dt)^2 + kappa (R_t - Gamma^{-1})^2] rho0 r0^{n-1} omega_n`.
pub fn conserved_energy(profile: &RadialProfile, nodes: &[f64], weights: &[f64], t: f64, omega_n: f64) -> Result<f64> {
    if nodes.len() != weights.len() {
        return Err(Error::Config(format!("{} nodes but {} weights", nodes.len(), weights.len())));
    }
    let kappa = profile.kappa();
    let n = profile.dimension() as i32;
    let mut sum = 0.0;
    for (&r0, &wt) in nodes.iter().zip(weights) {
        jacobian(profile, r0, t)?;
        let v = velocity_unchecked(profile, r0, t);
        let phi_r = potential_gradient_on_path(profile, r0, t)?;
        sum += wt * (v * v + kappa * phi_r * phi_r) * derive_density(profile, r0)? * r0.powi(n - 1);
    }
    Ok(0.5 * omega_n * sum)
}

/// Energy of arbitrary per-characteristic states `(r0, u, phi_r)` on the same rule;
/// used to measure conservation on numerically integrated characteristics.
pub fn energy_from_states(
    profile: &RadialProfile,
    weights: &[f64],
    states: &[(f64, f64, f64)],
    omega_n: f64,
) -> Result<f64> {
    if states.len() != weights.len() {
        return Err(Error::Config(format!("{} states but {} weights", states.len(), weights.len())));
    }
    let kappa = profile.kappa();
    let n = profile.dimension() as i32;
    let mut sum = 0.0;
    for (&(r0, u, phi_r), &wt) in states.iter().zip(weights) {
        sum += wt * (u * u + kappa * phi_r * phi_r) * derive_density(profile, r0)? * r0.powi(n - 1);
    }
    Ok(0.5 * omega_n * sum)
}

/// First time the flow gradient at `r0` degenerates, if ever.
pub fn positive_definite_horizon(profile: &RadialProfile, r0: f64) -> Result<Option<f64>> {
    check_radius(profile, r0)?;
    let kappa = profile.kappa();
    let t1 = blowup_time_closed_form(profile.p0(r0), profile.mu0(r0), kappa);
    let t2 = if r0 == 0.0 { t1 } else { blowup_time_closed_form(profile.q0(r0), profile.nu0(r0), kappa) };
    Ok(match (t1, t2) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    })
}

/// Lagrangian label `r0` with `R_t(r0) = r`, assuming `R_t` is increasing.
///
/// Returns `Domain` when `r` lies beyond the image of `[0, r_max]`.
pub fn invert_flow_radius(profile: &RadialProfile, r: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let (mut lo, mut hi) = (0.0, profile.r_max());
    let (f_lo, f_hi) = (radius_unchecked(profile, lo, t), radius_unchecked(profile, hi, t));
    if !(r >= f_lo && r <= f_hi) {
        return Err(Error::Domain(format!("r = {r} outside flowed range [{f_lo}, {f_hi}] at t = {t}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if radius_unchecked(profile, mid, t) < r {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * profile.r_max() {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Eulerian density at radius `r` and time `t` through the flow map.
pub fn density_at(profile: &RadialProfile, r: f64, t: f64) -> Result<f64> {
    let r0 = invert_flow_radius(profile, r, t)?;
    pushforward_density(profile, r0, t)
}
