//! Spectral dynamics along a single characteristic.
//!
//! The eigenvalues of the velocity gradient `(p, q)` and of the potential
//! Hessian `(mu, nu)` obey closed Riccati-type systems along particle paths.
//! This module provides their right-hand sides, an adaptive integrator that
//! stops at finite-time blowup, and monitors for the known conserved
//! quantities.

mod integrator;
mod monitors;
mod regularized;
mod rhs;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use integrator::{integrate, Integrator, RunEnd, StepControl};
pub use monitors::{ellipse_invariant, monitor_ellipse, monitor_swirl_invariants, swirl_invariants};
pub use regularized::{ep_energy, ep_regularize, ep_restore, integrate_ep, rhs_ep_regularized, EpOutcome};
pub use rhs::{rhs_ep_qnu, rhs_pmu, rhs_qnu, rhs_swirl, rhs_wv};

use crate::{Error, Result};

/// Eigenvalues of `grad u` and `D^2 phi` at a point on a characteristic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectralState {
    pub p: f64,
    pub q: f64,
    pub mu: f64,
    pub nu: f64,
}

impl SpectralState {
    /// Density recovered through the Monge–Ampère relation.
    pub fn density(&self, dimension: usize) -> f64 {
        (1.0 - self.mu) * (1.0 - self.nu).powi(dimension as i32 - 1)
    }

    pub fn sup_norm(&self) -> f64 {
        self.p.abs().max(self.q.abs()).max(self.mu.abs()).max(self.nu.abs())
    }
}

/// [`SpectralState`] extended with the swirl components `Theta_r` and `Theta / r`.
///
/// Flattened order (as used by [`OdeSystem::Swirl`]) is
/// `[p, q, mu, nu, theta_r, theta_over_r]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SwirlState {
    pub p: f64,
    pub q: f64,
    pub mu: f64,
    pub nu: f64,
    pub theta_r: f64,
    pub theta_over_r: f64,
}

impl SwirlState {
    pub fn to_array(&self) -> [f64; 6] {
        [self.p, self.q, self.mu, self.nu, self.theta_r, self.theta_over_r]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        SwirlState { p: y[0], q: y[1], mu: y[2], nu: y[3], theta_r: y[4], theta_over_r: y[5] }
    }
}

/// The ODE systems that can be integrated along one characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum OdeSystem {
    /// State `[q, nu]`.
    Qnu { kappa: f64 },
    /// State `[p, mu]`.
    Pmu { kappa: f64 },
    /// State `[p, q, mu, nu, theta_r, theta_over_r]`.
    Swirl { kappa: f64 },
    /// Closed subsystem `[q, nu, theta_over_r]` of [`OdeSystem::Swirl`].
    SwirlQBranch { kappa: f64 },
    /// Euler–Poisson comparison dynamics, state `[q, nu]`.
    EpQnu { kappa: f64, n: usize },
    /// Euler–Poisson dynamics in regularised variables, state `[ell, eta, t]`.
    EpRegularized { kappa: f64, n: usize },
    /// Linearised variables, state `[w, v]`.
    Wv { kappa: f64, c0: f64 },
}

impl OdeSystem {
    pub fn dim(&self) -> usize {
        match self {
            OdeSystem::Qnu { .. } | OdeSystem::Pmu { .. } | OdeSystem::EpQnu { .. } | OdeSystem::Wv { .. } => 2,
            OdeSystem::SwirlQBranch { .. } | OdeSystem::EpRegularized { .. } => 3,
            OdeSystem::Swirl { .. } => 6,
        }
    }

    pub fn kappa(&self) -> f64 {
        match *self {
            OdeSystem::Qnu { kappa }
            | OdeSystem::Pmu { kappa }
            | OdeSystem::Swirl { kappa }
            | OdeSystem::SwirlQBranch { kappa }
            | OdeSystem::EpQnu { kappa, .. }
            | OdeSystem::EpRegularized { kappa, .. }
            | OdeSystem::Wv { kappa, .. } => kappa,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OdeSystem::Qnu { .. } => "qnu",
            OdeSystem::Pmu { .. } => "pmu",
            OdeSystem::Swirl { .. } => "swirl",
            OdeSystem::SwirlQBranch { .. } => "swirl_q_branch",
            OdeSystem::EpQnu { .. } => "ep_qnu",
            OdeSystem::EpRegularized { .. } => "ep_regularized",
            OdeSystem::Wv { .. } => "wv",
        }
    }
}

/// Right-hand side of an autonomous ODE `y' = f(y)`.
pub trait OdeRhs {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64], dydt: &mut [f64]);
}

impl OdeRhs for OdeSystem {
    fn dim(&self) -> usize {
        OdeSystem::dim(self)
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        match *self {
            OdeSystem::Qnu { kappa } => (dy[0], dy[1]) = rhs_qnu(y[0], y[1], kappa),
            OdeSystem::Pmu { kappa } => (dy[0], dy[1]) = rhs_pmu(y[0], y[1], kappa),
            OdeSystem::EpQnu { kappa, n } => (dy[0], dy[1]) = rhs_ep_qnu(y[0], y[1], kappa, n),
            OdeSystem::EpRegularized { kappa, n } => dy.copy_from_slice(&rhs_ep_regularized(y[0], y[1], kappa, n)),
            OdeSystem::Wv { kappa, c0 } => {
                // v = 0 with swirl is a pole; let the step controller reject it.
                (dy[0], dy[1]) = rhs_wv(y[0], y[1], kappa, c0).unwrap_or((f64::INFINITY, y[0]));
            }
            OdeSystem::Swirl { kappa } => {
                dy.copy_from_slice(&rhs_swirl(&SwirlState::from_slice(y), kappa).to_array());
            }
            OdeSystem::SwirlQBranch { kappa } => {
                let s = SwirlState { q: y[0], nu: y[1], theta_over_r: y[2], ..Default::default() };
                let d = rhs_swirl(&s, kappa);
                dy[0] = d.q;
                dy[1] = d.nu;
                dy[2] = d.theta_over_r;
            }
        }
    }
}

/// Tolerances and limits of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Any state component above this magnitude counts as blowup.
    pub blowup_magnitude: f64,
    pub horizon: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.5,
            min_step: 1e-14,
            blowup_magnitude: 1e9,
            horizon: 100.0,
        }
    }
}

impl IntegratorConfig {
    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self.abs_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("max_step", self.max_step)?;
        positive("min_step", self.min_step)?;
        positive("blowup_magnitude", self.blowup_magnitude)?;
        positive("horizon", self.horizon)?;
        if self.min_step >= self.max_step {
            return Err(Error::Config(format!(
                "min_step ({}) must be below max_step ({})",
                self.min_step, self.max_step
            )));
        }
        Ok(())
    }
}

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    HorizonReached,
    BlowupDetected { t_est: f64 },
    StepUnderflow { t: f64 },
}

impl Termination {
    pub fn is_blowup(&self) -> bool {
        matches!(self, Termination::BlowupDetected { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Termination::HorizonReached => "horizon_reached",
            Termination::BlowupDetected { .. } => "blowup_detected",
            Termination::StepUnderflow { .. } => "step_underflow",
        }
    }
}

/// Accepted steps of one integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub system: OdeSystem,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub termination: Termination,
    /// Max relative drift of every conserved quantity that applies to `system`.
    pub invariant_drift: BTreeMap<String, f64>,
}

impl Trajectory {
    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }

    pub fn max_magnitude(&self) -> f64 {
        self.states.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}
