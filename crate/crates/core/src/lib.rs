//! Numerical toolkit for the radially symmetric pressureless
//! Euler–Monge–Ampère system.
//!
//! The crate is organised around three independent representations of the
//! same dynamics, which are meant to be checked against each other:
//!
//! * [`spectral`]: the Riccati-type ODEs for the eigenvalues `(p, q, mu, nu)`
//!   along a single characteristic, integrated with an adaptive
//!   Dormand–Prince pair that detects finite-time blowup.
//! * [`threshold`]: the explicit critical-threshold predicate and the
//!   closed-form blowup time obtained from the geometric solution.
//! * [`flow`]: the closed-form characteristic flow and everything that can be
//!   reconstructed from it (density, potential gradient, energy).
//!
//! [`lagrange`] couples an ensemble of characteristics into a full radial
//! solver with Eulerian reconstruction, and [`sweep`] builds phase diagrams.

// Negated float comparisons are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flow;
pub mod lagrange;
pub mod profiles;
pub mod quadrature;
pub mod spectral;
pub mod sweep;
pub mod threshold;

pub use error::{Error, Result};
pub use profiles::{ProfilePreset, RadialProfile};
pub use spectral::{IntegratorConfig, OdeSystem, SpectralState, SwirlState, Termination, Trajectory};
pub use threshold::{Verdict, VerdictClass};
