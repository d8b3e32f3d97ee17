//! Radial initial data `(u0, phi0)` with closed-form derivatives.
//!
//! Every profile is built from one smooth family:
//!
//! ```text
//! phi0'(r) = r * (a + b * B(r / width)),   B(s) = exp(1 - 1/(1 - s^2)) for |s| < 1, else 0
//! u0(r)    = r * (c + d * exp(-r^2 / (2 sigma^2)))
//! ```
//!
//! so `nu0 = phi0'/r` and `q0 = u0/r` are available without division, and
//! the density is always derived from the potential through
//! `rho0 = (1 - mu0)(1 - nu0)^(n-1)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::quadrature::{self, ABS_TOL, REL_TOL};
use crate::{Error, Result};

/// Ratio forms `phi0'/r` and `u0/r` switch to their origin limit below
/// `R_EPS_FACTOR * r_max`.
pub const R_EPS_FACTOR: f64 = 1e-8;

/// Coefficients of the closed-form profile family (see module docs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileShape {
    /// Quadratic potential core: contributes `a` to both `mu0` and `nu0`.
    pub a: f64,
    /// Amplitude of the compactly supported potential bump.
    pub b: f64,
    /// Support radius of the potential bump.
    pub width: f64,
    /// Linear velocity core: contributes `c` to both `p0` and `q0`.
    pub c: f64,
    /// Amplitude of the Gaussian-derivative velocity perturbation.
    pub d: f64,
    /// Gaussian width of the velocity perturbation.
    pub sigma: f64,
}

impl ProfileShape {
    pub const EQUILIBRIUM: ProfileShape = ProfileShape { a: 0.0, b: 0.0, width: 1.0, c: 0.0, d: 0.0, sigma: 1.0 };

    fn bump(&self, r: f64) -> (f64, f64) {
        // Returns (B(s), s * B'(s)) with s = r / width.
        if self.b == 0.0 {
            return (0.0, 0.0);
        }
        let s = r / self.width;
        if s >= 1.0 {
            return (0.0, 0.0);
        }
        let one_minus = 1.0 - s * s;
        let value = (1.0 - 1.0 / one_minus).exp();
        (value, value * (-2.0 * s * s / (one_minus * one_minus)))
    }

    fn gauss(&self, r: f64) -> f64 {
        if self.d == 0.0 {
            return 0.0;
        }
        (-r * r / (2.0 * self.sigma * self.sigma)).exp()
    }

    fn nu_ratio(&self, r: f64) -> f64 {
        self.a + self.b * self.bump(r).0
    }

    fn q_ratio(&self, r: f64) -> f64 {
        self.c + self.d * self.gauss(r)
    }
}

/// A named preset with its parameter overrides, as read from a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePreset {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl ProfilePreset {
    pub fn new(name: impl Into<String>) -> Self {
        ProfilePreset { name: name.into(), params: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Names accepted by [`RadialProfile::from_preset`].
    pub const NAMES: [&'static str; 5] = ["equilibrium", "quadratic", "bump", "collapse", "boundary"];

    /// Resolves the preset into concrete shape coefficients.
    ///
    /// * `equilibrium`: no parameters, `u0 = phi0 = 0`.
    /// * `quadratic`: `a` (0.1), `c` (-0.6): `phi0 = a r^2/2`, `u0 = c r`.
    /// * `bump`: all six shape coefficients; defaults give a smooth subcritical profile.
    /// * `collapse`: `d` (-1.02), `sigma` (0.5); slightly supercritical at the origin only.
    /// * `boundary`: `a` (0), `sigma` (0.5); `|u0'(0)| = sqrt(kappa (1 - 2 phi0''(0)))` exactly.
    pub fn shape(&self, kappa: f64) -> Result<ProfileShape> {
        let allowed: &[&str] = match self.name.as_str() {
            "equilibrium" => &[],
            "quadratic" => &["a", "c"],
            "bump" => &["a", "b", "width", "c", "d", "sigma"],
            "collapse" => &["d", "sigma"],
            "boundary" => &["a", "sigma"],
            other => return Err(Error::Config(format!("unknown preset '{other}'"))),
        };
        if let Some(key) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!("preset '{}' has no parameter '{key}'", self.name)));
        }
        let get = |key: &str, default: f64| self.params.get(key).copied().unwrap_or(default);
        let shape = match self.name.as_str() {
            "equilibrium" => ProfileShape::EQUILIBRIUM,
            "quadratic" => ProfileShape { a: get("a", 0.1), c: get("c", -0.6), ..ProfileShape::EQUILIBRIUM },
            "bump" => ProfileShape {
                a: get("a", 0.1),
                b: get("b", 0.15),
                width: get("width", 1.0),
                c: get("c", 0.0),
                d: get("d", -0.5),
                sigma: get("sigma", 0.6),
            },
            "collapse" => ProfileShape { d: get("d", -1.02), sigma: get("sigma", 0.5), ..ProfileShape::EQUILIBRIUM },
            "boundary" => {
                let a = get("a", 0.0);
                if 1.0 - 2.0 * a < 0.0 {
                    return Err(Error::Config("boundary preset needs a <= 1/2".into()));
                }
                ProfileShape { a, d: -(kappa * (1.0 - 2.0 * a)).sqrt(), sigma: get("sigma", 0.5), ..ProfileShape::EQUILIBRIUM }
            }
            _ => unreachable!(),
        };
        Ok(shape)
    }
}

/// Smooth radial initial data on `[0, r_max]`.
///
/// Immutable after construction; all evaluators are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    dimension: usize,
    kappa: f64,
    r_max: f64,
    shape: ProfileShape,
}

impl RadialProfile {
    pub fn new(dimension: usize, kappa: f64, r_max: f64, shape: ProfileShape) -> Result<Self> {
        if dimension < 1 {
            return Err(Error::InvalidProfile("dimension must be at least 1".into()));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidProfile(format!("kappa must be positive, got {kappa}")));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidProfile(format!("r_max must be positive, got {r_max}")));
        }
        if shape.b != 0.0 && !(shape.width > 0.0) {
            return Err(Error::InvalidProfile("bump width must be positive".into()));
        }
        if shape.d != 0.0 && !(shape.sigma > 0.0) {
            return Err(Error::InvalidProfile("sigma must be positive".into()));
        }
        let profile = RadialProfile { dimension, kappa, r_max, shape };
        profile.check_density()?;
        Ok(profile)
    }

    pub fn from_preset(preset: &ProfilePreset, dimension: usize, kappa: f64, r_max: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidProfile(format!("kappa must be positive, got {kappa}")));
        }
        Self::new(dimension, kappa, r_max, preset.shape(kappa)?)
    }

    pub fn equilibrium(dimension: usize, kappa: f64, r_max: f64) -> Self {
        Self::new(dimension, kappa, r_max, ProfileShape::EQUILIBRIUM).expect("equilibrium is a valid profile")
    }

    /// Same data in another dimension (the shape does not depend on `n`).
    pub fn with_dimension(&self, dimension: usize) -> Result<Self> {
        Self::new(dimension, self.kappa, self.r_max, self.shape)
    }

    fn check_density(&self) -> Result<()> {
        let samples = 512;
        let lo = 1e-3 * self.r_max;
        let ratio = (self.r_max / lo).powf(1.0 / (samples - 1) as f64);
        let mut r = lo;
        for _ in 0..samples {
            let rho = self.density_unchecked(r.min(self.r_max));
            if rho.is_nan() || rho < 0.0 {
                return Err(Error::InvalidProfile(format!("derived density {rho} is negative at r = {r}")));
            }
            r *= ratio;
        }
        let rho0 = self.density_unchecked(0.0);
        if rho0 < 0.0 {
            return Err(Error::InvalidProfile(format!("derived density {rho0} is negative at the origin")));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn shape(&self) -> &ProfileShape {
        &self.shape
    }

    pub fn r_eps(&self) -> f64 {
        R_EPS_FACTOR * self.r_max
    }

    pub fn u0(&self, r: f64) -> f64 {
        r * self.shape.q_ratio(r)
    }

    pub fn du0(&self, r: f64) -> f64 {
        let s = &self.shape;
        s.c + s.d * s.gauss(r) * (1.0 - r * r / (s.sigma * s.sigma))
    }

    pub fn dphi0(&self, r: f64) -> f64 {
        r * self.shape.nu_ratio(r)
    }

    pub fn d2phi0(&self, r: f64) -> f64 {
        let s = &self.shape;
        let (bump, s_dbump) = s.bump(r);
        s.a + s.b * (bump + s_dbump)
    }

    /// `phi0'''(0)`; every preset potential is even, so this vanishes.
    pub fn d3phi0_at_origin(&self) -> Option<f64> {
        Some(0.0)
    }

    /// `u0''(0)`; every preset velocity is odd, so this vanishes.
    pub fn d2u0_at_origin(&self) -> Option<f64> {
        Some(0.0)
    }

    /// `p0 = u0'`.
    pub fn p0(&self, r: f64) -> f64 {
        self.du0(r)
    }

    /// `mu0 = phi0''`.
    pub fn mu0(&self, r: f64) -> f64 {
        self.d2phi0(r)
    }

    /// `q0 = u0 / r`, with the series limit below `r_eps`.
    pub fn q0(&self, r: f64) -> f64 {
        let r_eps = self.r_eps();
        if r >= r_eps {
            self.u0(r) / r
        } else {
            match self.d2u0_at_origin() {
                Some(d2) => self.du0(0.0) + 0.5 * d2 * r,
                None => self.du0(r_eps),
            }
        }
    }

    /// `nu0 = phi0' / r`, with the series limit below `r_eps`.
    pub fn nu0(&self, r: f64) -> f64 {
        let r_eps = self.r_eps();
        if r >= r_eps {
            self.dphi0(r) / r
        } else {
            match self.d3phi0_at_origin() {
                Some(d3) => self.d2phi0(0.0) + 0.5 * d3 * r,
                None => self.d2phi0(r_eps),
            }
        }
    }

    fn density_unchecked(&self, r: f64) -> f64 {
        let n = self.dimension as i32;
        if r < self.r_eps() {
            return (1.0 - self.mu0(0.0)).powi(n);
        }
        (1.0 - self.mu0(r)) * (1.0 - self.nu0(r)).powi(n - 1)
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !(0.0..=self.r_max).contains(&r) {
            return Err(Error::Domain(format!("radius {r} outside [0, {}]", self.r_max)));
        }
        Ok(())
    }
}

/// Initial density `rho0(r) = (1 - phi0'')(1 - phi0'/r)^(n-1)`.
pub fn derive_density(profile: &RadialProfile, r: f64) -> Result<f64> {
    profile.check_radius(r)?;
    Ok(profile.density_unchecked(r))
}

/// `int_0^r s^(n-1) density(s) ds` by adaptive quadrature.
pub fn primitive_of<F: Fn(f64) -> f64>(dimension: usize, r: f64, density: F) -> Result<f64> {
    let k = dimension as i32 - 1;
    quadrature::integrate(|s| s.powi(k) * density(s), 0.0, r, ABS_TOL, REL_TOL)
}

/// Transported primitive `e0(r) = int_0^r s^(n-1) rho0(s) ds`.
pub fn transported_primitive(profile: &RadialProfile, r: f64) -> Result<f64> {
    profile.check_radius(r)?;
    primitive_of(profile.dimension, r, |s| profile.density_unchecked(s))
}

/// Radial rearrangement `Gamma^{-1}(r) = (n e0(r))^(1/n)`, by quadrature.
pub fn gamma_inverse(profile: &RadialProfile, r: f64) -> Result<f64> {
    let e = transported_primitive(profile, r)?;
    Ok(rearrangement_from_primitive(profile.dimension, e))
}

/// Same map through the identity `Gamma^{-1}(r) = r - phi0'(r)`.
pub fn gamma_inverse_identity(profile: &RadialProfile, r: f64) -> Result<f64> {
    profile.check_radius(r)?;
    Ok(r - profile.dphi0(r))
}

pub(crate) fn rearrangement_from_primitive(dimension: usize, e: f64) -> f64 {
    let n = dimension as f64;
    (n * e.max(0.0)).powf(1.0 / n)
}
