//! Critical-threshold classification and closed-form blowup times.
//!
//! Both eigenvalue branches share one predicate: a pair `(lambda0, h0)`
//! (either `(p0, mu0)` or `(q0, nu0)`) stays bounded for all time iff
//! `lambda0^2 < kappa (1 - 2 h0)`. When it fails, the branch blows up at the
//! first zero of the flow factor
//!
//! ```text
//! lambda(t) = (1 - h0) + h0 cos(sqrt(kappa) t) + lambda0 sin(sqrt(kappa) t) / sqrt(kappa)
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::profiles::RadialProfile;
use crate::spectral::{integrate, IntegratorConfig, OdeSystem, SwirlState, Termination};
use crate::{Error, Result};

/// Relative width of the band around `lambda0^2 = kappa (1 - 2 h0)` that is
/// reported as [`VerdictClass::Boundary`].
pub const TOL_BOUNDARY: f64 = 1e-12;

/// Radii in the default profile grid.
pub const DEFAULT_GRID_SIZE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictClass {
    Subcritical,
    Supercritical,
    Boundary,
}

impl VerdictClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictClass::Subcritical => "subcritical",
            VerdictClass::Supercritical => "supercritical",
            VerdictClass::Boundary => "boundary",
        }
    }
}

/// Classification of an initial point, profile, or swirl state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub class: VerdictClass,
    /// Blowup time; absent exactly when the class is subcritical. A boundary
    /// verdict carries the tangential root when one exists.
    pub t_blowup: Option<f64>,
    /// First radius where the threshold fails (profile verdicts only).
    pub witness_r: Option<f64>,
    /// Integration horizon for verdicts that were decided numerically.
    pub horizon: Option<f64>,
}

impl Verdict {
    fn subcritical() -> Self {
        Verdict { class: VerdictClass::Subcritical, t_blowup: None, witness_r: None, horizon: None }
    }

    pub fn is_subcritical(&self) -> bool {
        self.class == VerdictClass::Subcritical
    }
}

/// `kappa (1 - 2 h0) - lambda0^2`; positive exactly in the subcritical region.
pub fn threshold_margin(lambda0: f64, h0: f64, kappa: f64) -> f64 {
    kappa * (1.0 - 2.0 * h0) - lambda0 * lambda0
}

/// Flow factor `lambda(t)`: eigenvalue of the flow-map gradient.
pub fn flow_factor(lambda0: f64, h0: f64, kappa: f64, t: f64) -> f64 {
    let w = kappa.sqrt();
    let (s, c) = (w * t).sin_cos();
    (1.0 - h0) + h0 * c + lambda0 * s / w
}

/// Time derivative of [`flow_factor`].
pub fn flow_factor_rate(lambda0: f64, h0: f64, kappa: f64, t: f64) -> f64 {
    let w = kappa.sqrt();
    let (s, c) = (w * t).sin_cos();
    -h0 * w * s + lambda0 * c
}

/// Pointwise threshold test for one eigenvalue branch.
///
/// # Panics
/// If `kappa` is not positive.
pub fn classify_point(lambda0: f64, h0: f64, kappa: f64) -> Verdict {
    assert!(kappa > 0.0, "kappa must be positive");
    let margin = threshold_margin(lambda0, h0, kappa);
    let class = if margin.abs() <= TOL_BOUNDARY * kappa.max(1.0) {
        VerdictClass::Boundary
    } else if margin > 0.0 {
        VerdictClass::Subcritical
    } else {
        VerdictClass::Supercritical
    };
    let t_blowup = match class {
        VerdictClass::Subcritical => None,
        _ => blowup_time_closed_form(lambda0, h0, kappa),
    };
    Verdict { class, t_blowup, witness_r: None, horizon: None }
}

/// First positive zero of [`flow_factor`], or `None` if it never vanishes.
///
/// Writes `h0 cos(theta) + (lambda0/sqrt(kappa)) sin(theta)` as
/// `A cos(theta - delta)` and solves `A cos(theta - delta) = -(1 - h0)`
/// directly, so the result always lies in `(0, 2 pi / sqrt(kappa)]`.
pub fn blowup_time_closed_form(lambda0: f64, h0: f64, kappa: f64) -> Option<f64> {
    let w = kappa.sqrt();
    let b = lambda0 / w;
    let amp = h0.hypot(b);
    if amp == 0.0 {
        return None;
    }
    let x = -(1.0 - h0) / amp;
    if x.abs() > 1.0 {
        return None;
    }
    let delta = b.atan2(h0);
    let phase = x.acos();
    let period = 2.0 * std::f64::consts::PI;
    let wrap = |theta: f64| {
        let r = theta.rem_euclid(period);
        if r == 0.0 {
            period
        } else {
            r
        }
    };
    let theta = wrap(delta + phase).min(wrap(delta - phase));
    Some(theta / w)
}

/// Default classification grid: log-spaced radii in `[1e-3 r_max, r_max]`.
pub fn default_grid(profile: &RadialProfile, count: usize) -> Vec<f64> {
    log_grid(1e-3 * profile.r_max(), profile.r_max(), count)
}

pub(crate) fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![hi],
        _ => {
            let step = (hi / lo).ln() / (count - 1) as f64;
            let mut g: Vec<f64> = (0..count).map(|i| lo * (step * i as f64).exp()).collect();
            g[count - 1] = hi;
            g
        }
    }
}

/// Both threshold branches evaluated at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointBranches {
    pub r: f64,
    /// `(p0, mu0) = (u0', phi0'')`.
    pub radial: Verdict,
    pub radial_margin: f64,
    /// `(q0, nu0) = (u0/r, phi0'/r)`.
    pub angular: Verdict,
    pub angular_margin: f64,
}

/// Branch verdicts at the origin limit followed by every grid radius.
pub fn branch_table(profile: &RadialProfile, r_grid: &[f64]) -> Result<Vec<PointBranches>> {
    if r_grid.is_empty() {
        return Err(Error::Domain("classification grid is empty".into()));
    }
    if let Some(r) = r_grid.iter().find(|&&r| !(r > 0.0 && r <= profile.r_max())) {
        return Err(Error::Domain(format!("grid radius {r} outside (0, {}]", profile.r_max())));
    }
    let kappa = profile.kappa();
    let radii: Vec<f64> = std::iter::once(0.0).chain(r_grid.iter().copied()).collect();
    Ok(radii
        .par_iter()
        .map(|&r| {
            let (p0, mu0) = (profile.p0(r), profile.mu0(r));
            let (q0, nu0) = (profile.q0(r), profile.nu0(r));
            PointBranches {
                r,
                radial: classify_point(p0, mu0, kappa),
                radial_margin: threshold_margin(p0, mu0, kappa),
                angular: classify_point(q0, nu0, kappa),
                angular_margin: threshold_margin(q0, nu0, kappa),
            }
        })
        .collect())
}

/// Classifies a whole profile: subcritical iff both branches are
/// subcritical at the origin and at every grid radius.
pub fn classify_profile(profile: &RadialProfile, r_grid: &[f64]) -> Result<Verdict> {
    Ok(verdict_from_table(&branch_table(profile, r_grid)?))
}

/// Verdict of a profile from its [`branch_table`].
pub fn verdict_from_table(table: &[PointBranches]) -> Verdict {
    let worst = |class: VerdictClass| {
        let mut witness = None;
        let mut t_min: Option<f64> = None;
        for row in table {
            for v in [&row.radial, &row.angular] {
                if v.class == class {
                    witness.get_or_insert(row.r);
                    if let Some(t) = v.t_blowup {
                        t_min = Some(t_min.map_or(t, |m| m.min(t)));
                    }
                }
            }
        }
        witness.map(|w| Verdict { class, t_blowup: t_min, witness_r: Some(w), horizon: None })
    };
    worst(VerdictClass::Supercritical)
        .or_else(|| worst(VerdictClass::Boundary))
        .unwrap_or_else(Verdict::subcritical)
}

/// Default horizon for swirl membership: `500 / sqrt(kappa)`.
pub fn default_sigma_horizon(kappa: f64) -> f64 {
    500.0 / kappa.sqrt()
}

/// Numerical membership in the bounded set of the six-variable swirl system,
/// relative to `horizon`.
pub fn sigma_membership(state0: &SwirlState, kappa: f64, horizon: f64, config: &IntegratorConfig) -> Result<Verdict> {
    if !(horizon > 0.0) {
        return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
    }
    let cfg = config.with_horizon(horizon);
    let traj = integrate(OdeSystem::Swirl { kappa }, &state0.to_array(), &cfg)?;
    match traj.termination {
        Termination::HorizonReached => Ok(Verdict { horizon: Some(horizon), ..Verdict::subcritical() }),
        Termination::BlowupDetected { t_est } => Ok(Verdict {
            class: VerdictClass::Supercritical,
            t_blowup: Some(t_est),
            witness_r: None,
            horizon: Some(horizon),
        }),
        Termination::StepUnderflow { t } => Err(Error::StepUnderflow { t, min_step: cfg.min_step }),
    }
}

/// Whether the `(q, nu)` system started at `(-lambda0, h0)` stays bounded up
/// to the configured horizon.
pub fn stays_bounded(lambda0: f64, h0: f64, kappa: f64, config: &IntegratorConfig) -> Result<bool> {
    let traj = integrate(OdeSystem::Qnu { kappa }, &[-lambda0, h0], config)?;
    Ok(traj.termination == Termination::HorizonReached)
}

/// Empirical threshold in `lambda0` for fixed `h0 < 1/2`.
///
/// Searches `[0, 2 sqrt(kappa)]` for the switch of [`stays_bounded`],
/// evaluating three interior probes per round in parallel. Fails if the
/// probes are not monotone (bounded below, unbounded above).
pub fn sharpness_bisect(h0: f64, kappa: f64, horizon: f64, config: &IntegratorConfig) -> Result<f64> {
    if !(h0 < 0.5) {
        return Err(Error::Config(format!("sharpness search needs h0 < 1/2, got {h0}")));
    }
    if !(kappa > 0.0) {
        return Err(Error::Config("kappa must be positive".into()));
    }
    let cfg = config.with_horizon(horizon);
    let (mut lo, mut hi) = (0.0, 2.0 * kappa.sqrt());
    let probe = |l: f64| stays_bounded(l, h0, kappa, &cfg);
    if !probe(lo)? {
        return Err(Error::Bisection(format!("lambda0 = {lo} already blows up before horizon {horizon}")));
    }
    if probe(hi)? {
        return Err(Error::Bisection(format!("lambda0 = {hi} stays bounded up to horizon {horizon}")));
    }
    let resolution = 1e-6 * kappa.sqrt();
    while hi - lo > resolution {
        let points: Vec<f64> = (1..4).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect();
        let bounded = points.par_iter().map(|&l| probe(l)).collect::<Result<Vec<bool>>>()?;
        if bounded.windows(2).any(|w| !w[0] && w[1]) {
            return Err(Error::Bisection(format!("non-monotone predicate on [{lo}, {hi}]: {bounded:?}")));
        }
        let first_unbounded = bounded.iter().position(|b| !b).unwrap_or(3);
        let new_lo = if first_unbounded == 0 { lo } else { points[first_unbounded - 1] };
        let new_hi = if first_unbounded == 3 { hi } else { points[first_unbounded] };
        lo = new_lo;
        hi = new_hi;
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{ProfilePreset, ProfileShape};
    use std::f64::consts::PI;

    /// Bisection on the flow factor over a fine scan; independent of the phase reduction.
    fn first_root_oracle(lambda0: f64, h0: f64, kappa: f64) -> Option<f64> {
        let period = 2.0 * PI / kappa.sqrt();
        let n = 200_000;
        let f = |t| flow_factor(lambda0, h0, kappa, t);
        let mut prev = (0.0, f(0.0));
        for i in 1..=n {
            let t = period * i as f64 / n as f64;
            let v = f(t);
            if v <= 0.0 {
                let (mut a, mut b) = (prev.0, t);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if f(m) > 0.0 {
                        a = m
                    } else {
                        b = m
                    }
                }
                return Some(0.5 * (a + b));
            }
            prev = (t, v);
        }
        None
    }

    #[test]
    fn point_examples() {
        assert_eq!(classify_point(0.0, 0.0, 1.0).class, VerdictClass::Subcritical);
        assert_eq!(classify_point(1.0, 0.0, 1.0).class, VerdictClass::Boundary);
        let v = classify_point(0.0, 0.6, 1.0);
        assert_eq!(v.class, VerdictClass::Supercritical);
        assert!(v.t_blowup.is_some());
        let v = classify_point(0.5, 0.3, 1.0);
        assert_eq!(v.class, VerdictClass::Subcritical);
        assert!(v.t_blowup.is_none());
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(blowup_time_closed_form(0.5, 0.3, 1.0), None);
        let t = blowup_time_closed_form(0.0, 1.0, 1.0).unwrap();
        assert!((t - PI / 2.0).abs() < 1e-14);
        let t = blowup_time_closed_form(-2.0, 0.0, 1.0).unwrap();
        assert!((t - PI / 6.0).abs() < 1e-14);
        let t = blowup_time_closed_form(-1.2, 0.0, 1.0).unwrap();
        assert!((t - (1.0f64 / 1.2).asin()).abs() < 1e-14);
        assert!((t - 0.9851).abs() < 1e-4);
    }

    #[test]
    fn closed_form_matches_scan_oracle() {
        let cases = [
            (-2.0, 0.0, 1.0),
            (0.0, 1.0, 1.0),
            (1.5, 0.0, 1.0),
            (0.3, 0.8, 2.0),
            (-0.2, 1.7, 0.5),
            (3.5, -0.5, 4.0),
            (0.0, 0.6, 1.0),
            (-3.0, 1.0, 9.0),
        ];
        for (l, h, k) in cases {
            let exact = blowup_time_closed_form(l, h, k).unwrap();
            let oracle = first_root_oracle(l, h, k).unwrap();
            assert!((exact - oracle).abs() < 1e-9, "({l},{h},{k}): {exact} vs {oracle}");
        }
    }

    #[test]
    fn closed_form_times_lie_in_one_period() {
        for i in 0..40 {
            for j in 0..40 {
                let l = -4.0 + 0.2 * i as f64;
                let h = -1.0 + 0.08 * j as f64;
                for k in [0.5, 1.0, 3.0] {
                    if let Some(t) = blowup_time_closed_form(l, h, k) {
                        assert!(t > 0.0 && t <= 2.0 * PI / k.sqrt() + 1e-12);
                        assert!(threshold_margin(l, h, k) <= 1e-12);
                    } else {
                        assert!(threshold_margin(l, h, k) > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn verdict_symmetric_in_lambda() {
        for i in 0..200 {
            let l = 0.037 * i as f64;
            let h = -0.5 + 0.0071 * i as f64;
            assert_eq!(classify_point(l, h, 1.3).class, classify_point(-l, h, 1.3).class);
        }
    }

    #[test]
    fn profile_examples() {
        let eq = RadialProfile::equilibrium(2, 1.0, 1.0);
        let grid = default_grid(&eq, DEFAULT_GRID_SIZE);
        assert!(classify_profile(&eq, &grid).unwrap().is_subcritical());

        let steep = RadialProfile::new(2, 1.0, 1.0, ProfileShape { c: 1.2, ..ProfileShape::EQUILIBRIUM }).unwrap();
        let v = classify_profile(&steep, &[0.25, 0.5]).unwrap();
        assert_eq!(v.class, VerdictClass::Supercritical);
        assert_eq!(v.witness_r, Some(0.0));
        let v = classify_profile(&steep, &[0.5]).unwrap();
        assert!(v.t_blowup.unwrap() > 0.0);

        let quad = RadialProfile::from_preset(&ProfilePreset::new("quadratic"), 2, 1.0, 2.0).unwrap();
        let grid = default_grid(&quad, DEFAULT_GRID_SIZE);
        assert!(classify_profile(&quad, &grid).unwrap().is_subcritical());
    }

    #[test]
    fn boundary_preset_reports_boundary() {
        let p = RadialProfile::from_preset(&ProfilePreset::new("boundary"), 2, 1.0, 2.0).unwrap();
        let v = classify_profile(&p, &default_grid(&p, DEFAULT_GRID_SIZE)).unwrap();
        assert_eq!(v.class, VerdictClass::Boundary);
        assert_eq!(v.witness_r, Some(0.0));
    }

    #[test]
    fn empty_or_bad_grid_is_domain_error() {
        let eq = RadialProfile::equilibrium(2, 1.0, 1.0);
        assert!(matches!(classify_profile(&eq, &[]), Err(Error::Domain(_))));
        assert!(matches!(classify_profile(&eq, &[0.0]), Err(Error::Domain(_))));
        assert!(matches!(classify_profile(&eq, &[1.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn sigma_membership_examples() {
        let cfg = IntegratorConfig::default();
        let v = sigma_membership(&SwirlState::default(), 1.0, 50.0, &cfg).unwrap();
        assert!(v.is_subcritical());
        assert_eq!(v.horizon, Some(50.0));

        let s = SwirlState { q: -1.2, ..Default::default() };
        let v = sigma_membership(&s, 1.0, 50.0, &cfg).unwrap();
        assert_eq!(v.class, VerdictClass::Supercritical);
        let exact = blowup_time_closed_form(-1.2, 0.0, 1.0).unwrap();
        assert!((v.t_blowup.unwrap() - exact).abs() < 1e-4);
    }

    #[test]
    fn sharpness_rejects_bad_inputs() {
        let cfg = IntegratorConfig::default();
        assert!(matches!(sharpness_bisect(0.5, 1.0, 200.0, &cfg), Err(Error::Config(_))));
        // Horizon too short for the bracket end to blow up.
        assert!(matches!(sharpness_bisect(0.0, 1.0, 0.1, &cfg), Err(Error::Bisection(_))));
    }
}
