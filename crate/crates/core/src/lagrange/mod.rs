//! Radial solver built from an ensemble of characteristics.
//!
//! Each characteristic carries `(r, u, p, q, mu, nu)` together with the log
//! of the density ratio `rho / rho0`. Along a path `r' = u`, `u' = -kappa nu r`,
//! the spectral pairs follow their Riccati systems and
//! `ln(rho)' = -(p + (n - 1) q)`. Characteristics never talk to each other, so
//! the whole ensemble is one large ODE advanced with a shared step.

mod interp;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use interp::Pchip;

use crate::profiles::{derive_density, RadialProfile};
use crate::spectral::{rhs_pmu, rhs_qnu, Integrator, IntegratorConfig, OdeRhs, RunEnd, SpectralState, StepControl, Termination};
use crate::threshold::log_grid;
use crate::{Error, Result};

const VARS: usize = 7;
const R: usize = 0;
const U: usize = 1;
const P: usize = 2;
const Q: usize = 3;
const MU: usize = 4;
const NU: usize = 5;
const ELL: usize = 6;

/// Allowed excess of `max |q|` over `max |p|` on a grid.
pub const TOL_INTERP: f64 = 1e-4;

/// Where the characteristics start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Seeding {
    /// The origin plus `count` log-spaced labels in `[1e-3 r_max, r_max]`.
    LogSpaced { count: usize },
    /// Explicit strictly increasing labels in `[0, r_max]`.
    Nodes { r0: Vec<f64> },
}

impl Seeding {
    pub fn labels(&self, r_max: f64) -> Result<Vec<f64>> {
        let labels = match self {
            Seeding::LogSpaced { count } => {
                std::iter::once(0.0).chain(log_grid(1e-3 * r_max, r_max, *count)).collect::<Vec<_>>()
            }
            Seeding::Nodes { r0 } => r0.clone(),
        };
        if labels.len() < 2 {
            return Err(Error::Config(format!("need at least 2 characteristics, got {}", labels.len())));
        }
        if labels.windows(2).any(|w| !(w[1] > w[0])) || labels[0] < 0.0 || labels[labels.len() - 1] > r_max {
            return Err(Error::Config(format!("characteristic labels must increase strictly inside [0, {r_max}]")));
        }
        Ok(labels)
    }
}

/// Ensemble run parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub seeding: Seeding,
    pub t_end: f64,
    /// Snapshot times in `(0, t_end)`; `0` and `t_end` are always emitted.
    pub output_times: Vec<f64>,
    /// Points of the uniform Eulerian grid on `[0, r_max]`.
    pub grid_points: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { seeding: Seeding::LogSpaced { count: 1024 }, t_end: 1.0, output_times: vec![], grid_points: 201 }
    }
}

impl EnsembleConfig {
    /// `count` equally spaced snapshot times in `(0, t_end)`.
    pub fn with_uniform_outputs(mut self, count: usize) -> Self {
        self.output_times = (1..=count).map(|i| self.t_end * i as f64 / (count + 1) as f64).collect();
        self
    }
}

/// State carried by one characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicState {
    pub r0: f64,
    pub r: f64,
    pub u: f64,
    pub spectral: SpectralState,
    /// `ln(rho / rho0)` integrated from the continuity equation.
    pub log_density: f64,
}

impl CharacteristicState {
    /// Density from the Monge–Ampère relation `(1 - mu)(1 - nu)^{n-1}`.
    pub fn ma_density(&self, dimension: usize) -> f64 {
        self.spectral.density(dimension)
    }

    /// Density `rho0(r0) exp(ln(rho / rho0))` from the continuity equation.
    pub fn continuity_density(&self, rho0: f64) -> f64 {
        rho0 * self.log_density.exp()
    }
}

/// Fields sampled on the fixed radial grid at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerianSnapshot {
    pub t: f64,
    pub grid: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    /// `max over grid of max(|p|, |q|, |mu|, |nu|)`.
    pub bkm_integrand: f64,
    /// Set on the last state recorded at blowup; its fields may be huge.
    pub post_blowup: bool,
    /// Characteristic positions `[hull_lo, hull_hi]` covered by data.
    pub hull: (f64, f64),
    pub characteristics: Vec<CharacteristicState>,
}

/// How an ensemble run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleTermination {
    Completed,
    /// Some spectral state exceeded the blowup magnitude.
    Blowup { t_est: f64 },
    /// Two neighbouring characteristics swapped order after the step ending at `t`.
    Crossing { t: f64 },
    StepUnderflow { t: f64 },
}

impl EnsembleTermination {
    pub fn name(&self) -> &'static str {
        match self {
            EnsembleTermination::Completed => "completed",
            EnsembleTermination::Blowup { .. } => "blowup",
            EnsembleTermination::Crossing { .. } => "crossing",
            EnsembleTermination::StepUnderflow { .. } => "step_underflow",
        }
    }

    /// Time of the detected singularity, if any.
    pub fn singular_time(&self) -> Option<f64> {
        match *self {
            EnsembleTermination::Blowup { t_est } => Some(t_est),
            EnsembleTermination::Crossing { t } => Some(t),
            _ => None,
        }
    }
}

/// Everything an ensemble run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRun {
    pub snapshots: Vec<EulerianSnapshot>,
    pub termination: EnsembleTermination,
    /// Max over steps and characteristics of `|r (1 - nu) - r0 (1 - nu0)| / max(1, r0)`.
    pub path_invariant_drift: f64,
    /// Max over steps and characteristics of the Monge–Ampère vs continuity density
    /// mismatch, relative to `max(1, rho)`.
    pub density_consistency: f64,
    pub accepted_steps: usize,
}

impl EnsembleRun {
    /// Snapshots taken from regular (pre-blowup) states.
    pub fn regular_snapshots(&self) -> impl Iterator<Item = &EulerianSnapshot> {
        self.snapshots.iter().filter(|s| !s.post_blowup)
    }
}

struct EnsembleRhs {
    kappa: f64,
    dimension: usize,
    count: usize,
}

impl OdeRhs for EnsembleRhs {
    fn dim(&self) -> usize {
        self.count * VARS
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        let (kappa, n1) = (self.kappa, self.dimension as f64 - 1.0);
        dy.par_chunks_mut(VARS * 64).zip(y.par_chunks(VARS * 64)).for_each(|(dchunk, ychunk)| {
            for (d, s) in dchunk.chunks_exact_mut(VARS).zip(ychunk.chunks_exact(VARS)) {
                d[R] = s[U];
                d[U] = -kappa * s[NU] * s[R];
                (d[P], d[MU]) = rhs_pmu(s[P], s[MU], kappa);
                (d[Q], d[NU]) = rhs_qnu(s[Q], s[NU], kappa);
                d[ELL] = -(s[P] + n1 * s[Q]);
            }
        });
    }
}

fn initial_state(profile: &RadialProfile, r0: f64) -> [f64; VARS] {
    let (p0, mu0) = (profile.p0(r0), profile.mu0(r0));
    let (q0, nu0) = if r0 == 0.0 { (p0, mu0) } else { (profile.q0(r0), profile.nu0(r0)) };
    [r0, profile.u0(r0), p0, q0, mu0, nu0, 0.0]
}

fn unpack(labels: &[f64], y: &[f64]) -> Vec<CharacteristicState> {
    labels
        .iter()
        .zip(y.chunks_exact(VARS))
        .map(|(&r0, s)| CharacteristicState {
            r0,
            r: s[R],
            u: s[U],
            spectral: SpectralState { p: s[P], q: s[Q], mu: s[MU], nu: s[NU] },
            log_density: s[ELL],
        })
        .collect()
}

fn first_crossing(y: &[f64]) -> Option<usize> {
    let count = y.len() / VARS;
    (1..count).find(|&i| !(y[i * VARS + R] > y[(i - 1) * VARS + R]))
}

/// Samples the characteristic fields on `grid` by monotone interpolation in `r`.
pub fn reconstruct(
    profile: &RadialProfile,
    t: f64,
    grid: &[f64],
    characteristics: Vec<CharacteristicState>,
    post_blowup: bool,
) -> Result<EulerianSnapshot> {
    let n = profile.dimension();
    let r: Vec<f64> = characteristics.iter().map(|c| c.r).collect();
    let field = |f: &dyn Fn(&CharacteristicState) -> f64| -> Result<Vec<f64>> {
        let values: Vec<f64> = characteristics.iter().map(f).collect();
        let interp = Pchip::new(&r, &values)?;
        Ok(grid.iter().map(|&x| interp.eval(x)).collect())
    };
    let rho = field(&|c| c.ma_density(n))?;
    let u = field(&|c| c.u)?;
    let p = field(&|c| c.spectral.p)?;
    let q = field(&|c| c.spectral.q)?;
    let mu = field(&|c| c.spectral.mu)?;
    let nu = field(&|c| c.spectral.nu)?;
    let bkm_integrand = (0..grid.len())
        .map(|i| p[i].abs().max(q[i].abs()).max(mu[i].abs()).max(nu[i].abs()))
        .fold(0.0, f64::max);
    Ok(EulerianSnapshot {
        t,
        grid: grid.to_vec(),
        rho,
        u,
        p,
        q,
        mu,
        nu,
        bkm_integrand,
        post_blowup,
        hull: (r[0], r[r.len() - 1]),
        characteristics,
    })
}

/// Uniform grid of `points` radii on `[0, r_max]`.
pub fn uniform_grid(r_max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..points).map(|i| r_max * i as f64 / (points - 1) as f64).collect(),
    }
}

/// Integrates the characteristic ensemble up to `ensemble.t_end`.
///
/// Stops early on spectral blowup, on a crossing of neighbouring
/// characteristics, or on step underflow; the state at the stop is appended
/// as a snapshot flagged `post_blowup` unless it is a crossing.
pub fn advance_ensemble(profile: &RadialProfile, ensemble: &EnsembleConfig, config: &IntegratorConfig) -> Result<EnsembleRun> {
    if !(ensemble.t_end > 0.0 && ensemble.t_end.is_finite()) {
        return Err(Error::Config(format!("t_end must be positive, got {}", ensemble.t_end)));
    }
    if ensemble.grid_points < 2 {
        return Err(Error::Config("grid_points must be at least 2".into()));
    }
    if let Some(t) = ensemble.output_times.iter().find(|&&t| !(t >= 0.0 && t <= ensemble.t_end)) {
        return Err(Error::Config(format!("output time {t} outside [0, {}]", ensemble.t_end)));
    }
    let labels = ensemble.seeding.labels(profile.r_max())?;
    let integrator = Integrator::new(config.with_horizon(ensemble.t_end))?;
    let grid = uniform_grid(profile.r_max(), ensemble.grid_points);
    let dimension = profile.dimension();

    let y0: Vec<f64> = labels.iter().flat_map(|&r0| initial_state(profile, r0)).collect();
    let rho0: Vec<f64> = labels.iter().map(|&r0| derive_density(profile, r0)).collect::<Result<_>>()?;
    let path0: Vec<f64> = labels.iter().map(|&r0| r0 * (1.0 - initial_state(profile, r0)[NU])).collect();

    let mut outputs: Vec<f64> = ensemble.output_times.iter().copied().filter(|&t| t > 0.0 && t < ensemble.t_end).collect();
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();
    outputs.push(ensemble.t_end);

    let mut snapshots = vec![reconstruct(profile, 0.0, &grid, unpack(&labels, &y0), false)?];
    let mut path_drift: f64 = 0.0;
    let mut density_mismatch: f64 = 0.0;
    let mut steps = 0usize;
    let mut next_output = 0usize;
    let mut last = (0.0, y0.clone());
    let mut crossing = None;
    let mut failure = None;

    let rhs = EnsembleRhs { kappa: profile.kappa(), dimension, count: labels.len() };
    let end = integrator.run(&rhs, &y0, &outputs, |t, y| {
        steps += 1;
        last = (t, y.to_vec());
        if first_crossing(y).is_some() {
            crossing = Some(t);
            return StepControl::Stop;
        }
        for (i, s) in y.chunks_exact(VARS).enumerate() {
            let r0 = labels[i];
            path_drift = path_drift.max((s[R] * (1.0 - s[NU]) - path0[i]).abs() / r0.max(1.0));
            let ma = (1.0 - s[MU]) * (1.0 - s[NU]).powi(dimension as i32 - 1);
            let cont = rho0[i] * s[ELL].exp();
            density_mismatch = density_mismatch.max((ma - cont).abs() / cont.abs().max(1.0));
        }
        if next_output < outputs.len() && t == outputs[next_output] {
            next_output += 1;
            match reconstruct(profile, t, &grid, unpack(&labels, y), false) {
                Ok(s) => snapshots.push(s),
                Err(e) => {
                    failure = Some(e);
                    return StepControl::Stop;
                }
            }
        }
        StepControl::Continue
    });
    if let Some(e) = failure {
        return Err(e);
    }

    let termination = match end {
        RunEnd::Finished(Termination::HorizonReached) => EnsembleTermination::Completed,
        RunEnd::Finished(Termination::BlowupDetected { t_est }) => EnsembleTermination::Blowup { t_est },
        RunEnd::Finished(Termination::StepUnderflow { t }) => EnsembleTermination::StepUnderflow { t },
        RunEnd::Interrupted { t } => EnsembleTermination::Crossing { t: crossing.unwrap_or(t) },
    };
    if matches!(termination, EnsembleTermination::Blowup { .. } | EnsembleTermination::StepUnderflow { .. })
        && last.0 > snapshots.last().map_or(0.0, |s| s.t)
    {
        if let Ok(s) = reconstruct(profile, last.0, &grid, unpack(&labels, &last.1), true) {
            snapshots.push(s);
        }
    }

    Ok(EnsembleRun {
        snapshots,
        termination,
        path_invariant_drift: path_drift,
        density_consistency: density_mismatch,
        accepted_steps: steps,
    })
}

/// Trapezoidal `int ||U(., t)||_inf dt` over the snapshot sequence.
pub fn bkm_monitor(snapshots: &[EulerianSnapshot]) -> f64 {
    snapshots.windows(2).map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].bkm_integrand + w[1].bkm_integrand)).sum()
}

/// Outcome of [`gradient_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientBound {
    pub holds: bool,
    /// `max |p| - max |q|` over the grid.
    pub margin: f64,
}

/// Checks `max |u/r| <= max |du/dr| + TOL_INTERP` on the snapshot grid.
pub fn gradient_bound_check(snapshot: &EulerianSnapshot) -> GradientBound {
    let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let margin = max_abs(&snapshot.p) - max_abs(&snapshot.q);
    GradientBound { holds: margin >= -TOL_INTERP, margin }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow;
    use crate::profiles::ProfilePreset;

    fn small(t_end: f64) -> EnsembleConfig {
        EnsembleConfig { seeding: Seeding::LogSpaced { count: 128 }, t_end, output_times: vec![], grid_points: 41 }
    }

    #[test]
    fn equilibrium_is_stationary() {
        let eq = RadialProfile::equilibrium(2, 1.0, 1.0);
        let run = advance_ensemble(&eq, &small(2.0).with_uniform_outputs(3), &IntegratorConfig::default()).unwrap();
        assert_eq!(run.termination, EnsembleTermination::Completed);
        assert_eq!(run.snapshots.len(), 5);
        let first = &run.snapshots[0];
        for s in &run.snapshots {
            assert_eq!(s.rho, first.rho);
            assert_eq!(s.u, first.u);
            assert!(s.rho.iter().all(|&v| v == 1.0));
            assert_eq!(s.bkm_integrand, 0.0);
        }
        assert_eq!(bkm_monitor(&run.snapshots), 0.0);
        let g = gradient_bound_check(first);
        assert!(g.holds && g.margin == 0.0);
    }

    #[test]
    fn positions_follow_closed_form() {
        let p = RadialProfile::from_preset(&ProfilePreset::new("bump"), 2, 1.0, 2.0).unwrap();
        let run = advance_ensemble(&p, &small(1.0), &IntegratorConfig::default()).unwrap();
        let last = run.snapshots.last().unwrap();
        assert_eq!(last.t, 1.0);
        for c in &last.characteristics {
            let exact = flow::flow_radius(&p, c.r0, 1.0).unwrap();
            assert!((c.r - exact).abs() < 1e-8, "r0={}: {} vs {exact}", c.r0, c.r);
        }
        assert!(run.path_invariant_drift < 1e-8);
        assert!(run.density_consistency < 1e-6);
        assert!(gradient_bound_check(last).holds);
    }

    #[test]
    fn collapse_stops_with_blowup() {
        let p = RadialProfile::from_preset(&ProfilePreset::new("collapse"), 2, 1.0, 2.0).unwrap();
        let run = advance_ensemble(&p, &small(3.0), &IntegratorConfig::default()).unwrap();
        let tc = crate::threshold::blowup_time_closed_form(p.p0(0.0), p.mu0(0.0), 1.0).unwrap();
        let t = run.termination.singular_time().expect("singularity detected");
        assert!((t - tc).abs() < 1e-2, "{t} vs {tc}");
        assert!(run.snapshots.last().unwrap().post_blowup);
    }

    #[test]
    fn synthetic_violation_fails_gradient_check() {
        let eq = RadialProfile::equilibrium(2, 1.0, 1.0);
        let mut snap = advance_ensemble(&eq, &small(0.5), &IntegratorConfig::default()).unwrap().snapshots.remove(0);
        snap.q[3] = 0.5;
        let g = gradient_bound_check(&snap);
        assert!(!g.holds);
        assert!((g.margin + 0.5).abs() < 1e-15);
    }

    #[test]
    fn bkm_trapezoid_bound() {
        let p = RadialProfile::from_preset(&ProfilePreset::new("bump"), 2, 1.0, 2.0).unwrap();
        let run = advance_ensemble(&p, &small(10.0).with_uniform_outputs(19), &IntegratorConfig::default()).unwrap();
        let total = bkm_monitor(&run.snapshots);
        let peak = run.snapshots.iter().map(|s| s.bkm_integrand).fold(0.0, f64::max);
        assert!(total.is_finite() && total > 0.0 && total <= 10.0 * peak);
    }

    #[test]
    fn config_errors() {
        let eq = RadialProfile::equilibrium(2, 1.0, 1.0);
        let cfg = IntegratorConfig::default();
        let one = EnsembleConfig { seeding: Seeding::Nodes { r0: vec![0.5] }, ..small(1.0) };
        assert!(matches!(advance_ensemble(&eq, &one, &cfg), Err(Error::Config(_))));
        let unordered = EnsembleConfig { seeding: Seeding::Nodes { r0: vec![0.5, 0.2] }, ..small(1.0) };
        assert!(advance_ensemble(&eq, &unordered, &cfg).is_err());
        assert!(advance_ensemble(&eq, &small(0.0), &cfg).is_err());
        let late = EnsembleConfig { output_times: vec![2.0], ..small(1.0) };
        assert!(advance_ensemble(&eq, &late, &cfg).is_err());
    }
}
