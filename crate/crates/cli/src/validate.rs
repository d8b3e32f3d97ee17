//! Self-check suites behind `ema validate`.
//!
//! Every suite draws its random samples from its own ChaCha8 stream seeded by
//! `seed + suite index`, evaluates in parallel and reduces in sample order, so
//! the report is byte-identical for a given configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ema_core::flow;
use ema_core::lagrange::{advance_ensemble, EnsembleConfig, EnsembleRun, EnsembleTermination, Seeding};
use ema_core::profiles::{ProfilePreset, RadialProfile};
use ema_core::spectral::{integrate, integrate_ep, monitor_ellipse, monitor_swirl_invariants, OdeSystem, Termination};
use ema_core::sweep::{run_sweep, sweep_csv, Axis, SweepSpec};
use ema_core::threshold::{
    blowup_time_closed_form, classify_point, classify_profile, default_grid, sharpness_bisect, threshold_margin,
    VerdictClass, DEFAULT_GRID_SIZE, TOL_BOUNDARY,
};
use ema_core::IntegratorConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, SUITES};
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub samples: usize,
    /// Worst measured values, keyed by quantity.
    pub metrics: BTreeMap<&'static str, f64>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub seed: u64,
    pub scale: f64,
    pub suites: Vec<SuiteReport>,
}

struct Ctx {
    seed: u64,
    scale: f64,
    integrator: IntegratorConfig,
}

impl Ctx {
    fn count(&self, base: usize) -> usize {
        ((base as f64 * self.scale).round() as usize).max(1)
    }

    fn rng(&self, suite: &str) -> ChaCha8Rng {
        let index = SUITES.iter().position(|s| *s == suite).expect("known suite") as u64;
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(index))
    }
}

#[derive(Default)]
struct Tally {
    samples: usize,
    metrics: BTreeMap<&'static str, f64>,
    failures: Vec<String>,
}

impl Tally {
    fn worst(&mut self, key: &'static str, value: f64) {
        let slot = self.metrics.entry(key).or_insert(f64::NEG_INFINITY);
        // NaN must surface, not vanish in max.
        *slot = if value.is_nan() || slot.is_nan() { f64::NAN } else { slot.max(value) };
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn finish(self, name: &'static str) -> SuiteReport {
        SuiteReport { name, passed: self.failures.is_empty(), samples: self.samples, metrics: self.metrics, failures: self.failures }
    }
}

pub fn run(config: &RunConfig) -> Result<ValidationReport, CliError> {
    config.validate.validate()?;
    let ctx = Ctx { seed: config.seed, scale: config.validate.scale, integrator: config.integrator };
    let mut selected: Vec<&str> = SUITES.iter().copied().filter(|s| config.validate.suites.iter().any(|x| x == s)).collect();
    selected.dedup();
    let suites = selected
        .par_iter()
        .map(|&name| run_suite(name, &ctx))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(ValidationReport { passed: suites.iter().all(|s| s.passed), seed: ctx.seed, scale: ctx.scale, suites })
}

fn run_suite(name: &str, ctx: &Ctx) -> Result<SuiteReport, CliError> {
    match name {
        "sharpness" => sharpness(ctx),
        "closed_form" => closed_form(ctx),
        "ellipse" => ellipse(ctx),
        "swirl" => swirl(ctx),
        "euler_poisson" => euler_poisson(ctx),
        "equivalence" => equivalence(ctx),
        "energy" => energy(ctx),
        "path" => path(ctx),
        "dimension" => dimension(ctx),
        "phase_diagram" => phase_diagram(ctx),
        other => Err(CliError::Config(format!("unknown suite '{other}'"))),
    }
}

fn sharpness(ctx: &Ctx) -> Result<SuiteReport, CliError> {
    let cases: Vec<(f64, f64)> =
        [1.0, 4.0].iter().flat_map(|&k| [-0.5, 0.0, 0.25, 0.4].map(move |h| (k, h))).collect();
    let found = cases
        .par_iter()
        .map(|&(k, h)| sharpness_bisect(h, k, 200.0, &ctx.integrator))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Tally { samples: cases.len(), ..Default::default() };
    for (&(k, h), lam) in cases.iter().zip(found) {
        let err = (lam - (k * (1.0 - 2.0 * h)).sqrt()).abs();
        t.worst("boundary_error", err);
        t.check(err <= 1e-3, || format!("kappa={k} h0={h}: boundary {lam} off by {err}"));
    }
    Ok(t.finish("sharpness"))
}

fn closed_form(ctx: &Ctx) -> Result<SuiteReport, CliError> {
    let mut rng = ctx.rng("closed_form");
    let mut points = Vec::new();
    while points.len() < ctx.count(50) {
        let (l, h, k) = (rng.random_range(-4.0..4.0), rng.random_range(-1.0..1.5), rng.random_range(0.25..4.0));
        // The tangential boundary has a double pole; keep clear of it.
        if threshold_margin(l, h, k) < -1e-2 {
            points.push((l, h, k));
        }
    }
    let results = points
        .par_iter()
        .map(|&(l, h, k)| {
            let t_closed = blowup_time_closed_form(l, h, k).expect("supercritical point blows up");
            let traj = integrate(OdeSystem::Qnu { kappa: k }, &[l, h], &ctx.integrator.with_horizon(t_closed + 10.0))?;
            Ok((t_closed, traj.termination))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut t = Tally { samples: points.len(), ..Default::default() };
    for (&(l, h, k), (t_closed, term)) in points.iter().zip(results) {
        match term {
            Termination::BlowupDetected { t_est } => {
                let err = (t_est - t_closed).abs();
                t.worst("time_error", err);
                t.check(err <= 1e-3f64.max(1e-3 * t_closed), || format!("({l}, {h}, {k}): {t_est} vs {t_closed}"));
            }
            other => t.check(false, || format!("({l}, {h}, {k}): expected blowup, got {}", other.name())),
        }
    }
    Ok(t.finish("closed_form"))
}

fn ellipse(ctx: &Ctx) -> Result<SuiteReport, CliError> {
    let mut rng = ctx.rng("ellipse");
    let points: Vec<(f64, f64, f64)> = (0..ctx.count(20))
        .map(|_| {
            let k: f64 = rng.random_range(0.5..3.0);
            let nu0 = rng.random_range(-1.0..0.45);
            (rng.random_range(-0.9..0.9) * (k * (1.0 - 2.0 * nu0)).sqrt(), nu0, k)
        })
        .collect();
    let cfg = IntegratorConfig::default().with_tolerance(1e-10).with_horizon(50.0);
    let drifts = points
        .par_iter()
        .map(|&(q, nu, k)| {
            let traj = integrate(OdeSystem::Qnu { kappa: k }, &[q, nu], &cfg)?;
            Ok((traj.termination, monitor_ellipse(&traj)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut t = Tally { samples: points.len(), ..Default::default() };
    for (&(q, nu, k), (term, d)) in points.iter().zip(drifts) {
        t.worst("ellipse_drift", d);
        t.check(term == Termination::HorizonReached, || format!("({q}, {nu}, {k}): {}", term.name()));
        t.check(d <= 1e-8, || format!("({q}, {nu}, {k}): drift {d}"));
    }
    Ok(t.finish("ellipse"))
}

fn swirl(ctx: &Ctx) -> Result<SuiteReport, CliError> {
    let mut rng = ctx.rng("swirl");
    let states: Vec<[f64; 3]> = (0..ctx.count(20))
        .map(|_| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            [rng.random_range(-1.5..1.5), rng.random_range(-0.8..0.6), sign * rng.random_range(0.2..1.0)]
        })
        .collect();
    let cfg = IntegratorConfig::default().with_tolerance(1e-10).with_horizon(50.0);
    let results = states
        .par_iter()
        .map(|s| {
            let traj = integrate(OdeSystem::SwirlQBranch { kappa: 1.0 }, s, &cfg)?;
            Ok((traj.termination, monitor_swirl_invariants(&traj)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut t = Tally { samples: states.len(), ..Default::default() };
    for (s, (term, drifts)) in states.iter().zip(results) {
        t.check(term == Termination::HorizonReached, || format!("{s:?}: {}", term.name()));
        for (key, d) in drifts {
            t.worst(if key == "theta_v2" { "theta_v2_drift" } else { "swirl_energy_drift" }, d);
            t.check(d <= 1e-8, || format!("{s:?}: {key} drift {d}"));
        }
    }
    Ok(t.finish("swirl"))
}

fn euler_poisson(ctx: &Ctx) -> Result<SuiteReport, CliError> {
    let mut rng = ctx.rng("euler_poisson");
    let mut points = Vec::new();
    for n in [2usize, 3] {
        for _ in 0..ctx.count(100) {
            points.push((n, rng.random_range(-5.0..=5.0), rng.random_range(-2.0..1.0 / n as f64)));
        }
    }
    // Regularised time runs far past the physical horizon on wide excursions.
    let cfg = ctx.integrator.with_horizon(1e7);
    let outcomes = points
        .par_iter()
        .map(|&(n, q, nu)| integrate_ep(q, nu, 1.0, n, 100.0, &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Tally { samples: points.len(), ..Default::default() };
    let mut blowups = 0.0;
    for (&(n, q, nu), out) in points.iter().zip(outcomes) {
        t.worst("energy_drift", out.energy_drift);
        if !out.reached_horizon {
            blowups += 1.0;
            t.check(false, || format!("n={n} q0={q} nu0={nu}: {} at t={}", out.termination.name(), out.t_reached));
        }
    }
    t.metrics.insert("blowups", blowups);
    Ok(t.finish("euler_poisson"))
}

fn subcritical_presets() -> Result<Vec<RadialProfile>, CliError> {
    Ok(vec![
        RadialProfile::from_preset(&ProfilePreset::new("bump"), 2, 1.0, 2.0)?,
        RadialProfile::from_preset(&ProfilePreset::new("bump"), 3, 1.0, 2.0)?,
    ])
}

fn equivalence_times(profile: &RadialProfile) -> [f64; 3] {
    [0.5, 1.0, 2.0 * PI / profile.kappa().sqrt()]
}

fn ensemble_run(profile: &RadialProfile, ctx: &Ctx) -> Result<EnsembleRun, CliError> {
    let times = equivalence_times(profile);
    let ens = EnsembleConfig {
        seeding: Seeding::LogSpaced { count: ctx.count(1024).max(2) },
        t_end: times[2],
        output_times: times[..2].to_vec(),
        grid_points: 201,
    };
    Ok(advance_ensemble(profile, &ens, &ctx.integrator)?)
}

fn equivalence(ctx: &Ctx) -> Result<SuiteReport, CliError> {
    let presets = subcritical_presets()?;
    let runs = presets.par_iter().map(|p| ensemble_run(p, ctx)).collect::<Result<Vec<_>, _>>()?;
    let mut t = Tally::default();
    for (profile, run) in presets.iter().zip(&runs) {
        let n = profile.dimension();
        t.check(run.termination == EnsembleTermination::Completed, || format!("n={n}: {}", run.termination.name()));
        for snap in run.snapshots.iter().filter(|s| s.t > 0.0) {
            let mut worst: f64 = 0.0;
            for (i, &r) in snap.grid.iter().enumerate() {
                if r >= snap.hull.0 && r <= snap.hull.1 {
                    worst = worst.max((flow::density_at(profile, r, snap.t)? - snap.rho[i]).abs());
                    t.samples += 1;
                }
            }
            t.worst("density_error", worst);
            t.check(worst <= 1e-4, || format!("n={n} t={}: density error {worst}", snap.t));
        }
    }
    Ok(t.finish("equivalence"))
}

fn energy(ctx: &Ctx) -> Result<SuiteReport, CliError> {
    let presets = subcritical_presets()?;
    let mut t = Tally::default();
    for profile in &presets {
        let n = profile.dimension();
        let (nodes, weights) = flow::energy_rule(profile, flow::DEFAULT_ENERGY_NODES);
        let e0 = flow::conserved_energy(profile, &nodes, &weights, 0.0, 1.0)?;
        let times = [0.5, 1.0, 2.0, 3.0];
        for &time in &times {
            let e = flow::conserved_energy(profile, &nodes, &weights, time, 1.0)?;
            let rel = (e - e0).abs() / e0.abs();
            t.worst("closed_form_drift", rel);
            t.check(rel <= 1e-10, || format!("n={n} t={time}: closed-form drift {rel}"));
        }
        let ens = EnsembleConfig {
            seeding: Seeding::Nodes { r0: nodes.clone() },
            t_end: times[3],
            output_times: times[..3].to_vec(),
            grid_points: 41,
        };
        let run = advance_ensemble(profile, &ens, &ctx.integrator)?;
        t.check(run.termination == EnsembleTermination::Completed, || format!("n={n}: {}", run.termination.name()));
        for snap in run.snapshots.iter().filter(|s| s.t > 0.0) {
            let states: Vec<_> = snap.characteristics.iter().map(|c| (c.r0, c.u, c.spectral.nu * c.r)).collect();
            let e = flow::energy_from_states(profile, &weights, &states, 1.0)?;
            let rel = (e - e0).abs() / e0.abs();
            t.samples += 1;
            t.worst("lagrangian_drift", rel);
            t.check(rel <= 1e-6, || format!("n={n} t={}: lagrangian drift {rel}", snap.t));
        }
    }
    Ok(t.finish("energy"))
}

fn path(ctx: &Ctx) -> Result<SuiteReport, CliError> {
    let presets = subcritical_presets()?;
    let runs = presets.par_iter().map(|p| ensemble_run(p, ctx)).collect::<Result<Vec<_>, _>>()?;
    let mut t = Tally::default();
    for (profile, run) in presets.iter().zip(&runs) {
        let n = profile.dimension();
        t.samples += run.snapshots.first().map_or(0, |s| s.characteristics.len());
        t.worst("path_invariant_drift", run.path_invariant_drift);
        t.worst("density_consistency", run.density_consistency);
        t.check(run.path_invariant_drift <= 1e-8, || format!("n={n}: r(1-nu) drift {}", run.path_invariant_drift));
        t.check(run.density_consistency <= 1e-6, || format!("n={n}: density mismatch {}", run.density_consistency));
    }
    Ok(t.finish("path"))
}

/// Ten presets covering all three verdict classes.
pub fn dimension_presets() -> Vec<ProfilePreset> {
    vec![
        ProfilePreset::new("equilibrium"),
        ProfilePreset::new("quadratic"),
        ProfilePreset::new("quadratic").with("c", -1.2),
        ProfilePreset::new("bump"),
        ProfilePreset::new("bump").with("d", -1.1),
        ProfilePreset::new("bump").with("c", 0.3).with("a", -0.2),
        ProfilePreset::new("collapse"),
        ProfilePreset::new("collapse").with("d", -0.9),
        ProfilePreset::new("boundary"),
        ProfilePreset::new("boundary").with("a", 0.2),
    ]
}

fn dimension(_ctx: &Ctx) -> Result<SuiteReport, CliError> {
    let presets = dimension_presets();
    let mut t = Tally { samples: presets.len(), ..Default::default() };
    let mut mismatches = 0.0;
    for preset in &presets {
        let p2 = RadialProfile::from_preset(preset, 2, 1.0, 2.0)?;
        let p3 = p2.with_dimension(3)?;
        let grid = default_grid(&p2, DEFAULT_GRID_SIZE);
        let (v2, v3) = (classify_profile(&p2, &grid)?, classify_profile(&p3, &grid)?);
        if v2 != v3 {
            mismatches += 1.0;
            t.check(false, || format!("{}: {v2:?} vs {v3:?}", preset.name));
        }
    }
    t.metrics.insert("mismatches", mismatches);
    Ok(t.finish("dimension"))
}

/// Analytic class at a node, with both strict classes admitted inside the boundary band.
pub fn node_agrees(lambda0: f64, h0: f64, kappa: f64, class: VerdictClass) -> bool {
    let margin = threshold_margin(lambda0, h0, kappa);
    if margin.abs() <= TOL_BOUNDARY * kappa.max(1.0) {
        return true;
    }
    class == if margin > 0.0 { VerdictClass::Subcritical } else { VerdictClass::Supercritical }
}

fn phase_diagram(_ctx: &Ctx) -> Result<SuiteReport, CliError> {
    let spec = SweepSpec::pointwise(1.0, Axis { min: -2.0, max: 2.0, count: 41 }, Axis { min: -1.0, max: 0.45, count: 41 });
    let sweep_with = |threads: usize| -> Result<String, CliError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        let rows = pool.install(|| run_sweep(&spec))?;
        Ok(sweep_csv(spec.mode, &rows))
    };
    let rows = run_sweep(&spec)?;
    let mut t = Tally { samples: rows.len(), ..Default::default() };
    let mut wrong = 0.0;
    for row in &rows {
        let expected = classify_point(row.lambda0, row.h0, spec.kappa);
        if !node_agrees(row.lambda0, row.h0, spec.kappa, row.verdict.class) || expected != row.verdict {
            wrong += 1.0;
            t.check(false, || format!("({}, {}): {}", row.lambda0, row.h0, row.verdict.class.as_str()));
        }
    }
    t.metrics.insert("wrong_nodes", wrong);
    let identical = sweep_with(1)? == sweep_with(8)?;
    t.metrics.insert("thread_invariant", if identical { 1.0 } else { 0.0 });
    t.check(identical, || "sweep CSV differs between 1 and 8 threads".into());
    Ok(t.finish("phase_diagram"))
}
