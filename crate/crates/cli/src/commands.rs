use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ema_core::lagrange::{advance_ensemble, bkm_monitor, gradient_bound_check, EnsembleRun, EnsembleTermination};
use ema_core::sweep::{run_sweep, sweep_csv};
use ema_core::threshold::{branch_table, classify_profile, default_grid, verdict_from_table, PointBranches};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

/// Exit status of a finished command.
pub const EXIT_OK: i32 = 0;
pub const EXIT_SINGULAR: i32 = 2;
pub const EXIT_VALIDATION_FAILED: i32 = 3;

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serialises");
    s.push('\n');
    s
}

pub fn snapshots_csv(run: &EnsembleRun) -> String {
    let mut out = String::from("t,r,rho,u,p,q,mu,nu\n");
    for s in run.regular_snapshots() {
        for i in 0..s.grid.len() {
            writeln!(out, "{},{},{},{},{},{},{},{}", s.t, s.grid[i], s.rho[i], s.u[i], s.p[i], s.q[i], s.mu[i], s.nu[i])
                .expect("writing to a String");
        }
    }
    out
}

#[derive(Debug, Serialize)]
pub struct Diagnostics {
    pub termination: &'static str,
    /// Detected singular time; absent when the run completed.
    pub t_blowup: Option<f64>,
    /// Earliest closed-form blowup time over the initial profile.
    pub t_blowup_closed_form: Option<f64>,
    pub bkm_integral: f64,
    pub path_invariant_drift: f64,
    pub density_consistency: f64,
    /// `min over regular snapshots of (max |p| - max |q|)`.
    pub gradient_bound_min_margin: f64,
    pub gradient_bound_holds: bool,
    pub snapshots: usize,
    pub accepted_steps: usize,
}

pub fn simulate(config: &RunConfig, out: &Path) -> Result<i32, CliError> {
    config.simulate.validate()?;
    let profile = config.profile.build()?;
    let run = advance_ensemble(&profile, &config.simulate.ensemble(), &config.integrator)?;
    let closed = classify_profile(&profile, &default_grid(&profile, config.classify.grid_size))?;
    let regular: Vec<_> = run.regular_snapshots().cloned().collect();
    let bounds: Vec<_> = regular.iter().map(gradient_bound_check).collect();
    let diagnostics = Diagnostics {
        termination: run.termination.name(),
        t_blowup: run.termination.singular_time(),
        t_blowup_closed_form: closed.t_blowup,
        bkm_integral: bkm_monitor(&regular),
        path_invariant_drift: run.path_invariant_drift,
        density_consistency: run.density_consistency,
        gradient_bound_min_margin: bounds.iter().map(|b| b.margin).fold(f64::INFINITY, f64::min),
        gradient_bound_holds: bounds.iter().all(|b| b.holds),
        snapshots: regular.len(),
        accepted_steps: run.accepted_steps,
    };
    write_file(out, "snapshots.csv", &snapshots_csv(&run))?;
    write_file(out, "diagnostics.json", &to_json(&diagnostics))?;
    Ok(match run.termination {
        EnsembleTermination::Completed => EXIT_OK,
        _ => EXIT_SINGULAR,
    })
}

#[derive(Debug, Serialize)]
pub struct BranchMargin {
    /// `min over grid of kappa (1 - 2 h0) - lambda0^2`.
    pub min_margin: f64,
    pub r_at_min: f64,
}

#[derive(Debug, Serialize)]
pub struct ClassifyReport {
    pub class: &'static str,
    pub witness_r: Option<f64>,
    pub t_blowup: Option<f64>,
    pub radial: BranchMargin,
    pub angular: BranchMargin,
    pub grid_size: usize,
}

fn min_margin(table: &[PointBranches], margin: impl Fn(&PointBranches) -> f64) -> BranchMargin {
    let best = table.iter().min_by(|a, b| margin(a).total_cmp(&margin(b))).expect("table includes the origin");
    BranchMargin { min_margin: margin(best), r_at_min: best.r }
}

pub fn classify(config: &RunConfig, out: &Path) -> Result<i32, CliError> {
    if config.classify.grid_size == 0 {
        return Err(CliError::Config("classify.grid_size must be at least 1".into()));
    }
    let profile = config.profile.build()?;
    let table = branch_table(&profile, &default_grid(&profile, config.classify.grid_size))?;
    let verdict = verdict_from_table(&table);
    let report = ClassifyReport {
        class: verdict.class.as_str(),
        witness_r: verdict.witness_r,
        t_blowup: verdict.t_blowup,
        radial: min_margin(&table, |b| b.radial_margin),
        angular: min_margin(&table, |b| b.angular_margin),
        grid_size: config.classify.grid_size,
    };
    let json = to_json(&report);
    print!("{json}");
    write_file(out, "classify.json", &json)?;
    Ok(EXIT_OK)
}

pub fn sweep(config: &RunConfig, out: &Path) -> Result<i32, CliError> {
    let spec = config.sweep.spec(config.integrator);
    let rows = run_sweep(&spec)?;
    write_file(out, "sweep.csv", &sweep_csv(spec.mode, &rows))?;
    Ok(EXIT_OK)
}
