//! Run configuration: one TOML file plus `--set key.path=value` overrides.

use std::collections::BTreeMap;
use std::path::Path;

use ema_core::lagrange::Seeding;
use ema_core::profiles::{ProfilePreset, RadialProfile};
use ema_core::sweep::{Axis, SweepMode, SweepSpec};
use ema_core::IntegratorConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub profile: ProfileSection,
    pub integrator: IntegratorConfig,
    pub simulate: SimulateSection,
    pub classify: ClassifySection,
    pub sweep: SweepSection,
    pub validate: ValidateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    pub preset: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub n: usize,
    pub kappa: f64,
    pub r_max: f64,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection { preset: None, params: BTreeMap::new(), n: 2, kappa: 1.0, r_max: 2.0 }
    }
}

impl ProfileSection {
    pub fn build(&self) -> Result<RadialProfile, CliError> {
        let name = self.preset.as_deref().ok_or_else(|| CliError::Config("profile.preset is required".into()))?;
        let preset = ProfilePreset { name: name.to_string(), params: self.params.clone() };
        Ok(RadialProfile::from_preset(&preset, self.n, self.kappa, self.r_max)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub t_end: f64,
    /// Characteristics besides the origin, log-spaced.
    pub n_chars: usize,
    pub grid_points: usize,
    /// Equally spaced snapshot times including `0` and `t_end`.
    pub snapshots: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { t_end: 2.0, n_chars: 1024, grid_points: 201, snapshots: 11 }
    }
}

impl SimulateSection {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(CliError::Config(format!("simulate.t_end must be positive, got {}", self.t_end)));
        }
        if self.n_chars < 1 || self.grid_points < 2 || self.snapshots < 2 {
            return Err(CliError::Config("simulate needs n_chars >= 1, grid_points >= 2, snapshots >= 2".into()));
        }
        Ok(())
    }

    pub fn ensemble(&self) -> ema_core::lagrange::EnsembleConfig {
        let m = self.snapshots - 1;
        ema_core::lagrange::EnsembleConfig {
            seeding: Seeding::LogSpaced { count: self.n_chars },
            t_end: self.t_end,
            output_times: (1..m).map(|i| self.t_end * i as f64 / m as f64).collect(),
            grid_points: self.grid_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySection {
    pub grid_size: usize,
}

impl Default for ClassifySection {
    fn default() -> Self {
        ClassifySection { grid_size: ema_core::threshold::DEFAULT_GRID_SIZE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mode: SweepMode,
    pub kappa: f64,
    pub horizon: Option<f64>,
    pub lambda0: Axis,
    pub h0: Axis,
    pub theta_r: Axis,
    pub theta_over_r: Axis,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            mode: SweepMode::PointwiseThreshold,
            kappa: 1.0,
            horizon: None,
            lambda0: Axis { min: -2.0, max: 2.0, count: 41 },
            h0: Axis { min: -1.0, max: 0.45, count: 41 },
            theta_r: Axis::fixed(0.0),
            theta_over_r: Axis::fixed(0.0),
        }
    }
}

impl SweepSection {
    pub fn spec(&self, integrator: IntegratorConfig) -> SweepSpec {
        SweepSpec {
            mode: self.mode,
            kappa: self.kappa,
            lambda0: self.lambda0,
            h0: self.h0,
            theta_r: self.theta_r,
            theta_over_r: self.theta_over_r,
            horizon: self.horizon,
            integrator,
        }
    }
}

pub const SUITES: [&str; 10] = [
    "sharpness",
    "closed_form",
    "ellipse",
    "swirl",
    "euler_poisson",
    "equivalence",
    "energy",
    "path",
    "dimension",
    "phase_diagram",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub suites: Vec<String>,
    /// Multiplies every sample count.
    pub scale: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection { suites: SUITES.iter().map(|s| s.to_string()).collect(), scale: 1.0 }
    }
}

impl ValidateSection {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.suites.is_empty() {
            return Err(CliError::Config("validate.suites is empty; nothing to validate".into()));
        }
        if let Some(s) = self.suites.iter().find(|s| !SUITES.contains(&s.as_str())) {
            return Err(CliError::Config(format!("unknown suite '{s}'; expected one of {}", SUITES.join(", "))));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(CliError::Config(format!("validate.scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }
}

/// Parses the right-hand side of `--set` as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key.path=value, got '{assignment}'")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("malformed key path '{path}'")));
    }
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut node = table;
    for key in parents {
        let entry = node.entry(key.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("'{key}' in '{path}' is not a section")))?;
    }
    node.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            text.parse::<Table>().map_err(|e| CliError::Config(format!("{}: {}", p.display(), e.message())))?
        }
        None => Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let mut config: RunConfig =
        Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
    if let Some(s) = seed {
        config.seed = s;
    }
    config.integrator.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_nested_keys() {
        let mut t = Table::new();
        apply_override(&mut t, "profile.params.d=-1.5").unwrap();
        apply_override(&mut t, "profile.preset=bump").unwrap();
        apply_override(&mut t, "validate.suites=[\"energy\"]").unwrap();
        let cfg: RunConfig = Value::Table(t).try_into().unwrap();
        assert_eq!(cfg.profile.preset.as_deref(), Some("bump"));
        assert_eq!(cfg.profile.params["d"], -1.5);
        assert_eq!(cfg.validate.suites, vec!["energy"]);
    }

    #[test]
    fn malformed_overrides_fail() {
        let mut t = Table::new();
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "a..b=1").is_err());
        apply_override(&mut t, "seed=3").unwrap();
        assert!(apply_override(&mut t, "seed.x=1").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut t = Table::new();
        apply_override(&mut t, "simulate.tend=1").unwrap();
        assert!(Value::Table(t).try_into::<RunConfig>().is_err());
    }

    #[test]
    fn default_snapshot_times() {
        let e = SimulateSection { t_end: 1.0, snapshots: 5, ..Default::default() }.ensemble();
        assert_eq!(e.output_times, vec![0.25, 0.5, 0.75]);
    }
}
