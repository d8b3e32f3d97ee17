//! Phase-diagram sweeps over initial spectral data.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spectral::{IntegratorConfig, SwirlState};
use crate::threshold::{classify_point, default_sigma_horizon, sigma_membership, Verdict};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Closed-form threshold test on `(lambda0, h0)`.
    PointwiseThreshold,
    /// Numerical bounded-set membership of the swirl system.
    SwirlSigma,
}

impl SweepMode {
    pub fn columns(&self) -> &'static [&'static str] {
        match self {
            SweepMode::PointwiseThreshold => &["lambda0", "h0", "verdict", "t_blowup"],
            SweepMode::SwirlSigma => &["lambda0", "h0", "theta_r", "theta_over_r", "verdict", "t_blowup"],
        }
    }
}

/// Closed parameter range sampled at `count` equally spaced nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn fixed(value: f64) -> Self {
        Axis { min: value, max: value, count: 1 }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config(format!("{name}.count must be at least 1")));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::Config(format!("{name} range [{}, {}] is empty or not finite", self.min, self.max)));
        }
        Ok(())
    }

    /// Node `i`: `min + i (max - min) / (count - 1)`; the last node is exactly `max`.
    pub fn node(&self, i: usize) -> f64 {
        if self.count == 1 {
            self.min
        } else if i + 1 == self.count {
            self.max
        } else {
            self.min + i as f64 * (self.max - self.min) / (self.count - 1) as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }
}

/// Everything needed to run one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub mode: SweepMode,
    pub kappa: f64,
    pub lambda0: Axis,
    pub h0: Axis,
    pub theta_r: Axis,
    pub theta_over_r: Axis,
    /// Swirl mode only; defaults to `500 / sqrt(kappa)`.
    pub horizon: Option<f64>,
    pub integrator: IntegratorConfig,
}

impl SweepSpec {
    pub fn pointwise(kappa: f64, lambda0: Axis, h0: Axis) -> Self {
        SweepSpec {
            mode: SweepMode::PointwiseThreshold,
            kappa,
            lambda0,
            h0,
            theta_r: Axis::fixed(0.0),
            theta_over_r: Axis::fixed(0.0),
            horizon: None,
            integrator: IntegratorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!("kappa must be positive, got {}", self.kappa)));
        }
        self.lambda0.validate("lambda0")?;
        self.h0.validate("h0")?;
        self.theta_r.validate("theta_r")?;
        self.theta_over_r.validate("theta_over_r")?;
        if self.mode == SweepMode::PointwiseThreshold && (self.theta_r.count != 1 || self.theta_over_r.count != 1) {
            return Err(Error::Config("pointwise_threshold mode does not sweep swirl axes".into()));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) {
                return Err(Error::Config(format!("horizon must be positive, got {h}")));
            }
        }
        self.integrator.validate()
    }

    fn points(&self) -> Vec<[f64; 4]> {
        let mut out = Vec::new();
        for l in self.lambda0.nodes() {
            for h in self.h0.nodes() {
                for tr in self.theta_r.nodes() {
                    for tor in self.theta_over_r.nodes() {
                        out.push([l, h, tr, tor]);
                    }
                }
            }
        }
        out
    }
}

/// One evaluated grid node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda0: f64,
    pub h0: f64,
    pub theta_r: f64,
    pub theta_over_r: f64,
    pub verdict: Verdict,
}

/// Evaluates every node; rows come back in lexicographic
/// `(lambda0, h0, theta_r, theta_over_r)` order whatever the thread count.
///
/// In swirl mode both eigenvalue pairs start at `(lambda0, h0)`.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let horizon = spec.horizon.unwrap_or_else(|| default_sigma_horizon(spec.kappa));
    spec.points()
        .par_iter()
        .map(|&[l, h, tr, tor]| {
            let verdict = match spec.mode {
                SweepMode::PointwiseThreshold => classify_point(l, h, spec.kappa),
                SweepMode::SwirlSigma => {
                    let state = SwirlState { p: l, q: l, mu: h, nu: h, theta_r: tr, theta_over_r: tor };
                    sigma_membership(&state, spec.kappa, horizon, &spec.integrator)?
                }
            };
            Ok(SweepRow { lambda0: l, h0: h, theta_r: tr, theta_over_r: tor, verdict })
        })
        .collect()
}

/// CSV with a header line; numbers use the shortest round-trip decimal form
/// and an absent blowup time is an empty field.
pub fn sweep_csv(mode: SweepMode, rows: &[SweepRow]) -> String {
    let mut out = mode.columns().join(",");
    out.push('\n');
    for row in rows {
        match mode {
            SweepMode::PointwiseThreshold => write!(out, "{},{},", row.lambda0, row.h0),
            SweepMode::SwirlSigma => write!(out, "{},{},{},{},", row.lambda0, row.h0, row.theta_r, row.theta_over_r),
        }
        .expect("writing to a String");
        out.push_str(row.verdict.class.as_str());
        out.push(',');
        if let Some(t) = row.verdict.t_blowup {
            write!(out, "{t}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}
