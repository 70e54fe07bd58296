//! Flat JSON run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use wavelab::model::{build_model, eta_to_model, SpectralModel};
use wavelab::montecarlo::TestFunction;
use wavelab::GalerkinLevel;

use crate::CliError;

/// Where `rates` takes its error values from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    /// Exact norm gaps.
    #[default]
    Exact,
    /// Coupled Monte Carlo weak errors.
    Mc,
    /// Values listed under `errors`.
    Synthetic,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_bias_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_functions: Option<Vec<TestFunction>>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<RateSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_tolerance: Option<f64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_paths: Option<u64>,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_NUM_SAMPLES: u64 = 10_000;
pub const DEFAULT_BIAS_FRACTION: f64 = 0.01;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_SLOPE_TOLERANCE: f64 = 0.05;
pub const DEFAULT_STEPS: usize = 1 << 14;
pub const DEFAULT_NUM_PATHS: u64 = 100_000;

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    /// Reads a config file, or the `config` member of a run manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        if let Some(inner) = value.get_mut("config").filter(|v| v.is_object()) {
            value = inner.take();
        }
        serde_json::from_value(value).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }

    pub fn model(&self) -> Result<SpectralModel, CliError> {
        let c = self.c.ok_or_else(|| config_error("missing key c"))?;
        let t = self.t.ok_or_else(|| config_error("missing key T"))?;
        let model = match (self.eta, self.p, self.delta) {
            (Some(eta), None, None) => eta_to_model(eta, c, t),
            (None, Some(p), Some(delta)) => build_model(c, p, delta, t),
            (Some(_), _, _) => return Err(config_error("give either eta or both p and delta, not both")),
            _ => return Err(config_error("missing model keys: need p and delta, or eta")),
        };
        model.map_err(|e| config_error(e.to_string()))
    }

    pub fn levels(&self) -> Result<Vec<GalerkinLevel>, CliError> {
        let levels = self.levels.as_ref().ok_or_else(|| config_error("missing key levels"))?;
        if levels.is_empty() {
            return Err(config_error("levels must not be empty"));
        }
        if levels.contains(&0) {
            return Err(config_error("levels must be >= 1"));
        }
        Ok(levels.iter().map(|&n| GalerkinLevel(n)).collect())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn num_samples(&self) -> Result<u64, CliError> {
        let n = self.num_samples.unwrap_or(DEFAULT_NUM_SAMPLES);
        if n < 2 {
            return Err(config_error(format!("num_samples must be >= 2 (got {n})")));
        }
        Ok(n)
    }

    pub fn target_bias_fraction(&self) -> Result<f64, CliError> {
        let f = self.target_bias_fraction.unwrap_or(DEFAULT_BIAS_FRACTION);
        if !(f > 0.0 && f < 1.0) {
            return Err(config_error(format!("target_bias_fraction must lie in (0, 1) (got {f})")));
        }
        Ok(f)
    }

    pub fn test_functions(&self) -> Result<Vec<TestFunction>, CliError> {
        match &self.test_functions {
            None => Ok(TestFunction::ALL.to_vec()),
            Some(v) if v.is_empty() => Err(config_error("test_functions must not be empty")),
            Some(v) => Ok(v.clone()),
        }
    }

    pub fn epsilon(&self) -> Result<f64, CliError> {
        let e = self.epsilon.unwrap_or(DEFAULT_EPSILON);
        if !(e.is_finite() && e >= 0.0) {
            return Err(config_error(format!("epsilon must be >= 0 (got {e})")));
        }
        Ok(e)
    }

    pub fn slope_tolerance(&self) -> Result<f64, CliError> {
        let s = self.slope_tolerance.unwrap_or(DEFAULT_SLOPE_TOLERANCE);
        if !(s.is_finite() && s > 0.0) {
            return Err(config_error(format!("slope_tolerance must be > 0 (got {s})")));
        }
        Ok(s)
    }

    pub fn mode(&self) -> Result<usize, CliError> {
        match self.mode.unwrap_or(1) {
            0 => Err(config_error("mode must be >= 1")),
            n => Ok(n),
        }
    }

    pub fn steps(&self) -> Result<usize, CliError> {
        match self.steps.unwrap_or(DEFAULT_STEPS) {
            0 => Err(config_error("steps must be >= 1")),
            k => Ok(k),
        }
    }

    pub fn num_paths(&self) -> Result<u64, CliError> {
        let n = self.num_paths.unwrap_or(DEFAULT_NUM_PATHS);
        if n < 2 {
            return Err(config_error(format!("num_paths must be >= 2 (got {n})")));
        }
        Ok(n)
    }
}
