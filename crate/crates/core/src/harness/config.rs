//! Run configuration, read from TOML.
//!
//! ```toml
//! model = "coupled_drift"
//! k = [0.3, 0.3, 0.3, 0.3]   # or: a = 0.3
//! h = 0.01
//! t_final = 20.0
//!
//! [initial_data]
//! kind = "sine"
//! amplitude = 0.02
//! cells = 100
//! mode = 1
//! direction = [1.0, 1.0]
//! ```
//!
//! Optional top-level keys: `length` (1.0), `seed` (7). Optional sections:
//! `[model_params]` (`delta`), `[functional]` (`gamma`, `epsilon`, `c_delta`,
//! `include_boundary_in_q`), `[output]` (`dir`, `snapshot_stride`) and
//! `[tracker]` (`front_cap`, `min_strength`, `coalesce_fraction`).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::flux_model::FluxModel;
use crate::front_tracking::TrackerOptions;
use crate::functionals::{FunctionalParams, SelectionOptions};
use crate::linalg::{Mat2, StateVec};
use crate::piecewise::{InitialProfile, PiecewiseConstant};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// The offending field of a validation error.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Validation { field, .. } => Some(field),
            ConfigError::Parse { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub delta: Option<f64>,
}

/// Values that replace the selected functional parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalOverrides {
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub c_delta: Option<f64>,
    pub include_boundary_in_q: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Run directory, relative to the output root.
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Time between snapshots; `t_final / 10` when absent.
    pub snapshot_stride: Option<f64>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("run")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            snapshot_stride: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerConfig {
    pub front_cap: Option<usize>,
    pub min_strength: Option<f64>,
    pub coalesce_fraction: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: String,
    #[serde(default)]
    model_params: ModelParams,
    k: Option<[f64; 4]>,
    a: Option<f64>,
    #[serde(default = "one")]
    length: f64,
    h: f64,
    t_final: f64,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_initial")]
    initial_data: InitialProfile,
    #[serde(default)]
    functional: FunctionalOverrides,
    #[serde(default)]
    output: OutputConfig,
    #[serde(default)]
    tracker: TrackerConfig,
}

fn one() -> f64 {
    1.0
}

fn default_seed() -> u64 {
    7
}

fn default_initial() -> InitialProfile {
    InitialProfile::Sine {
        amplitude: 0.02,
        cells: 100,
        mode: 1,
        direction: StateVec::new(1.0, 1.0),
    }
}

/// A validated run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: String,
    pub model_params: ModelParams,
    pub k: Mat2,
    pub length: f64,
    pub h: f64,
    pub t_final: f64,
    pub seed: u64,
    pub initial_data: InitialProfile,
    pub functional: FunctionalOverrides,
    pub output: OutputConfig,
    pub tracker: TrackerConfig,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let k = match (raw.k, raw.a) {
        (Some(_), Some(_)) => return Err(ConfigError::invalid("k", "give either `k` or `a`, not both")),
        (Some([a11, a12, a21, a22]), None) => Mat2::new(a11, a12, a21, a22),
        (None, Some(a)) => Mat2::new(a, a, a, a),
        (None, None) => return Err(ConfigError::invalid("k", "missing feedback matrix")),
    };
    let config = RunConfig {
        model: raw.model,
        model_params: raw.model_params,
        k,
        length: raw.length,
        h: raw.h,
        t_final: raw.t_final,
        seed: raw.seed,
        initial_data: raw.initial_data,
        functional: raw.functional,
        output: raw.output,
        tracker: raw.tracker,
    };
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse {
        line: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    parse_config(&text)
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if FluxModel::builtin(&self.model).is_none() {
            return Err(ConfigError::invalid(
                "model",
                format!("unknown model {:?}; builtin: {:?}", self.model, FluxModel::BUILTIN_NAMES),
            ));
        }
        if let Some(d) = self.model_params.delta {
            positive("model_params.delta", d)?;
        }
        if !self.k.0.iter().flatten().all(|v| v.is_finite()) {
            return Err(ConfigError::invalid("k", "entries must be finite"));
        }
        positive("length", self.length)?;
        positive("h", self.h)?;
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(ConfigError::invalid("t_final", "must be finite and non-negative"));
        }
        self.initial_data
            .sample(self.length)
            .map_err(|e| ConfigError::invalid("initial_data", e.to_string()))?;
        if let Some(s) = self.output.snapshot_stride {
            positive("output.snapshot_stride", s)?;
        }
        if let Some(g) = self.functional.gamma {
            positive("functional.gamma", g)?;
        }
        if let Some(e) = self.functional.epsilon {
            positive("functional.epsilon", e)?;
        }
        if let Some(c) = self.functional.c_delta {
            positive("functional.c_delta", c)?;
        }
        if self.tracker.front_cap == Some(0) {
            return Err(ConfigError::invalid("tracker.front_cap", "must be positive"));
        }
        if let Some(m) = self.tracker.min_strength {
            if !(m.is_finite() && m >= 0.0) {
                return Err(ConfigError::invalid("tracker.min_strength", "must be non-negative"));
            }
        }
        if let Some(c) = self.tracker.coalesce_fraction {
            if !(c.is_finite() && c >= 0.0) {
                return Err(ConfigError::invalid("tracker.coalesce_fraction", "must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn flux_model(&self) -> FluxModel {
        let model = FluxModel::builtin(&self.model).expect("validated model name");
        match self.model_params.delta {
            Some(d) => model.with_domain_radius(d),
            None => model,
        }
    }

    pub fn initial_state(&self) -> PiecewiseConstant {
        self.initial_data.sample(self.length).expect("validated initial data")
    }

    pub fn selection_options(&self) -> SelectionOptions {
        SelectionOptions {
            seed: self.seed,
            ..SelectionOptions::default()
        }
    }

    pub fn tracker_options(&self) -> TrackerOptions {
        let mut o = TrackerOptions::default();
        if let Some(c) = self.tracker.front_cap {
            o.front_cap = c;
        }
        if let Some(m) = self.tracker.min_strength {
            o.min_strength = m;
        }
        if let Some(c) = self.tracker.coalesce_fraction {
            o.coalesce_fraction = c;
        }
        o
    }

    /// Applies the `[functional]` overrides to selected parameters.
    pub fn apply_overrides(&self, params: &mut FunctionalParams) {
        let f = &self.functional;
        if let Some(g) = f.gamma {
            params.gamma = g;
        }
        if let Some(e) = f.epsilon {
            params.epsilon = e;
        }
        if let Some(c) = f.c_delta {
            params.c_delta = c;
        }
        if let Some(b) = f.include_boundary_in_q {
            params.include_boundary_in_q = b;
        }
        params.refresh();
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        let stride = self.output.snapshot_stride.unwrap_or(self.t_final / 10.0);
        if stride <= 0.0 || self.t_final == 0.0 {
            return vec![0.0];
        }
        let n = (self.t_final / stride * (1.0 + 1e-12)).floor() as usize;
        let mut times: Vec<f64> = (0..=n).map(|i| i as f64 * stride).collect();
        if times.last().is_some_and(|&t| self.t_final - t > 1e-12 * self.t_final) {
            times.push(self.t_final);
        }
        times
    }

    /// Sets one sweep key: `a`, `h`, `amplitude` or `t_final`.
    pub fn with_value(&self, key: &str, value: f64) -> Result<RunConfig, ConfigError> {
        let mut c = self.clone();
        match key {
            "a" => c.k = Mat2::new(value, value, value, value),
            "h" => c.h = value,
            "t_final" => c.t_final = value,
            "amplitude" => match &mut c.initial_data {
                InitialProfile::Sine { amplitude, .. } | InitialProfile::Bump { amplitude, .. } => *amplitude = value,
                _ => return Err(ConfigError::invalid("amplitude", "initial data has no amplitude")),
            },
            other => {
                return Err(ConfigError::invalid(
                    other,
                    "unknown sweep key; use a, h, amplitude or t_final",
                ))
            }
        }
        c.validate()?;
        Ok(c)
    }
}
