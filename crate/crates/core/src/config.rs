//! Experiment configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::economics::Tariff;
use crate::energy::EnergyProfile;
use crate::error::{Error, Result};
use crate::policies::{BusyCount, ForecastSettings, PolicySpec, RevenueModel};
use crate::queueing::FractionalMethod;
use crate::simulator::{ScaleDown, SimConfig};
use crate::workload::{ArrivalRate, Shape, SyntheticTraceSpec, WorkloadSpec};

/// The configuration shipped with the crate.
pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FarmConfig {
    pub capacity: u64,
    pub window_hours: f64,
    pub duration_hours: f64,
    #[serde(default)]
    pub scale_down: ScaleDown,
}

impl Default for FarmConfig {
    fn default() -> Self {
        FarmConfig {
            capacity: 1000,
            window_hours: 2.0,
            duration_hours: 264.0,
            scale_down: ScaleDown::Idealized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub mean_service_minutes: f64,
    pub arrival: Shape,
    pub service: Shape,
    pub load: f64,
    pub seed: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            mean_service_minutes: 50.0,
            arrival: Shape::Exponential,
            service: Shape::Exponential,
            load: 0.6,
            seed: 42,
        }
    }
}

impl WorkloadConfig {
    pub fn mean_service_hours(&self) -> f64 {
        self.mean_service_minutes / 60.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: String,
    #[serde(default)]
    pub busy_count: BusyCount,
    #[serde(default)]
    pub fractional: FractionalMethod,
    #[serde(default)]
    pub forecast: ForecastSettings,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            kind: "adaptive:0.2".into(),
            busy_count: BusyCount::Expected,
            fractional: FractionalMethod::Continuation,
            forecast: ForecastSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sweep_loads: Vec<f64>,
    pub compare_loads: Vec<f64>,
    pub compare_policies: Vec<String>,
    pub variability_ca2: f64,
    pub variability_cs2: f64,
    pub variability_loads: Vec<f64>,
    pub variability_policies: Vec<String>,
    pub trace_policies: Vec<String>,
    pub trace_window_hours: f64,
    pub trace_load: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_file: Option<PathBuf>,
    #[serde(default)]
    pub synthetic_trace: SyntheticTraceSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect();
        ExperimentConfig {
            sweep_loads: vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            compare_loads: vec![0.05, 0.15, 0.3, 0.45, 0.6, 0.75, 0.9, 0.995],
            compare_policies: s(&["static:all", "static:half", "adaptive:0.2", "optimal"]),
            variability_ca2: 2.0,
            variability_cs2: 20.0,
            variability_loads: vec![0.3, 0.6, 0.9],
            variability_policies: s(&["adaptive:0.2", "optimal"]),
            trace_policies: s(&["static:all", "adaptive:0.2", "predictive:0.2", "oracle"]),
            trace_window_hours: 0.5,
            trace_load: 0.6,
            trace_file: None,
            synthetic_trace: SyntheticTraceSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub farm: FarmConfig,
    pub energy: EnergyProfile,
    pub tariff: Tariff,
    pub workload: WorkloadConfig,
    pub policy: PolicyConfig,
    pub experiment: ExperimentConfig,
}

fn check_loads(key: &str, loads: &[f64]) -> Result<()> {
    if loads.is_empty() {
        return Err(Error::config(key, "needs at least one load"));
    }
    for &l in loads {
        if !(l > 0.0 && l <= 1.0) {
            return Err(Error::config(key, format!("load {l} must lie in (0, 1]")));
        }
    }
    Ok(())
}

pub fn parse_policies(key: &str, names: &[String]) -> Result<Vec<PolicySpec>> {
    names
        .iter()
        .map(|n| {
            n.parse::<PolicySpec>().map_err(|e| match e {
                Error::Config { message, .. } => Error::config(key, format!("`{n}`: {message}")),
                other => other,
            })
        })
        .collect()
}

impl Config {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let parse_error = |e: toml::de::Error, key: Option<String>| Error::Parse {
            path: origin.to_path_buf(),
            line: e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].lines().count().max(1)),
            message: match key {
                Some(k) if !k.is_empty() && k != "." => format!("`{k}`: {}", e.message()),
                _ => e.message().to_string(),
            },
        };
        let de = toml::Deserializer::parse(text).map_err(|e| parse_error(e, None))?;
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            parse_error(e.into_inner(), Some(key))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, path)
    }

    pub fn shipped() -> Self {
        Self::from_toml(DEFAULT_CONFIG, Path::new("config/default.toml"))
            .expect("shipped config is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.farm.capacity == 0 {
            return Err(Error::config("farm.capacity", "must be positive"));
        }
        self.sim_config(self.farm.window_hours).validate()?;
        let w = &self.workload;
        if !(w.mean_service_minutes > 0.0 && w.mean_service_minutes.is_finite()) {
            return Err(Error::config("workload.mean_service_minutes", "must be positive"));
        }
        check_loads("workload.load", &[w.load])?;
        self.workload_spec(w.load).validate()?;
        parse_policies("policy.kind", std::slice::from_ref(&self.policy.kind))?;
        let f = &self.policy.forecast;
        crate::policies::ForecastState::new(f.initial_alpha, f.initial_gamma, f.history_len)?;
        crate::policies::weight_grid(f.grid_step)?;
        let e = &self.experiment;
        check_loads("experiment.sweep_loads", &e.sweep_loads)?;
        check_loads("experiment.compare_loads", &e.compare_loads)?;
        check_loads("experiment.variability_loads", &e.variability_loads)?;
        check_loads("experiment.trace_load", &[e.trace_load])?;
        parse_policies("experiment.compare_policies", &e.compare_policies)?;
        parse_policies("experiment.variability_policies", &e.variability_policies)?;
        parse_policies("experiment.trace_policies", &e.trace_policies)?;
        for (key, v) in [("experiment.variability_ca2", e.variability_ca2), ("experiment.variability_cs2", e.variability_cs2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if !(e.trace_window_hours > 0.0) {
            return Err(Error::config("experiment.trace_window_hours", "must be positive"));
        }
        if e.synthetic_trace.hours == 0 {
            return Err(Error::config("experiment.synthetic_trace.hours", "must be positive"));
        }
        Ok(())
    }

    pub fn revenue_model(&self) -> RevenueModel {
        RevenueModel {
            energy: self.energy,
            tariff: self.tariff.clone(),
            busy_count: self.policy.busy_count,
            fractional: self.policy.fractional,
        }
    }

    pub fn sim_config(&self, window_hours: f64) -> SimConfig {
        SimConfig {
            capacity: self.farm.capacity,
            window_hours,
            duration_hours: self.farm.duration_hours,
            model: self.revenue_model(),
            scale_down: self.farm.scale_down,
        }
    }

    /// Arrival rate that offers `load * capacity` servers of work.
    pub fn lambda_for_load(&self, load: f64) -> f64 {
        load * self.farm.capacity as f64 / self.workload.mean_service_hours()
    }

    pub fn workload_spec(&self, load: f64) -> WorkloadSpec {
        WorkloadSpec {
            arrival_shape: self.workload.arrival,
            rate: ArrivalRate::Constant(self.lambda_for_load(load)),
            service_shape: self.workload.service,
            mean_service: self.workload.mean_service_hours(),
            seed: self.workload.seed,
        }
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, seed: Option<u64>, capacity: Option<u64>, windows: Option<usize>) -> Result<Self> {
        if let Some(s) = seed {
            self.workload.seed = s;
            self.experiment.synthetic_trace.seed = s;
        }
        if let Some(c) = capacity {
            self.farm.capacity = c;
        }
        if let Some(w) = windows {
            if w == 0 {
                return Err(Error::config("windows", "must be positive"));
            }
            self.farm.duration_hours = w as f64 * self.farm.window_hours;
        }
        self.validate()?;
        Ok(self)
    }
}
