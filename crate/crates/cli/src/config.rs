//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::PathBuf;

use hyfal_core::benchmarks::{BenchmarkOptions, VehicleGeometry};
use hyfal_core::{ExperimentConfig, GdConfig, SaConfig, Scaling};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Gd,
    Sa,
    SaGd,
}

impl Driver {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "gd" => Some(Driver::Gd),
            "sa" => Some(Driver::Sa),
            "sa+gd" | "sagd" => Some(Driver::SaGd),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Driver::Gd => "gd",
            Driver::Sa => "sa",
            Driver::SaGd => "sa+gd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Option<String>,
    /// `objective`, `requirement`, an s-expression, or `@path`.
    pub formula: String,
    pub driver: Driver,
    pub seeds: Vec<u64>,
    /// When set, replaces `seeds` with this many seeds derived from `master_seed`.
    pub runs: Option<usize>,
    pub master_seed: u64,
    pub out_dir: Option<PathBuf>,
    pub options: BenchmarkOptions,
    pub gd: GdConfig,
    pub sa: SaConfig,
    pub start_x0: Option<Vec<f64>>,
    pub start_theta: Option<Vec<f64>>,
    pub rk4_steps: usize,
    pub jobs: usize,
    pub unchecked: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: None,
            formula: "objective".into(),
            driver: Driver::Gd,
            seeds: vec![0],
            runs: None,
            master_seed: 0,
            out_dir: None,
            options: BenchmarkOptions::default(),
            gd: GdConfig::default(),
            sa: SaConfig::default(),
            start_x0: None,
            start_theta: None,
            rk4_steps: 5000,
            jobs: 0,
            unchecked: false,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Validation(format!("{key}: cannot parse `{v}`")))
}

fn float(key: &str, v: &str) -> Result<f64, CliError> {
    match v {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => num(key, v),
    }
}

fn boolean(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Validation(format!("{key}: expected true or false, got `{v}`"))),
    }
}

pub fn float_list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',').map(|s| float(key, s.trim())).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn opt_text(v: Option<String>) -> String {
    v.unwrap_or_else(|| "none".into())
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "model",
        "formula",
        "driver",
        "seeds",
        "runs",
        "master_seed",
        "out_dir",
        "corrected_dynamics",
        "printed_glycemic_routing",
        "located_sets",
        "vehicle_a",
        "vehicle_b",
        "vehicle_inertia",
        "h",
        "k1",
        "k2",
        "p",
        "scaling",
        "stop_on_falsification",
        "budget",
        "proposal_scale",
        "initial_temperature",
        "cooling",
        "r_threshold",
        "gd_budget",
        "start_x0",
        "start_theta",
        "rk4_steps",
        "jobs",
        "unchecked",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        let none = v == "none" || v.is_empty();
        match key {
            "model" => self.model = (!none).then(|| v.to_string()),
            "formula" => self.formula = v.to_string(),
            "driver" => {
                self.driver =
                    Driver::parse(v).ok_or_else(|| CliError::Validation(format!("driver: unknown `{v}`")))?
            }
            "seeds" => {
                self.seeds = v.split(',').map(|s| num("seeds", s.trim())).collect::<Result<_, _>>()?;
            }
            "runs" => self.runs = if none { None } else { Some(num(key, v)?) },
            "master_seed" => self.master_seed = num(key, v)?,
            "out_dir" => self.out_dir = (!none).then(|| PathBuf::from(v)),
            "corrected_dynamics" => self.options.corrected_dynamics = boolean(key, v)?,
            "printed_glycemic_routing" => self.options.printed_glycemic_routing = boolean(key, v)?,
            "located_sets" => self.options.located_vehicle_sets = boolean(key, v)?,
            "vehicle_a" => self.options.vehicle_geometry.a = float(key, v)?,
            "vehicle_b" => self.options.vehicle_geometry.b = float(key, v)?,
            "vehicle_inertia" => self.options.vehicle_geometry.inertia = float(key, v)?,
            "h" => self.gd.h = float(key, v)?,
            "k1" => self.gd.k1 = num(key, v)?,
            "k2" => self.gd.k2 = num(key, v)?,
            "p" => self.gd.p = float(key, v)?,
            "scaling" => {
                self.gd.scaling = if v == "inf" {
                    Scaling::InfNorm
                } else {
                    match float_list(key, v)?.as_slice() {
                        [c1, c2] => Scaling::Weights { c1: *c1, c2: *c2 },
                        _ => return Err(CliError::Validation("scaling: expected `inf` or `c1,c2`".into())),
                    }
                }
            }
            "stop_on_falsification" => self.gd.stop_on_falsification = boolean(key, v)?,
            "budget" => self.sa.budget = num(key, v)?,
            "proposal_scale" => self.sa.proposal_scale = float(key, v)?,
            "initial_temperature" => {
                self.sa.initial_temperature = if v == "auto" { None } else { Some(float(key, v)?) }
            }
            "cooling" => self.sa.cooling = float(key, v)?,
            "r_threshold" => self.sa.r_threshold = float(key, v)?,
            "gd_budget" => self.sa.gd_budget = if none { None } else { Some(num(key, v)?) },
            "start_x0" => self.start_x0 = if none { None } else { Some(float_list(key, v)?) },
            "start_theta" => self.start_theta = if none { None } else { Some(float_list(key, v)?) },
            "rk4_steps" => self.rk4_steps = num(key, v)?,
            "jobs" => self.jobs = num(key, v)?,
            "unchecked" => self.unchecked = boolean(key, v)?,
            _ => return Err(CliError::Usage(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c = Self::default();
        c.merge_text(text)?;
        Ok(c)
    }

    pub fn get(&self, key: &str) -> String {
        let g = &self.options.vehicle_geometry;
        match key {
            "model" => opt_text(self.model.clone()),
            "formula" => self.formula.clone(),
            "driver" => self.driver.name().into(),
            "seeds" => join(&self.seeds),
            "runs" => opt_text(self.runs.map(|r| r.to_string())),
            "master_seed" => self.master_seed.to_string(),
            "out_dir" => opt_text(self.out_dir.as_ref().map(|p| p.display().to_string())),
            "corrected_dynamics" => self.options.corrected_dynamics.to_string(),
            "printed_glycemic_routing" => self.options.printed_glycemic_routing.to_string(),
            "located_sets" => self.options.located_vehicle_sets.to_string(),
            "vehicle_a" => g.a.to_string(),
            "vehicle_b" => g.b.to_string(),
            "vehicle_inertia" => g.inertia.to_string(),
            "h" => self.gd.h.to_string(),
            "k1" => self.gd.k1.to_string(),
            "k2" => self.gd.k2.to_string(),
            "p" => self.gd.p.to_string(),
            "scaling" => match self.gd.scaling {
                Scaling::InfNorm => "inf".into(),
                Scaling::Weights { c1, c2 } => format!("{c1},{c2}"),
            },
            "stop_on_falsification" => self.gd.stop_on_falsification.to_string(),
            "budget" => self.sa.budget.to_string(),
            "proposal_scale" => self.sa.proposal_scale.to_string(),
            "initial_temperature" => self.sa.initial_temperature.map_or("auto".into(), |t| t.to_string()),
            "cooling" => self.sa.cooling.to_string(),
            "r_threshold" => self.sa.r_threshold.to_string(),
            "gd_budget" => opt_text(self.sa.gd_budget.map(|b| b.to_string())),
            "start_x0" => opt_text(self.start_x0.as_deref().map(join)),
            "start_theta" => opt_text(self.start_theta.as_deref().map(join)),
            "rk4_steps" => self.rk4_steps.to_string(),
            "jobs" => self.jobs.to_string(),
            "unchecked" => self.unchecked.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key));
        }
        out
    }

    pub fn effective_seeds(&self) -> Vec<u64> {
        match self.runs {
            Some(r) => ExperimentConfig::derived_seeds(self.master_seed, r),
            None => self.seeds.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.gd.validate().map_err(CliError::Validation)?;
        self.sa.validate().map_err(CliError::Validation)?;
        if self.effective_seeds().is_empty() {
            return Err(CliError::Validation("at least one seed is required".into()));
        }
        if self.rk4_steps == 0 {
            return Err(CliError::Validation("rk4_steps must be positive".into()));
        }
        let g: VehicleGeometry = self.options.vehicle_geometry;
        if !(g.inertia > 0.0) {
            return Err(CliError::Validation("vehicle_inertia must be positive".into()));
        }
        Ok(())
    }
}
