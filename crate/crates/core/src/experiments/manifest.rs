//! Flat `key=value` files: run configs and sweep manifests share one format,
//! so a manifest can be fed back as a config to repeat a sweep.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. Money is
//! written in dollars with at most two decimals.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use super::{FigureId, Locality, SweepSpec};
use crate::dispatch::Resolver;
use crate::engine::RunOptions;
use crate::params::{ModelParams, ParamError, Participation, RawParams};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {message}")]
    BadValue { key: String, message: String },
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Splits `key=value` text into ordered pairs.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        };
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_one(key, s))
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        message: format!("{value:?}: {e}"),
    })
}

pub fn parse_resolver(value: &str) -> Result<Resolver, String> {
    match value {
        "sampled" => Ok(Resolver::Sampled),
        "iterative" => Ok(Resolver::Iterative),
        other => Err(format!(
            "resolver must be sampled or iterative, got {other:?}"
        )),
    }
}

pub fn resolver_name(resolver: Resolver) -> &'static str {
    match resolver {
        Resolver::Sampled => "sampled",
        Resolver::Iterative => "iterative",
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Every settable key, each optional so layers can be merged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigValues {
    pub workers: Option<u32>,
    pub participation: Option<Participation>,
    pub threshold: Option<f64>,
    pub base_pay: Option<f64>,
    pub increment: Option<f64>,
    pub busy_steps: Option<u32>,
    pub orders_per_hour: Option<u32>,
    pub cost_per_mile: Option<f64>,
    pub miles_per_order: Option<f64>,
    pub locality: Option<Locality>,
    pub seed: Option<u64>,
    pub replications: Option<u32>,
    pub warmup: Option<u64>,
    pub horizon: Option<u64>,
    pub resolver: Option<Resolver>,
    pub alpha_grid: Option<Vec<f64>>,
    pub worker_grid: Option<Vec<u32>>,
    pub locality_grid: Option<Vec<Locality>>,
    pub shift_grid: Option<Vec<u32>>,
    pub figure: Option<FigureId>,
    pub artifact_version: Option<String>,
}

impl ConfigValues {
    pub const KEYS: [&'static str; 22] = [
        "N",
        "M",
        "alpha",
        "tau",
        "r",
        "delta",
        "b",
        "n",
        "c",
        "m",
        "k",
        "seed",
        "replications",
        "warmup",
        "horizon",
        "resolver",
        "alpha_grid",
        "N_grid",
        "k_grid",
        "s_grid",
        "figure_id",
        "artifact_version",
    ];

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut out = ConfigValues::default();
        for (key, value) in parse_key_values(text)? {
            out.set(&key, &value)?;
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "N" => self.workers = Some(parse_one(key, value)?),
            "M" => self.participation = Some(Participation::Count(parse_one(key, value)?)),
            "alpha" => self.participation = Some(Participation::Fraction(parse_one(key, value)?)),
            "tau" => self.threshold = Some(parse_one(key, value)?),
            "r" => self.base_pay = Some(parse_one(key, value)?),
            "delta" => self.increment = Some(parse_one(key, value)?),
            "b" => self.busy_steps = Some(parse_one(key, value)?),
            "n" => self.orders_per_hour = Some(parse_one(key, value)?),
            "c" => self.cost_per_mile = Some(parse_one(key, value)?),
            "m" => self.miles_per_order = Some(parse_one(key, value)?),
            "k" => self.locality = Some(parse_one(key, value)?),
            "seed" => self.seed = Some(parse_one(key, value)?),
            "replications" => self.replications = Some(parse_one(key, value)?),
            "warmup" => self.warmup = Some(parse_one(key, value)?),
            "horizon" => self.horizon = Some(parse_one(key, value)?),
            "resolver" => {
                self.resolver =
                    Some(
                        parse_resolver(value).map_err(|message| ConfigError::BadValue {
                            key: key.into(),
                            message,
                        })?,
                    )
            }
            "alpha_grid" => self.alpha_grid = Some(parse_list(key, value)?),
            "N_grid" => self.worker_grid = Some(parse_list(key, value)?),
            "k_grid" => self.locality_grid = Some(parse_list(key, value)?),
            "s_grid" => self.shift_grid = Some(parse_list(key, value)?),
            "figure_id" => self.figure = Some(parse_one(key, value)?),
            "artifact_version" => self.artifact_version = Some(value.to_string()),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(self, top: ConfigValues) -> ConfigValues {
        ConfigValues {
            workers: top.workers.or(self.workers),
            participation: top.participation.or(self.participation),
            threshold: top.threshold.or(self.threshold),
            base_pay: top.base_pay.or(self.base_pay),
            increment: top.increment.or(self.increment),
            busy_steps: top.busy_steps.or(self.busy_steps),
            orders_per_hour: top.orders_per_hour.or(self.orders_per_hour),
            cost_per_mile: top.cost_per_mile.or(self.cost_per_mile),
            miles_per_order: top.miles_per_order.or(self.miles_per_order),
            locality: top.locality.or(self.locality),
            seed: top.seed.or(self.seed),
            replications: top.replications.or(self.replications),
            warmup: top.warmup.or(self.warmup),
            horizon: top.horizon.or(self.horizon),
            resolver: top.resolver.or(self.resolver),
            alpha_grid: top.alpha_grid.or(self.alpha_grid),
            worker_grid: top.worker_grid.or(self.worker_grid),
            locality_grid: top.locality_grid.or(self.locality_grid),
            shift_grid: top.shift_grid.or(self.shift_grid),
            figure: top.figure.or(self.figure),
            artifact_version: top.artifact_version.or(self.artifact_version),
        }
    }

    /// Reference defaults with every set field applied.
    pub fn raw_params(&self) -> RawParams {
        let d = RawParams::default();
        RawParams {
            workers: self.workers.unwrap_or(d.workers),
            participation: self.participation.or(d.participation),
            threshold: self.threshold.unwrap_or(d.threshold),
            base_pay: self.base_pay.unwrap_or(d.base_pay),
            increment: self.increment.unwrap_or(d.increment),
            busy_steps: self.busy_steps.unwrap_or(d.busy_steps),
            orders_per_hour: self.orders_per_hour.unwrap_or(d.orders_per_hour),
            cost_per_mile: self.cost_per_mile.unwrap_or(d.cost_per_mile),
            miles_per_order: self.miles_per_order.unwrap_or(d.miles_per_order),
            locality: match self.locality {
                Some(Locality::Sample(k)) => Some(k),
                Some(Locality::Global) | None => None,
            },
            seed: self.seed.unwrap_or(d.seed),
        }
    }

    pub fn params(&self) -> Result<ModelParams, ConfigError> {
        Ok(self.raw_params().validate()?)
    }

    pub fn run_options(&self) -> RunOptions {
        let d = RunOptions::default();
        RunOptions {
            warmup: self.warmup.or(d.warmup),
            horizon: self.horizon.unwrap_or(d.horizon),
            resolver: self.resolver.unwrap_or(d.resolver),
        }
    }

    /// Figure defaults with every set field applied. A single `k` stands in
    /// for a missing `k_grid`.
    pub fn sweep_spec(&self, figure: FigureId) -> Result<SweepSpec, ConfigError> {
        let base = RawParams {
            locality: None,
            ..self.raw_params()
        }
        .validate()?;
        let mut spec = SweepSpec::for_figure(figure, base);
        let options = self.run_options();
        spec.warmup = options.warmup;
        spec.horizon = options.horizon;
        spec.resolver = options.resolver;
        if let Some(r) = self.replications {
            spec.replications = r;
        }
        if let Some(g) = &self.alpha_grid {
            spec.alpha_grid = g.clone();
        }
        if let Some(g) = &self.worker_grid {
            spec.worker_grid = g.clone();
        }
        if let Some(g) = &self.locality_grid {
            spec.locality_grid = g.clone();
        } else if let Some(k) = self.locality {
            spec.locality_grid = vec![k];
        }
        if let Some(g) = &self.shift_grid {
            spec.shift_grid = g.clone();
        }
        Ok(spec)
    }

    /// Renders the set fields as `key=value` lines in key order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                let _ = writeln!(out, "{k}={v}");
            }
        };
        put("artifact_version", self.artifact_version.clone());
        put("figure_id", self.figure.map(|f| f.to_string()));
        put("N", self.workers.map(|v| v.to_string()));
        match self.participation {
            Some(Participation::Count(m)) => put("M", Some(m.to_string())),
            Some(Participation::Fraction(a)) => put("alpha", Some(a.to_string())),
            None => {}
        }
        put("tau", self.threshold.map(|v| format!("{v:.2}")));
        put("r", self.base_pay.map(|v| format!("{v:.2}")));
        put("delta", self.increment.map(|v| format!("{v:.2}")));
        put("b", self.busy_steps.map(|v| v.to_string()));
        put("n", self.orders_per_hour.map(|v| v.to_string()));
        put("c", self.cost_per_mile.map(|v| format!("{v:.2}")));
        put("m", self.miles_per_order.map(|v| v.to_string()));
        put("k", self.locality.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("replications", self.replications.map(|v| v.to_string()));
        put("warmup", self.warmup.map(|v| v.to_string()));
        put("horizon", self.horizon.map(|v| v.to_string()));
        put(
            "resolver",
            self.resolver.map(|r| resolver_name(r).to_string()),
        );
        put("alpha_grid", self.alpha_grid.as_deref().map(join));
        put("N_grid", self.worker_grid.as_deref().map(join));
        put("k_grid", self.locality_grid.as_deref().map(join));
        put("s_grid", self.shift_grid.as_deref().map(join));
        out
    }

    /// Fully resolved values for a single run.
    pub fn for_params(params: &ModelParams, options: &RunOptions) -> Self {
        let raw = params.to_raw();
        ConfigValues {
            workers: Some(raw.workers),
            participation: raw.participation,
            threshold: Some(raw.threshold),
            base_pay: Some(raw.base_pay),
            increment: Some(raw.increment),
            busy_steps: Some(raw.busy_steps),
            orders_per_hour: Some(raw.orders_per_hour),
            cost_per_mile: Some(raw.cost_per_mile),
            miles_per_order: Some(raw.miles_per_order),
            locality: Some(raw.locality.map_or(Locality::Global, Locality::Sample)),
            seed: Some(raw.seed),
            warmup: Some(options.warmup_for(params)),
            horizon: Some(options.horizon),
            resolver: Some(options.resolver),
            artifact_version: Some(ARTIFACT_VERSION.to_string()),
            ..ConfigValues::default()
        }
    }

    /// Fully resolved values for a sweep.
    pub fn for_sweep(spec: &SweepSpec) -> Self {
        let mut values = ConfigValues::for_params(&spec.base, &RunOptions::default());
        values.locality = None;
        values.warmup = spec.warmup;
        values.horizon = Some(spec.horizon);
        values.resolver = Some(spec.resolver);
        values.replications = Some(spec.replications);
        values.alpha_grid = Some(spec.alpha_grid.clone());
        values.worker_grid = Some(spec.worker_grid.clone());
        values.locality_grid = Some(spec.locality_grid.clone());
        values.shift_grid = Some(spec.shift_grid.clone());
        values.figure = Some(spec.figure);
        values
    }
}

impl SweepSpec {
    /// Manifest text from which [`ConfigValues::sweep_spec`] rebuilds this
    /// spec.
    pub fn to_manifest(&self) -> String {
        format!(
            "# declinesim sweep manifest\n{}",
            ConfigValues::for_sweep(self).to_text()
        )
    }

    pub fn from_manifest(text: &str) -> Result<SweepSpec, ConfigError> {
        let values = ConfigValues::from_text(text)?;
        let figure = values.figure.ok_or_else(|| ConfigError::BadValue {
            key: "figure_id".into(),
            message: "manifest does not name a figure".into(),
        })?;
        values.sweep_spec(figure)
    }
}
