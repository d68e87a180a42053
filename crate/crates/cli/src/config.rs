use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use declinesim::experiments::manifest::{parse_resolver, ConfigError};
use declinesim::experiments::{ConfigValues, FigureId, Locality};
use declinesim::params::Participation;
use declinesim::{Cents, Resolver};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Simulator and closed-form analytics for a dispatch market in which a
/// collective of workers declines orders paying below a threshold.
#[derive(Debug, Parser)]
#[command(name = "declinesim", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One run; prints measured utilities and, when N <= b, closed-form values.
    Simulate {
        /// How non-participant order volume enters u_A.
        #[arg(long, value_enum, default_value_t = Volume::Realized)]
        np_volume: Volume,
    },
    /// Runs a figure's sweep and writes <out>/<figure>.csv plus a manifest.
    Sweep {
        /// fig2 to fig9.
        #[arg(value_parser = parse_figure)]
        figure: FigureId,
    },
    /// Prints closed-form values for the given parameters.
    Analytic {
        #[arg(value_enum)]
        query: Query,
        /// Spillover per step in dollars, for thm4.
        #[arg(long = "R", default_value_t = 0.0)]
        spillover: f64,
        /// Number of shifts, for shifts.
        #[arg(long = "s", default_value_t = 1)]
        shifts: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Volume {
    /// Orders non-participants actually accepted.
    Realized,
    /// n(1 - E[beta I]); also credits lost orders to non-participants.
    Complement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Query {
    /// Base-scenario utility.
    Base,
    /// Closed-form utilities when N <= b.
    Undersupply,
    /// Interval for the participant order share.
    Bounds,
    /// Largest degree of oversupply at which participation pays.
    Thm4,
    /// Per-shift market when the collective splits into shifts.
    Shifts,
}

#[derive(Debug, Args)]
pub struct Flags {
    /// key=value config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overwrite an existing manifest in --out.
    #[arg(long, global = true)]
    pub force: bool,
    /// Print per-cell detail.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub replications: Option<u32>,
    /// Steps discarded before measuring (default five busy periods).
    #[arg(long, global = true)]
    pub warmup: Option<u64>,
    /// Measured steps.
    #[arg(long, global = true)]
    pub horizon: Option<u64>,
    /// sampled or iterative.
    #[arg(long, global = true, value_parser = parse_resolver)]
    pub resolver: Option<Resolver>,
    /// Number of workers.
    #[arg(long = "N", global = true)]
    pub workers: Option<u32>,
    /// Number of participants (conflicts with --alpha).
    #[arg(long = "M", global = true, conflicts_with = "alpha")]
    pub participants: Option<u32>,
    /// Participant fraction; M = round(alpha N).
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Threshold pay in dollars.
    #[arg(long, global = true, value_parser = parse_money)]
    pub tau: Option<f64>,
    /// Base pay in dollars.
    #[arg(long = "r", global = true, value_parser = parse_money)]
    pub base_pay: Option<f64>,
    /// Pay increment per decline in dollars.
    #[arg(long, global = true, value_parser = parse_money)]
    pub delta: Option<f64>,
    /// Busy duration in steps.
    #[arg(long = "b", global = true)]
    pub busy: Option<u32>,
    /// Orders per hour.
    #[arg(long = "n", global = true)]
    pub orders: Option<u32>,
    /// Cost per mile in dollars.
    #[arg(long = "c", global = true, value_parser = parse_money)]
    pub cost: Option<f64>,
    /// Miles per order.
    #[arg(long = "m", global = true)]
    pub miles: Option<f64>,
    /// Locality sample size, or N for the whole idle pool.
    #[arg(long = "k", global = true, value_parser = parse_locality)]
    pub locality: Option<Locality>,
    /// Comma-separated participant fractions.
    #[arg(long, global = true)]
    pub alpha_grid: Option<String>,
    /// Comma-separated worker counts.
    #[arg(long = "N-grid", global = true)]
    pub worker_grid: Option<String>,
    /// Comma-separated locality sizes; N means the whole pool.
    #[arg(long = "k-grid", global = true)]
    pub locality_grid: Option<String>,
    /// Comma-separated shift counts.
    #[arg(long = "s-grid", global = true)]
    pub shift_grid: Option<String>,
}

fn parse_figure(s: &str) -> Result<FigureId, String> {
    s.parse()
}

fn parse_locality(s: &str) -> Result<Locality, String> {
    s.parse()
}

fn parse_money(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    Cents::from_dollars(v).map_err(|e| e.to_string())?;
    Ok(v)
}

impl Flags {
    fn values(&self) -> Result<ConfigValues, ConfigError> {
        let mut v = ConfigValues {
            workers: self.workers,
            participation: self
                .participants
                .map(Participation::Count)
                .or(self.alpha.map(Participation::Fraction)),
            threshold: self.tau,
            base_pay: self.base_pay,
            increment: self.delta,
            busy_steps: self.busy,
            orders_per_hour: self.orders,
            cost_per_mile: self.cost,
            miles_per_order: self.miles,
            locality: self.locality,
            seed: self.seed,
            replications: self.replications,
            warmup: self.warmup,
            horizon: self.horizon,
            resolver: self.resolver,
            ..ConfigValues::default()
        };
        for (key, value) in [
            ("alpha_grid", &self.alpha_grid),
            ("N_grid", &self.worker_grid),
            ("k_grid", &self.locality_grid),
            ("s_grid", &self.shift_grid),
        ] {
            if let Some(value) = value {
                v.set(key, value)?;
            }
        }
        Ok(v)
    }

    /// Config file values with flags laid over them.
    pub fn resolve(&self) -> Result<ConfigValues, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                ConfigValues::from_text(&text)?
            }
            None => ConfigValues::default(),
        };
        Ok(file.overlay(self.values()?))
    }
}
