//! Parameter sweeps behind each figure, their CSV form, and the searches
//! run over sweep output.
//!
//! A sweep is a grid over participant fraction, worker count, locality and
//! shift count. Every grid cell is simulated `replications` times with seeds
//! derived from the base seed and the simulated market's coordinates, then
//! summarized by a mean row carrying standard errors. Cells run in parallel;
//! rows come back in grid order.

mod csv;
pub mod manifest;
mod search;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::analytics::{self, AnalyticsError};
use crate::dispatch::Resolver;
use crate::engine::{self, EngineError, RunOptions, UtilityReport};
use crate::params::{participants_from_alpha, ModelParams, ParamError};
use crate::rng::derive_seed;

pub use self::csv::{single_run_csv, COLUMNS};
pub use self::manifest::{parse_key_values, ConfigValues, ARTIFACT_VERSION};
pub use self::search::{
    empirical_boundary, min_alpha_for_benefit, min_alpha_from_table, BoundaryPoint, Crossing,
    MinAlphaPoint,
};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("cell {cell} failed: {source}")]
    Cell {
        cell: String,
        #[source]
        source: CellError,
    },
    #[error("alpha = {alpha} has {points} worker counts with a mean benefit; need at least 2")]
    TooFewPoints { alpha: f64, points: usize },
    #[error("csv output: {0}")]
    Csv(#[from] ::csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum CellError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
}

impl FigureId {
    pub const ALL: [FigureId; 8] = [
        FigureId::Fig2,
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::Fig6,
        FigureId::Fig7,
        FigureId::Fig8,
        FigureId::Fig9,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7 => "fig7",
            FigureId::Fig8 => "fig8",
            FigureId::Fig9 => "fig9",
        }
    }

    /// Sweeps over shift counts.
    pub fn is_shift_figure(&self) -> bool {
        matches!(self, FigureId::Fig7 | FigureId::Fig9)
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown figure id {s:?}; expected fig2..fig9"))
    }
}

/// Locality grid entry: a fixed sample size or the whole idle pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Locality {
    Sample(u32),
    Global,
}

impl fmt::Display for Locality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locality::Sample(k) => write!(f, "{k}"),
            Locality::Global => f.write_str("N"),
        }
    }
}

impl FromStr for Locality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "N" {
            return Ok(Locality::Global);
        }
        s.parse::<u32>()
            .ok()
            .filter(|&k| k >= 1)
            .map(Locality::Sample)
            .ok_or_else(|| format!("locality must be a positive integer or N, got {s:?}"))
    }
}

/// Step-0.1 participant fractions from 0.1 to 0.9.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

/// Three undersupplied sizes, then 30 to 150 in steps of 6.
pub fn default_worker_grid() -> Vec<u32> {
    [15, 21, 27]
        .into_iter()
        .chain((30..=150).step_by(6))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub figure: FigureId,
    pub alpha_grid: Vec<f64>,
    pub worker_grid: Vec<u32>,
    pub locality_grid: Vec<Locality>,
    pub shift_grid: Vec<u32>,
    pub replications: u32,
    /// `None` is five busy periods of the simulated market.
    pub warmup: Option<u64>,
    pub horizon: u64,
    pub resolver: Resolver,
    /// Template for every cell; its seed is the base seed of the sweep.
    pub base: ModelParams,
}

impl SweepSpec {
    /// Default grids for a figure.
    pub fn for_figure(figure: FigureId, base: ModelParams) -> Self {
        let mut spec = SweepSpec {
            figure,
            alpha_grid: default_alpha_grid(),
            worker_grid: default_worker_grid(),
            locality_grid: vec![Locality::Global],
            shift_grid: vec![1],
            replications: 5,
            warmup: None,
            horizon: engine::DEFAULT_HORIZON,
            resolver: Resolver::default(),
            base,
        };
        match figure {
            FigureId::Fig2 => spec.alpha_grid = vec![0.3, 0.6, 0.9],
            FigureId::Fig3 | FigureId::Fig4 | FigureId::Fig5 => {}
            FigureId::Fig6 => {
                spec.worker_grid = vec![27, 45, 60, 90];
                spec.locality_grid = vec![
                    Locality::Sample(10),
                    Locality::Sample(20),
                    Locality::Sample(40),
                    Locality::Global,
                ];
            }
            FigureId::Fig7 => {
                spec.worker_grid = vec![50, 100, 150];
                spec.shift_grid = vec![1, 2, 3, 4];
            }
            FigureId::Fig8 => spec.alpha_grid = vec![0.1, 0.5, 0.9],
            FigureId::Fig9 => {
                spec.worker_grid = vec![60];
                spec.shift_grid = vec![1, 2, 3, 4];
            }
        }
        spec
    }

    pub fn seed(&self) -> u64 {
        self.base.seed()
    }

    fn validate(&self) -> Result<(), SweepError> {
        let bad = |msg: &str| Err(SweepError::InvalidSpec(msg.to_string()));
        if self.replications < 1 {
            return bad("replications must be at least 1");
        }
        if self.horizon < 1 {
            return bad("horizon must be at least 1");
        }
        if self.alpha_grid.is_empty()
            || self.worker_grid.is_empty()
            || self.locality_grid.is_empty()
            || self.shift_grid.is_empty()
        {
            return bad("every grid needs at least one value");
        }
        if self.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad("alpha grid values must lie in [0, 1]");
        }
        if self.worker_grid.contains(&0) {
            return bad("worker counts must be positive");
        }
        if self.shift_grid.contains(&0) {
            return bad("shift counts must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Replication(u32),
    Mean,
    /// Closed-form undersupply values at the matching point.
    Analytic,
    /// Shift plan that leaves no participant per shift.
    Infeasible,
}

impl fmt::Display for RowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowKind::Replication(i) => write!(f, "{i}"),
            RowKind::Mean => f.write_str("mean"),
            RowKind::Analytic => f.write_str("analytic"),
            RowKind::Infeasible => f.write_str("infeasible"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub figure: FigureId,
    pub kind: RowKind,
    /// Grid value of the participant fraction; the realized value is M/N.
    pub alpha: f64,
    pub locality: Locality,
    pub shifts: u32,
    /// The full market the cell describes (before any shift split).
    pub market: ModelParams,
    /// The market actually simulated: for shift cells, one shift.
    pub simulated: ModelParams,
    pub seed: Option<u64>,
    pub warmup: u64,
    pub horizon: u64,
    pub report: Option<UtilityReport>,
    pub bound: Option<f64>,
    pub stderr_benefit: Option<f64>,
    pub stderr_gain: Option<f64>,
}

impl SweepRow {
    pub fn degree(&self) -> f64 {
        self.simulated.degree()
    }

    pub fn benefit(&self) -> Option<f64> {
        self.report.and_then(|r| r.benefit)
    }

    pub fn gain(&self) -> Option<f64> {
        self.report.map(|r| r.gain)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub figure: FigureId,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn means(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.kind == RowKind::Mean)
    }

    pub fn replications(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows
            .iter()
            .filter(|r| matches!(r.kind, RowKind::Replication(_)))
    }

    /// Number of rows that carry simulation data.
    pub fn data_rows(&self) -> usize {
        self.replications().count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    alpha: f64,
    workers: u32,
    locality: Locality,
    shifts: u32,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(alpha={}, N={}, k={}, s={})",
            self.alpha, self.workers, self.locality, self.shifts
        )
    }
}

fn cells(spec: &SweepSpec) -> Vec<Cell> {
    let mut out = Vec::new();
    for &alpha in &spec.alpha_grid {
        for &workers in &spec.worker_grid {
            for &locality in &spec.locality_grid {
                for &shifts in &spec.shift_grid {
                    out.push(Cell {
                        alpha,
                        workers,
                        locality,
                        shifts,
                    });
                }
            }
        }
    }
    out
}

enum Prepared {
    Simulate {
        market: ModelParams,
        simulated: ModelParams,
    },
    Infeasible {
        market: ModelParams,
    },
}

fn prepare(spec: &SweepSpec, cell: &Cell) -> Result<Prepared, CellError> {
    let participants = participants_from_alpha(cell.alpha, cell.workers);
    let mut market = spec.base.with_market(cell.workers, participants)?;
    market = match cell.locality {
        Locality::Global => market.with_locality(cell.workers)?,
        Locality::Sample(k) => market.with_locality(k)?,
    };
    match analytics::shift_plan(&market, cell.shifts) {
        Ok(plan) => Ok(Prepared::Simulate {
            market,
            simulated: plan.params,
        }),
        Err(AnalyticsError::InfeasibleShifts { .. }) => Ok(Prepared::Infeasible { market }),
        Err(e) => Err(e.into()),
    }
}

/// Seed of one replication, keyed by the simulated market so equal markets
/// in different figures share streams.
pub fn replication_seed(base_seed: u64, simulated: &ModelParams, replication: u32) -> u64 {
    derive_seed(
        base_seed,
        &[
            simulated.workers() as u64,
            simulated.participants() as u64,
            simulated.locality() as u64,
            replication as u64,
        ],
    )
}

fn wants_bound(figure: FigureId) -> bool {
    figure == FigureId::Fig5
}

fn bound_for(params: &ModelParams, spillover: f64) -> Option<f64> {
    analytics::participation_bound(params, spillover).ok()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn stderr(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let mu = mean(xs);
    let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    Some((var / xs.len() as f64).sqrt())
}

fn mean_opt(xs: &[Option<f64>]) -> Option<f64> {
    let vals: Option<Vec<f64>> = xs.iter().copied().collect();
    vals.map(|v| mean(&v))
}

fn mean_report(reports: &[UtilityReport]) -> UtilityReport {
    let f = |get: fn(&UtilityReport) -> f64| mean(&reports.iter().map(get).collect::<Vec<_>>());
    let g = |get: fn(&UtilityReport) -> Option<f64>| {
        mean_opt(&reports.iter().map(get).collect::<Vec<_>>())
    };
    UtilityReport {
        u_participant: g(|r| r.u_participant),
        u_non_participant: g(|r| r.u_non_participant),
        u_average: f(|r| r.u_average),
        u_base: f(|r| r.u_base),
        gain: f(|r| r.gain),
        freeriding: g(|r| r.freeriding),
        benefit: g(|r| r.benefit),
        participant_order_share: g(|r| r.participant_order_share),
        spillover_per_step: f(|r| r.spillover_per_step),
        participant_accept_rate: f(|r| r.participant_accept_rate),
        lost_fraction: f(|r| r.lost_fraction),
    }
}

fn sweep_grid(spec: &SweepSpec) -> Result<SweepTable, SweepError> {
    spec.validate()?;
    let cells = cells(spec);
    let prepared = cells
        .iter()
        .map(|c| {
            prepare(spec, c).map_err(|source| SweepError::Cell {
                cell: c.to_string(),
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let jobs: Vec<(usize, u32)> = prepared
        .iter()
        .enumerate()
        .filter(|(_, p)| matches!(p, Prepared::Simulate { .. }))
        .flat_map(|(i, _)| (0..spec.replications).map(move |r| (i, r)))
        .collect();

    let results: Vec<Result<(u64, UtilityReport), SweepError>> = jobs
        .par_iter()
        .map(|&(i, rep)| {
            let Prepared::Simulate { simulated, .. } = &prepared[i] else {
                unreachable!("jobs only reference simulated cells");
            };
            let seed = replication_seed(spec.seed(), simulated, rep);
            let params = simulated.with_seed(seed);
            let options = RunOptions {
                warmup: spec.warmup,
                horizon: spec.horizon,
                resolver: spec.resolver,
            };
            engine::simulate(&params, &options)
                .map(|report| (seed, report))
                .map_err(|e| SweepError::Cell {
                    cell: cells[i].to_string(),
                    source: e.into(),
                })
        })
        .collect();
    let mut results = results.into_iter();

    let mut rows = Vec::new();
    for (cell, prep) in cells.iter().zip(&prepared) {
        match prep {
            Prepared::Infeasible { market } => rows.push(SweepRow {
                figure: spec.figure,
                kind: RowKind::Infeasible,
                alpha: cell.alpha,
                locality: cell.locality,
                shifts: cell.shifts,
                market: market.clone(),
                simulated: market.clone(),
                seed: None,
                warmup: 0,
                horizon: spec.horizon,
                report: None,
                bound: None,
                stderr_benefit: None,
                stderr_gain: None,
            }),
            Prepared::Simulate { market, simulated } => {
                let warmup = RunOptions {
                    warmup: spec.warmup,
                    ..RunOptions::default()
                }
                .warmup_for(simulated);
                let mut reports = Vec::with_capacity(spec.replications as usize);
                for rep in 0..spec.replications {
                    let (seed, report) = results.next().expect("one result per job")?;
                    let bound = wants_bound(spec.figure)
                        .then(|| bound_for(simulated, report.spillover_per_step))
                        .flatten();
                    rows.push(SweepRow {
                        figure: spec.figure,
                        kind: RowKind::Replication(rep),
                        alpha: cell.alpha,
                        locality: cell.locality,
                        shifts: cell.shifts,
                        market: market.clone(),
                        simulated: simulated.clone(),
                        seed: Some(seed),
                        warmup,
                        horizon: spec.horizon,
                        report: Some(report),
                        bound,
                        stderr_benefit: None,
                        stderr_gain: None,
                    });
                    reports.push(report);
                }
                let summary = mean_report(&reports);
                let benefits: Option<Vec<f64>> = reports.iter().map(|r| r.benefit).collect();
                let gains: Vec<f64> = reports.iter().map(|r| r.gain).collect();
                rows.push(SweepRow {
                    figure: spec.figure,
                    kind: RowKind::Mean,
                    alpha: cell.alpha,
                    locality: cell.locality,
                    shifts: cell.shifts,
                    market: market.clone(),
                    simulated: simulated.clone(),
                    seed: None,
                    warmup,
                    horizon: spec.horizon,
                    report: Some(summary),
                    bound: wants_bound(spec.figure)
                        .then(|| bound_for(simulated, summary.spillover_per_step))
                        .flatten(),
                    stderr_benefit: benefits.as_deref().and_then(stderr),
                    stderr_gain: stderr(&gains),
                });
            }
        }
    }

    if spec.figure == FigureId::Fig3 {
        rows.extend(analytic_gain_rows(spec)?);
    }

    Ok(SweepTable {
        figure: spec.figure,
        rows,
    })
}

/// Undersupply gain per alpha at N = b, the line the gain curves start from.
fn analytic_gain_rows(spec: &SweepSpec) -> Result<Vec<SweepRow>, SweepError> {
    let workers = spec.base.busy_steps();
    spec.alpha_grid
        .iter()
        .map(|&alpha| {
            let cell_err = |source: CellError| SweepError::Cell {
                cell: format!("(alpha={alpha}, N={workers}, analytic)"),
                source,
            };
            let market = spec
                .base
                .with_market(workers, participants_from_alpha(alpha, workers))
                .and_then(|p| p.with_locality(workers))
                .map_err(|e| cell_err(e.into()))?;
            let report = analytics::undersupply_report(&market).map_err(|e| cell_err(e.into()))?;
            Ok(SweepRow {
                figure: spec.figure,
                kind: RowKind::Analytic,
                alpha,
                locality: Locality::Global,
                shifts: 1,
                market: market.clone(),
                simulated: market,
                seed: None,
                warmup: 0,
                horizon: spec.horizon,
                report: Some(report),
                bound: None,
                stderr_benefit: None,
                stderr_gain: None,
            })
        })
        .collect()
}

/// Runs every cell and replication of `spec`.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable, SweepError> {
    sweep_grid(spec)
}

/// Sweep over shift counts: each cell simulates one shift of the split
/// collective, so utilities are per active worker-hour.
pub fn shift_sweep(spec: &SweepSpec) -> Result<SweepTable, SweepError> {
    if spec.shift_grid.is_empty() {
        return Err(SweepError::InvalidSpec(
            "shift sweep needs a shift grid".into(),
        ));
    }
    sweep_grid(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RawParams;

    fn base() -> ModelParams {
        RawParams::default().with_seed(7).validate().unwrap()
    }

    fn tiny(figure: FigureId) -> SweepSpec {
        SweepSpec {
            alpha_grid: vec![0.5],
            worker_grid: vec![45],
            replications: 1,
            horizon: 2000,
            ..SweepSpec::for_figure(figure, base())
        }
    }

    #[test]
    fn singleton_sweep_has_one_data_row() {
        let table = run_sweep(&tiny(FigureId::Fig5)).unwrap();
        assert_eq!(table.data_rows(), 1);
        assert_eq!(table.means().count(), 1);
        let mean = table.means().next().unwrap();
        assert!(mean.stderr_benefit.is_none());
        assert!(mean.bound.is_some());
    }

    #[test]
    fn figure_ids_parse() {
        for f in FigureId::ALL {
            assert_eq!(f.as_str().parse::<FigureId>().unwrap(), f);
        }
        assert!("fig1".parse::<FigureId>().is_err());
    }

    #[test]
    fn locality_parse() {
        assert_eq!("N".parse::<Locality>().unwrap(), Locality::Global);
        assert_eq!("10".parse::<Locality>().unwrap(), Locality::Sample(10));
        assert!("0".parse::<Locality>().is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = tiny(FigureId::Fig3);
        spec.replications = 0;
        assert!(matches!(run_sweep(&spec), Err(SweepError::InvalidSpec(_))));
        let mut spec = tiny(FigureId::Fig3);
        spec.worker_grid.clear();
        assert!(matches!(run_sweep(&spec), Err(SweepError::InvalidSpec(_))));
    }

    #[test]
    fn infeasible_shift_gets_marker_row() {
        let spec = SweepSpec {
            alpha_grid: vec![0.02],
            worker_grid: vec![50],
            shift_grid: vec![1, 3],
            horizon: 500,
            replications: 2,
            ..SweepSpec::for_figure(FigureId::Fig7, base())
        };
        let table = shift_sweep(&spec).unwrap();
        let kinds: Vec<RowKind> = table.rows.iter().map(|r| r.kind).collect();
        assert_eq!(
            kinds,
            vec![
                RowKind::Replication(0),
                RowKind::Replication(1),
                RowKind::Mean,
                RowKind::Infeasible
            ]
        );
    }

    #[test]
    fn fig3_appends_analytic_line() {
        let spec = SweepSpec {
            alpha_grid: vec![0.2, 0.4],
            ..tiny(FigureId::Fig3)
        };
        let table = run_sweep(&spec).unwrap();
        let analytic: Vec<_> = table
            .rows
            .iter()
            .filter(|r| r.kind == RowKind::Analytic)
            .collect();
        assert_eq!(analytic.len(), 2);
        assert!((analytic[1].gain().unwrap() - 2.0 * 0.4 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        assert_eq!(stderr(&[2.0, 2.0, 2.0]), Some(0.0));
        assert_eq!(stderr(&[1.0]), None);
        let se = stderr(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((se - (1.6666666666666667f64 / 4.0).sqrt()).abs() < 1e-12);
    }
}
