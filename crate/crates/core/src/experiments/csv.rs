use std::io::Write;

use super::{FigureId, Locality, RowKind, SweepError, SweepRow, SweepTable};
use crate::engine::{RunOptions, UtilityReport};
use crate::params::ModelParams;

/// Column order of every sweep CSV.
pub const COLUMNS: [&str; 32] = [
    "figure_id",
    "N",
    "M",
    "alpha",
    "b",
    "n",
    "r_cents",
    "tau_cents",
    "delta_cents",
    "c",
    "m",
    "k",
    "s",
    "deg",
    "seed",
    "replication",
    "warmup",
    "horizon",
    "u_D",
    "u_A",
    "u_avg",
    "u_base",
    "G",
    "F",
    "B",
    "gamma_D",
    "R_hat",
    "beta_hat",
    "lost_fraction",
    "bound_thm4",
    "stderr_B",
    "stderr_G",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn record(label: &str, row: &SweepRow) -> Vec<String> {
    let p = &row.market;
    let r = row.report.as_ref();
    vec![
        label.to_string(),
        p.workers().to_string(),
        p.participants().to_string(),
        row.alpha.to_string(),
        p.busy_steps().to_string(),
        p.orders_per_hour().to_string(),
        p.base_pay().0.to_string(),
        p.threshold().0.to_string(),
        p.increment().0.to_string(),
        p.cost_per_mile().dollars().to_string(),
        p.miles_per_order().to_string(),
        row.simulated.locality().to_string(),
        row.shifts.to_string(),
        row.degree().to_string(),
        opt(row.seed),
        row.kind.to_string(),
        row.warmup.to_string(),
        row.horizon.to_string(),
        opt(r.and_then(|r| r.u_participant)),
        opt(r.and_then(|r| r.u_non_participant)),
        opt(r.map(|r| r.u_average)),
        opt(r.map(|r| r.u_base)),
        opt(r.map(|r| r.gain)),
        opt(r.and_then(|r| r.freeriding)),
        opt(r.and_then(|r| r.benefit)),
        opt(r.and_then(|r| r.participant_order_share)),
        opt(r.map(|r| r.spillover_per_step)),
        opt(r.map(|r| r.participant_accept_rate)),
        opt(r.map(|r| r.lost_fraction)),
        opt(row.bound),
        opt(row.stderr_benefit),
        opt(row.stderr_gain),
    ]
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SweepError> {
        let mut writer = ::csv::Writer::from_writer(out);
        writer.write_record(COLUMNS)?;
        for row in &self.rows {
            writer.write_record(record(row.figure.as_str(), row))?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, SweepError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Header plus one row for a single run, labelled `simulate` in the
/// `figure_id` column.
pub fn single_run_csv(
    params: &ModelParams,
    options: &RunOptions,
    report: &UtilityReport,
) -> Result<String, SweepError> {
    let row = SweepRow {
        figure: FigureId::Fig2,
        kind: RowKind::Replication(0),
        alpha: params.alpha(),
        locality: if params.is_global() {
            Locality::Global
        } else {
            Locality::Sample(params.locality())
        },
        shifts: 1,
        market: params.clone(),
        simulated: params.clone(),
        seed: Some(params.seed()),
        warmup: options.warmup_for(params),
        horizon: options.horizon,
        report: Some(*report),
        bound: None,
        stderr_benefit: None,
        stderr_gain: None,
    };
    let mut writer = ::csv::Writer::from_writer(Vec::new());
    writer.write_record(COLUMNS)?;
    writer.write_record(record("simulate", &row))?;
    let buf = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
