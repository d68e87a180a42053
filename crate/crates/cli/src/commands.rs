use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use declinesim::analytics;
use declinesim::engine::{self, NonParticipantVolume, UtilityReport};
use declinesim::experiments::{
    run_sweep, shift_sweep, single_run_csv, ConfigValues, FigureId, SweepTable,
};
use declinesim::ModelParams;

use crate::config::{Cli, CliError, Command, Query, Volume};

const MANIFEST: &str = "manifest.txt";

type Stat = fn(&UtilityReport) -> Option<f64>;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let values = cli.flags.resolve()?;
    match &cli.command {
        Command::Simulate { np_volume } => simulate(cli, &values, *np_volume),
        Command::Sweep { figure } => sweep(cli, &values, *figure),
        Command::Analytic {
            query,
            spillover,
            shifts,
        } => analytic(&values, *query, *spillover, *shifts),
    }
}

fn runtime(e: impl Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn params(values: &ConfigValues) -> Result<ModelParams, CliError> {
    let p = values.params()?;
    for w in p.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(p)
}

fn header(p: &ModelParams) {
    println!(
        "N={} M={} alpha={:.4} k={} deg={:.4} Z={} seed={}",
        p.workers(),
        p.participants(),
        p.alpha(),
        p.locality(),
        p.degree(),
        p.max_declines(),
        p.seed()
    );
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

fn report_lines(report: &UtilityReport) -> [(&'static str, Option<f64>); 11] {
    [
        ("u_D", report.u_participant),
        ("u_A", report.u_non_participant),
        ("u_avg", Some(report.u_average)),
        ("u_base", Some(report.u_base)),
        ("G", Some(report.gain)),
        ("F", report.freeriding),
        ("B", report.benefit),
        ("gamma_D", report.participant_order_share),
        ("R_hat", Some(report.spillover_per_step)),
        ("beta_hat", Some(report.participant_accept_rate)),
        ("lost_fraction", Some(report.lost_fraction)),
    ]
}

/// Creates `dir` and refuses to reuse one that already holds a manifest.
fn prepare_out(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.join(MANIFEST).exists() && !force {
        return Err(runtime(format!(
            "{} already exists; pass --force to overwrite",
            dir.join(MANIFEST).display()
        )));
    }
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))
}

fn write(path: PathBuf, text: &str) -> Result<(), CliError> {
    fs::write(&path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn simulate(cli: &Cli, values: &ConfigValues, volume: Volume) -> Result<(), CliError> {
    let p = params(values)?;
    let options = values.run_options();
    let volume = match volume {
        Volume::Realized => NonParticipantVolume::Realized,
        Volume::Complement => NonParticipantVolume::ComplementOfParticipantShare,
    };
    let metrics = engine::run(&p, &options).map_err(runtime)?;
    let report = engine::utilities_with(&metrics, &p, volume).map_err(runtime)?;
    let closed = analytics::undersupply_report(&p).ok();

    header(&p);
    println!(
        "warmup={} horizon={} resolver={:?}",
        options.warmup_for(&p),
        options.horizon,
        options.resolver
    );
    println!(
        "{:<14} {:>12} {:>12}",
        "quantity", "measured", "closed-form"
    );
    let closed_lines = closed.as_ref().map(report_lines);
    for (i, (name, v)) in report_lines(&report).into_iter().enumerate() {
        let c = closed_lines.as_ref().and_then(|l| l[i].1);
        println!("{name:<14} {:>12} {:>12}", cell(v), cell(c));
    }

    if let Some(dir) = &cli.flags.out {
        prepare_out(dir, cli.flags.force)?;
        let csv = single_run_csv(&p, &options, &report).map_err(runtime)?;
        write(dir.join("simulate.csv"), &csv)?;
        let manifest = format!(
            "# declinesim run manifest\n{}",
            ConfigValues::for_params(&p, &options).to_text()
        );
        write(dir.join(MANIFEST), &manifest)?;
    }
    Ok(())
}

fn min_max(xs: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    xs.fold(None, |acc, x| match acc {
        None => Some((x, x)),
        Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
    })
}

fn summarize(table: &SweepTable, verbose: bool) {
    println!(
        "{}: {} cells, {} replication rows",
        table.figure,
        table.means().count(),
        table.data_rows()
    );
    let stats: [(&str, Stat); 3] = [
        ("G", |r| Some(r.gain)),
        ("F", |r| r.freeriding),
        ("B", |r| r.benefit),
    ];
    for (name, get) in stats {
        match min_max(
            table
                .means()
                .filter_map(|r| r.report.as_ref().and_then(get)),
        ) {
            Some((lo, hi)) => println!("{name}: min {lo:.6} max {hi:.6}"),
            None => println!("{name}: no values"),
        }
    }
    if verbose {
        for r in table.means() {
            println!(
                "alpha={} N={} k={} s={} deg={:.4} G={} B={}",
                r.alpha,
                r.market.workers(),
                r.locality,
                r.shifts,
                r.degree(),
                cell(r.gain()),
                cell(r.benefit())
            );
        }
    }
}

fn sweep(cli: &Cli, values: &ConfigValues, figure: FigureId) -> Result<(), CliError> {
    if let Some(f) = values.figure.filter(|&f| f != figure) {
        return Err(CliError::Config(format!(
            "config is for {f} but the command asks for {figure}"
        )));
    }
    let spec = values.sweep_spec(figure)?;
    for w in spec.base.warnings() {
        eprintln!("warning: {w}");
    }
    let dir = cli
        .flags
        .out
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(figure.as_str()));
    prepare_out(&dir, cli.flags.force)?;

    let table = if figure.is_shift_figure() {
        shift_sweep(&spec)
    } else {
        run_sweep(&spec)
    }
    .map_err(|e| match e {
        declinesim::SweepError::InvalidSpec(msg) => CliError::Config(msg),
        other => runtime(other),
    })?;

    let csv = table.to_csv_string().map_err(runtime)?;
    let csv_path = dir.join(format!("{figure}.csv"));
    write(csv_path.clone(), &csv)?;
    write(dir.join(MANIFEST), &spec.to_manifest())?;
    summarize(&table, cli.flags.verbose);
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn analytic(
    values: &ConfigValues,
    query: Query,
    spillover: f64,
    shifts: u32,
) -> Result<(), CliError> {
    let p = params(values)?;
    header(&p);
    match query {
        Query::Base => println!("u_base={:.6}", analytics::base_utility(&p)),
        Query::Undersupply => {
            let report = analytics::undersupply_report(&p).map_err(runtime)?;
            for (name, v) in report_lines(&report) {
                println!("{name}={}", cell(v));
            }
        }
        Query::Bounds => {
            let g = analytics::gamma_bounds(&p);
            println!("gamma_D_lower={:.6}", g.lower);
            println!("gamma_D_upper={:.6}", g.upper);
        }
        Query::Thm4 => {
            let bound = analytics::participation_bound(&p, spillover).map_err(runtime)?;
            println!("R={spillover}");
            println!("deg_bound={bound:.6}");
            println!("participation_pays={}", p.degree() < bound);
        }
        Query::Shifts => {
            let plan = analytics::shift_plan(&p, shifts).map_err(runtime)?;
            println!("s={}", plan.shifts);
            println!("N_eff={}", plan.workers);
            println!("M_eff={}", plan.participants);
            println!("deg_eff={}", plan.degree);
            println!("alpha_pool={:.6}", plan.alpha_pool);
            println!("alpha_workforce={:.6}", plan.alpha_of_workforce);
        }
    }
    Ok(())
}
