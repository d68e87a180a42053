use declinesim::experiments::{run_sweep, shift_sweep, single_run_csv, COLUMNS};
use declinesim::{FigureId, RawParams, RunOptions, SweepSpec};

const EXPECTED: &str = "figure_id,N,M,alpha,b,n,r_cents,tau_cents,delta_cents,c,m,k,s,deg,seed,\
replication,warmup,horizon,u_D,u_A,u_avg,u_base,G,F,B,gamma_D,R_hat,beta_hat,lost_fraction,\
bound_thm4,stderr_B,stderr_G";

fn records(text: &str) -> Vec<csv::StringRecord> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        reader
            .headers()
            .unwrap()
            .iter()
            .collect::<Vec<_>>()
            .join(","),
        EXPECTED
    );
    reader.records().map(Result::unwrap).collect()
}

fn col(name: &str) -> usize {
    COLUMNS.iter().position(|c| *c == name).unwrap()
}

fn small(figure: FigureId) -> SweepSpec {
    SweepSpec {
        alpha_grid: vec![0.0, 0.5],
        worker_grid: vec![21, 60],
        replications: 2,
        horizon: 1000,
        ..SweepSpec::for_figure(figure, RawParams::default().validate().unwrap())
    }
}

#[test]
fn fig5_rows_follow_schema() {
    let csv = run_sweep(&small(FigureId::Fig5))
        .unwrap()
        .to_csv_string()
        .unwrap();
    let rows = records(&csv);
    assert_eq!(rows.len(), 4 * 3);
    for r in &rows {
        assert_eq!(r.len(), COLUMNS.len());
        assert_eq!(&r[col("figure_id")], "fig5");
        assert_eq!(&r[col("tau_cents")], "700");
        assert_eq!(&r[col("r_cents")], "400");
        assert_eq!(&r[col("delta_cents")], "25");
        assert_eq!(&r[col("c")], "0.6");
    }
    // alpha = 0: no participants, so u_D and B are empty fields.
    let empty_collective = rows.iter().find(|r| &r[col("alpha")] == "0").unwrap();
    assert_eq!(&empty_collective[col("bound_thm4")], "1");
    assert_eq!(&empty_collective[col("gamma_D")], "0");
    for name in ["u_D", "B"] {
        assert_eq!(&empty_collective[col(name)], "", "{name}");
    }
    assert_ne!(&empty_collective[col("u_A")], "");

    let mean = rows
        .iter()
        .find(|r| &r[col("replication")] == "mean" && &r[col("alpha")] == "0.5")
        .unwrap();
    assert_eq!(&mean[col("seed")], "");
    assert_ne!(&mean[col("stderr_B")], "");
    assert_ne!(&mean[col("bound_thm4")], "");
    let rep = rows.iter().find(|r| &r[col("replication")] == "0").unwrap();
    assert_eq!(&rep[col("stderr_B")], "");
    assert!(rep[col("seed")].parse::<u64>().is_ok());
}

#[test]
fn shift_rows_keep_full_market_and_report_effective_degree() {
    let spec = SweepSpec {
        alpha_grid: vec![0.5],
        worker_grid: vec![60],
        shift_grid: vec![1, 2],
        ..small(FigureId::Fig9)
    };
    let rows = records(&shift_sweep(&spec).unwrap().to_csv_string().unwrap());
    let means: Vec<_> = rows
        .iter()
        .filter(|r| &r[col("replication")] == "mean")
        .collect();
    assert_eq!(means.len(), 2);
    for (r, (s, deg, k)) in means.iter().zip([("1", "2", "60"), ("2", "1.5", "45")]) {
        assert_eq!(&r[col("N")], "60");
        assert_eq!(&r[col("M")], "30");
        assert_eq!(&r[col("s")], s);
        assert_eq!(&r[col("deg")], deg);
        assert_eq!(&r[col("k")], k);
        assert_eq!(&r[col("bound_thm4")], "");
    }
}

#[test]
fn single_run_row() {
    let p = RawParams::default().validate().unwrap();
    let options = RunOptions::default();
    let report = declinesim::engine::simulate(&p, &options).unwrap();
    let rows = records(&single_run_csv(&p, &options, &report).unwrap());
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][col("figure_id")], "simulate");
    assert_eq!(&rows[0][col("warmup")], "150");
    assert_eq!(&rows[0][col("horizon")], "10000");
}
