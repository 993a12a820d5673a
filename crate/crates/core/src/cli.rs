//! Command-line front end: argument parsing, optional key=value config files
//! and the five commands. `main.rs` only forwards to [`main_with_args`].

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::bootstrap::AwbConfig;
use crate::dgp::{self, FactorDgpParams, VecmParams};
use crate::error::{Error, Result};
use crate::harness::{self, ForecastMethod, HarnessConfig, MethodSpec};
use crate::io;
use crate::multitest::{pantula_classify, BsqtConfig, ClassifyConfig, IntegrationReport, Method, Strategy};
use crate::panel::{Integration, Panel, TransformCode};

#[derive(Debug, Parser)]
#[command(name = "hdcoint", version, about = "Unit-root classification and cointegration-aware forecasting for large panels")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a panel and write it as CSV.
    Simulate(SimulateArgs),
    /// Classify every series as I(0), I(1) or I(2).
    Classify(ClassifyArgs),
    /// Rolling-window forecast evaluation.
    Forecast(ForecastArgs),
    /// Rolling-window nowcast evaluation (h = 0, single-equation methods).
    Nowcast(NowcastArgs),
    /// Model confidence set of a loss table.
    Mcs(McsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output file (reports: JSON, with a CSV table next to it).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DgpKind {
    /// Independent random walks.
    Walks,
    /// Independent I(0) AR(1), I(1) and I(2) series.
    Mixed,
    /// Cointegrated VECM of a given rank.
    Vecm,
    /// Static factor model with I(1) factors and I(0) idiosyncratic parts.
    Factor,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = DgpKind::Vecm)]
    pub dgp: DgpKind,
    /// Number of series.
    #[arg(long, default_value_t = 8)]
    pub series: usize,
    /// Number of observations.
    #[arg(long, default_value_t = 200)]
    pub obs: usize,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    /// Error-correction speed of the VECM design.
    #[arg(long, default_value_t = 0.3)]
    pub speed: f64,
    /// Counts of I(0),I(1),I(2) series for the mixed design.
    #[arg(long)]
    pub mix: Option<String>,
    /// AR coefficient of stationary components.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Number of factors of the factor design.
    #[arg(long, default_value_t = 2)]
    pub factors: usize,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Two-column CSV of transformation codes (overrides a code row).
    #[arg(long)]
    pub codes: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// iadf, bsqt, bfdr or naive.
    #[arg(long, default_value = "bsqt")]
    pub method: String,
    /// one or two.
    #[arg(long, default_value = "two")]
    pub strategy: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.85)]
    pub gamma: f64,
    #[arg(long, default_value_t = 999)]
    pub boot_reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub quantile_step: f64,
    #[arg(long)]
    pub max_lags: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// Classification report (JSON) supplying integration orders.
    #[arg(long)]
    pub orders: Option<PathBuf>,
    /// Comma-separated target series (default: the first series).
    #[arg(long)]
    pub targets: Option<String>,
    /// Comma-separated method names.
    #[arg(long, default_value = "ar")]
    pub methods: String,
    #[arg(long, default_value = "ar")]
    pub benchmark: String,
    #[arg(long, default_value_t = 120)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    /// Factor count for factor-augmented methods.
    #[arg(long)]
    pub factors: Option<usize>,
    #[arg(long)]
    pub max_lags: Option<usize>,
    /// Model confidence set level.
    #[arg(long, default_value_t = 0.10)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.85)]
    pub gamma: f64,
    #[arg(long, default_value_t = 999)]
    pub boot_reps: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Comma-separated horizons in 0..=24.
    #[arg(long, default_value = "1,6,12")]
    pub horizons: String,
}

#[derive(Debug, Clone, Args)]
pub struct NowcastArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Clone, Args)]
pub struct McsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Loss table: header of method names, one row per period; a leading
    /// date column is ignored.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.10)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.85)]
    pub gamma: f64,
    #[arg(long, default_value_t = 999)]
    pub boot_reps: usize,
}

/// Splice `--config FILE` contents (key=value lines) in front of the explicit
/// flags so that the latter win.
pub fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(args.len());
    let mut file = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            file = Some(it.next().ok_or_else(|| Error::Config("--config needs a file".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            file = Some(p.to_string());
        } else {
            out.push(a);
        }
    }
    let Some(path) = file else { return Ok(out) };
    let text = std::fs::read_to_string(&path)?;
    let mut injected = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{path}:{}: expected key=value", k + 1)))?;
        injected.push(format!("--{}", key.trim().replace('_', "-")));
        injected.push(value.trim().to_string());
    }
    // program name and subcommand first
    let at = out.len().min(2);
    out.splice(at..at, injected);
    Ok(out)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn emit(common: &Common, json: &str, table: Option<&str>) -> Result<()> {
    match &common.output {
        Some(path) => {
            write_file(path, json)?;
            if let Some(t) = table {
                write_file(&path.with_extension("csv"), t)?;
            }
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| Error::Config(format!("invalid {what} '{x}'"))))
        .collect()
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<String> {
    let seed = a.common.seed;
    let panel = match a.dgp {
        DgpKind::Walks => dgp::simulate_vecm(&VecmParams::random_walks(a.series), a.obs, a.burn_in, seed)?.panel,
        DgpKind::Vecm => {
            let params = VecmParams::random_cointegrated(a.series, a.rank, a.speed, seed)?;
            dgp::simulate_vecm(&params, a.obs, a.burn_in, seed)?.panel
        }
        DgpKind::Mixed => {
            let counts: Vec<usize> = match &a.mix {
                Some(s) => parse_list(s, "mix count")?,
                None => {
                    let third = a.series / 3;
                    vec![third, a.series - 2 * third, third]
                }
            };
            if counts.len() != 3 || counts.iter().sum::<usize>() != a.series {
                return Err(Error::Config(format!("--mix needs three counts summing to {}", a.series)));
            }
            let orders: Vec<Integration> = counts
                .iter()
                .enumerate()
                .flat_map(|(d, &c)| std::iter::repeat_n(Integration::from_order(d).expect("order below 3"), c))
                .collect();
            dgp::simulate_mixed_orders(&orders, a.rho, a.obs, a.burn_in, seed)?
        }
        DgpKind::Factor => {
            let (n, k) = (a.series, a.factors);
            let mut rng = crate::rng::substream(seed, &[crate::rng::stream::SIMULATE, 0x1A]);
            let lambda = DMatrix::from_fn(n, k, |_, _| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng));
            let params = FactorDgpParams {
                lambda,
                factor_i1: vec![true; k],
                factor_ar: vec![0.0; k],
                idio_i1: vec![false; n],
                idio_ar: vec![a.rho; n],
                idio_sd: vec![1.0; n],
                mu: nalgebra::DVector::zeros(n),
                tau: nalgebra::DVector::zeros(n),
            };
            dgp::simulate_factor_dgp(&params, a.obs, seed)?.panel
        }
    };
    io::panel_to_csv(&panel, None)
}

/// Series whose codes take logs enter classification in logs.
fn log_levels(panel: &Panel, codes: Option<&[TransformCode]>) -> Result<Panel> {
    let Some(codes) = codes else { return Ok(panel.clone()) };
    let mut v = panel.values().clone();
    for (j, c) in codes.iter().enumerate() {
        if c.takes_log() {
            for i in 0..panel.nobs() {
                let x = v[(i, j)];
                if x <= 0.0 {
                    return Err(Error::Domain { series: panel.names()[j].clone(), reason: format!("log of {x} at row {i}") });
                }
                v[(i, j)] = x.ln();
            }
        }
    }
    panel.with_values(v)
}

/// Counts per order as a small CSV table.
pub fn summary_table(report: &IntegrationReport) -> String {
    let mut s = String::from("order,count\n");
    for o in [Integration::I0, Integration::I1, Integration::I2] {
        s += &format!("I({}),{}\n", o.order(), report.order.iter().filter(|x| **x == o).count());
    }
    s
}

pub fn cmd_classify(a: &ClassifyArgs) -> Result<(IntegrationReport, String)> {
    let (panel, codes) = io::ingest_csv(&a.data.input, a.data.codes.as_deref())?;
    let panel = log_levels(&panel, codes.as_deref())?;
    let method: Method = a.method.parse()?;
    let strategy: Strategy = a.strategy.parse()?;
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::Config(format!("alpha {} outside (0, 1)", a.alpha)));
    }
    let cfg = ClassifyConfig {
        awb: AwbConfig { gamma: a.gamma, reps: a.boot_reps, seed: a.common.seed, alpha: a.alpha, max_lags: a.max_lags, ..AwbConfig::default() },
        bsqt: BsqtConfig::evenly_spaced(a.quantile_step, a.alpha)?,
        a_priori_i2: codes.as_ref().map(|c| c.iter().map(|c| c.implies_i2()).collect()).unwrap_or_default(),
    };
    let report = pantula_classify(&panel, method, strategy, &cfg)?;
    let table = summary_table(&report);
    Ok((report, table))
}

fn read_orders(path: &Path, panel: &Panel) -> Result<Vec<Integration>> {
    let report: IntegrationReport = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    panel
        .names()
        .iter()
        .map(|nm| {
            report
                .series
                .iter()
                .position(|s| s == nm)
                .map(|k| report.order[k])
                .ok_or_else(|| Error::Config(format!("classification report has no series '{nm}'")))
        })
        .collect()
}

fn run_eval(e: &EvalArgs, horizons: Vec<usize>) -> Result<harness::ForecastReport> {
    let (panel, codes) = io::ingest_csv(&e.data.input, e.data.codes.as_deref())?;
    let start = (0..panel.nseries()).map(|j| panel.first_valid(j)).max().unwrap_or(0);
    if start > 0 {
        eprintln!("note: dropping the first {start} rows to obtain a balanced panel");
    }
    let panel = panel.trim_front(start);
    let orders = match (&e.orders, &codes) {
        (Some(p), _) => read_orders(p, &panel)?,
        (None, Some(c)) => c.iter().map(|c| Integration::from_order(c.differences())).collect::<Result<_>>()?,
        (None, None) => vec![Integration::I1; panel.nseries()],
    };
    let log = codes.as_ref().map(|c| c.iter().map(|c| c.takes_log()).collect()).unwrap_or_default();
    let targets = match &e.targets {
        Some(t) => parse_list::<String>(t, "target")?,
        None => vec![panel.names()[0].clone()],
    };
    let mut names: Vec<String> = parse_list(&e.methods, "method")?;
    if !names.contains(&e.benchmark) {
        names.insert(0, e.benchmark.clone());
    }
    let methods = names.iter().map(|n| MethodSpec::from_name(n, e.factors, e.max_lags)).collect::<Result<Vec<_>>>()?;
    if horizons.contains(&0) {
        if let Some(m) = methods.iter().find(|m| !m.is_single_equation()) {
            return Err(Error::Config(format!("nowcasting supports single-equation methods only; '{}' is a system method", m.id())));
        }
    }
    let cfg = HarnessConfig {
        window: e.window,
        step: e.step,
        horizons,
        targets,
        methods,
        benchmark: e.benchmark.clone(),
        orders,
        log,
        mcs_alpha: e.alpha,
        mcs_gamma: e.gamma,
        mcs_reps: e.boot_reps,
        seed: e.common.seed,
    };
    harness::run_rolling(&panel, &cfg)
}

pub fn cmd_forecast(a: &ForecastArgs) -> Result<harness::ForecastReport> {
    run_eval(&a.eval, parse_list(&a.horizons, "horizon")?)
}

pub fn cmd_nowcast(a: &NowcastArgs) -> Result<harness::ForecastReport> {
    run_eval(&a.eval, vec![0])
}

#[derive(Debug, Serialize)]
pub struct McsReport {
    pub methods: Vec<String>,
    pub observations: usize,
    pub alpha: f64,
    pub members: Vec<String>,
    pub pvalues: Vec<f64>,
    pub eliminated: Vec<String>,
}

pub fn cmd_mcs(a: &McsArgs) -> Result<McsReport> {
    let text = std::fs::read_to_string(&a.input)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    let skip = usize::from(rows.first().is_some_and(|r| r.get(0).is_some_and(|c| c.parse::<f64>().is_err())));
    let methods: Vec<String> = header[skip..].to_vec();
    let mut data = Vec::with_capacity(rows.len() * methods.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != header.len() {
            return Err(Error::Ingest { row: i + 2, column: r.len(), reason: format!("expected {} fields", header.len()) });
        }
        for j in skip..header.len() {
            let v: f64 = r[j].parse().map_err(|_| Error::Ingest { row: i + 2, column: j + 1, reason: format!("'{}' is not a number", &r[j]) })?;
            if !v.is_finite() {
                return Err(Error::Ingest { row: i + 2, column: j + 1, reason: "non-finite loss".into() });
            }
            data.push(v);
        }
    }
    let losses = DMatrix::from_row_slice(rows.len(), methods.len(), &data);
    let seed = crate::rng::derive(a.common.seed, &[crate::rng::stream::MCS]);
    let res = harness::mcs(&losses, a.alpha, a.gamma, a.boot_reps, seed)?;
    Ok(McsReport {
        observations: rows.len(),
        alpha: a.alpha,
        members: methods.iter().zip(&res.members).filter(|(_, m)| **m).map(|(n, _)| n.clone()).collect(),
        pvalues: res.pvalues,
        eliminated: res.eliminated.iter().map(|&k| methods[k].clone()).collect(),
        methods,
    })
}

fn set_threads(common: &Common) -> Result<()> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => {
            set_threads(&a.common)?;
            let csv = cmd_simulate(a)?;
            match &a.common.output {
                Some(p) => write_file(p, &csv),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
        Command::Classify(a) => {
            set_threads(&a.common)?;
            let (report, table) = cmd_classify(a)?;
            if a.common.output.is_some() {
                eprint!("{table}");
            }
            emit(&a.common, &report.to_json()?, Some(&table))
        }
        Command::Forecast(a) => {
            set_threads(&a.eval.common)?;
            let report = cmd_forecast(a)?;
            emit(&a.eval.common, &report.to_json()?, Some(&report.to_csv()?))
        }
        Command::Nowcast(a) => {
            set_threads(&a.eval.common)?;
            let report = cmd_nowcast(a)?;
            emit(&a.eval.common, &report.to_json()?, Some(&report.to_csv()?))
        }
        Command::Mcs(a) => {
            set_threads(&a.common)?;
            let report = cmd_mcs(a)?;
            emit(&a.common, &serde_json::to_string_pretty(&report)?, None)
        }
    }
}

/// Parse, run and map the outcome to the process exit code.
pub fn main_with_args(args: Vec<String>) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn config_file_values_are_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "# knobs\nwindow = 80\nboot_reps=199\n").unwrap();
        let args = expand_config(s(&["hdcoint", "forecast", "--input", "x.csv", "--config", cfg.to_str().unwrap(), "--window", "90"])).unwrap();
        let cli = Cli::try_parse_from(args).unwrap();
        let Command::Forecast(f) = cli.command else { panic!() };
        assert_eq!(f.eval.window, 90);
        assert_eq!(f.eval.boot_reps, 199);
    }

    #[test]
    fn classify_rejects_horizons_and_usage_errors_exit_one() {
        assert!(Cli::try_parse_from(s(&["hdcoint", "classify", "--input", "a.csv", "--horizons", "1"])).is_err());
        assert_eq!(main_with_args(s(&["hdcoint", "bogus"])), 1);
        assert_eq!(main_with_args(s(&["hdcoint", "forecast", "--input", "/nonexistent/file.csv"])), 2);
    }

    #[test]
    fn simulate_then_nowcast_with_system_method_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("sim.csv");
        let code = main_with_args(s(&["hdcoint", "simulate", "--series", "4", "--obs", "100", "--output", data.to_str().unwrap()]));
        assert_eq!(code, 0);
        let code = main_with_args(s(&["hdcoint", "nowcast", "--input", data.to_str().unwrap(), "--methods", "ar,ml", "--window", "60"]));
        assert_eq!(code, 1);
        let out = dir.path().join("now.json");
        let code = main_with_args(s(&[
            "hdcoint", "nowcast", "--input", data.to_str().unwrap(), "--methods", "ar,specs", "--window", "60", "--step", "10", "--boot-reps", "99", "--max-lags", "1",
            "--output", out.to_str().unwrap(),
        ]));
        assert_eq!(code, 0);
        assert!(std::fs::read_to_string(out.with_extension("csv")).unwrap().contains("s1,0,specs"));
    }

    #[test]
    fn ar_only_forecast_has_unit_ratios() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("sim.csv");
        assert_eq!(main_with_args(s(&["hdcoint", "simulate", "--dgp", "walks", "--series", "3", "--obs", "90", "--output", data.to_str().unwrap()])), 0);
        let args = ForecastArgs {
            eval: EvalArgs {
                common: Common { output: None, seed: 1, threads: None },
                data: DataArgs { input: data, codes: None },
                orders: None,
                targets: Some("s1,s3".into()),
                methods: "ar".into(),
                benchmark: "ar".into(),
                window: 60,
                step: 1,
                factors: None,
                max_lags: None,
                alpha: 0.1,
                gamma: 0.85,
                boot_reps: 99,
            },
            horizons: "1,2".into(),
        };
        let rep = cmd_forecast(&args).unwrap();
        assert!(rep.cells.iter().all(|c| c.rel_msfe == vec![Some(1.0)]));
    }

    #[test]
    fn mcs_command_reads_loss_table() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        let mut text = String::from("date,good,bad\n");
        for t in 0..60 {
            let wob = ((t * 7919) % 13) as f64 / 13.0;
            text += &format!("2000-01-{:02},{},{}\n", 1 + t % 28, wob, 5.0 + wob);
        }
        std::fs::write(&path, text).unwrap();
        let rep = cmd_mcs(&McsArgs { common: Common { output: None, seed: 0, threads: None }, input: path, alpha: 0.1, gamma: 0.85, boot_reps: 199 }).unwrap();
        assert_eq!(rep.methods, vec!["good", "bad"]);
        assert_eq!(rep.members, vec!["good"]);
    }
}
