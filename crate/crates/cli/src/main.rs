use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use mirlab::covariance::{default_table, CalibrationConfig, GridSpec, SigmaTable, SIGMA_TABLE_ENV};
use mirlab::estimator::{mir_estimate, EstimatorOptions, DEFAULT_GRID_FACTOR};
use mirlab::hypothesis::classic::classic_test;
use mirlab::hypothesis::fractional::{dgm_test, lv_test, DGM_CLIP};
use mirlab::hypothesis::mir::decide;
use mirlab::hypothesis::{TestKind, TestReport};
use mirlab::mc::{render_table, run_experiment, ExperimentSpec, Format};
use mirlab::process::{generate, Family, ProcessSpec};
use mirlab::{MirError, TimeSeries};
use serde_json::json;
use thiserror::Error;

const THREADS_ENV: &str = "MIRLAB_THREADS";

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Mir(#[from] MirError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{0} cell(s) exceeded the failure budget")]
    Budget(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Mir(MirError::Io(_)) => 3,
            CliError::Mir(MirError::SeriesTooShort { .. } | MirError::EmptyGrid { .. }) => 4,
            CliError::Mir(
                MirError::InvalidInput(_)
                | MirError::Parse { .. }
                | MirError::Csv(_)
                | MirError::Json(_)
                | MirError::UnsupportedLevel(_),
            )
            | CliError::Usage(_) => 2,
            CliError::Budget(_) => 5,
            CliError::Mir(_) => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Memory-parameter estimation and (non-)stationarity testing based on
/// multi-scale increment ratios.
#[derive(Debug, Parser)]
#[command(name = "mirlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a Gaussian path and write it as single-column CSV.
    Simulate(SimulateArgs),
    /// Estimate d from a CSV series; prints the report as JSON.
    Estimate(EstimateArgs),
    /// Run one hypothesis test on a CSV series; prints the report as JSON.
    Test(TestArgs),
    /// Run a Monte-Carlo experiment described by a JSON file.
    Mc(McArgs),
    /// Calibrate and write a covariance table.
    SigmaTable(SigmaTableArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Process family: fgn, arfima, spectral_f3, spectral_f4 or trend.
    #[arg(long)]
    model: String,
    /// Memory parameter.
    #[arg(long, allow_hyphen_values = true)]
    d: f64,
    /// Comma-separated AR coefficients.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    ar: Vec<f64>,
    /// Comma-separated MA coefficients.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    ma: Vec<f64>,
    /// Second-order amplitude c1 of the spectral_f3 family.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    c1: f64,
    /// Second-order exponent of the spectral_f3 family.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Path length.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EstimatorFlags {
    /// Input CSV, one value per line with an optional header.
    #[arg(long)]
    input: PathBuf,
    /// Number of scales (default: step function of N).
    #[arg(long)]
    p: Option<usize>,
    /// Covariance table JSON (default: $MIRLAB_SIGMA_TABLE or the bundled table).
    #[arg(long)]
    table: Option<PathBuf>,
    /// Exponent grid refinement a in k / (a log N).
    #[arg(long, default_value_t = DEFAULT_GRID_FACTOR)]
    grid_factor: f64,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: EstimatorFlags,
    /// Confidence level of the reported interval.
    #[arg(long, default_value_t = 0.95)]
    ci_level: f64,
    /// Print a short human-readable summary instead of JSON.
    #[arg(long)]
    pretty: bool,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[command(flatten)]
    common: EstimatorFlags,
    /// stationarity, nonstationarity, fur, d0, kpss, vs, adf, pp, dgm or lv.
    #[arg(long)]
    kind: String,
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Null value of the d0 test.
    #[arg(long, allow_hyphen_values = true)]
    d0: Option<f64>,
    /// Autoregressive lags of the lv test.
    #[arg(long, default_value_t = 1)]
    lags: usize,
}

#[derive(Debug, Args)]
struct McArgs {
    /// Experiment JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Override the number of replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Full scale: at least 1000 replications plus the config's full_n_values.
    #[arg(long)]
    full: bool,
    /// Output format: csv, json or text.
    #[arg(long, default_value = "text")]
    format: String,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SigmaTableArgs {
    /// Largest number of scales stored.
    #[arg(long, default_value_t = 20)]
    p: usize,
    /// Grid of d as start:step:end.
    #[arg(long, default_value = "-0.45:0.05:1.2", allow_hyphen_values = true)]
    grid: String,
    #[arg(long, default_value_t = CalibrationConfig::default().replications)]
    reps: usize,
    #[arg(long, default_value_t = CalibrationConfig::default().n_cal)]
    n_cal: usize,
    #[arg(long, default_value_t = CalibrationConfig::default().m_cal)]
    m_cal: usize,
    #[arg(long, default_value_t = CalibrationConfig::default().seed)]
    seed: u64,
    /// Output file (default: $MIRLAB_SIGMA_TABLE).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_series(path: &Path) -> Result<TimeSeries> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(TimeSeries::from_csv_reader(file)?)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_table(path: Option<&Path>) -> Result<Arc<SigmaTable>> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            Ok(Arc::new(SigmaTable::from_json(&text)?))
        }
        None => Ok(default_table()?),
    }
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(MirError::from)?;
    text.push('\n');
    emit(&text)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let family: Family = a.model.parse()?;
    let spec = ProcessSpec {
        family,
        d: a.d,
        ar: a.ar,
        ma: a.ma,
        c1: a.c1,
        beta: a.beta,
        n: a.n,
        seed: a.seed,
    };
    let series = generate(&spec)?;
    write_file(&a.out, &series.to_csv_string())?;
    print_json(&json!({ "spec": spec, "provenance": series.provenance, "out": a.out }))
}

fn options(common: &EstimatorFlags, ci_level: f64) -> EstimatorOptions {
    EstimatorOptions {
        p: common.p,
        grid_factor: common.grid_factor,
        ci_level,
    }
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let x = read_series(&a.common.input)?;
    let table = load_table(a.common.table.as_deref())?;
    let r = mir_estimate(&x, &options(&a.common, a.ci_level), &table)?;
    if a.pretty {
        emit(&format!(
            "d = {:.4} (se {:.4}, {:.0}% CI [{:.4}, {:.4}])\nN = {}, p = {}, alpha = {:.4}, m = {}\n",
            r.d_mir,
            r.std_error,
            100.0 * r.ci_level,
            r.ci.0,
            r.ci.1,
            r.n,
            r.p,
            r.alpha_tilde,
            r.m_tilde
        ))
    } else {
        print_json(&r)
    }
}

fn run_test(a: TestArgs) -> Result<()> {
    let kind: TestKind = a.kind.parse()?;
    let x = read_series(&a.common.input)?;
    let report: TestReport = match kind {
        TestKind::Stationarity
        | TestKind::Nonstationarity
        | TestKind::Fur
        | TestKind::GeneralizedD0 => {
            if kind == TestKind::GeneralizedD0 && a.d0.is_none() {
                return Err(CliError::Usage("--kind d0 requires --d0".into()));
            }
            let table = load_table(a.common.table.as_deref())?;
            let est = mir_estimate(&x, &options(&a.common, 0.95), &table)?;
            decide(&est, kind, a.level, a.d0, &table)?
        }
        TestKind::Dgm => dgm_test(&x, a.level, DGM_CLIP)?,
        TestKind::Lv => lv_test(&x, a.level, a.lags)?,
        k => classic_test(x.values(), k, a.level)?,
    };
    print_json(&report)
}

fn mc(a: McArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).map_err(|source| CliError::Io {
        path: a.config.clone(),
        source,
    })?;
    let mut spec: ExperimentSpec = serde_json::from_str(&text).map_err(MirError::from)?;
    if a.full {
        spec = spec.full_scale();
    }
    if let Some(r) = a.reps {
        spec.replications = r;
    }
    if let Some(s) = a.seed {
        spec.master_seed = s;
    }
    let format: Format = a.format.parse()?;
    let table = load_table(a.table.as_deref())?;
    let result = run_experiment(&spec, &table)?;
    let doc = render_table(&result, format)?;
    match &a.out {
        Some(p) => write_file(p, &doc)?,
        None => emit(&doc)?,
    }
    let over = result.over_budget().len();
    if over > 0 {
        return Err(CliError::Budget(over));
    }
    Ok(())
}

fn sigma_table(a: SigmaTableArgs) -> Result<()> {
    let out = match a.out {
        Some(p) => p,
        None => std::env::var_os(SIGMA_TABLE_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .ok_or_else(|| CliError::Usage(format!("give --out or set {SIGMA_TABLE_ENV}")))?,
    };
    let grid: GridSpec = a.grid.parse()?;
    let cfg = CalibrationConfig {
        replications: a.reps,
        n_cal: a.n_cal,
        m_cal: a.m_cal,
        seed: a.seed,
    };
    let table = SigmaTable::build(a.p, &grid, &cfg)?;
    write_file(&out, &table.to_json()?)?;
    let ps: Vec<usize> = [5, 10, 15, 20].into_iter().filter(|&p| p <= a.p).collect();
    let anchors: Vec<_> = table
        .d_grid
        .iter()
        .map(|&d| {
            let s: Vec<f64> = ps
                .iter()
                .map(|&p| table.sigma_p_of_d(p, d).unwrap_or(f64::NAN))
                .collect();
            json!({ "d": d, "p": ps, "sigma": s })
        })
        .collect();
    print_json(&json!({ "out": out, "p": table.p, "sigma": anchors }))
}

fn configure_threads() -> Result<()> {
    if let Some(v) = std::env::var_os(THREADS_ENV) {
        let n: usize = v
            .to_str()
            .and_then(|s| s.trim().parse().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Test(a) => run_test(a),
        Command::Mc(a) => mc(a),
        Command::SigmaTable(a) => sigma_table(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
