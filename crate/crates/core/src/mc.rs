//! Monte-Carlo replication of estimator accuracy and test rejection rates.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::SigmaTable;
use crate::error::{MirError, Result};
use crate::estimator::{mir_estimate, EstimatorOptions, MemoryEstimateReport};
use crate::hypothesis::classic::classic_test;
use crate::hypothesis::fractional::{dgm_test, lv_test, DGM_CLIP};
use crate::hypothesis::mir::decide;
use crate::hypothesis::TestKind;
use crate::process::{Family, ProcessSpec, Simulator};
use crate::rng::{stable_hash, substream};
use crate::series::TimeSeries;
use crate::spectral::{default_bandwidth, local_whittle};

/// Largest tolerated share of failed replications in a cell.
pub const FAILURE_BUDGET: f64 = 0.10;

/// Process family and short-memory parameters; d and n come from the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessTemplate {
    pub family: Family,
    #[serde(default)]
    pub ar: Vec<f64>,
    #[serde(default)]
    pub ma: Vec<f64>,
    #[serde(default)]
    pub c1: f64,
    #[serde(default = "one")]
    pub beta: f64,
}

fn one() -> f64 {
    1.0
}

impl ProcessTemplate {
    pub fn spec(&self, d: f64, n: usize) -> ProcessSpec {
        ProcessSpec {
            family: self.family,
            d,
            ar: self.ar.clone(),
            ma: self.ma.clone(),
            c1: self.c1,
            beta: self.beta,
            n,
            seed: 0,
        }
    }

    pub fn label(&self) -> String {
        self.spec(0.0, 1).label()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Mir,
    /// Local Whittle on the levels, bandwidth ⌊N^0.65⌋.
    LocalWhittle,
    /// Local Whittle on the first differences, plus one.
    LocalWhittleDiff,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Mir => "mir",
            EstimatorKind::LocalWhittle => "local_whittle",
            EstimatorKind::LocalWhittleDiff => "local_whittle_diff",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSelection {
    pub kind: TestKind,
    /// Autoregressive lags of the LV statistic (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<usize>,
    /// Null value of the generalized threshold test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d0: Option<f64>,
}

impl TestSelection {
    pub fn new(kind: TestKind) -> Self {
        TestSelection {
            kind,
            lags: None,
            d0: None,
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            TestKind::Lv => format!("lv{}", self.lags.unwrap_or(1)),
            TestKind::GeneralizedD0 => format!("d0={}", self.d0.unwrap_or(0.5)),
            k => k.name().to_string(),
        }
    }

    fn uses_mir(&self) -> bool {
        matches!(
            self.kind,
            TestKind::Stationarity
                | TestKind::Nonstationarity
                | TestKind::Fur
                | TestKind::GeneralizedD0
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    pub processes: Vec<ProcessTemplate>,
    pub d_values: Vec<f64>,
    pub n_values: Vec<usize>,
    /// Extra sample sizes run only at full scale.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub full_n_values: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub tests: Vec<TestSelection>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// Worker threads; the global pool when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Override of the number of scales used by the MIR estimator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
}

fn default_level() -> f64 {
    0.05
}

impl ExperimentSpec {
    /// Full-scale variant: at least 1000 replications and the extra sizes.
    pub fn full_scale(&self) -> Self {
        let mut s = self.clone();
        s.replications = s.replications.max(1000);
        for &n in &self.full_n_values {
            if !s.n_values.contains(&n) {
                s.n_values.push(n);
            }
        }
        s.full_n_values.clear();
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(MirError::invalid("replications must be at least 1"));
        }
        if self.processes.is_empty() || self.d_values.is_empty() || self.n_values.is_empty() {
            return Err(MirError::invalid(
                "processes, d_values and n_values must be nonempty",
            ));
        }
        if self.estimators.is_empty() && self.tests.is_empty() {
            return Err(MirError::invalid("select at least one estimator or test"));
        }
        if self.threads == Some(0) {
            return Err(MirError::invalid("threads must be positive"));
        }
        for proc in &self.processes {
            for &d in &self.d_values {
                proc.spec(d, self.n_values[0]).validate()?;
            }
        }
        Ok(())
    }

    /// Hash of the canonical JSON form, recorded as provenance.
    pub fn spec_hash(&self) -> String {
        let mut canon = self.clone();
        canon.threads = None;
        let text = serde_json::to_string(&canon).unwrap_or_default();
        format!("{:016x}", stable_hash(text.as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rmse,
    RejectionRate,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::RejectionRate => "rejection_rate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub process: String,
    pub d: f64,
    pub n: usize,
    pub method: String,
    pub metric: Metric,
    pub value: f64,
    pub mc_se: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableProvenance {
    pub spec_hash: String,
    pub master_seed: u64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub provenance: TableProvenance,
}

impl ResultTable {
    /// Rows whose failure count exceeds the budget.
    pub fn over_budget(&self) -> Vec<&ResultRow> {
        let limit = FAILURE_BUDGET * self.provenance.replications as f64;
        self.rows
            .iter()
            .filter(|r| r.failures as f64 > limit)
            .collect()
    }

    pub fn get(&self, process: &str, d: f64, n: usize, method: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.process == process && r.d == d && r.n == n && r.method == method)
    }
}

/// Outcome of one method on one replication.
#[derive(Debug, Clone, Copy)]
enum Outcome {
    Estimate(f64),
    Reject(bool),
    Failed,
}

fn replicate(x: &TimeSeries, spec: &ExperimentSpec, table: &SigmaTable) -> Vec<Outcome> {
    let needs_mir = spec.estimators.contains(&EstimatorKind::Mir)
        || spec.tests.iter().any(TestSelection::uses_mir);
    let opts = EstimatorOptions {
        p: spec.p,
        ..EstimatorOptions::default()
    };
    let mir: Option<Result<MemoryEstimateReport>> =
        needs_mir.then(|| mir_estimate(x, &opts, table));
    let mir_ok = || mir.as_ref().and_then(|r| r.as_ref().ok());
    let v = x.values();
    let mut out = Vec::with_capacity(spec.estimators.len() + spec.tests.len());
    for e in &spec.estimators {
        let r = match e {
            EstimatorKind::Mir => mir_ok().map(|m| m.d_mir),
            EstimatorKind::LocalWhittle => local_whittle(v, default_bandwidth(v.len())).ok(),
            EstimatorKind::LocalWhittleDiff => {
                let dx: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
                local_whittle(&dx, default_bandwidth(dx.len()))
                    .ok()
                    .map(|d| d + 1.0)
            }
        };
        out.push(r.map_or(Outcome::Failed, Outcome::Estimate));
    }
    for t in &spec.tests {
        let r = if t.uses_mir() {
            mir_ok().and_then(|m| decide(m, t.kind, spec.level, t.d0, table).ok())
        } else {
            match t.kind {
                TestKind::Dgm => dgm_test(x, spec.level, DGM_CLIP).ok(),
                TestKind::Lv => lv_test(x, spec.level, t.lags.unwrap_or(1)).ok(),
                k => classic_test(v, k, spec.level).ok(),
            }
        };
        out.push(r.map_or(Outcome::Failed, |rep| Outcome::Reject(rep.rejected())));
    }
    out
}

fn cell_key(process: &str, d: f64, n: usize) -> String {
    format!("{process}|d={d}|n={n}")
}

fn run_cells(spec: &ExperimentSpec, table: &SigmaTable) -> Result<Vec<ResultRow>> {
    let methods: Vec<(String, Metric)> = spec
        .estimators
        .iter()
        .map(|e| (e.name().to_string(), Metric::Rmse))
        .chain(
            spec.tests
                .iter()
                .map(|t| (t.label(), Metric::RejectionRate)),
        )
        .collect();
    let mut rows = Vec::new();
    for proc in &spec.processes {
        let label = proc.label();
        for &n in &spec.n_values {
            for &d in &spec.d_values {
                let sim = Simulator::new(&proc.spec(d, n))?;
                let key = cell_key(&label, d, n);
                let outcomes: Vec<Vec<Outcome>> = (0..spec.replications)
                    .into_par_iter()
                    .map(|r| {
                        let path = sim.sample(&mut substream(spec.master_seed, &key, r as u64));
                        match TimeSeries::new(path) {
                            Ok(x) => replicate(&x, spec, table),
                            Err(_) => vec![Outcome::Failed; methods.len()],
                        }
                    })
                    .collect();
                for (k, (method, metric)) in methods.iter().enumerate() {
                    let column = outcomes.iter().map(|o| o[k]);
                    let (value, mc_se, failures) = aggregate(column, *metric, d);
                    rows.push(ResultRow {
                        process: label.clone(),
                        d,
                        n,
                        method: method.clone(),
                        metric: *metric,
                        value,
                        mc_se,
                        failures,
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn aggregate(column: impl Iterator<Item = Outcome>, metric: Metric, d: f64) -> (f64, f64, usize) {
    let mut failures = 0;
    let mut vals = Vec::new();
    for o in column {
        match o {
            Outcome::Estimate(e) => vals.push((e - d).powi(2)),
            Outcome::Reject(r) => vals.push(if r { 1.0 } else { 0.0 }),
            Outcome::Failed => failures += 1,
        }
    }
    if vals.is_empty() {
        return (f64::NAN, f64::NAN, failures);
    }
    let k = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / k;
    match metric {
        Metric::RejectionRate => (mean, (mean * (1.0 - mean) / k).sqrt(), failures),
        Metric::Rmse => {
            let rmse = mean.sqrt();
            let se = if vals.len() > 1 && rmse > 0.0 {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
                (var / k).sqrt() / (2.0 * rmse)
            } else {
                0.0
            };
            (rmse, se, failures)
        }
    }
}

/// Runs every (process, N, d) cell and every selected method.
pub fn run_experiment(spec: &ExperimentSpec, table: &SigmaTable) -> Result<ResultTable> {
    spec.validate()?;
    let rows = match spec.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| MirError::invalid(format!("thread pool: {e}")))?
            .install(|| run_cells(spec, table))?,
        None => run_cells(spec, table)?,
    };
    Ok(ResultTable {
        rows,
        provenance: TableProvenance {
            spec_hash: spec.spec_hash(),
            master_seed: spec.master_seed,
            replications: spec.replications,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Text,
}

impl std::str::FromStr for Format {
    type Err = MirError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(MirError::invalid(format!("unknown format {other:?}"))),
        }
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "process", "d", "n", "method", "metric", "value", "mc_se", "failures",
];

pub fn render_table(t: &ResultTable, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(t)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER)?;
            for r in &t.rows {
                w.write_record([
                    r.process.clone(),
                    r.d.to_string(),
                    r.n.to_string(),
                    r.method.clone(),
                    r.metric.name().to_string(),
                    r.value.to_string(),
                    r.mc_se.to_string(),
                    r.failures.to_string(),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| MirError::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Text => Ok(render_text(t)),
    }
}

/// One block per (process, N): methods as rows, d values as columns.
fn render_text(t: &ResultTable) -> String {
    let mut out = String::new();
    let mut blocks: Vec<(String, usize)> = Vec::new();
    for r in &t.rows {
        if !blocks.iter().any(|(p, n)| *p == r.process && *n == r.n) {
            blocks.push((r.process.clone(), r.n));
        }
    }
    for (process, n) in blocks {
        let rows: Vec<&ResultRow> = t
            .rows
            .iter()
            .filter(|r| r.process == process && r.n == n)
            .collect();
        let mut ds: Vec<f64> = Vec::new();
        let mut methods: Vec<&str> = Vec::new();
        for r in &rows {
            if !ds.contains(&r.d) {
                ds.push(r.d);
            }
            if !methods.contains(&r.method.as_str()) {
                methods.push(&r.method);
            }
        }
        let tags: Vec<(&str, String)> = methods
            .iter()
            .map(|&m| {
                let metric = rows.iter().find(|r| r.method == m).map(|r| r.metric);
                let tag = match metric {
                    Some(Metric::Rmse) => format!("{m}: sqrt(MSE)"),
                    _ => format!("{m}: rejected H0"),
                };
                (m, tag)
            })
            .collect();
        let w = tags.iter().map(|(_, t)| t.len()).max().unwrap_or(0).max(12) + 2;
        let _ = writeln!(out, "{process}, N = {n}");
        let _ = write!(out, "{:<w$}", "d");
        for d in &ds {
            let _ = write!(out, "{d:>9}");
        }
        out.push('\n');
        for (m, tag) in tags {
            let _ = write!(out, "{tag:<w$}");
            for d in &ds {
                match rows.iter().find(|r| r.method == m && r.d == *d) {
                    Some(r) if r.value.is_finite() => {
                        let _ = write!(out, "{:>9.3}", r.value);
                    }
                    _ => {
                        let _ = write!(out, "{:>9}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Parses the CSV produced by `render_table`.
pub fn rows_from_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| {
            rec.get(k).ok_or_else(|| MirError::Parse {
                line,
                msg: format!("missing column {}", CSV_HEADER[k]),
            })
        };
        let num = |k: usize| {
            field(k)?.parse::<f64>().map_err(|_| MirError::Parse {
                line,
                msg: format!("bad {}", CSV_HEADER[k]),
            })
        };
        let int = |k: usize| {
            field(k)?.parse::<usize>().map_err(|_| MirError::Parse {
                line,
                msg: format!("bad {}", CSV_HEADER[k]),
            })
        };
        let metric = match field(4)? {
            "rmse" => Metric::Rmse,
            "rejection_rate" => Metric::RejectionRate,
            other => {
                return Err(MirError::Parse {
                    line,
                    msg: format!("unknown metric {other:?}"),
                })
            }
        };
        rows.push(ResultRow {
            process: field(0)?.to_string(),
            d: num(1)?,
            n: int(2)?,
            method: field(3)?.to_string(),
            metric,
            value: num(5)?,
            mc_se: num(6)?,
            failures: int(7)?,
        });
    }
    Ok(rows)
}
