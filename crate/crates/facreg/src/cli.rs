//! Command-line interface: simulate panels, fit the two-stage model, run
//! rolling forecasts, and drive Monte Carlo replication grids.
//!
//! Matrix CSV files are rows = time, columns = series, no index column; a
//! single header row is read and written only under `--header`. Structured
//! tables (forecast listings, replication reports) always carry headers.
//! Numbers are printed in shortest round-trip form, so reruns of the same
//! configuration produce byte-identical files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::factor::{self, FactorConfig, RankSelection};
use crate::forecast::{self, RollingConfig};
use crate::metrics;
use crate::regression::{self, LambdaRule, RegressionConfig, RegressionMode};
use crate::simulate::{self, GroundTruth, ReplicationConfig, SimDesign, SimScenario};
use crate::whitenoise::SelectionResult;

#[derive(Parser)]
#[command(name = "facreg", version, about = "High-dimensional regression with latent dynamic factors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic panel and write y.csv, z.csv, truth.json.
    Simulate(SimulateArgs),
    /// Fit the two-stage model to y.csv/z.csv and write the estimate files.
    Fit(FitArgs),
    /// Rolling-origin forecast evaluation with a covariate-only baseline.
    Forecast(ForecastArgs),
    /// Monte Carlo replication grid with per-cell selection frequencies.
    Replicate(ReplicateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignArg {
    Example1,
    Example2,
}

impl From<DesignArg> for SimDesign {
    fn from(d: DesignArg) -> SimDesign {
        match d {
            DesignArg::Example1 => SimDesign::Example1,
            DesignArg::Example2 => SimDesign::Example2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Ols,
    Lasso,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON file holding a full scenario; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub design: Option<DesignArg>,
    /// Number of series.
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of time points.
    #[arg(long)]
    pub t: Option<usize>,
    /// Number of observed covariates.
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of latent factors.
    #[arg(long)]
    pub r: Option<usize>,
    /// Number of spiked noise directions.
    #[arg(long)]
    pub s: Option<usize>,
    /// Factor signal decay exponent in [0, 1].
    #[arg(long)]
    pub delta1: Option<f64>,
    /// Spiked-noise decay exponent in [0, 1].
    #[arg(long)]
    pub delta2: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Write a header row on the matrix CSV outputs.
    #[arg(long)]
    pub header: bool,
}

/// Pipeline knobs shared by `fit` and `forecast`; every flag overrides the
/// matching config-file field.
#[derive(Args, Debug, Clone, Copy, Default)]
pub struct PipelineFlags {
    /// First-stage estimator.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Fixed lasso penalty level.
    #[arg(long, conflicts_with = "lambda_c")]
    pub lambda: Option<f64>,
    /// Scale constant for the automatic penalty rule.
    #[arg(long)]
    pub lambda_c: Option<f64>,
    /// Force this factor count instead of running the sequential test.
    #[arg(long)]
    pub r: Option<usize>,
    /// Autocovariance lag depth of the second stage.
    #[arg(long)]
    pub k0: Option<usize>,
    /// Level of the sequential white-noise test.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Lag depth of the white-noise statistic.
    #[arg(long = "N", alias = "n-lags")]
    pub n_lags: Option<usize>,
}

impl PipelineFlags {
    fn apply(&self, reg: &mut RegressionConfig, fac: &mut FactorConfig) {
        if let Some(mode) = self.mode {
            reg.mode = match mode {
                ModeArg::Ols => RegressionMode::Ols,
                ModeArg::Lasso => RegressionMode::Lasso,
            };
        }
        if let Some(lambda) = self.lambda {
            reg.lambda = LambdaRule::Fixed { lambda };
        }
        if let Some(c) = self.lambda_c {
            reg.lambda = LambdaRule::Theory { c };
        }
        if let Some(r) = self.r {
            fac.rank = RankSelection::Fixed(r);
        }
        if let Some(k0) = self.k0 {
            fac.k0 = k0;
        }
        if let Some(alpha) = self.alpha {
            fac.whitenoise.alpha = alpha;
        }
        if let Some(n) = self.n_lags {
            fac.whitenoise.n_lags = n;
        }
    }
}

#[derive(Args)]
pub struct FitArgs {
    /// JSON file with "regression" and "factor" sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Response panel, T x p.
    #[arg(long)]
    pub y: PathBuf,
    /// Covariate panel, T x m.
    #[arg(long)]
    pub z: PathBuf,
    /// truth.json from `simulate`; adds a scoring block to fit.json.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Inputs and matrix outputs have a single header row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Args)]
pub struct ForecastArgs {
    /// JSON file holding the rolling-evaluation settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long)]
    pub z: PathBuf,
    /// Number of rolling forecast origins.
    #[arg(long)]
    pub t0: Option<usize>,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub header: bool,
}

#[derive(Args)]
pub struct ReplicateArgs {
    /// JSON grid file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub design: Option<DesignArg>,
    #[arg(long)]
    pub n_reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for parallel replicates (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Config-file shape for `fit` and the pipeline part of `forecast`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineFileConfig {
    pub regression: RegressionConfig,
    pub factor: FactorConfig,
}

/// Config-file shape for `replicate`: the cross product of delta pairs,
/// panel widths, and sample lengths, one Monte Carlo cell each.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub design: SimDesign,
    pub deltas: Vec<(f64, f64)>,
    pub ps: Vec<usize>,
    pub ts: Vec<usize>,
    pub n_reps: usize,
    pub seed: u64,
    pub regression: Option<RegressionConfig>,
    pub factor: FactorConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            design: SimDesign::Example1,
            deltas: vec![(0.0, 0.0)],
            ps: vec![50],
            ts: vec![300],
            n_reps: 100,
            seed: 0,
            regression: None,
            factor: FactorConfig::default(),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        row: e.line(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Reads a rectangular numeric CSV into a matrix. Row numbers in errors are
/// 1-based file lines, counting the header when present.
pub fn read_matrix_csv(path: &Path, header: bool) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => io_err(path, io),
            other => Error::Parse {
                path: path.display().to_string(),
                row: 0,
                message: format!("{other:?}"),
            },
        })?;
    let offset = if header { 1 } else { 0 };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let line = i + 1 + offset;
        let record = record.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            row: line,
            message: e.to_string(),
        })?;
        let want = *width.get_or_insert(record.len());
        if record.len() != want {
            return Err(Error::Parse {
                path: path.display().to_string(),
                row: line,
                message: format!("expected {want} fields, found {}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(want);
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                row: line,
                message: format!("field {} is not a number: {field:?}", j + 1),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    let height = rows.len();
    let width = width.unwrap_or(0);
    if height == 0 || width == 0 {
        return Err(Error::Parse {
            path: path.display().to_string(),
            row: offset,
            message: "no data rows".into(),
        });
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((height, width), flat).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        row: 0,
        message: e.to_string(),
    })
}

/// Writes a matrix as plain CSV; `Display` for f64 round-trips exactly.
pub fn write_matrix_csv(path: &Path, a: ArrayView2<'_, f64>, header: bool) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(|e| io_err(path, e))?);
    if header {
        let names: Vec<String> = (0..a.ncols()).map(|j| format!("c{j}")).collect();
        writeln!(out, "{}", names.join(",")).map_err(|e| io_err(path, e))?;
    }
    for row in a.rows() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", fields.join(",")).map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut sc: SimScenario = match &args.config {
        Some(path) => read_json(path)?,
        None => {
            let design = args.design.unwrap_or(DesignArg::Example1);
            match design {
                DesignArg::Example1 => SimScenario::example1(50, 300, 0.0, 0.0, 0),
                DesignArg::Example2 => SimScenario::example2(50, 300, 0.0, 0.0, 0),
            }
        }
    };
    if args.config.is_some() {
        if let Some(d) = args.design {
            sc.design = d.into();
        }
    }
    if let Some(p) = args.p {
        sc.p = p;
    }
    if let Some(t) = args.t {
        sc.t = t;
    }
    if let Some(m) = args.m {
        sc.m = m;
    }
    if let Some(r) = args.r {
        sc.r = r;
    }
    if let Some(s) = args.s {
        sc.s = s;
    }
    if let Some(d1) = args.delta1 {
        sc.delta1 = d1;
    }
    if let Some(d2) = args.delta2 {
        sc.delta2 = d2;
    }
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    let gt = simulate::simulate(&sc)?;
    ensure_out_dir(&args.out_dir)?;
    let y_path = args.out_dir.join("y.csv");
    let z_path = args.out_dir.join("z.csv");
    let truth_path = args.out_dir.join("truth.json");
    write_matrix_csv(&y_path, gt.y.view(), args.header)?;
    write_matrix_csv(&z_path, gt.z.view(), args.header)?;
    write_json(&truth_path, &gt)?;
    println!(
        "simulated {}x{} panel (design {:?}, seed {}); wrote {}, {}, {}",
        sc.t,
        sc.p,
        sc.design,
        sc.seed,
        y_path.display(),
        z_path.display(),
        truth_path.display()
    );
    Ok(())
}

/// Scores of a fit against simulation ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreBlock {
    pub b_err: f64,
    pub dbar: f64,
    pub rmse: f64,
    pub rhat_true: usize,
    pub rhat_match: bool,
}

/// Everything fit.json reports about one pipeline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub rhat: usize,
    pub shat: usize,
    pub sigma_min: f64,
    pub m_eigs: Vec<f64>,
    pub s_eigs: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub selection: Option<SelectionResult>,
    pub warnings: Vec<Warning>,
    pub score: Option<ScoreBlock>,
}

fn score_against_truth(gt: &GroundTruth, fit_r: &regression::RegressionFit, fit_f: &factor::FactorEstimate) -> Result<ScoreBlock> {
    let b_err = metrics::coef_error(fit_r.bhat.view(), gt.b.view())?;
    let dbar = if fit_f.rhat == 0 {
        1.0
    } else {
        metrics::distance_dbar(fit_f.a1hat.view(), gt.l1.view())?
    };
    let rmse = metrics::factor_rmse(fit_f.a1hat.view(), fit_f.xhat.view(), gt.l1.view(), gt.f.view())?;
    Ok(ScoreBlock {
        b_err,
        dbar,
        rmse,
        rhat_true: gt.scenario.r,
        rhat_match: fit_f.rhat == gt.scenario.r,
    })
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let mut cfg: PipelineFileConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => PipelineFileConfig::default(),
    };
    args.pipeline.apply(&mut cfg.regression, &mut cfg.factor);
    let y = read_matrix_csv(&args.y, args.header)?;
    let z = read_matrix_csv(&args.z, args.header)?;
    cfg.factor.m_regressors = z.ncols();
    let fit_r = regression::fit(y.view(), z.view(), &cfg.regression)?;
    let fit_f = factor::fit_factor_model(fit_r.residuals.view(), &cfg.factor)?;
    let score = match &args.truth {
        Some(path) => {
            let gt: GroundTruth = read_json(path)?;
            Some(score_against_truth(&gt, &fit_r, &fit_f)?)
        }
        None => None,
    };
    let mut warnings = fit_f.warnings.clone();
    let summary = FitSummary {
        rhat: fit_f.rhat,
        shat: fit_f.shat,
        sigma_min: fit_f.sigma_min,
        m_eigs: fit_f.m_eigs.to_vec(),
        s_eigs: fit_f.s_eigs.to_vec(),
        lambdas: fit_r.lambdas.to_vec(),
        selection: fit_f.selection.clone(),
        warnings: std::mem::take(&mut warnings),
        score,
    };
    ensure_out_dir(&args.out_dir)?;
    write_json(&args.out_dir.join("fit.json"), &summary)?;
    write_matrix_csv(&args.out_dir.join("Bhat.csv"), fit_r.bhat.view(), args.header)?;
    write_matrix_csv(&args.out_dir.join("A1hat.csv"), fit_f.a1hat.view(), args.header)?;
    write_matrix_csv(&args.out_dir.join("xhat.csv"), fit_f.xhat.view(), args.header)?;
    write_matrix_csv(&args.out_dir.join("residuals.csv"), fit_r.residuals.view(), args.header)?;
    println!(
        "fit {} series on {} covariates: rhat = {}, shat = {}; wrote fit.json, Bhat.csv, A1hat.csv, xhat.csv, residuals.csv in {}",
        y.ncols(),
        z.ncols(),
        fit_f.rhat,
        fit_f.shat,
        args.out_dir.display()
    );
    Ok(())
}

/// fe.json payload: the two average forecast errors and the failure trail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastSummary {
    pub t0: usize,
    pub n_origins: usize,
    pub n_failures: usize,
    pub fe_with_factors: f64,
    pub fe_regression_only: f64,
    pub failures: Vec<ForecastFailure>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastFailure {
    pub tau: usize,
    pub message: String,
}

pub fn cmd_forecast(args: &ForecastArgs) -> Result<()> {
    let mut cfg: RollingConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => {
            let t0 = args
                .t0
                .ok_or_else(|| Error::Config("--t0 is required without a config file".into()))?;
            RollingConfig::new(t0)
        }
    };
    if let Some(t0) = args.t0 {
        cfg.t0 = t0;
    }
    args.pipeline.apply(&mut cfg.regression, &mut cfg.factor);
    let y = read_matrix_csv(&args.y, args.header)?;
    let z = read_matrix_csv(&args.z, args.header)?;
    let report = forecast::rolling_evaluate(y.view(), z.view(), &cfg)?;
    ensure_out_dir(&args.out_dir)?;

    let fc_path = args.out_dir.join("forecasts.csv");
    let mut out = std::io::BufWriter::new(fs::File::create(&fc_path).map_err(|e| io_err(&fc_path, e))?);
    let p = y.ncols();
    let mut head = vec!["tau".to_string(), "rhat".to_string(), "err_with_factors".to_string(), "err_regression_only".to_string()];
    head.extend((0..p).map(|j| format!("yhat{j}")));
    head.extend((0..p).map(|j| format!("base{j}")));
    writeln!(out, "{}", head.join(",")).map_err(|e| io_err(&fc_path, e))?;
    for o in &report.origins {
        let mut fields = vec![
            o.tau.to_string(),
            o.rhat.to_string(),
            o.err_with_factors.to_string(),
            o.err_regression_only.to_string(),
        ];
        fields.extend(o.yhat.iter().map(|v| v.to_string()));
        fields.extend(o.yhat_regression.iter().map(|v| v.to_string()));
        writeln!(out, "{}", fields.join(",")).map_err(|e| io_err(&fc_path, e))?;
    }
    out.flush().map_err(|e| io_err(&fc_path, e))?;

    let summary = ForecastSummary {
        t0: cfg.t0,
        n_origins: report.origins.len(),
        n_failures: report.failures.len(),
        fe_with_factors: report.fe_with_factors,
        fe_regression_only: report.fe_regression_only,
        failures: report
            .failures
            .iter()
            .map(|f| ForecastFailure {
                tau: f.tau,
                message: f.message.clone(),
            })
            .collect(),
    };
    write_json(&args.out_dir.join("fe.json"), &summary)?;
    println!(
        "rolling evaluation over {} origins: fe with factors = {}, regression only = {} ({} failures); wrote forecasts.csv, fe.json in {}",
        report.origins.len(),
        report.fe_with_factors,
        report.fe_regression_only,
        report.failures.len(),
        args.out_dir.display()
    );
    Ok(())
}

pub fn cmd_replicate(args: &ReplicateArgs) -> Result<()> {
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let mut grid: GridConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => GridConfig::default(),
    };
    if let Some(d) = args.design {
        grid.design = d.into();
    }
    if let Some(n) = args.n_reps {
        grid.n_reps = n;
    }
    if let Some(seed) = args.seed {
        grid.seed = seed;
    }
    if grid.deltas.is_empty() || grid.ps.is_empty() || grid.ts.is_empty() {
        return Err(Error::Config("grid must have at least one delta pair, p, and T".into()));
    }

    let mut reports = Vec::new();
    let mut cell_idx = 0u64;
    for &(d1, d2) in &grid.deltas {
        for &p in &grid.ps {
            for &t in &grid.ts {
                let seed = simulate::derive_seed(grid.seed, cell_idx);
                cell_idx += 1;
                let base = match grid.design {
                    SimDesign::Example1 => SimScenario::example1(p, t, d1, d2, seed),
                    SimDesign::Example2 => SimScenario::example2(p, t, d1, d2, seed),
                };
                let rep_cfg = ReplicationConfig {
                    n_reps: grid.n_reps,
                    regression: grid.regression,
                    factor: grid.factor.clone(),
                };
                let report = simulate::replicate(&base, &rep_cfg)?;
                println!(
                    "cell ({d1}, {d2}) p = {p} T = {t}: P(rhat = {}) = {} over {} completed ({} failures)",
                    base.r, report.prob_rhat_correct, report.n_completed, report.failures.len()
                );
                reports.push(report);
            }
        }
    }
    ensure_out_dir(&args.out_dir)?;

    // selection-frequency table: one row per (delta pair, p), one column per T
    let table_path = args.out_dir.join("table.csv");
    let mut out = std::io::BufWriter::new(fs::File::create(&table_path).map_err(|e| io_err(&table_path, e))?);
    let mut head = vec!["delta1".to_string(), "delta2".to_string(), "p".to_string()];
    head.extend(grid.ts.iter().map(|t| format!("T{t}")));
    writeln!(out, "{}", head.join(",")).map_err(|e| io_err(&table_path, e))?;
    let mut it = reports.iter();
    for &(d1, d2) in &grid.deltas {
        for &p in &grid.ps {
            let mut fields = vec![d1.to_string(), d2.to_string(), p.to_string()];
            for _ in &grid.ts {
                let rep = it.next().expect("report per cell");
                fields.push(rep.prob_rhat_correct.to_string());
            }
            writeln!(out, "{}", fields.join(",")).map_err(|e| io_err(&table_path, e))?;
        }
    }
    out.flush().map_err(|e| io_err(&table_path, e))?;

    // long-form per-cell summaries
    let report_path = args.out_dir.join("report.csv");
    let mut out = std::io::BufWriter::new(fs::File::create(&report_path).map_err(|e| io_err(&report_path, e))?);
    writeln!(
        out,
        "design,delta1,delta2,p,T,n_reps,n_completed,n_failures,prob_rhat_correct,\
         b_err_q1,b_err_median,b_err_q3,dbar_q1,dbar_median,dbar_q3,rmse_q1,rmse_median,rmse_q3"
    )
    .map_err(|e| io_err(&report_path, e))?;
    for rep in &reports {
        let sc = &rep.scenario;
        let design = match sc.design {
            SimDesign::Example1 => "example1",
            SimDesign::Example2 => "example2",
        };
        let fields = [
            design.to_string(),
            sc.delta1.to_string(),
            sc.delta2.to_string(),
            sc.p.to_string(),
            sc.t.to_string(),
            rep.n_reps.to_string(),
            rep.n_completed.to_string(),
            rep.failures.len().to_string(),
            rep.prob_rhat_correct.to_string(),
            rep.b_err.q1.to_string(),
            rep.b_err.median.to_string(),
            rep.b_err.q3.to_string(),
            rep.dbar.q1.to_string(),
            rep.dbar.median.to_string(),
            rep.dbar.q3.to_string(),
            rep.rmse.q1.to_string(),
            rep.rmse.median.to_string(),
            rep.rmse.q3.to_string(),
        ];
        writeln!(out, "{}", fields.join(",")).map_err(|e| io_err(&report_path, e))?;
    }
    out.flush().map_err(|e| io_err(&report_path, e))?;

    write_json(&args.out_dir.join("report.json"), &reports)?;
    println!(
        "replication grid of {} cells done; wrote table.csv, report.csv, report.json in {}",
        reports.len(),
        args.out_dir.display()
    );
    Ok(())
}

/// Parses the process arguments and runs the selected command.
pub fn run() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Forecast(args) => cmd_forecast(args),
        Command::Replicate(args) => cmd_replicate(args),
    }
}
