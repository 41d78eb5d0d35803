//! Out-of-sample prediction. Covariates and recovered factors each get a
//! first-order vector autoregression (dense least squares or row-wise lasso),
//! forecasts are pushed through the fitted regression and loading structure,
//! and a rolling-origin loop scores the result against a no-factor baseline.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::factor::{self, FactorConfig, FactorEstimate};
use crate::linalg;
use crate::metrics;
use crate::regression::{self, LambdaRule, RegressionConfig, RegressionFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarMode {
    Dense,
    Sparse,
}

/// Mode rule when the caller does not force one: sparse once the state
/// dimension exceeds a quarter of the sample length.
pub fn auto_mode(d: usize, t: usize) -> VarMode {
    if 4 * d > t {
        VarMode::Sparse
    } else {
        VarMode::Dense
    }
}

/// Fitted first-order vector autoregression x_t = intercept + Phi x_{t-1} + e_t.
#[derive(Debug, Clone)]
pub struct VarFit {
    /// Autoregressive order; fixed at one.
    pub order: usize,
    /// Transition matrix, row i holding the coefficients of series i.
    pub phi: Array2<f64>,
    pub intercept: Array1<f64>,
    pub mode: VarMode,
    /// Largest eigenvalue modulus of `phi`; at or above one the fit is kept
    /// but flagged with an `UnstableVar` warning.
    pub spectral_radius: f64,
    pub warnings: Vec<Warning>,
}

fn fit_var1_dense(resp: ArrayView2<'_, f64>, pred: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let n = pred.nrows() as f64;
    let (pc, pmean) = linalg::center_columns(pred);
    let (rc, rmean) = linalg::center_columns(resp);
    let gram = pc.t().dot(&pc) / n;
    let (evals, _) = linalg::sym_eigen(gram.view())?;
    let emax = evals[0];
    let emin = evals[evals.len() - 1];
    if emin <= 0.0 || emax / emin >= 1e12 {
        let cond = if emin > 0.0 { emax / emin } else { f64::INFINITY };
        return Err(Error::SingularGram { cond }.in_stage("dense VAR(1) design (sparse mode may help)"));
    }
    let cross = pc.t().dot(&rc) / n;
    let phi_t = linalg::solve(gram.view(), cross.view())?;
    let phi = phi_t.t().to_owned();
    let intercept = &rmean - &phi.dot(&pmean);
    Ok((phi, intercept))
}

/// Fits a VAR(1) with intercept by regressing each row on the previous one.
/// Dense mode solves the centered normal equations; sparse mode runs the
/// row-wise lasso with an OLS refit on the selected support.
pub fn fit_var1(x: ArrayView2<'_, f64>, mode: VarMode, lambda: LambdaRule) -> Result<VarFit> {
    let (t, d) = (x.nrows(), x.ncols());
    if d == 0 {
        return Err(Error::Dimension {
            context: "fit_var1",
            expected: "at least one series".into(),
            got: "0 columns".into(),
        });
    }
    let needed = match mode {
        VarMode::Dense => d + 2,
        VarMode::Sparse => 3,
    };
    if t < needed {
        return Err(Error::InsufficientSamples {
            context: "fit_var1",
            needed,
            got: t,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput {
            context: "fit_var1",
            message: "non-finite entries".into(),
        });
    }
    let resp = x.slice(s![1.., ..]);
    let pred = x.slice(s![..t - 1, ..]);
    let (phi, intercept) = match mode {
        VarMode::Dense => fit_var1_dense(resp, pred)?,
        VarMode::Sparse => {
            let cfg = RegressionConfig {
                lambda,
                ..RegressionConfig::lasso()
            };
            let fit = regression::fit_lasso(resp, pred, &cfg).map_err(|e| e.in_stage("sparse VAR(1)"))?;
            (fit.bhat, fit.intercept)
        }
    };
    let spectral_radius = linalg::spectral_radius(phi.view())?;
    let mut warnings = Vec::new();
    if spectral_radius >= 1.0 {
        warnings.push(Warning::UnstableVar { spectral_radius });
    }
    Ok(VarFit {
        order: 1,
        phi,
        intercept,
        mode,
        spectral_radius,
        warnings,
    })
}

/// Iterates a fitted VAR(1) forward h steps from the given state, returning
/// the h forecast rows in order.
pub fn iterate_var1(fit: &VarFit, last: ArrayView1<'_, f64>, h: usize) -> Result<Array2<f64>> {
    let d = fit.phi.nrows();
    if last.len() != d {
        return Err(Error::Dimension {
            context: "iterate_var1",
            expected: format!("state of length {d}"),
            got: format!("{}", last.len()),
        });
    }
    if h == 0 {
        return Err(Error::Config("forecast horizon must be >= 1".into()));
    }
    let mut out = Array2::zeros((h, d));
    let mut cur = last.to_owned();
    for step in 0..h {
        cur = fit.phi.dot(&cur) + &fit.intercept;
        if !cur.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalOverflow {
                context: "iterate_var1",
                step: step + 1,
            });
        }
        out.row_mut(step).assign(&cur);
    }
    Ok(out)
}

/// h-step forecast of the response panel and its two building blocks.
/// Row k of `yhat` satisfies yhat = zhat B' + intercept' + xhat_fc A1'
/// exactly, term by term.
#[derive(Debug, Clone)]
pub struct ForecastResult {
    pub yhat: Array2<f64>,
    pub zhat: Array2<f64>,
    pub xhat_fc: Array2<f64>,
}

/// Pushes VAR forecasts of the covariates and factors through the fitted
/// regression and loadings. `z_last`/`x_last` are the most recent observed
/// covariate row and recovered factor row. When the covariates are known in
/// advance (lagged designs), pass their future rows as `zhat_override` and
/// the covariate VAR is bypassed. `var_x` is only consulted when the factor
/// estimate carries at least one factor.
#[allow(clippy::too_many_arguments)]
pub fn predict(
    fit_r: &RegressionFit,
    fit_f: &FactorEstimate,
    var_z: &VarFit,
    var_x: Option<&VarFit>,
    z_last: ArrayView1<'_, f64>,
    x_last: ArrayView1<'_, f64>,
    h: usize,
    zhat_override: Option<ArrayView2<'_, f64>>,
) -> Result<ForecastResult> {
    let p = fit_r.bhat.nrows();
    let m = fit_r.bhat.ncols();
    let rhat = fit_f.rhat;
    if h == 0 {
        return Err(Error::Config("forecast horizon must be >= 1".into()));
    }
    if fit_f.a1hat.nrows() != p || fit_f.a1hat.ncols() != rhat {
        return Err(Error::Dimension {
            context: "predict",
            expected: format!("{p}x{rhat} loading frame"),
            got: format!("{}x{}", fit_f.a1hat.nrows(), fit_f.a1hat.ncols()),
        });
    }
    if z_last.len() != m || x_last.len() != rhat {
        return Err(Error::Dimension {
            context: "predict",
            expected: format!("state rows of length {m} and {rhat}"),
            got: format!("{} and {}", z_last.len(), x_last.len()),
        });
    }
    let zhat = match zhat_override {
        Some(given) => {
            if given.nrows() != h || given.ncols() != m {
                return Err(Error::Dimension {
                    context: "predict",
                    expected: format!("{h}x{m} covariate override"),
                    got: format!("{}x{}", given.nrows(), given.ncols()),
                });
            }
            if given.iter().any(|v| !v.is_finite()) {
                return Err(Error::DegenerateInput {
                    context: "predict",
                    message: "non-finite covariate override".into(),
                });
            }
            given.to_owned()
        }
        None => {
            if var_z.phi.nrows() != m {
                return Err(Error::Dimension {
                    context: "predict",
                    expected: format!("{m}-dimensional covariate VAR"),
                    got: format!("{}", var_z.phi.nrows()),
                });
            }
            iterate_var1(var_z, z_last, h).map_err(|e| e.in_stage("covariate forecast"))?
        }
    };
    let xhat_fc = if rhat == 0 {
        Array2::zeros((h, 0))
    } else {
        let vx = var_x.ok_or_else(|| Error::Config("a factor VAR fit is required when rhat > 0".into()))?;
        if vx.phi.nrows() != rhat {
            return Err(Error::Dimension {
                context: "predict",
                expected: format!("{rhat}-dimensional factor VAR"),
                got: format!("{}", vx.phi.nrows()),
            });
        }
        iterate_var1(vx, x_last, h).map_err(|e| e.in_stage("factor forecast"))?
    };
    let mut yhat = zhat.dot(&fit_r.bhat.t()) + xhat_fc.dot(&fit_f.a1hat.t());
    for mut row in yhat.rows_mut() {
        row += &fit_r.intercept;
    }
    Ok(ForecastResult { yhat, zhat, xhat_fc })
}

/// Settings for the rolling-origin evaluation. The regression intercept is
/// only nonzero in lasso mode; for least squares on non-centered data,
/// include a ones column in the covariates and prefer sparse VAR mode so the
/// constant column does not break the covariate VAR.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RollingConfig {
    /// Number of evaluation origins: the model is refit at each of the last
    /// t0 time points and scored on one-step-ahead forecasts.
    pub t0: usize,
    #[serde(default)]
    pub regression: RegressionConfig,
    #[serde(default)]
    pub factor: FactorConfig,
    #[serde(default = "default_var_lambda")]
    pub var_lambda: LambdaRule,
    /// Forced covariate VAR mode; `None` applies the dimension rule.
    #[serde(default)]
    pub var_mode_z: Option<VarMode>,
    /// Score forecasts with the realized covariate row instead of its VAR
    /// forecast (covariates known one step ahead, e.g. lagged designs).
    #[serde(default)]
    pub z_known_ahead: bool,
}

fn default_var_lambda() -> LambdaRule {
    LambdaRule::Theory { c: 1.0 }
}

impl RollingConfig {
    pub fn new(t0: usize) -> Self {
        RollingConfig {
            t0,
            regression: RegressionConfig::default(),
            factor: FactorConfig::default(),
            var_lambda: default_var_lambda(),
            var_mode_z: None,
            z_known_ahead: false,
        }
    }
}

/// One scored forecast origin: the model was fit on rows [0, tau) and row
/// tau was predicted.
#[derive(Debug, Clone)]
pub struct OriginForecast {
    pub tau: usize,
    pub rhat: usize,
    /// Forecast with the factor term included.
    pub yhat: Array1<f64>,
    /// Covariate-only baseline forecast from the same covariate path.
    pub yhat_regression: Array1<f64>,
    /// Per-series-normalized error of `yhat`.
    pub err_with_factors: f64,
    pub err_regression_only: f64,
}

#[derive(Debug, Clone)]
pub struct OriginFailure {
    pub tau: usize,
    pub message: String,
}

/// Rolling evaluation summary. The two `fe` values average the per-origin
/// errors over the origins that completed; failed origins are excluded from
/// both arms and listed in `failures`. With no completed origin both values
/// are NaN.
#[derive(Debug, Clone)]
pub struct RollingReport {
    pub fe_with_factors: f64,
    pub fe_regression_only: f64,
    pub origins: Vec<OriginForecast>,
    pub failures: Vec<OriginFailure>,
}

fn run_origin(
    y: ArrayView2<'_, f64>,
    z: ArrayView2<'_, f64>,
    tau: usize,
    cfg: &RollingConfig,
) -> Result<OriginForecast> {
    let p = y.ncols();
    let m = z.ncols();
    let ytr = y.slice(s![..tau, ..]);
    let ztr = z.slice(s![..tau, ..]);
    let fit_r = regression::fit(ytr, ztr, &cfg.regression).map_err(|e| e.in_stage("first-stage regression"))?;
    let mut fcfg = cfg.factor.clone();
    fcfg.m_regressors = m;
    let fit_f = factor::fit_factor_model(fit_r.residuals.view(), &fcfg)?;
    let mode_z = cfg.var_mode_z.unwrap_or_else(|| auto_mode(m, tau));
    let var_z = fit_var1(ztr, mode_z, cfg.var_lambda).map_err(|e| e.in_stage("covariate VAR"))?;
    let var_x = if fit_f.rhat > 0 {
        Some(fit_var1(fit_f.xhat.view(), VarMode::Dense, cfg.var_lambda).map_err(|e| e.in_stage("factor VAR"))?)
    } else {
        None
    };
    let known = z.slice(s![tau..tau + 1, ..]);
    let fc = predict(
        &fit_r,
        &fit_f,
        &var_z,
        var_x.as_ref(),
        ztr.row(tau - 1),
        fit_f.xhat.row(tau - 1),
        1,
        cfg.z_known_ahead.then_some(known),
    )?;
    let yhat = fc.yhat.row(0).to_owned();
    let yhat_regression = fit_r.bhat.dot(&fc.zhat.row(0)) + &fit_r.intercept;
    let truth = y.row(tau).insert_axis(Axis(0));
    let err_with_factors = metrics::forecast_error(yhat.view().insert_axis(Axis(0)), truth)?;
    let err_regression_only = metrics::forecast_error(yhat_regression.view().insert_axis(Axis(0)), truth)?;
    debug_assert_eq!(yhat.len(), p);
    Ok(OriginForecast {
        tau,
        rhat: fit_f.rhat,
        yhat,
        yhat_regression,
        err_with_factors,
        err_regression_only,
    })
}

/// Refits the whole pipeline at each of the last `t0` origins, forecasting
/// one step ahead each time, and averages the per-origin errors for the
/// factor-augmented forecast and the covariate-only baseline. Origins are
/// independent and run in parallel; results are ordered by origin.
pub fn rolling_evaluate(
    y: ArrayView2<'_, f64>,
    z: ArrayView2<'_, f64>,
    cfg: &RollingConfig,
) -> Result<RollingReport> {
    let t = y.nrows();
    if z.nrows() != t {
        return Err(Error::Dimension {
            context: "rolling_evaluate",
            expected: format!("Z with {t} rows"),
            got: format!("{} rows", z.nrows()),
        });
    }
    if y.ncols() == 0 || z.ncols() == 0 {
        return Err(Error::Dimension {
            context: "rolling_evaluate",
            expected: "nonempty Y and Z".into(),
            got: format!("Y {}x{}, Z {}x{}", t, y.ncols(), z.nrows(), z.ncols()),
        });
    }
    let t0 = cfg.t0;
    if t0 == 0 {
        return Err(Error::Config("t0 must be >= 1".into()));
    }
    // minimum training span: every origin keeps at least 21 training rows
    if t0 + 20 >= t {
        return Err(Error::InsufficientSamples {
            context: "rolling_evaluate",
            needed: t0 + 21,
            got: t,
        });
    }
    let results: Vec<std::result::Result<OriginForecast, OriginFailure>> = (t - t0..t)
        .into_par_iter()
        .map(|tau| {
            run_origin(y, z, tau, cfg).map_err(|e| OriginFailure {
                tau,
                message: e.to_string(),
            })
        })
        .collect();
    let mut origins = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(o) => origins.push(o),
            Err(f) => failures.push(f),
        }
    }
    let n = origins.len() as f64;
    let (fe_with_factors, fe_regression_only) = if origins.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            origins.iter().map(|o| o.err_with_factors).sum::<f64>() / n,
            origins.iter().map(|o| o.err_regression_only).sum::<f64>() / n,
        )
    };
    Ok(RollingReport {
        fe_with_factors,
        fe_regression_only,
        origins,
        failures,
    })
}
