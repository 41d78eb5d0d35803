//! First-stage regression of each series on the observed covariates.
//!
//! Two estimators: component-wise OLS for small covariate counts, and a
//! row-wise lasso (cyclic coordinate descent with soft-thresholding) for
//! larger ones, with an optional OLS refit on the selected support.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionMode {
    Ols,
    Lasso,
}

/// Penalty level rule for the lasso. `Theory` scales sqrt(log(p*m)/T) by a
/// constant; `Fixed` uses the given value for every row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaRule {
    Theory { c: f64 },
    Fixed { lambda: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionConfig {
    pub mode: RegressionMode,
    #[serde(default = "default_lambda")]
    pub lambda: LambdaRule,
    /// Re-estimate the selected support by OLS and zero the rest.
    #[serde(default = "default_true")]
    pub refit: bool,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_lambda() -> LambdaRule {
    LambdaRule::Theory { c: 1.0 }
}
fn default_true() -> bool {
    true
}
fn default_max_iter() -> usize {
    5000
}
fn default_tol() -> f64 {
    1e-8
}

impl RegressionConfig {
    pub fn ols() -> Self {
        RegressionConfig {
            mode: RegressionMode::Ols,
            lambda: default_lambda(),
            refit: true,
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }

    pub fn lasso() -> Self {
        RegressionConfig {
            mode: RegressionMode::Lasso,
            ..Self::ols()
        }
    }
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self::ols()
    }
}

/// Fitted first-stage regression. `residuals` always satisfies
/// residuals = Y - Z bhat' - 1 intercept' exactly; OLS leaves the intercept
/// at zero while the lasso absorbs the column means there.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub bhat: Array2<f64>,
    pub intercept: Array1<f64>,
    pub residuals: Array2<f64>,
    /// Selected covariate indices per row (all columns for OLS).
    pub supports: Vec<Vec<usize>>,
    pub lambdas: Array1<f64>,
}

fn check_panel(context: &'static str, y: ArrayView2<'_, f64>, z: ArrayView2<'_, f64>) -> Result<(usize, usize, usize)> {
    let (t, p) = (y.nrows(), y.ncols());
    let m = z.ncols();
    if z.nrows() != t {
        return Err(Error::Dimension {
            context,
            expected: format!("Z with {t} rows"),
            got: format!("{} rows", z.nrows()),
        });
    }
    if t == 0 || p == 0 || m == 0 {
        return Err(Error::Dimension {
            context,
            expected: "nonempty Y and Z".into(),
            got: format!("Y {t}x{p}, Z {t}x{m}"),
        });
    }
    Ok((t, p, m))
}

/// Component-wise least squares on raw cross moments: row i of bhat is
/// ((1/T) sum z z')^{-1} ((1/T) sum y_i z). No internal centering; include a
/// ones column in Z for an intercept.
pub fn fit_ols(y: ArrayView2<'_, f64>, z: ArrayView2<'_, f64>) -> Result<RegressionFit> {
    let (t, p, m) = check_panel("fit_ols", y, z)?;
    if t <= m {
        return Err(Error::InsufficientSamples {
            context: "fit_ols",
            needed: m + 1,
            got: t,
        });
    }
    let gram = z.t().dot(&z) / t as f64;
    let (evals, _) = linalg::sym_eigen(gram.view())?;
    let emax = evals[0];
    let emin = evals[evals.len() - 1];
    if emin <= 0.0 || emax / emin >= 1e12 {
        return Err(Error::SingularGram {
            cond: if emin > 0.0 { emax / emin } else { f64::INFINITY },
        });
    }
    let cross = z.t().dot(&y) / t as f64; // m x p
    let bt = linalg::solve(gram.view(), cross.view())?; // m x p
    let bhat = bt.t().to_owned();
    let residuals = &y.to_owned() - &z.dot(&bt);
    Ok(RegressionFit {
        bhat,
        intercept: Array1::zeros(p),
        residuals,
        supports: vec![(0..m).collect(); p],
        lambdas: Array1::zeros(p),
    })
}

/// Soft-thresholding operator.
fn soft(x: f64, thr: f64) -> f64 {
    if x > thr {
        x - thr
    } else if x < -thr {
        x + thr
    } else {
        0.0
    }
}

/// Cyclic coordinate descent for
///   min_b (1/T) ||y - Zs b||^2 + lambda ||b||_1
/// on standardized columns ((1/T)||Zs_j||^2 = 1; `active[j]` false means the
/// column is excluded). Sweeps until the largest coefficient update is below
/// tol and the KKT conditions hold to 1e-7. Returns per-sweep objectives.
fn cd_solve(
    zs: &Array2<f64>,
    yc: ArrayView1<'_, f64>,
    lambda: f64,
    active: &[bool],
    max_iter: usize,
    tol: f64,
) -> std::result::Result<(Array1<f64>, Vec<f64>), (usize, f64, Vec<f64>)> {
    let t = zs.nrows();
    let m = zs.ncols();
    let tf = t as f64;
    let mut b = Array1::<f64>::zeros(m);
    let mut r = yc.to_owned();
    let mut objectives: Vec<f64> = Vec::new();
    let mut last_delta = f64::INFINITY;
    for _sweep in 0..max_iter {
        let mut max_delta = 0.0f64;
        for j in 0..m {
            if !active[j] {
                continue;
            }
            let col = zs.column(j);
            let rho = b[j] + col.dot(&r) / tf;
            let bj = soft(rho, lambda / 2.0);
            let delta = bj - b[j];
            if delta != 0.0 {
                r.scaled_add(-delta, &col);
                b[j] = bj;
                max_delta = max_delta.max(delta.abs());
            }
        }
        let obj = r.dot(&r) / tf + lambda * b.iter().map(|x| x.abs()).sum::<f64>();
        if let Some(&prev) = objectives.last() {
            debug_assert!(obj <= prev + 1e-9 * (1.0 + prev.abs()), "objective rose: {prev} -> {obj}");
        }
        objectives.push(obj);
        last_delta = max_delta;
        if max_delta <= tol {
            // KKT: inactive |(2/T) z_j' r| <= lambda; active matches the
            // subgradient sign. Resume sweeping if violated.
            let mut ok = true;
            for j in 0..m {
                if !active[j] {
                    continue;
                }
                let g = 2.0 * zs.column(j).dot(&r) / tf;
                let viol = if b[j] == 0.0 {
                    g.abs() - lambda
                } else {
                    (g - lambda * b[j].signum()).abs()
                };
                if viol > 1e-7 {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok((b, objectives));
            }
        }
    }
    Err((max_iter, last_delta, b.to_vec()))
}

/// Row-wise lasso. Columns of Z are standardized internally and each y row is
/// centered; fitted coefficients are mapped back to the original scale with
/// the mean absorbed into the intercept. The `Theory` rule sets
/// lambda = c sqrt(log(p m)/T). Rows are solved independently and in
/// parallel.
pub fn fit_lasso(
    y: ArrayView2<'_, f64>,
    z: ArrayView2<'_, f64>,
    cfg: &RegressionConfig,
) -> Result<RegressionFit> {
    let (t, p, m) = check_panel("fit_lasso", y, z)?;
    if t < 2 {
        return Err(Error::InsufficientSamples {
            context: "fit_lasso",
            needed: 2,
            got: t,
        });
    }
    let lambda = match cfg.lambda {
        LambdaRule::Theory { c } => {
            if c < 0.0 {
                return Err(Error::Config("theory lambda constant must be >= 0".into()));
            }
            c * (((p * m) as f64).ln() / t as f64).sqrt()
        }
        LambdaRule::Fixed { lambda } => {
            if lambda < 0.0 {
                return Err(Error::Config("lambda must be >= 0".into()));
            }
            lambda
        }
    };

    let (zc, zmean) = linalg::center_columns(z);
    let mut zs = zc;
    let mut scale = Array1::<f64>::zeros(m);
    let mut active = vec![true; m];
    for j in 0..m {
        let sj = (zs.column(j).dot(&zs.column(j)) / t as f64).sqrt();
        if sj <= 1e-12 * (1.0 + zmean[j].abs()) {
            // constant column: excluded from the penalized solve
            active[j] = false;
            scale[j] = 1.0;
            zs.column_mut(j).fill(0.0);
        } else {
            scale[j] = sj;
            zs.column_mut(j).mapv_inplace(|x| x / sj);
        }
    }

    let rows: Vec<Result<(Array1<f64>, f64, Vec<usize>)>> = (0..p)
        .into_par_iter()
        .map(|i| {
            let yi = y.column(i);
            let ymean = yi.sum() / t as f64;
            let yc = yi.mapv(|v| v - ymean);
            let (bstd, _) = cd_solve(&zs, yc.view(), lambda, &active, cfg.max_iter, cfg.tol)
                .map_err(|(iters, last_delta, last_iterate)| Error::Convergence {
                    row: i,
                    iters,
                    last_delta,
                    last_iterate,
                })?;
            let support: Vec<usize> = (0..m).filter(|&j| bstd[j] != 0.0).collect();
            debug_assert!(support.len() <= m.min(t));
            // original scale
            let mut b = Array1::<f64>::zeros(m);
            for &j in &support {
                b[j] = bstd[j] / scale[j];
            }
            if cfg.refit && !support.is_empty() {
                let k = support.len();
                if k >= t {
                    return Err(Error::InsufficientSamples {
                        context: "fit_lasso refit",
                        needed: k + 1,
                        got: t,
                    });
                }
                let mut zsub = Array2::<f64>::zeros((t, k));
                for (c, &j) in support.iter().enumerate() {
                    // centered original-scale column
                    zsub.column_mut(c).assign(&zs.column(j).mapv(|x| x * scale[j]));
                }
                let gram = zsub.t().dot(&zsub) / t as f64;
                let (evals, _) = linalg::sym_eigen(gram.view())?;
                let emax = evals[0];
                let emin = evals[evals.len() - 1];
                if emin <= 0.0 || emax / emin >= 1e12 {
                    return Err(Error::SingularGram {
                        cond: if emin > 0.0 { emax / emin } else { f64::INFINITY },
                    });
                }
                let cross = zsub.t().dot(&yc).insert_axis(Axis(1)) / t as f64;
                let bsub = linalg::solve(gram.view(), cross.view())?;
                for (c, &j) in support.iter().enumerate() {
                    b[j] = bsub[[c, 0]];
                }
            }
            let intercept = ymean - b.dot(&zmean);
            Ok((b, intercept, support))
        })
        .collect();

    let mut bhat = Array2::<f64>::zeros((p, m));
    let mut intercept = Array1::<f64>::zeros(p);
    let mut supports = Vec::with_capacity(p);
    for (i, row) in rows.into_iter().enumerate() {
        let (b, c, support) = row?;
        bhat.row_mut(i).assign(&b);
        intercept[i] = c;
        supports.push(support);
    }
    let mut residuals = &y.to_owned() - &z.dot(&bhat.t());
    for (mut col, &c) in residuals.columns_mut().into_iter().zip(intercept.iter()) {
        col.mapv_inplace(|v| v - c);
    }
    Ok(RegressionFit {
        bhat,
        intercept,
        residuals,
        supports,
        lambdas: Array1::from_elem(p, lambda),
    })
}

/// Dispatch on the configured mode.
pub fn fit(y: ArrayView2<'_, f64>, z: ArrayView2<'_, f64>, cfg: &RegressionConfig) -> Result<RegressionFit> {
    match cfg.mode {
        RegressionMode::Ols => fit_ols(y, z),
        RegressionMode::Lasso => fit_lasso(y, z, cfg),
    }
}

/// Recomputes residuals for a fit against (possibly new) data.
pub fn residuals(fit: &RegressionFit, y: ArrayView2<'_, f64>, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (_, p, m) = check_panel("residuals", y, z)?;
    if fit.bhat.nrows() != p || fit.bhat.ncols() != m {
        return Err(Error::Dimension {
            context: "residuals",
            expected: format!("bhat {}x{}", p, m),
            got: format!("bhat {}x{}", fit.bhat.nrows(), fit.bhat.ncols()),
        });
    }
    let mut res = &y.to_owned() - &z.dot(&fit.bhat.t());
    for (mut col, &c) in res.columns_mut().into_iter().zip(fit.intercept.iter()) {
        col.mapv_inplace(|v| v - c);
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn gauss(t: usize, m: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Array2::from_shape_fn((t, m), |_| rng.sample::<f64, _>(rand_distr::StandardNormal))
    }

    /// Proximal gradient (ISTA) oracle for the same objective, run to high
    /// precision on small instances.
    fn ista_oracle(zs: &Array2<f64>, yc: &Array1<f64>, lambda: f64, iters: usize) -> Array1<f64> {
        let t = zs.nrows() as f64;
        let m = zs.ncols();
        let gram = zs.t().dot(zs) / t;
        let (evals, _) = crate::linalg::sym_eigen(gram.view()).unwrap();
        let lip = 2.0 * evals[0];
        let mut b = Array1::<f64>::zeros(m);
        for _ in 0..iters {
            let r = yc - &zs.dot(&b);
            let grad = zs.t().dot(&r) * (-2.0 / t);
            let step = &b - &(grad / lip);
            b = step.mapv(|x| soft(x, lambda / lip));
        }
        b
    }

    fn objective(zs: &Array2<f64>, yc: &Array1<f64>, lambda: f64, b: &Array1<f64>) -> f64 {
        let r = yc - &zs.dot(b);
        r.dot(&r) / zs.nrows() as f64 + lambda * b.iter().map(|x| x.abs()).sum::<f64>()
    }

    #[test]
    fn ols_exact_recovery() {
        let z = gauss(60, 4, 1);
        let b = array![[1.0, -2.0, 0.5, 3.0], [0.0, 1.0, 1.0, -1.0]];
        let y = z.dot(&b.t());
        let fit = fit_ols(y.view(), z.view()).unwrap();
        let err = (&fit.bhat - &b).mapv(f64::abs).iter().fold(0.0f64, |a, &x| a.max(x));
        assert!(err < 1e-10);
        assert!(fit.residuals.iter().all(|&x| x.abs() < 1e-10));
    }

    #[test]
    fn ols_intercept_only() {
        let z = Array2::from_elem((10, 1), 1.0);
        let y = Array2::from_elem((10, 3), 4.5);
        let fit = fit_ols(y.view(), z.view()).unwrap();
        for i in 0..3 {
            assert!((fit.bhat[[i, 0]] - 4.5).abs() < 1e-12);
        }
    }

    #[test]
    fn ols_matches_normal_equations_oracle() {
        let z = gauss(25, 3, 2);
        let y = gauss(25, 2, 3);
        let fit = fit_ols(y.view(), z.view()).unwrap();
        // hand-built normal equations per row
        let t = 25.0;
        let mut gram = Array2::<f64>::zeros((3, 3));
        for a in 0..3 {
            for b in 0..3 {
                for ti in 0..25 {
                    gram[[a, b]] += z[[ti, a]] * z[[ti, b]] / t;
                }
            }
        }
        for i in 0..2 {
            let mut cross = Array2::<f64>::zeros((3, 1));
            for a in 0..3 {
                for ti in 0..25 {
                    cross[[a, 0]] += y[[ti, i]] * z[[ti, a]] / t;
                }
            }
            let bi = crate::linalg::solve(gram.view(), cross.view()).unwrap();
            for a in 0..3 {
                assert!((fit.bhat[[i, a]] - bi[[a, 0]]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn ols_residuals_orthogonal_to_z() {
        let z = gauss(80, 5, 4);
        let y = gauss(80, 7, 5);
        let fit = fit_ols(y.view(), z.view()).unwrap();
        let cross = z.t().dot(&fit.residuals) / 80.0;
        assert!(cross.iter().all(|&x| x.abs() < 1e-10));
    }

    #[test]
    fn ols_singular_gram() {
        let mut z = gauss(30, 3, 6);
        let dup = z.column(0).to_owned();
        z.column_mut(2).assign(&dup);
        let y = gauss(30, 2, 7);
        assert!(matches!(fit_ols(y.view(), z.view()), Err(Error::SingularGram { .. })));
    }

    #[test]
    fn ols_insufficient_samples() {
        let z = gauss(3, 5, 8);
        let y = gauss(3, 2, 9);
        assert!(matches!(
            fit_ols(y.view(), z.view()),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn lasso_zero_above_lambda_max() {
        let z = gauss(50, 4, 10);
        let y = gauss(50, 2, 11);
        // lambda_max on standardized columns and centered y
        let (zc, _) = crate::linalg::center_columns(z.view());
        let mut zs = zc.clone();
        for j in 0..4 {
            let sj = (zs.column(j).dot(&zs.column(j)) / 50.0).sqrt();
            zs.column_mut(j).mapv_inplace(|x| x / sj);
        }
        let mut lmax = 0.0f64;
        for i in 0..2 {
            let yc = y.column(i).mapv(|v| v - y.column(i).sum() / 50.0);
            for j in 0..4 {
                lmax = lmax.max((2.0 / 50.0 * zs.column(j).dot(&yc)).abs());
            }
        }
        let cfg = RegressionConfig {
            mode: RegressionMode::Lasso,
            lambda: LambdaRule::Fixed { lambda: lmax * 1.0001 },
            refit: false,
            ..RegressionConfig::lasso()
        };
        let fit = fit_lasso(y.view(), z.view(), &cfg).unwrap();
        assert!(fit.bhat.iter().all(|&x| x == 0.0));
        assert!(fit.supports.iter().all(|s| s.is_empty()));
    }

    #[test]
    fn lasso_matches_ista_oracle() {
        // tiny instances solved by an independent convex method
        for seed in 0..6u64 {
            let t = 40;
            let m = 3;
            let zs = {
                let (zc, _) = crate::linalg::center_columns(gauss(t, m, seed).view());
                let mut zs = zc;
                for j in 0..m {
                    let sj = (zs.column(j).dot(&zs.column(j)) / t as f64).sqrt();
                    zs.column_mut(j).mapv_inplace(|x| x / sj);
                }
                zs
            };
            let btrue = array![1.5, 0.0, -0.7];
            let noise = gauss(t, 1, seed + 50);
            let yc = {
                let raw = zs.dot(&btrue) + noise.column(0).mapv(|x| 0.3 * x);
                let mean = raw.sum() / t as f64;
                raw.mapv(|v| v - mean)
            };
            let lambda = 0.25;
            let (b_cd, objs) =
                cd_solve(&zs, yc.view(), lambda, &[true; 3], 5000, 1e-10).unwrap();
            let b_ista = ista_oracle(&zs, &yc, lambda, 200_000);
            for j in 0..m {
                assert!(
                    (b_cd[j] - b_ista[j]).abs() < 1e-6,
                    "seed {seed} coef {j}: {} vs {}",
                    b_cd[j],
                    b_ista[j]
                );
            }
            let o_cd = objective(&zs, &yc, lambda, &b_cd);
            let o_ista = objective(&zs, &yc, lambda, &b_ista);
            assert!((o_cd - o_ista).abs() < 1e-6);
            // objective decreased monotonically
            for w in objs.windows(2) {
                assert!(w[1] <= w[0] + 1e-10);
            }
        }
    }

    #[test]
    fn lasso_noiseless_recovery_small_lambda() {
        let z = gauss(100, 3, 20);
        let b = array![[2.0, -1.0, 0.5]];
        let y = z.dot(&b.t());
        let cfg = RegressionConfig {
            mode: RegressionMode::Lasso,
            lambda: LambdaRule::Fixed { lambda: 1e-10 },
            refit: false,
            max_iter: 50_000,
            tol: 1e-12,
        };
        let fit = fit_lasso(y.view(), z.view(), &cfg).unwrap();
        for j in 0..3 {
            assert!((fit.bhat[[0, j]] - b[[0, j]]).abs() < 1e-6);
        }
    }

    #[test]
    fn lasso_theory_lambda_value() {
        let z = gauss(50, 4, 21);
        let y = gauss(50, 3, 22);
        let cfg = RegressionConfig {
            lambda: LambdaRule::Theory { c: 2.0 },
            ..RegressionConfig::lasso()
        };
        let fit = fit_lasso(y.view(), z.view(), &cfg).unwrap();
        let want = 2.0 * ((3.0f64 * 4.0).ln() / 50.0).sqrt();
        assert!(fit.lambdas.iter().all(|&l| (l - want).abs() < 1e-12));
    }

    #[test]
    fn lasso_refit_matches_ols_on_support() {
        // strong sparse signal: support found exactly, refit = oracle OLS
        let t = 200;
        let z = gauss(t, 6, 23);
        let mut y = Array2::<f64>::zeros((t, 1));
        for ti in 0..t {
            y[[ti, 0]] = 3.0 * z[[ti, 0]] - 2.0 * z[[ti, 3]];
        }
        let noise = gauss(t, 1, 24);
        y = &y + &noise.mapv(|x| 0.1 * x);
        let cfg = RegressionConfig {
            mode: RegressionMode::Lasso,
            lambda: LambdaRule::Fixed { lambda: 0.2 },
            refit: true,
            ..RegressionConfig::lasso()
        };
        let fit = fit_lasso(y.view(), z.view(), &cfg).unwrap();
        assert_eq!(fit.supports[0], vec![0, 3]);
        // oracle: centered OLS on columns {0,3}
        let (zc, _) = crate::linalg::center_columns(z.view());
        let zsub = {
            let mut s = Array2::<f64>::zeros((t, 2));
            s.column_mut(0).assign(&zc.column(0));
            s.column_mut(1).assign(&zc.column(3));
            s
        };
        let ymean = y.column(0).sum() / t as f64;
        let yc = y.column(0).mapv(|v| v - ymean).insert_axis(Axis(1));
        let gram = zsub.t().dot(&zsub) / t as f64;
        let cross = zsub.t().dot(&yc) / t as f64;
        let bo = crate::linalg::solve(gram.view(), cross.view()).unwrap();
        assert!((fit.bhat[[0, 0]] - bo[[0, 0]]).abs() < 1e-8);
        assert!((fit.bhat[[0, 3]] - bo[[1, 0]]).abs() < 1e-8);
        assert_eq!(fit.bhat[[0, 1]], 0.0);
    }

    #[test]
    fn lasso_constant_column_dropped() {
        let mut z = gauss(60, 3, 25);
        z.column_mut(1).fill(7.0);
        let y = gauss(60, 2, 26);
        let fit = fit_lasso(y.view(), z.view(), &RegressionConfig::lasso()).unwrap();
        assert!(fit.bhat.column(1).iter().all(|&x| x == 0.0));
        assert!(fit.bhat.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn residual_reconstruction_identity() {
        let z = gauss(70, 5, 27) + 2.0; // nonzero means exercise the intercept
        let y = gauss(70, 4, 28) - 1.0;
        let cfg = RegressionConfig {
            lambda: LambdaRule::Fixed { lambda: 0.05 },
            ..RegressionConfig::lasso()
        };
        let fit = fit_lasso(y.view(), z.view(), &cfg).unwrap();
        let manual = residuals(&fit, y.view(), z.view()).unwrap();
        let diff = (&manual - &fit.residuals).mapv(f64::abs);
        assert!(diff.iter().all(|&x| x < 1e-10));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn lasso_kkt_holds(seed in 0u64..500, t in 30usize..80, m in 2usize..6) {
            let z = gauss(t, m, seed);
            let y = gauss(t, 1, seed.wrapping_add(1000));
            let lambda = 0.1 + (seed % 7) as f64 * 0.05;
            let cfg = RegressionConfig {
                mode: RegressionMode::Lasso,
                lambda: LambdaRule::Fixed { lambda },
                refit: false,
                ..RegressionConfig::lasso()
            };
            let fit = fit_lasso(y.view(), z.view(), &cfg).unwrap();
            // verify KKT on the standardized problem
            let (zc, _) = crate::linalg::center_columns(z.view());
            let mut zs = zc;
            let mut scale = vec![0.0; m];
            for j in 0..m {
                let sj = (zs.column(j).dot(&zs.column(j)) / t as f64).sqrt();
                scale[j] = sj;
                zs.column_mut(j).mapv_inplace(|x| x / sj);
            }
            let ymean = y.column(0).sum() / t as f64;
            let yc = y.column(0).mapv(|v| v - ymean);
            let bstd = Array1::from_iter((0..m).map(|j| fit.bhat[[0, j]] * scale[j]));
            let r = &yc - &zs.dot(&bstd);
            for j in 0..m {
                let g = 2.0 * zs.column(j).dot(&r) / t as f64;
                if fit.bhat[[0, j]] == 0.0 {
                    prop_assert!(g.abs() <= lambda + 1e-6, "inactive KKT: |{g}| > {lambda}");
                } else {
                    prop_assert!((g - lambda * fit.bhat[[0, j]].signum()).abs() <= 1e-6);
                }
            }
            // support size cap
            prop_assert!(fit.supports[0].len() <= m.min(t));
        }

        #[test]
        fn lasso_refit_never_enlarges_support(seed in 0u64..200) {
            let z = gauss(60, 5, seed);
            let y = gauss(60, 2, seed.wrapping_add(313));
            let base = RegressionConfig {
                mode: RegressionMode::Lasso,
                lambda: LambdaRule::Fixed { lambda: 0.15 },
                refit: false,
                ..RegressionConfig::lasso()
            };
            let plain = fit_lasso(y.view(), z.view(), &base).unwrap();
            let refit = fit_lasso(y.view(), z.view(), &RegressionConfig { refit: true, ..base }).unwrap();
            prop_assert_eq!(&plain.supports, &refit.supports);
            for i in 0..2 {
                for j in 0..5 {
                    if !plain.supports[i].contains(&j) {
                        prop_assert_eq!(refit.bhat[[i, j]], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn ols_dispatch() {
        let z = gauss(40, 3, 30);
        let y = gauss(40, 2, 31);
        let fit = fit(y.view(), z.view(), &RegressionConfig::ols()).unwrap();
        assert_eq!(fit.supports[0].len(), 3);
        assert_eq!(fit.residuals.dim(), (40, 2));
    }
}
