//! High-dimensional white-noise testing on rank autocorrelations.
//!
//! The statistic is the largest sqrt(T)-scaled absolute Spearman
//! cross-correlation over lags 1..N and all component pairs. Under the null
//! the entries are asymptotically independent standard normals, so the max
//! is calibrated through P(max <= x) ~ exp(-2 K (1 - Phi(x))) with
//! K = N d'^2 effective comparisons. The number of dynamic factors is read
//! off a sequence of such tests on nested tail subvectors of the rotated
//! residual panel: the first subvector accepted as white noise marks the end
//! of the factor content.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result, Warning};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhiteNoiseConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Number of lags N entering the max statistic.
    #[serde(default = "default_n_lags")]
    pub n_lags: usize,
    /// Cap on tested hypotheses; `None` means min(p, 30).
    #[serde(default)]
    pub i_max: Option<usize>,
    /// When p - m >= T, only the first floor(epsilon_trim * T) components
    /// are kept.
    #[serde(default = "default_epsilon_trim")]
    pub epsilon_trim: f64,
}

fn default_alpha() -> f64 {
    0.05
}
fn default_n_lags() -> usize {
    10
}
fn default_epsilon_trim() -> f64 {
    0.75
}

impl Default for WhiteNoiseConfig {
    fn default() -> Self {
        WhiteNoiseConfig {
            alpha: default_alpha(),
            n_lags: default_n_lags(),
            i_max: None,
            epsilon_trim: default_epsilon_trim(),
        }
    }
}

impl WhiteNoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if self.n_lags == 0 {
            return Err(Error::Config("n_lags must be >= 1".into()));
        }
        if !(0.0 < self.epsilon_trim && self.epsilon_trim <= 1.0) {
            return Err(Error::Config(format!(
                "epsilon_trim must be in (0,1], got {}",
                self.epsilon_trim
            )));
        }
        Ok(())
    }
}

/// One step of the sequential test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WhiteNoiseDecision {
    /// Hypothesis index i (1-based): tests components i..tail.
    pub hypothesis: usize,
    /// Tested dimension after trimming, before the PCA step.
    pub dim: usize,
    /// Dimension d' actually entering the statistic.
    pub dim_after_pca: usize,
    pub statistic: f64,
    pub critical_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    pub rhat: usize,
    pub decisions: Vec<WhiteNoiseDecision>,
    pub warnings: Vec<Warning>,
}

/// Centers a panel and returns unit-variance principal component scores,
/// keeping components with eigenvalue above 1e-10 times the largest. The
/// in-sample covariance of the output is exactly the identity.
pub fn pca_orthogonalize(u: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (t, d) = (u.nrows(), u.ncols());
    if t < 2 || d < 1 {
        return Err(Error::InsufficientSamples {
            context: "pca_orthogonalize",
            needed: 2,
            got: t,
        });
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateInput {
            context: "pca_orthogonalize",
            message: "non-finite entries".into(),
        });
    }
    let (uc, _) = crate::linalg::center_columns(u);
    let cov = uc.t().dot(&uc) / t as f64;
    let (vals, vecs) = crate::linalg::sym_eigen(cov.view())?;
    let lead = vals[0];
    if lead <= 0.0 {
        return Err(Error::DegenerateInput {
            context: "pca_orthogonalize",
            message: "zero-variance panel".into(),
        });
    }
    let keep: usize = vals.iter().take_while(|&&v| v > 1e-10 * lead).count();
    let vk = vecs.slice(s![.., ..keep]);
    let mut scores = uc.dot(&vk);
    for (j, mut col) in scores.columns_mut().into_iter().enumerate() {
        let inv = 1.0 / vals[j].sqrt();
        col.mapv_inplace(|x| x * inv);
    }
    Ok(scores)
}

/// Average ranks (1-based) with ties sharing their mean rank.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Z-scored ranks of each column over a window; constant columns yield zero
/// vectors and are reported.
fn zranks(window: ArrayView2<'_, f64>, degenerate: &mut Vec<usize>) -> Array2<f64> {
    let (w, d) = (window.nrows(), window.ncols());
    let mut out = Array2::<f64>::zeros((w, d));
    let mut buf = Vec::with_capacity(w);
    for j in 0..d {
        buf.clear();
        buf.extend(window.column(j).iter().copied());
        let ranks = average_ranks(&buf);
        let mean = (w as f64 + 1.0) / 2.0;
        let var: f64 = ranks.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / w as f64;
        if var <= 0.0 {
            if !degenerate.contains(&j) {
                degenerate.push(j);
            }
            continue; // leave the column at zero
        }
        let inv = 1.0 / var.sqrt();
        for (i, r) in ranks.iter().enumerate() {
            out[[i, j]] = (r - mean) * inv;
        }
    }
    out
}

pub struct RankCorr {
    /// gamma[(j, l)] = Spearman correlation of component j at t with
    /// component l at t - k.
    pub gamma: Array2<f64>,
    /// Columns whose window was constant (entries forced to 0).
    pub degenerate: Vec<usize>,
}

/// Lag-k Spearman cross-correlation matrix over t = k+1..T.
pub fn rank_autocorr(u: ArrayView2<'_, f64>, k: usize) -> Result<RankCorr> {
    let (t, d) = (u.nrows(), u.ncols());
    if d == 0 {
        return Err(Error::Dimension {
            context: "rank_autocorr",
            expected: "at least one column".into(),
            got: "0 columns".into(),
        });
    }
    if k == 0 || k + 2 > t {
        return Err(Error::Lag {
            k0: k,
            max: t.saturating_sub(2),
            t,
        });
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateInput {
            context: "rank_autocorr",
            message: "non-finite entries".into(),
        });
    }
    let w = t - k;
    let mut degenerate = Vec::new();
    let head = zranks(u.slice(s![k.., ..]), &mut degenerate);
    let tail = zranks(u.slice(s![..w, ..]), &mut degenerate);
    let gamma = head.t().dot(&tail) / w as f64;
    degenerate.sort_unstable();
    Ok(RankCorr { gamma, degenerate })
}

/// Max over lags 1..=n_lags and all pairs of sqrt(T) |rank correlation|,
/// plus the effective comparison count K = n_lags * d'^2.
pub fn hdwn_statistic(
    u: ArrayView2<'_, f64>,
    n_lags: usize,
) -> Result<(f64, usize, Vec<Warning>)> {
    let (t, d) = (u.nrows(), u.ncols());
    if n_lags == 0 || n_lags + 2 > t {
        return Err(Error::Lag {
            k0: n_lags,
            max: t.saturating_sub(2),
            t,
        });
    }
    let mut stat = 0.0f64;
    let mut warnings = Vec::new();
    let sqrt_t = (t as f64).sqrt();
    for k in 1..=n_lags {
        let rc = rank_autocorr(u, k)?;
        for &col in &rc.degenerate {
            let w = Warning::DegenerateColumn { column: col };
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        let m = rc.gamma.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        stat = stat.max(sqrt_t * m);
    }
    Ok((stat, n_lags * d * d, warnings))
}

/// Critical value q solving exp(-2 K (1 - Phi(q))) = 1 - alpha, i.e.
/// q = Phi^{-1}(1 - (-log(1-alpha)) / (2K)).
pub fn gumbel_critical_value(k_effective: usize, alpha: f64) -> Result<f64> {
    if k_effective == 0 {
        return Err(Error::Config("k_effective must be >= 1".into()));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0,1), got {alpha}")));
    }
    let tail = (-(1.0 - alpha).ln()) / (2.0 * k_effective as f64);
    if tail >= 1.0 {
        return Err(Error::Config(format!(
            "alpha {alpha} too large for k_effective {k_effective}"
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    Ok(normal.inverse_cdf(1.0 - tail))
}

/// Sequential selection of the number of dynamic factors.
///
/// `e` is the T x p residual panel, `ghat` the p x p orthonormal frame that
/// orders components by decreasing lagged-autocovariance signal, and
/// `m_regressors` the first-stage covariate count. Rotated components
/// u_t = ghat' e_t are trimmed (the last m dropped when m <= 0.1 p; when
/// p - m >= T only the first floor(epsilon_trim T) kept), then hypothesis i
/// tests components i..tail for white noise. The first non-rejection returns
/// rhat = i - 1; hitting the cap returns rhat = i_max with a warning.
pub fn select_num_factors(
    e: ArrayView2<'_, f64>,
    ghat: ArrayView2<'_, f64>,
    m_regressors: usize,
    cfg: &WhiteNoiseConfig,
) -> Result<SelectionResult> {
    cfg.validate()?;
    let (t, p) = (e.nrows(), e.ncols());
    if ghat.nrows() != p || ghat.ncols() != p {
        return Err(Error::Dimension {
            context: "select_num_factors",
            expected: format!("{p}x{p} frame"),
            got: format!("{}x{}", ghat.nrows(), ghat.ncols()),
        });
    }
    if t < cfg.n_lags + 2 {
        return Err(Error::InsufficientSamples {
            context: "select_num_factors",
            needed: cfg.n_lags + 2,
            got: t,
        });
    }
    let u_full = e.dot(&ghat);
    let mut tail = p;
    if (m_regressors as f64) <= 0.1 * p as f64 {
        tail = p - m_regressors;
    }
    if p.saturating_sub(m_regressors) >= t {
        tail = tail.min((cfg.epsilon_trim * t as f64).floor() as usize);
    }
    let i_max = cfg.i_max.unwrap_or_else(|| p.min(30));
    if i_max == 0 {
        return Err(Error::Config("i_max must be >= 1".into()));
    }
    let mut decisions = Vec::new();
    let mut warnings = Vec::new();
    for i in 1..=i_max {
        if tail < i + 1 {
            return Err(Error::Dimension {
                context: "select_num_factors",
                expected: format!("tested dimension >= 2 at hypothesis {i}"),
                got: format!("{}", tail as i64 - i as i64 + 1),
            });
        }
        let sub = u_full.slice(s![.., i - 1..tail]);
        let scores = pca_orthogonalize(sub)?;
        let dprime = scores.ncols();
        let (stat, k_eff, mut warns) = hdwn_statistic(scores.view(), cfg.n_lags)?;
        warnings.append(&mut warns);
        let crit = gumbel_critical_value(k_eff, cfg.alpha)?;
        let reject = stat > crit;
        decisions.push(WhiteNoiseDecision {
            hypothesis: i,
            dim: tail - i + 1,
            dim_after_pca: dprime,
            statistic: stat,
            critical_value: crit,
            reject,
        });
        if !reject {
            return Ok(SelectionResult {
                rhat: i - 1,
                decisions,
                warnings,
            });
        }
    }
    warnings.push(Warning::CapReached { cap: i_max });
    Ok(SelectionResult {
        rhat: i_max,
        decisions,
        warnings,
    })
}

/// Convenience wrapper: tests a whole panel for white noise at level alpha.
pub fn is_white_noise(u: ArrayView2<'_, f64>, cfg: &WhiteNoiseConfig) -> Result<bool> {
    cfg.validate()?;
    let scores = pca_orthogonalize(u)?;
    let (stat, k_eff, _) = hdwn_statistic(scores.view(), cfg.n_lags)?;
    let crit = gumbel_critical_value(k_eff, cfg.alpha)?;
    Ok(stat <= crit)
}
