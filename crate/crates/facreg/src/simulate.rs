//! Synthetic panel generation with observed covariates, dynamic latent
//! factors, and spiked idiosyncratic noise.
//!
//! y_t = B z_t + L1 f_t + L2 eps_t, with z_t and f_t diagonal AR(1) processes
//! and eps_t iid Gaussian. Loadings come from the SVD of a seeded Gaussian
//! matrix: L1 spans r directions scaled p^((1-delta1)/2); L2 puts s spiked
//! noise directions at p^((1-delta2)/2) and the rest at `tail_scale`.
//! delta1 = delta2 = 0 is the strong-signal case; positive deltas weaken it.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimDesign {
    /// Dense coefficient matrix, few covariates.
    Example1,
    /// Sparse coefficient rows, many covariates.
    Example2,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    pub design: SimDesign,
    pub p: usize,
    pub t: usize,
    pub m: usize,
    pub r: usize,
    pub s: usize,
    pub delta1: f64,
    pub delta2: f64,
    #[serde(default = "default_tail_scale")]
    pub tail_scale: f64,
    /// Nonzeros per coefficient row under `Example2`.
    #[serde(default = "default_sparsity")]
    pub sparsity: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub seed: u64,
}

fn default_tail_scale() -> f64 {
    2.0
}
fn default_sparsity() -> usize {
    5
}
fn default_burn_in() -> usize {
    200
}

impl SimScenario {
    pub fn example1(p: usize, t: usize, delta1: f64, delta2: f64, seed: u64) -> Self {
        SimScenario {
            design: SimDesign::Example1,
            p,
            t,
            m: 5,
            r: 3,
            s: 3,
            delta1,
            delta2,
            tail_scale: default_tail_scale(),
            sparsity: default_sparsity(),
            burn_in: default_burn_in(),
            seed,
        }
    }

    pub fn example2(p: usize, t: usize, delta1: f64, delta2: f64, seed: u64) -> Self {
        SimScenario {
            design: SimDesign::Example2,
            m: 40,
            ..Self::example1(p, t, delta1, delta2, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::Config("r must be >= 1".into()));
        }
        if self.p <= self.r + self.s {
            return Err(Error::Config(format!(
                "p = {} must exceed r + s = {}",
                self.p,
                self.r + self.s
            )));
        }
        if self.m == 0 || self.t < 2 {
            return Err(Error::Config("need m >= 1 and t >= 2".into()));
        }
        if self.design == SimDesign::Example2 && self.sparsity > self.m {
            return Err(Error::Config(format!(
                "sparsity {} exceeds m = {}",
                self.sparsity, self.m
            )));
        }
        if !(0.0..=1.0).contains(&self.delta1) || !(0.0..=1.0).contains(&self.delta2) {
            return Err(Error::Config("delta1, delta2 must lie in [0, 1]".into()));
        }
        if self.tail_scale <= 0.0 {
            return Err(Error::Config("tail_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Everything a replicate knows about itself, kept for scoring fits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario: SimScenario,
    pub y: Array2<f64>,
    pub z: Array2<f64>,
    pub f: Array2<f64>,
    pub eps: Array2<f64>,
    pub b: Array2<f64>,
    pub l1: Array2<f64>,
    pub l2: Array2<f64>,
    /// AR(1) diagonals of the covariate and factor processes.
    pub phi1: Array1<f64>,
    pub phi2: Array1<f64>,
}

/// SplitMix64 mix step.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Stream-split seed derivation: independent child seed for (master, index).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

fn gaussian_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
}

/// Loading matrices from the SVD of a seeded p x p Gaussian draw.
/// L1 = Q1 p^((1-delta1)/2); L2 scales the first s remaining directions by
/// p^((1-delta2)/2) and the tail by `tail_scale`.
pub fn make_loadings(
    p: usize,
    r: usize,
    s: usize,
    delta1: f64,
    delta2: f64,
    tail_scale: f64,
    rng: &mut ChaCha12Rng,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if r == 0 || p <= r + s {
        return Err(Error::Config(format!(
            "make_loadings needs r >= 1 and p > r + s (got p = {p}, r = {r}, s = {s})"
        )));
    }
    let g = gaussian_matrix(rng, p, p);
    let (q, _, _) = linalg::svd(g.view())?;
    let pf = p as f64;
    let sig1 = pf.powf((1.0 - delta1) / 2.0);
    let sig2 = pf.powf((1.0 - delta2) / 2.0);
    let l1 = q.slice(ndarray::s![.., ..r]).mapv(|x| x * sig1);
    let mut l2 = q.slice(ndarray::s![.., r..]).to_owned();
    for (j, mut col) in l2.columns_mut().into_iter().enumerate() {
        let scale = if j < s { sig2 } else { tail_scale };
        col.mapv_inplace(|x| x * scale);
    }
    Ok((l1, l2))
}

/// Diagonal AR(1) panel: x_t = diag(phi) x_{t-1} + e_t, e_t ~ N(0, I),
/// started at zero with `burn_in` discarded steps.
pub fn ar1_series(t: usize, phi: &Array1<f64>, burn_in: usize, rng: &mut ChaCha12Rng) -> Array2<f64> {
    let d = phi.len();
    let mut x = Array1::<f64>::zeros(d);
    let mut out = Array2::<f64>::zeros((t, d));
    for step in 0..burn_in + t {
        for j in 0..d {
            let e: f64 = rng.sample(StandardNormal);
            x[j] = phi[j] * x[j] + e;
        }
        if step >= burn_in {
            out.row_mut(step - burn_in).assign(&x);
        }
    }
    out
}

fn ar_coefficients(rng: &mut ChaCha12Rng, d: usize) -> Array1<f64> {
    let u = Uniform::new(0.5, 0.9).expect("static bounds");
    Array1::from_shape_fn(d, |_| rng.sample(u))
}

/// Coefficient magnitude: sign times U(1, 2).
fn signed_unit_coef(rng: &mut ChaCha12Rng) -> f64 {
    let u = Uniform::new(1.0, 2.0).expect("static bounds");
    let mag: f64 = rng.sample(u);
    if rng.random::<bool>() {
        mag
    } else {
        -mag
    }
}

/// The draw order is fixed (loadings, phi1, phi2, B, z, f, eps) so a given
/// seed always produces a bitwise-identical truth.
fn simulate_common(sc: &SimScenario, sparse: bool) -> Result<GroundTruth> {
    sc.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(sc.seed);
    let (l1, l2) = make_loadings(sc.p, sc.r, sc.s, sc.delta1, sc.delta2, sc.tail_scale, &mut rng)?;
    let phi1 = ar_coefficients(&mut rng, sc.m);
    let phi2 = ar_coefficients(&mut rng, sc.r);
    let mut b = Array2::<f64>::zeros((sc.p, sc.m));
    if sparse {
        for mut row in b.rows_mut() {
            let idx = rand::seq::index::sample(&mut rng, sc.m, sc.sparsity);
            for j in idx.iter() {
                row[j] = signed_unit_coef(&mut rng);
            }
        }
    } else {
        for mut row in b.rows_mut() {
            for v in row.iter_mut() {
                *v = signed_unit_coef(&mut rng);
            }
        }
    }
    let z = ar1_series(sc.t, &phi1, sc.burn_in, &mut rng);
    let f = ar1_series(sc.t, &phi2, sc.burn_in, &mut rng);
    let eps = gaussian_matrix(&mut rng, sc.t, sc.p - sc.r);
    let y = z.dot(&b.t()) + f.dot(&l1.t()) + eps.dot(&l2.t());
    Ok(GroundTruth {
        scenario: *sc,
        y,
        z,
        f,
        eps,
        b,
        l1,
        l2,
        phi1,
        phi2,
    })
}

/// Dense-coefficient design: every entry of B is sign * U(1, 2).
pub fn simulate_example1(sc: &SimScenario) -> Result<GroundTruth> {
    simulate_common(sc, false)
}

/// Sparse-coefficient design: exactly `sparsity` nonzeros per row of B.
pub fn simulate_example2(sc: &SimScenario) -> Result<GroundTruth> {
    simulate_common(sc, true)
}

/// Dispatch on the scenario's design.
pub fn simulate(sc: &SimScenario) -> Result<GroundTruth> {
    match sc.design {
        SimDesign::Example1 => simulate_example1(sc),
        SimDesign::Example2 => simulate_example2(sc),
    }
}

impl GroundTruth {
    /// The residual panel after removing the covariate part: L1 f + L2 eps.
    pub fn eta(&self) -> Array2<f64> {
        self.f.dot(&self.l1.t()) + self.eps.dot(&self.l2.t())
    }
}

/// Monte Carlo settings for `replicate`. The regression stage defaults to
/// least squares for the dense design and the lasso for the sparse one; the
/// factor stage's covariate count is always taken from the scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationConfig {
    pub n_reps: usize,
    #[serde(default)]
    pub regression: Option<crate::regression::RegressionConfig>,
    #[serde(default)]
    pub factor: crate::factor::FactorConfig,
}

impl ReplicationConfig {
    pub fn new(n_reps: usize) -> Self {
        ReplicationConfig {
            n_reps,
            regression: None,
            factor: crate::factor::FactorConfig::default(),
        }
    }
}

/// Scores from one replicate of the simulate-regress-factor pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub rep: usize,
    pub seed: u64,
    pub rhat: usize,
    pub shat: usize,
    /// Frobenius distance between the fitted and true coefficient matrices.
    pub b_err: f64,
    /// Span distance between the estimated and true factor loadings; a
    /// zero-factor fit scores the maximal distance 1.
    pub dbar: f64,
    /// Reconstruction error of the common component.
    pub rmse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub rep: usize,
    pub seed: u64,
    pub message: String,
}

/// Lower quartile, median, upper quartile (linear interpolation between
/// order statistics).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn quartiles(values: &[f64]) -> Quartiles {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite metric"));
    Quartiles {
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
    }
}

/// Aggregated Monte Carlo results for one scenario cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub scenario: SimScenario,
    pub n_reps: usize,
    pub n_completed: usize,
    /// Share of completed replicates selecting exactly the true factor count.
    pub prob_rhat_correct: f64,
    /// Histogram of selected factor counts over completed replicates.
    pub rhat_counts: std::collections::BTreeMap<usize, usize>,
    pub b_err: Quartiles,
    pub dbar: Quartiles,
    pub rmse: Quartiles,
    pub outcomes: Vec<ReplicateOutcome>,
    pub failures: Vec<ReplicateFailure>,
}

fn default_regression_for(design: SimDesign) -> crate::regression::RegressionConfig {
    match design {
        SimDesign::Example1 => crate::regression::RegressionConfig::ols(),
        SimDesign::Example2 => crate::regression::RegressionConfig::lasso(),
    }
}

fn run_replicate(
    sc: &SimScenario,
    rep: usize,
    reg_cfg: &crate::regression::RegressionConfig,
    factor_cfg: &crate::factor::FactorConfig,
) -> Result<ReplicateOutcome> {
    let seed = derive_seed(sc.seed, rep as u64);
    let gt = simulate(&SimScenario { seed, ..*sc })?;
    let fit_r = crate::regression::fit(gt.y.view(), gt.z.view(), reg_cfg)?;
    let fit_f = crate::factor::fit_factor_model(fit_r.residuals.view(), factor_cfg)?;
    let b_err = crate::metrics::coef_error(fit_r.bhat.view(), gt.b.view())?;
    let dbar = if fit_f.rhat == 0 {
        1.0
    } else {
        crate::metrics::distance_dbar(fit_f.a1hat.view(), gt.l1.view())?
    };
    let rmse = crate::metrics::factor_rmse(fit_f.a1hat.view(), fit_f.xhat.view(), gt.l1.view(), gt.f.view())?;
    Ok(ReplicateOutcome {
        rep,
        seed,
        rhat: fit_f.rhat,
        shat: fit_f.shat,
        b_err,
        dbar,
        rmse,
    })
}

/// Runs `n_reps` independent replicates of the scenario, each with a seed
/// split off the scenario's master seed by replicate index, and aggregates
/// selection frequencies plus error quartiles. Replicates run in parallel;
/// per-replicate failures are collected rather than aborting the study.
pub fn replicate(sc: &SimScenario, cfg: &ReplicationConfig) -> Result<ReplicationReport> {
    use rayon::prelude::*;

    sc.validate()?;
    if cfg.n_reps == 0 {
        return Err(Error::Config("n_reps must be >= 1".into()));
    }
    let reg_cfg = cfg.regression.unwrap_or_else(|| default_regression_for(sc.design));
    let mut factor_cfg = cfg.factor.clone();
    factor_cfg.m_regressors = sc.m;

    let results: Vec<std::result::Result<ReplicateOutcome, ReplicateFailure>> = (0..cfg.n_reps)
        .into_par_iter()
        .map(|rep| {
            run_replicate(sc, rep, &reg_cfg, &factor_cfg).map_err(|e| ReplicateFailure {
                rep,
                seed: derive_seed(sc.seed, rep as u64),
                message: e.to_string(),
            })
        })
        .collect();

    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(f) => failures.push(f),
        }
    }
    let n_completed = outcomes.len();
    let mut rhat_counts = std::collections::BTreeMap::new();
    for o in &outcomes {
        *rhat_counts.entry(o.rhat).or_insert(0usize) += 1;
    }
    let prob_rhat_correct = if n_completed == 0 {
        f64::NAN
    } else {
        rhat_counts.get(&sc.r).copied().unwrap_or(0) as f64 / n_completed as f64
    };
    let collect = |f: fn(&ReplicateOutcome) -> f64| -> Quartiles {
        if n_completed == 0 {
            let nan = Quartiles {
                q1: f64::NAN,
                median: f64::NAN,
                q3: f64::NAN,
            };
            return nan;
        }
        let vals: Vec<f64> = outcomes.iter().map(f).collect();
        quartiles(&vals)
    };
    Ok(ReplicationReport {
        scenario: *sc,
        n_reps: cfg.n_reps,
        n_completed,
        prob_rhat_correct,
        rhat_counts,
        b_err: collect(|o| o.b_err),
        dbar: collect(|o| o.dbar),
        rmse: collect(|o| o.rmse),
        outcomes,
        failures,
    })
}
