//! Latent factor estimation from a residual panel.
//!
//! The residual process splits into a low-dimensional dynamic part and white
//! idiosyncratic noise. Lagged autocovariances kill the white part in
//! expectation, so the column space of M = sum_k Sigma(k) Sigma(k)' spans
//! the factor loadings: its leading r eigenvectors estimate the loading
//! frame A1, the rest U1. Because strong idiosyncratic variance directions
//! can contaminate plain covariance PCA, the factors themselves are
//! recovered through a second projection: S = Sigma(0) U1 U1' Sigma(0)
//! isolates the spiked noise directions; the eigenvectors of its near-null
//! space, rotated to align with A1, give a frame U2 with
//! x_t = (U2' A1)^{-1} U2' eta_t immune to those spikes.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::linalg;
use crate::whitenoise::{self, SelectionResult, WhiteNoiseConfig};

/// Sample autocovariances of a panel up to lag k0, all with divisor T and
/// the full-sample mean.
#[derive(Debug, Clone)]
pub struct Autocovariances {
    /// sigmas[k] is the lag-k matrix, k = 0..=k0.
    pub sigmas: Vec<Array2<f64>>,
    pub mean: Array1<f64>,
    pub t: usize,
}

/// Sigma(k) = (1/T) sum_{t=k+1..T} (e_t - mean)(e_{t-k} - mean)'.
pub fn autocovariances(e: ArrayView2<'_, f64>, k0: usize) -> Result<Autocovariances> {
    let (t, p) = (e.nrows(), e.ncols());
    if p == 0 {
        return Err(Error::Dimension {
            context: "autocovariances",
            expected: "at least one series".into(),
            got: "0 columns".into(),
        });
    }
    if k0 == 0 || k0 + 2 > t {
        return Err(Error::Lag {
            k0,
            max: t.saturating_sub(2),
            t,
        });
    }
    let (ec, mean) = linalg::center_columns(e);
    let tf = t as f64;
    let mut sigmas = Vec::with_capacity(k0 + 1);
    for k in 0..=k0 {
        let head = ec.slice(s![k.., ..]);
        let tail = ec.slice(s![..t - k, ..]);
        sigmas.push(head.t().dot(&tail) / tf);
    }
    Ok(Autocovariances { sigmas, mean, t })
}

/// M = sum_{k=1..k0} Sigma(k) Sigma(k)'. Symmetric PSD by construction.
pub fn build_m(acv: &Autocovariances) -> Array2<f64> {
    let p = acv.mean.len();
    let mut m = Array2::<f64>::zeros((p, p));
    for sigma in acv.sigmas.iter().skip(1) {
        m = m + sigma.dot(&sigma.t());
    }
    // enforce exact symmetry against GEMM roundoff
    let mt = m.t().to_owned();
    (m + mt) * 0.5
}

/// Leading/trailing eigenvector split of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigenSplit {
    pub values: Array1<f64>,
    /// Leading r eigenvectors (p x r).
    pub a1: Array2<f64>,
    /// Trailing p - r eigenvectors (p x (p-r)).
    pub u1: Array2<f64>,
    pub warnings: Vec<Warning>,
}

pub fn eigen_split(m: ArrayView2<'_, f64>, r: usize) -> Result<EigenSplit> {
    let p = m.nrows();
    if r == 0 || r >= p {
        return Err(Error::Config(format!("eigen_split needs 1 <= r < p, got r = {r}, p = {p}")));
    }
    let (values, vectors) = linalg::sym_eigen(m)?;
    let mut warnings = Vec::new();
    let gap = values[r - 1] - values[r];
    let scale = values[0].abs().max(1e-300);
    if gap < 1e-10 * scale {
        warnings.push(Warning::DegenerateGap { position: r, gap });
    }
    Ok(EigenSplit {
        a1: vectors.slice(s![.., ..r]).to_owned(),
        u1: vectors.slice(s![.., r..]).to_owned(),
        values,
        warnings,
    })
}

/// S = Sigma(0) U1 U1' Sigma(0), the covariance energy left in the
/// complement frame. Its large eigenvalues mark spiked noise directions.
pub fn build_s(sigma0: ArrayView2<'_, f64>, u1: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let p = sigma0.nrows();
    if sigma0.ncols() != p || u1.nrows() != p {
        return Err(Error::Dimension {
            context: "build_s",
            expected: format!("{p}x{p} Sigma(0) and {p}x* U1"),
            got: format!(
                "Sigma {}x{}, U1 {}x{}",
                sigma0.nrows(),
                sigma0.ncols(),
                u1.nrows(),
                u1.ncols()
            ),
        });
    }
    let w = sigma0.dot(&u1); // p x (p-r)
    Ok(w.dot(&w.t()))
}

/// Number of spiked directions: the argmin over j = 1..d_u of the eigenvalue
/// ratio mu_{j+1}/mu_j (1-based), ties to the smallest j. Ratios whose
/// denominator sits below 1e-12 of the leading eigenvalue count as 1.
pub fn select_shat(s_eigs: ArrayView1<'_, f64>, d_u: usize) -> Result<usize> {
    let n = s_eigs.len();
    if d_u == 0 || d_u + 1 > n {
        return Err(Error::Config(format!(
            "select_shat needs 1 <= d_u <= {} (got {d_u})",
            n.saturating_sub(1)
        )));
    }
    let lead = s_eigs[0];
    if !(lead > 1e-12) {
        return Err(Error::NoSignal { floor: 1e-12 });
    }
    let floor = 1e-12 * lead;
    let mut best_j = 1usize;
    let mut best_ratio = f64::INFINITY;
    for j in 1..=d_u {
        let denom = s_eigs[j - 1].max(0.0);
        let numer = s_eigs[j].max(0.0);
        let ratio = if denom <= floor { 1.0 } else { numer / denom };
        if ratio < best_ratio {
            best_ratio = ratio;
            best_j = j;
        }
    }
    Ok(best_j)
}

/// The projection frame for factor recovery.
#[derive(Debug, Clone)]
pub struct U2Frame {
    /// Eigenvectors of S for its p - shat smallest eigenvalues.
    pub u2star: Array2<f64>,
    /// Rotation aligning u2star with the loading frame.
    pub rot: Array2<f64>,
    /// u2hat = u2star * rot (p x rhat).
    pub u2hat: Array2<f64>,
    /// Smallest singular value of u2hat' a1hat.
    pub sigma_min: f64,
}

/// Builds U2 from the eigenvectors of S (all p, descending) by keeping the
/// p - shat trailing ones and rotating onto the r leading directions of
/// their overlap with A1.
pub fn build_u2(
    s_vectors: ArrayView2<'_, f64>,
    shat: usize,
    a1: ArrayView2<'_, f64>,
) -> Result<U2Frame> {
    let p = s_vectors.nrows();
    let r = a1.ncols();
    if s_vectors.ncols() != p || a1.nrows() != p {
        return Err(Error::Dimension {
            context: "build_u2",
            expected: format!("{p}x{p} eigenvector frame and {p}x r loading block"),
            got: format!(
                "S vectors {}x{}, A1 {}x{}",
                s_vectors.nrows(),
                s_vectors.ncols(),
                a1.nrows(),
                a1.ncols()
            ),
        });
    }
    if r == 0 || p < shat + r {
        return Err(Error::Dimension {
            context: "build_u2",
            expected: format!("p - shat >= r (p = {p}, shat = {shat})"),
            got: format!("r = {r}"),
        });
    }
    let u2star = s_vectors.slice(s![.., shat..]).to_owned(); // p x (p - shat)
    let b = u2star.t().dot(&a1); // (p - shat) x r
    let w = b.dot(&b.t());
    let (_, vecs) = linalg::sym_eigen(w.view())?;
    let rot = vecs.slice(s![.., ..r]).to_owned();
    let u2hat = u2star.dot(&rot);
    let overlap = u2hat.t().dot(&a1); // r x r
    let (_, sv, _) = linalg::svd(overlap.view())?;
    let sigma_min = sv[sv.len() - 1];
    if sigma_min <= 1e-10 {
        return Err(Error::IllConditionedProjection {
            sigma_min,
            threshold: 1e-10,
        });
    }
    Ok(U2Frame {
        u2star,
        rot,
        u2hat,
        sigma_min,
    })
}

/// x_t = (U2' A1)^{-1} U2' e_t for every row of the panel.
pub fn recover_factors(
    e: ArrayView2<'_, f64>,
    u2hat: ArrayView2<'_, f64>,
    a1hat: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let p = e.ncols();
    let r = a1hat.ncols();
    if u2hat.nrows() != p || a1hat.nrows() != p || u2hat.ncols() != r {
        return Err(Error::Dimension {
            context: "recover_factors",
            expected: format!("{p}x{r} frames"),
            got: format!(
                "U2 {}x{}, A1 {}x{}",
                u2hat.nrows(),
                u2hat.ncols(),
                a1hat.nrows(),
                a1hat.ncols()
            ),
        });
    }
    let c = u2hat.t().dot(&a1hat); // r x r
    let (_, sv, _) = linalg::svd(c.view())?;
    let sigma_min = sv[sv.len() - 1];
    if sigma_min <= 1e-10 {
        return Err(Error::IllConditionedProjection {
            sigma_min,
            threshold: 1e-10,
        });
    }
    let cinv = linalg::solve(c.view(), Array2::eye(r).view())?;
    // row t of xhat is (C^{-1} U2' e_t)'
    Ok(e.dot(&u2hat).dot(&cinv.t()))
}

/// How the number of factors is determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankSelection {
    /// Sequential white-noise testing on the rotated residuals.
    Auto,
    /// Known/forced number of factors.
    Fixed(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    #[serde(default = "default_k0")]
    pub k0: usize,
    #[serde(default = "default_rank")]
    pub rank: RankSelection,
    /// Search range for the spike count; `None` means floor(p/2).
    #[serde(default)]
    pub d_u: Option<usize>,
    /// First-stage covariate count, used by the trimming rule of the
    /// sequential test.
    #[serde(default)]
    pub m_regressors: usize,
    #[serde(default)]
    pub whitenoise: WhiteNoiseConfig,
}

fn default_k0() -> usize {
    2
}
fn default_rank() -> RankSelection {
    RankSelection::Auto
}

impl Default for FactorConfig {
    fn default() -> Self {
        FactorConfig {
            k0: default_k0(),
            rank: default_rank(),
            d_u: None,
            m_regressors: 0,
            whitenoise: WhiteNoiseConfig::default(),
        }
    }
}

/// Complete second-stage estimate.
#[derive(Debug, Clone)]
pub struct FactorEstimate {
    pub rhat: usize,
    /// Estimated loading frame, p x rhat orthonormal.
    pub a1hat: Array2<f64>,
    /// Orthogonal complement frame, p x (p - rhat).
    pub u1hat: Array2<f64>,
    /// Eigenvalue ladder of M.
    pub m_eigs: Array1<f64>,
    /// Spike count from the projected covariance.
    pub shat: usize,
    /// Eigenvalue ladder of S.
    pub s_eigs: Array1<f64>,
    /// Projection frame, p x rhat.
    pub u2hat: Array2<f64>,
    /// Recovered factors, T x rhat.
    pub xhat: Array2<f64>,
    /// Smallest singular value of u2hat' a1hat.
    pub sigma_min: f64,
    /// Sequential test trace when rank selection was automatic.
    pub selection: Option<SelectionResult>,
    pub warnings: Vec<Warning>,
}

/// Full second stage on a residual panel: autocovariances, the M eigenframe,
/// rank selection, spike-robust projection, and factor recovery.
pub fn fit_factor_model(e: ArrayView2<'_, f64>, cfg: &FactorConfig) -> Result<FactorEstimate> {
    let (t, p) = (e.nrows(), e.ncols());
    if p < 2 {
        return Err(Error::Dimension {
            context: "fit_factor_model",
            expected: "p >= 2".into(),
            got: format!("p = {p}"),
        });
    }
    let acv = autocovariances(e, cfg.k0).map_err(|err| err.in_stage("autocovariances"))?;
    let m = build_m(&acv);
    let (m_eigs, m_vecs) = linalg::sym_eigen(m.view()).map_err(|err| err.in_stage("eigen"))?;

    let mut warnings = Vec::new();
    let mut selection = None;
    let rhat = match cfg.rank {
        RankSelection::Fixed(r) => {
            if r == 0 || r >= p {
                return Err(Error::Config(format!("fixed rank must satisfy 1 <= r < p, got {r}")));
            }
            r
        }
        RankSelection::Auto => {
            let sel = whitenoise::select_num_factors(e, m_vecs.view(), cfg.m_regressors, &cfg.whitenoise)
                .map_err(|err| err.in_stage("rank selection"))?;
            let rhat = sel.rhat;
            warnings.extend(sel.warnings.iter().cloned());
            selection = Some(sel);
            rhat
        }
    };

    if rhat == 0 {
        // no dynamic factor content: empty factor block, full complement
        return Ok(FactorEstimate {
            rhat: 0,
            a1hat: Array2::zeros((p, 0)),
            u1hat: m_vecs,
            m_eigs,
            shat: 0,
            s_eigs: Array1::zeros(0),
            u2hat: Array2::zeros((p, 0)),
            xhat: Array2::zeros((t, 0)),
            sigma_min: 0.0,
            selection,
            warnings,
        });
    }
    if rhat >= p {
        return Err(Error::Config(format!("selected rank {rhat} must stay below p = {p}")));
    }

    let gap = m_eigs[rhat - 1] - m_eigs[rhat];
    if gap < 1e-10 * m_eigs[0].abs().max(1e-300) {
        warnings.push(Warning::DegenerateGap { position: rhat, gap });
    }
    let a1hat = m_vecs.slice(s![.., ..rhat]).to_owned();
    let u1hat = m_vecs.slice(s![.., rhat..]).to_owned();

    let s_mat = build_s(acv.sigmas[0].view(), u1hat.view()).map_err(|err| err.in_stage("projected covariance"))?;
    let (s_eigs, s_vecs) = linalg::sym_eigen(s_mat.view()).map_err(|err| err.in_stage("projected covariance"))?;

    let d_u = cfg.d_u.unwrap_or(p / 2).min(p.saturating_sub(rhat + 1)).max(1);
    // A numerically zero S means there are no spiked noise directions; the
    // projection frame then degenerates cleanly to the loading frame itself.
    let shat = match select_shat(s_eigs.view(), d_u) {
        Ok(s) => s,
        Err(Error::NoSignal { .. }) => {
            warnings.push(Warning::NoSpikes);
            0
        }
        Err(err) => return Err(err.in_stage("spike count")),
    };

    let frame = build_u2(s_vecs.view(), shat, a1hat.view()).map_err(|err| err.in_stage("projection frame"))?;
    let xhat = recover_factors(e, frame.u2hat.view(), a1hat.view())
        .map_err(|err| err.in_stage("factor recovery"))?;

    Ok(FactorEstimate {
        rhat,
        a1hat,
        u1hat,
        m_eigs,
        shat,
        s_eigs,
        u2hat: frame.u2hat,
        xhat,
        sigma_min: frame.sigma_min,
        selection,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression;
    use crate::simulate::{simulate, SimScenario};
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn gauss(t: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Array2::from_shape_fn((t, d), |_| rng.sample::<f64, _>(StandardNormal))
    }

    /// Double-loop oracle for the lag-k autocovariance.
    fn acv_oracle(e: &Array2<f64>, k: usize) -> Array2<f64> {
        let (t, p) = e.dim();
        let mut mean = vec![0.0; p];
        for row in e.rows() {
            for (j, &v) in row.iter().enumerate() {
                mean[j] += v / t as f64;
            }
        }
        let mut out = Array2::<f64>::zeros((p, p));
        for a in 0..p {
            for b in 0..p {
                let mut acc = 0.0;
                for ti in k..t {
                    acc += (e[[ti, a]] - mean[a]) * (e[[ti - k, b]] - mean[b]);
                }
                out[[a, b]] = acc / t as f64;
            }
        }
        out
    }

    #[test]
    fn autocovariance_matches_double_loop_oracle() {
        for seed in 0..10u64 {
            let e = gauss(6, 3, seed);
            let acv = autocovariances(e.view(), 2).unwrap();
            for k in 0..=2usize {
                let oracle = acv_oracle(&e, k);
                let diff = (&acv.sigmas[k] - &oracle).mapv(f64::abs);
                let max = diff.iter().fold(0.0f64, |a, &x| a.max(x));
                assert!(max < 1e-12, "seed {seed} lag {k}: {max}");
            }
        }
    }

    #[test]
    fn autocovariance_lag0_psd_symmetric() {
        let e = gauss(100, 6, 1);
        let acv = autocovariances(e.view(), 3).unwrap();
        let s0 = &acv.sigmas[0];
        for i in 0..6 {
            for j in 0..6 {
                assert!((s0[[i, j]] - s0[[j, i]]).abs() < 1e-12);
            }
        }
        let (vals, _) = linalg::sym_eigen(s0.view()).unwrap();
        assert!(vals.iter().all(|&v| v > -1e-10));
    }

    #[test]
    fn autocovariance_small_for_iid() {
        // Frobenius norm of the lag-1 matrix for iid data: entries are
        // O(1/sqrt(T)), so the norm stays below 5 sqrt(p^2/T) essentially
        // always
        let t = 5000;
        let mut hits = 0;
        for rep in 0..100u64 {
            let e = gauss(t, 3, 600 + rep);
            let acv = autocovariances(e.view(), 1).unwrap();
            let fro: f64 = acv.sigmas[1].iter().map(|x| x * x).sum::<f64>().sqrt();
            if fro < 5.0 * (9.0f64 / t as f64).sqrt() {
                hits += 1;
            }
        }
        assert!(hits >= 95, "only {hits}/100 below the iid bound");
    }

    #[test]
    fn autocovariance_lag_errors() {
        let e = gauss(10, 2, 2);
        assert!(matches!(autocovariances(e.view(), 0), Err(Error::Lag { .. })));
        assert!(matches!(autocovariances(e.view(), 9), Err(Error::Lag { .. })));
        assert!(autocovariances(e.view(), 8).is_ok());
    }

    #[test]
    fn m_is_symmetric_psd() {
        let e = gauss(150, 8, 3);
        let acv = autocovariances(e.view(), 2).unwrap();
        let m = build_m(&acv);
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(m[[i, j]], m[[j, i]]);
            }
        }
        let (vals, _) = linalg::sym_eigen(m.view()).unwrap();
        assert!(vals.iter().all(|&v| v > -1e-12));
    }

    #[test]
    fn noiseless_m_spans_loadings() {
        // eta_t = L1 f_t exactly: the top-r eigenvectors of M span L1
        let sc = SimScenario::example1(30, 400, 0.0, 0.0, 4);
        let gt = simulate(&sc).unwrap();
        let eta = gt.f.dot(&gt.l1.t());
        let acv = autocovariances(eta.view(), 2).unwrap();
        let m = build_m(&acv);
        let split = eigen_split(m.view(), 3).unwrap();
        let (l1_basis, _, _) = linalg::svd(gt.l1.view()).unwrap();
        let l1_basis = l1_basis.slice(s![.., ..3]).to_owned();
        let d = crate::metrics::distance_d(split.a1.view(), l1_basis.view()).unwrap();
        assert!(d < 1e-6, "distance {d}");
    }

    #[test]
    fn eigen_split_frame_properties() {
        let e = gauss(200, 10, 5);
        let acv = autocovariances(e.view(), 2).unwrap();
        let m = build_m(&acv);
        let split = eigen_split(m.view(), 3).unwrap();
        // [A1 U1] orthonormal
        let mut frame = Array2::<f64>::zeros((10, 10));
        frame.slice_mut(s![.., ..3]).assign(&split.a1);
        frame.slice_mut(s![.., 3..]).assign(&split.u1);
        let gram = frame.t().dot(&frame);
        for i in 0..10 {
            for j in 0..10 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-10);
            }
        }
        // ||M U1||_2 <= lambda_{r+1} + tol
        let mu1 = m.dot(&split.u1);
        let (_, sv, _) = linalg::svd(mu1.view()).unwrap();
        assert!(sv[0] <= split.values[3] + 1e-8);
    }

    #[test]
    fn eigen_split_rank_bounds() {
        let m = Array2::<f64>::eye(4);
        assert!(eigen_split(m.view(), 0).is_err());
        assert!(eigen_split(m.view(), 4).is_err());
        // all-equal eigenvalues: the gap is degenerate
        let split = eigen_split(m.view(), 2).unwrap();
        assert!(split
            .warnings
            .iter()
            .any(|w| matches!(w, Warning::DegenerateGap { .. })));
    }

    #[test]
    fn select_shat_ladders() {
        // clear drop after the third eigenvalue
        let eigs = Array1::from_vec(vec![10.0, 9.0, 5.0, 1.0, 0.9, 0.8]);
        assert_eq!(select_shat(eigs.view(), 5).unwrap(), 3);
        // all equal: every ratio is 1, ties resolve to the smallest index
        let flat = Array1::from_vec(vec![5.0, 5.0, 5.0, 5.0]);
        assert_eq!(select_shat(flat.view(), 3).unwrap(), 1);
        // denominator below the relative floor counts as ratio 1
        let tiny = Array1::from_vec(vec![1.0, 1e-20, 1e-21, 1e-22]);
        assert_eq!(select_shat(tiny.view(), 3).unwrap(), 1);
        // no signal at all
        let zero = Array1::from_vec(vec![0.0, 0.0, 0.0]);
        assert!(matches!(select_shat(zero.view(), 2), Err(Error::NoSignal { .. })));
        // d_u out of range
        assert!(select_shat(eigs.view(), 0).is_err());
        assert!(select_shat(eigs.view(), 6).is_err());
    }

    #[test]
    fn build_u2_orthonormal_and_aligned() {
        let sc = SimScenario::example1(25, 500, 0.0, 0.0, 6);
        let gt = simulate(&sc).unwrap();
        let eta = gt.eta();
        let acv = autocovariances(eta.view(), 2).unwrap();
        let m = build_m(&acv);
        let split = eigen_split(m.view(), 3).unwrap();
        let s_mat = build_s(acv.sigmas[0].view(), split.u1.view()).unwrap();
        let (s_eigs, s_vecs) = linalg::sym_eigen(s_mat.view()).unwrap();
        let shat = select_shat(s_eigs.view(), 12).unwrap();
        assert_eq!(shat, 3);
        let frame = build_u2(s_vecs.view(), shat, split.a1.view()).unwrap();
        let gram = frame.u2hat.t().dot(&frame.u2hat);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-10);
            }
        }
        assert!(frame.sigma_min > 0.1, "sigma_min {}", frame.sigma_min);
    }

    #[test]
    fn build_u2_detects_orthogonal_frames() {
        // S eigenvectors = identity, shat = 2 leaves span{e3}; A1 = e1 is
        // orthogonal to it, so the projection cannot work
        let s_vecs = Array2::<f64>::eye(3);
        let a1 = array![[1.0], [0.0], [0.0]];
        assert!(matches!(
            build_u2(s_vecs.view(), 2, a1.view()),
            Err(Error::IllConditionedProjection { .. })
        ));
    }

    #[test]
    fn recover_factors_exact_on_planted_model() {
        // eta_t = A1 x_t with orthonormal A1: recovery through any valid U2
        // frame returns x exactly
        let p = 8;
        let r = 2;
        let a1 = {
            let g = gauss(p, r, 7);
            let (u, _, _) = linalg::svd(g.view()).unwrap();
            u.slice(s![.., ..r]).to_owned()
        };
        let x = gauss(60, r, 8);
        let e = x.dot(&a1.t());
        let xhat = recover_factors(e.view(), a1.view(), a1.view()).unwrap();
        let err = (&xhat - &x).mapv(f64::abs).iter().fold(0.0f64, |a, &v| a.max(v));
        assert!(err < 1e-10, "max err {err}");
        // residual orthogonality: U2'(e_t - A1 xhat_t) = 0
        let resid = &e - &xhat.dot(&a1.t());
        let proj = resid.dot(&a1);
        assert!(proj.iter().all(|&v| v.abs() < 1e-8));
    }

    #[test]
    fn fit_fixed_rank_noiseless_recovers_loading_span() {
        // full pipeline on OLS residuals of a noiseless panel
        let sc = SimScenario::example1(30, 500, 0.0, 0.0, 9);
        let gt = simulate(&sc).unwrap();
        let y = gt.z.dot(&gt.b.t()) + gt.f.dot(&gt.l1.t());
        let reg = regression::fit_ols(y.view(), gt.z.view()).unwrap();
        let cfg = FactorConfig {
            rank: RankSelection::Fixed(3),
            ..FactorConfig::default()
        };
        let est = fit_factor_model(reg.residuals.view(), &cfg).unwrap();
        let (l1_basis, _, _) = linalg::svd(gt.l1.view()).unwrap();
        let l1_basis = l1_basis.slice(s![.., ..3]).to_owned();
        let d = crate::metrics::distance_d(est.a1hat.view(), l1_basis.view()).unwrap();
        assert!(d < 1e-6, "distance {d}");
        assert_eq!(est.shat, 0.max(est.shat)); // shat well-defined
    }

    #[test]
    fn fit_recovers_factor_space_with_noise() {
        let sc = SimScenario::example1(50, 1000, 0.0, 0.0, 10);
        let gt = simulate(&sc).unwrap();
        let reg = regression::fit_ols(gt.y.view(), gt.z.view()).unwrap();
        let cfg = FactorConfig {
            rank: RankSelection::Fixed(3),
            m_regressors: 5,
            ..FactorConfig::default()
        };
        let est = fit_factor_model(reg.residuals.view(), &cfg).unwrap();
        assert_eq!(est.shat, 3);
        let dbar = crate::metrics::distance_dbar(est.a1hat.view(), gt.l1.view()).unwrap();
        assert!(dbar < 0.2, "dbar {dbar}");
        let rmse = crate::metrics::factor_rmse(
            est.a1hat.view(),
            est.xhat.view(),
            gt.l1.view(),
            gt.f.view(),
        )
        .unwrap();
        // common component variance is O(p^(1-delta1)) per series; the
        // recovery error must sit far below its scale
        let scale = (50.0f64).sqrt();
        assert!(rmse < scale, "rmse {rmse} vs scale {scale}");
    }

    #[test]
    fn fit_auto_selects_three_factors() {
        let sc = SimScenario::example1(50, 1000, 0.0, 0.0, 11);
        let gt = simulate(&sc).unwrap();
        let reg = regression::fit_ols(gt.y.view(), gt.z.view()).unwrap();
        let cfg = FactorConfig {
            m_regressors: 5,
            ..FactorConfig::default()
        };
        let est = fit_factor_model(reg.residuals.view(), &cfg).unwrap();
        assert_eq!(est.rhat, 3, "selection: {:?}", est.selection);
        assert!(est.selection.is_some());
    }

    #[test]
    fn fit_pure_noise_returns_empty_factor_block() {
        let e = gauss(400, 10, 12);
        let est = fit_factor_model(e.view(), &FactorConfig::default()).unwrap();
        assert_eq!(est.rhat, 0);
        assert_eq!(est.a1hat.ncols(), 0);
        assert_eq!(est.xhat.ncols(), 0);
        assert_eq!(est.u1hat.ncols(), 10);
    }

    #[test]
    fn rotation_equivariance() {
        // rotating the panel rotates the estimated frame: subspace distances
        // to a common reference transform exactly
        let sc = SimScenario::example1(20, 600, 0.0, 0.0, 13);
        let gt = simulate(&sc).unwrap();
        let eta = gt.eta();
        let cfg = FactorConfig {
            rank: RankSelection::Fixed(3),
            ..FactorConfig::default()
        };
        let est = fit_factor_model(eta.view(), &cfg).unwrap();
        let o = {
            let g = gauss(20, 20, 14);
            let (u, _, _) = linalg::svd(g.view()).unwrap();
            u
        };
        let eta_rot = eta.dot(&o);
        let est_rot = fit_factor_model(eta_rot.view(), &cfg).unwrap();
        let (l1_basis, _, _) = linalg::svd(gt.l1.view()).unwrap();
        let l1_basis = l1_basis.slice(s![.., ..3]).to_owned();
        let d1 = crate::metrics::distance_d(est.a1hat.view(), l1_basis.view()).unwrap();
        let ref_rot = o.t().dot(&l1_basis);
        let d2 = crate::metrics::distance_d(est_rot.a1hat.view(), ref_rot.view()).unwrap();
        assert!((d1 - d2).abs() < 1e-8, "{d1} vs {d2}");
    }

    #[test]
    fn scale_invariance_of_rank_and_spikes() {
        let sc = SimScenario::example1(30, 500, 0.0, 0.0, 15);
        let gt = simulate(&sc).unwrap();
        let reg = regression::fit_ols(gt.y.view(), gt.z.view()).unwrap();
        let cfg = FactorConfig {
            m_regressors: 5,
            ..FactorConfig::default()
        };
        let est = fit_factor_model(reg.residuals.view(), &cfg).unwrap();
        let scaled = reg.residuals.mapv(|x| 3.7 * x);
        let est2 = fit_factor_model(scaled.view(), &cfg).unwrap();
        assert_eq!(est.rhat, est2.rhat);
        assert_eq!(est.shat, est2.shat);
    }

    #[test]
    fn projection_residual_orthogonality() {
        let sc = SimScenario::example1(40, 800, 0.4, 0.5, 16);
        let gt = simulate(&sc).unwrap();
        let reg = regression::fit_ols(gt.y.view(), gt.z.view()).unwrap();
        let cfg = FactorConfig {
            rank: RankSelection::Fixed(3),
            m_regressors: 5,
            ..FactorConfig::default()
        };
        let est = fit_factor_model(reg.residuals.view(), &cfg).unwrap();
        // U2'(eta_t - A1 xhat_t) = 0 by construction of xhat
        let resid = &reg.residuals - &est.xhat.dot(&est.a1hat.t());
        let proj = resid.dot(&est.u2hat);
        let max = proj.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(max < 1e-8, "max projection residual {max}");
    }
}
