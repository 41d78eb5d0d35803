//! Subspace distances and accuracy measures for fitted models.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg;

fn check_same_shape(context: &'static str, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension {
            context,
            expected: format!("{}x{}", a.nrows(), a.ncols()),
            got: format!("{}x{}", b.nrows(), b.ncols()),
        });
    }
    Ok(())
}

fn check_orthonormal(context: &'static str, h: ArrayView2<'_, f64>) -> Result<()> {
    let gram = h.t().dot(&h);
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let want = if i == j { 1.0 } else { 0.0 };
            if (gram[[i, j]] - want).abs() > 1e-6 {
                return Err(Error::DegenerateInput {
                    context,
                    message: format!(
                        "columns are not orthonormal (gram[{i},{j}] = {:.6})",
                        gram[[i, j]]
                    ),
                });
            }
        }
    }
    Ok(())
}

/// Distance between two r-dimensional subspaces given by semi-orthogonal
/// p x r bases: sqrt(1 - tr(H1 H1' H2 H2') / r). Zero iff equal spans, one
/// iff orthogonal spans.
pub fn distance_d(h1: ArrayView2<'_, f64>, h2: ArrayView2<'_, f64>) -> Result<f64> {
    check_same_shape("distance_d", h1, h2)?;
    let r = h1.ncols();
    if r == 0 || h1.nrows() < r {
        return Err(Error::Dimension {
            context: "distance_d",
            expected: "p x r with 1 <= r <= p".into(),
            got: format!("{}x{}", h1.nrows(), r),
        });
    }
    check_orthonormal("distance_d", h1)?;
    check_orthonormal("distance_d", h2)?;
    // tr(H1 H1' H2 H2') = ||H1' H2||_F^2
    let cross = h1.t().dot(&h2);
    let tr: f64 = cross.iter().map(|x| x * x).sum();
    let radicand = (1.0 - tr / r as f64).clamp(0.0, 1.0);
    Ok(radicand.sqrt())
}

/// Orthonormal column basis for the span of a full-column-rank matrix.
/// Fails with a rank error when the smallest singular value is below
/// 1e-10 times the largest.
fn span_basis(context: &'static str, h: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let r = h.ncols();
    if r == 0 || h.nrows() < r {
        return Err(Error::Dimension {
            context,
            expected: "p x r with 1 <= r <= p".into(),
            got: format!("{}x{}", h.nrows(), r),
        });
    }
    let (u, s, _) = linalg::svd(h)?;
    let smax = s[0];
    let smin = s[s.len() - 1];
    if smax <= 0.0 || smin < 1e-10 * smax {
        return Err(Error::Rank {
            context,
            sigma_min: smin,
            threshold: 1e-10 * smax,
        });
    }
    Ok(u.slice(ndarray::s![.., ..r]).to_owned())
}

/// Distance between column spaces of possibly different dimensions:
/// sqrt(1 - tr(P1 P2) / max(r1, r2)) with Pi the orthogonal projector onto
/// the span of Hi. Inputs need full column rank but not orthonormality.
pub fn distance_dbar(h1: ArrayView2<'_, f64>, h2: ArrayView2<'_, f64>) -> Result<f64> {
    if h1.nrows() != h2.nrows() {
        return Err(Error::Dimension {
            context: "distance_dbar",
            expected: format!("{} rows", h1.nrows()),
            got: format!("{} rows", h2.nrows()),
        });
    }
    let q1 = span_basis("distance_dbar", h1)?;
    let q2 = span_basis("distance_dbar", h2)?;
    // tr(P1 P2) = ||Q1' Q2||_F^2 for orthonormal bases Qi.
    let cross = q1.t().dot(&q2);
    let tr: f64 = cross.iter().map(|x| x * x).sum();
    let rmax = h1.ncols().max(h2.ncols()) as f64;
    let radicand = (1.0 - tr / rmax).clamp(0.0, 1.0);
    Ok(radicand.sqrt())
}

/// Frobenius norm of the coefficient error B-hat minus B.
pub fn coef_error(bhat: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    check_same_shape("coef_error", bhat, b)?;
    Ok((&bhat.to_owned() - &b.to_owned())
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt())
}

/// Root mean squared error of the reconstructed common component:
/// sqrt((1/(T p)) sum_t ||Ahat xhat_t - L1 f_t||^2).
///
/// The two factorizations may have different numbers of columns; only the
/// products must live in the same p-dimensional space over the same T.
pub fn factor_rmse(
    ahat: ArrayView2<'_, f64>,
    xhat: ArrayView2<'_, f64>,
    l1: ArrayView2<'_, f64>,
    f: ArrayView2<'_, f64>,
) -> Result<f64> {
    let p = ahat.nrows();
    let t = xhat.nrows();
    if ahat.ncols() != xhat.ncols() {
        return Err(Error::Dimension {
            context: "factor_rmse",
            expected: format!("xhat with {} columns", ahat.ncols()),
            got: format!("{} columns", xhat.ncols()),
        });
    }
    if l1.nrows() != p || f.nrows() != t || l1.ncols() != f.ncols() {
        return Err(Error::Dimension {
            context: "factor_rmse",
            expected: format!("L1 {}x r, f {}x r", p, t),
            got: format!("L1 {}x{}, f {}x{}", l1.nrows(), l1.ncols(), f.nrows(), f.ncols()),
        });
    }
    if t == 0 || p == 0 {
        return Err(Error::Dimension {
            context: "factor_rmse",
            expected: "nonempty panels".into(),
            got: "empty".into(),
        });
    }
    let fitted = xhat.dot(&ahat.t());
    let truth = f.dot(&l1.t());
    let ss: f64 = (&fitted - &truth).iter().map(|x| x * x).sum();
    Ok((ss / (t as f64 * p as f64)).sqrt())
}

/// Average scaled one-step forecast error:
/// (1/T0) sum_tau ||yhat_tau - y_tau||_2 / sqrt(p).
pub fn forecast_error(yhat: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
    check_same_shape("forecast_error", yhat, y)?;
    let t0 = y.nrows();
    let p = y.ncols();
    if t0 == 0 || p == 0 {
        return Err(Error::Dimension {
            context: "forecast_error",
            expected: "nonempty forecast panel".into(),
            got: format!("{}x{}", t0, p),
        });
    }
    let sqrt_p = (p as f64).sqrt();
    let mut acc = 0.0;
    for (fr, tr) in yhat.rows().into_iter().zip(y.rows()) {
        let norm: f64 = fr
            .iter()
            .zip(tr.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        acc += norm / sqrt_p;
    }
    Ok(acc / t0 as f64)
}
