//! Decomposition helpers bridging ndarray panels to nalgebra factorizations.
//!
//! All eigen/SVD output is sorted by decreasing eigenvalue/singular value and
//! carries a fixed sign convention so repeated runs are bit-identical.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

pub fn to_na(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn to_nd(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Flips each column so its entry of largest absolute value is positive.
/// Ties take the earliest row, so the convention is deterministic.
pub fn fix_signs(v: &mut Array2<f64>) {
    for mut col in v.columns_mut() {
        let mut best = 0usize;
        let mut best_abs = f64::NEG_INFINITY;
        for (i, &x) in col.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// The input is symmetrized as (A + A')/2 before factorizing. Returns
/// eigenvalues in decreasing order with matching eigenvector columns under
/// the sign convention of [`fix_signs`].
pub fn sym_eigen(a: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::Dimension {
            context: "sym_eigen",
            expected: "square nonempty matrix".into(),
            got: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::LinAlg {
            context: "sym_eigen",
            message: "non-finite entries in input".into(),
        });
    }
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Array2::zeros((n, n));
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vectors[[i, new_j]] = eig.eigenvectors[(i, old_j)];
        }
    }
    fix_signs(&mut vectors);
    Ok((values, vectors))
}

/// Thin SVD with singular values in decreasing order and sign-fixed U.
pub fn svd(a: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let m = to_na(a);
    let svd = m.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => {
            return Err(Error::LinAlg {
                context: "svd",
                message: "factorization did not produce U/V".into(),
            })
        }
    };
    let mut u = to_nd(&u);
    let mut vt = to_nd(&vt);
    let s = Array1::from_iter(svd.singular_values.iter().copied());
    // nalgebra sorts descending already; the sign fix must stay consistent
    // between U and V so the product is unchanged.
    for j in 0..u.ncols().min(vt.nrows()) {
        let col = u.column(j);
        let mut best = 0usize;
        let mut best_abs = f64::NEG_INFINITY;
        for (i, &x) in col.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = i;
            }
        }
        if u[[best, j]] < 0.0 {
            u.column_mut(j).mapv_inplace(|x| -x);
            vt.row_mut(j).mapv_inplace(|x| -x);
        }
    }
    Ok((u, s, vt))
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(a: ArrayView2<'_, f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension {
            context: "spectral_radius",
            expected: "square matrix".into(),
            got: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let m = to_na(a);
    let eigs = m.complex_eigenvalues();
    Ok(eigs.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Solves A X = B for square A via LU.
pub fn solve(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension {
            context: "solve",
            expected: format!("square A with {} rhs rows", a.nrows()),
            got: format!("A {}x{}, B {}x{}", a.nrows(), a.ncols(), b.nrows(), b.ncols()),
        });
    }
    let lu = to_na(a).lu();
    match lu.solve(&to_na(b)) {
        Some(x) => Ok(to_nd(&x)),
        None => Err(Error::LinAlg {
            context: "solve",
            message: "singular system".into(),
        }),
    }
}

/// Column means and the column-centered copy of a T x d panel.
pub fn center_columns(a: ArrayView2<'_, f64>) -> (Array2<f64>, Array1<f64>) {
    let t = a.nrows() as f64;
    let means = a.sum_axis(ndarray::Axis(0)) / t;
    let mut c = a.to_owned();
    for mut row in c.rows_mut() {
        row -= &means;
    }
    (c, means)
}
