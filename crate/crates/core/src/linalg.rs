//! Thin wrappers over nalgebra decompositions that fix ordering and
//! tolerance conventions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below `RANK_TOL · σ_max` are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

const SVD_MAX_ITER: usize = 100_000;

/// Singular values in descending order with the matching left singular
/// vectors as columns.
pub fn left_svd(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let svd = a
        .clone()
        .try_svd(true, false, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| {
            Error::Decomposition(format!(
                "SVD of {}x{} matrix did not converge",
                a.nrows(),
                a.ncols()
            ))
        })?;
    let u = svd.u.expect("left singular vectors requested");
    let order = descending_order(svd.singular_values.as_slice());
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let vectors = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    Ok((values, vectors))
}

/// Eigenvalues of a symmetric matrix in descending order with matching
/// eigenvectors as columns.
pub fn symmetric_eigen_desc(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = a.clone().symmetric_eigen();
    let order = descending_order(eig.eigenvalues.as_slice());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Count of `values` above `RANK_TOL` times the largest.
pub fn numerical_rank(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&v| v > RANK_TOL * max).count()
}

/// Moore–Penrose pseudo-inverse through the SVD, discarding singular values
/// below `RANK_TOL · σ_max`.
pub fn pinv(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = a
        .clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::Decomposition("SVD for pseudo-inverse did not converge".into()))?;
    let max = svd.singular_values.max();
    let inv = DVector::from_iterator(
        svd.singular_values.len(),
        svd.singular_values.iter().map(|&s| {
            if max > 0.0 && s > RANK_TOL * max {
                1.0 / s
            } else {
                0.0
            }
        }),
    );
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    Ok(v_t.transpose() * DMatrix::from_diagonal(&inv) * u.transpose())
}
