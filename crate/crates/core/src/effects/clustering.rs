//! Expected transitive-triangle frequency under a fitted dyadic model.

use crate::data::NetworkData;
use crate::error::{Error, Result};
use crate::estimator::FitResult;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// `(1/(N(N−1)(N−2))) Σ_i Σ_{j≠i} Σ_{k∉{i,j}} p_ij p_ik p_kj`.
///
/// Uses `Σ_k p_ik p_kj = (P²)_ij`; a zero diagonal removes `k ∈ {i, j}`.
pub fn expected_clustering_from_probs<T: Scalar>(probs: &Matrix<T>) -> T {
    let n = probs.rows();
    let mut p = probs.clone();
    for i in 0..n {
        p[(i, i)] = T::zero();
    }
    let p2 = p.matmul(&p);
    let mut total = T::zero();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            total = total + p[(i, j)] * p2[(i, j)];
        }
    }
    total / T::from_usize_lossy(n * (n - 1) * (n - 2))
}

pub fn expected_clustering<T: Scalar>(fit: &FitResult<T>, data: &NetworkData<T>) -> Result<T> {
    if !fit.family.is_binary() {
        return Err(Error::UnsupportedFamily {
            family: fit.family.name(),
            operation: "expected clustering",
        });
    }
    let n = data.n_nodes();
    let probs = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            T::zero()
        } else {
            fit.family.mean(fit.params.eta(data.x(i, j), i, j))
        }
    });
    Ok(expected_clustering_from_probs(&probs))
}
