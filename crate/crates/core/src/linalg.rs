//! Thin wrappers over the dense SVD backend (nalgebra).

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

const SVD_MAX_SWEEPS: usize = 10_000;

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical("matrix has non-finite entries".into()))
    }
}

/// Economy SVD: `U` is `m x k`, `V^T` is `k x n` with `k = min(m, n)`.
pub fn svd(m: &DMatrix<f64>) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    check_finite(m)?;
    m.clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_SWEEPS)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "SVD of {}x{} did not converge",
                m.nrows(),
                m.ncols()
            ))
        })
}

pub fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_finite(m)?;
    m.clone()
        .try_svd(false, false, f64::EPSILON, SVD_MAX_SWEEPS)
        .map(|s| s.singular_values)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "SVD of {}x{} did not converge",
                m.nrows(),
                m.ncols()
            ))
        })
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}
