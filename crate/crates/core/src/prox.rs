//! Soft-thresholding and singular value thresholding.

use nalgebra::DMatrix;

use crate::error::{arg, Result};
use crate::linalg;
use crate::tensor::DenseTensor;

/// A validated shrinkage amount: finite and nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return arg(format!("threshold must be finite and >= 0, got {epsilon}"));
        }
        Ok(Self(epsilon))
    }

    pub fn epsilon(self) -> f64 {
        self.0
    }
}

/// `S_eps[x]`; the boundary `|x| == eps` maps to 0.
pub fn soft_threshold(x: f64, eps: Threshold) -> f64 {
    let e = eps.0;
    if x > e {
        x - e
    } else if x < -e {
        x + e
    } else {
        0.0
    }
}

pub fn soft_threshold_slice(xs: &mut [f64], eps: Threshold) {
    xs.iter_mut().for_each(|x| *x = soft_threshold(*x, eps));
}

/// Singular value thresholding `U S_eps[S] V^T`: the proximal map of
/// `eps * ||.||_*` at `m`.
pub fn svt(m: &DMatrix<f64>, eps: Threshold) -> Result<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    let dec = linalg::svd(m)?;
    let u = dec.u.as_ref().expect("U requested");
    let vt = dec.v_t.as_ref().expect("V^T requested");
    let mut out = DMatrix::zeros(rows, cols);
    for (k, &s) in dec.singular_values.iter().enumerate() {
        let shrunk = soft_threshold(s, eps);
        if shrunk > 0.0 {
            // out += shrunk * u_k v_k^T
            let uk = u.column(k);
            let vk = vt.row(k);
            out.ger(shrunk, &uk, &vk.transpose(), 1.0);
        }
    }
    Ok(out)
}

/// `refold(svt(unfold(t, mode), eps))`: the minimizer of
/// `eps * ||Y_(mode)||_* + 1/2 ||Y - t||_F^2`.
pub fn mode_svt(t: &DenseTensor, mode: usize, eps: Threshold) -> Result<DenseTensor> {
    let unfolded = t.unfold(mode)?;
    let shrunk = svt(&unfolded.to_matrix(), eps)?;
    unfolded.with_matrix(shrunk)?.refold()
}

/// Minimizer of `L/2 ||W - p||^2 + c ||W - y0||^2` with `c = 1/(2 (N+1) gamma)`.
pub fn prox_quadratic(
    y0: &DenseTensor,
    p: &DenseTensor,
    lipschitz: f64,
    gamma: f64,
    n_modes: usize,
) -> Result<DenseTensor> {
    if !(lipschitz > 0.0) || !(gamma > 0.0) {
        return arg(format!(
            "prox_quadratic needs lipschitz > 0 and gamma > 0, got {lipschitz} and {gamma}"
        ));
    }
    if !y0.same_dims(p) {
        return arg(format!(
            "prox_quadratic: dims {:?} vs {:?}",
            y0.dims(),
            p.dims()
        ));
    }
    let c = 1.0 / (2.0 * (n_modes as f64 + 1.0) * gamma);
    let half_l = lipschitz / 2.0;
    let denom = half_l + c;
    let (wp, wy) = (half_l / denom, c / denom);
    let mut out = p.scaled(wp);
    out.axpy(wy, y0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{frobenius_norm, rank_one};

    fn th(e: f64) -> Threshold {
        Threshold::new(e).unwrap()
    }

    #[test]
    fn soft_threshold_branches() {
        assert!((soft_threshold(1.2, th(0.5)) - 0.7).abs() < 1e-15);
        assert_eq!(soft_threshold(-0.3, th(0.5)), 0.0);
        assert_eq!(soft_threshold(-1.5, th(0.5)), -1.0);
        assert_eq!(soft_threshold(0.5, th(0.5)), 0.0);
        assert_eq!(soft_threshold(-0.5, th(0.5)), 0.0);
        assert_eq!(soft_threshold(3.25, th(0.0)), 3.25);
        assert!(Threshold::new(-1e-3).is_err());
        assert!(Threshold::new(f64::NAN).is_err());
    }

    #[test]
    fn svt_diagonal_and_zero() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let out = svt(&m, th(2.0)).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((out - expected).norm() < 1e-12);
        let z = DMatrix::<f64>::zeros(3, 4);
        assert_eq!(svt(&z, th(0.5)).unwrap(), z);
    }

    #[test]
    fn svt_zero_threshold_is_identity() {
        let m = DMatrix::from_fn(5, 7, |i, j| ((i * 7 + j) as f64 * 0.37).sin());
        let out = svt(&m, th(0.0)).unwrap();
        assert!((out - &m).norm() < 1e-10);
    }

    #[test]
    fn mode_svt_limits() {
        let t = rank_one(&[vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 2.0]]).unwrap();
        for mode in 0..3 {
            let same = mode_svt(&t, mode, th(0.0)).unwrap();
            assert!(frobenius_norm(&same.sub(&t).unwrap()) < 1e-10);
            let gone = mode_svt(&t, mode, th(1e6)).unwrap();
            assert_eq!(frobenius_norm(&gone), 0.0);
        }
        assert!(mode_svt(&t, 3, th(0.1)).is_err());
    }

    #[test]
    fn prox_quadratic_examples() {
        let p = DenseTensor::new(vec![1], vec![0.0]).unwrap();
        let y0 = DenseTensor::new(vec![1], vec![2.0]).unwrap();
        // (N+1) gamma = 0.5 gives c = 1; L = 2.
        let out = prox_quadratic(&y0, &p, 2.0, 0.5, 0).unwrap();
        assert!((out.values()[0] - 1.0).abs() < 1e-15);

        let same = prox_quadratic(&y0, &y0, 3.0, 0.1, 2).unwrap();
        assert_eq!(same.values(), y0.values());

        // c / L = 1e8
        let gamma = 1.0 / (2.0 * 3.0 * 1e8);
        let near = prox_quadratic(&y0, &p, 1.0, gamma, 2).unwrap();
        assert!((near.values()[0] - 2.0).abs() < 1e-6);

        assert!(prox_quadratic(&y0, &p, 0.0, 1.0, 2).is_err());
        assert!(prox_quadratic(&y0, &p, 1.0, -1.0, 2).is_err());
    }
}
