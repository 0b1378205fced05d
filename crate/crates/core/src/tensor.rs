//! Dense N-way tensors and the multilinear primitives used by the solvers.
//!
//! Values are stored with the first index varying fastest, so the linear
//! offset of the 0-based multi-index `(i_1, ..., i_N)` is
//! `sum_k i_k * prod_{m<k} I_m`. With this layout the mode-1 unfolding is
//! the stored buffer read as a column-major `I_1 x (I_2 ... I_N)` matrix.
//!
//! Modes are 0-based throughout the API: mode `0` is the first index.

use crate::error::{arg, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

/// Mode-n matricization of a tensor, stored column-major.
///
/// Row `i_n` collects the mode-n fibers; the column index of element
/// `(i_1, ..., i_N)` is `sum_{k != n} i_k J_k` with
/// `J_k = prod_{m < k, m != n} I_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedMatrix {
    rows: usize,
    cols: usize,
    mode: usize,
    source_dims: Vec<usize>,
    entries: Vec<f64>,
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return arg("tensor order must be at least 1");
    }
    if dims.contains(&0) {
        return arg(format!("all dimensions must be positive, got {dims:?}"));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| {
            crate::Error::Argument(format!("dimensions {dims:?} overflow the index space"))
        })
}

/// For every linear index of `dims` (first index fastest), `sum_k i_k * weights[k]`.
pub(crate) fn weighted_offsets(dims: &[usize], weights: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for (&d, &w) in dims.iter().zip(weights) {
        let prev = std::mem::take(&mut out);
        out.reserve(prev.len() * d);
        for i in 0..d {
            out.extend(prev.iter().map(|&o| o + i * w));
        }
    }
    out
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut acc = 1;
    dims.iter()
        .map(|&d| {
            let s = acc;
            acc *= d;
            s
        })
        .collect()
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let len = check_dims(&dims)?;
        if values.len() != len {
            return arg(format!(
                "dims {dims:?} need {len} values, got {}",
                values.len()
            ));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let len = check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            values: vec![0.0; len],
        })
    }

    pub fn filled(dims: &[usize], value: f64) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        t.values.fill(value);
        Ok(t)
    }

    /// Zero tensor with the same shape as `self`.
    pub fn zeros_like(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            values: vec![0.0; self.values.len()],
        }
    }

    /// Builds a tensor by evaluating `f` at every 0-based multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = check_dims(dims)?;
        let mut idx = vec![0usize; dims.len()];
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(f(&idx));
            for (i, &d) in idx.iter_mut().zip(dims) {
                *i += 1;
                if *i < d {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            values,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Element at a 0-based multi-index.
    pub fn get(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.order(), "index order mismatch");
        let mut off = 0;
        let mut stride = 1;
        for (&i, &d) in idx.iter().zip(&self.dims) {
            assert!(i < d, "index {idx:?} out of bounds for {:?}", self.dims);
            off += i * stride;
            stride *= d;
        }
        self.values[off]
    }

    pub fn same_dims(&self, other: &DenseTensor) -> bool {
        self.dims == other.dims
    }

    fn expect_same_dims(&self, other: &DenseTensor, what: &str) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            arg(format!(
                "{what}: dimension mismatch {:?} vs {:?}",
                self.dims, other.dims
            ))
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// `self += alpha * x`.
    ///
    /// Panics if the shapes differ; callers inside the crate validate shapes
    /// at their API boundary.
    pub fn axpy(&mut self, alpha: f64, x: &DenseTensor) {
        assert!(self.same_dims(x), "axpy: {:?} vs {:?}", self.dims, x.dims);
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += alpha * v;
        }
    }

    /// `self - other`, elementwise.
    pub fn sub(&self, other: &DenseTensor) -> Result<Self> {
        self.expect_same_dims(other, "sub")?;
        Ok(Self {
            dims: self.dims.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn add(&self, other: &DenseTensor) -> Result<Self> {
        self.expect_same_dims(other, "add")?;
        Ok(Self {
            dims: self.dims.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Mode-`mode` unfolding (0-based mode).
    pub fn unfold(&self, mode: usize) -> Result<UnfoldedMatrix> {
        if mode >= self.order() {
            return arg(format!(
                "mode {mode} out of range for an order-{} tensor",
                self.order()
            ));
        }
        let rows = self.dims[mode];
        let inner: usize = self.dims[..mode].iter().product();
        let outer: usize = self.dims[mode + 1..].iter().product();
        let cols = inner * outer;
        let mut entries = vec![0.0; self.values.len()];
        // Tensor offset = left + i_n * inner + q * inner * rows, column = left + q * inner.
        for q in 0..outer {
            for i in 0..rows {
                let src = (q * rows + i) * inner;
                for left in 0..inner {
                    entries[i + rows * (left + q * inner)] = self.values[src + left];
                }
            }
        }
        Ok(UnfoldedMatrix {
            rows,
            cols,
            mode,
            source_dims: self.dims.clone(),
            entries,
        })
    }
}

impl UnfoldedMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        mode: usize,
        source_dims: Vec<usize>,
        entries: Vec<f64>,
    ) -> Result<Self> {
        let len = check_dims(&source_dims)?;
        if mode >= source_dims.len() {
            return arg(format!(
                "mode {mode} out of range for source dims {source_dims:?}"
            ));
        }
        if rows != source_dims[mode] || rows * cols != len || entries.len() != len {
            return arg(format!(
                "{rows}x{cols} matrix with {} entries is inconsistent with mode {mode} of {source_dims:?}",
                entries.len()
            ));
        }
        Ok(Self {
            rows,
            cols,
            mode,
            source_dims,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn source_dims(&self) -> &[usize] {
        &self.source_dims
    }

    /// Column-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Entry at (row, col), 0-based.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row + self.rows * col]
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_column_slice(self.rows, self.cols, &self.entries)
    }

    /// Replaces the entries with those of `m`, keeping mode and source dims.
    pub fn with_matrix(&self, m: nalgebra::DMatrix<f64>) -> Result<Self> {
        if m.nrows() != self.rows || m.ncols() != self.cols {
            return arg(format!(
                "expected a {}x{} matrix, got {}x{}",
                self.rows,
                self.cols,
                m.nrows(),
                m.ncols()
            ));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            mode: self.mode,
            source_dims: self.source_dims.clone(),
            entries: m.as_slice().to_vec(),
        })
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn refold(&self) -> Result<DenseTensor> {
        let dims = &self.source_dims;
        let len = check_dims(dims)?;
        let mode = self.mode;
        if mode >= dims.len()
            || self.rows != dims[mode]
            || self.rows * self.cols != len
            || self.entries.len() != len
        {
            return arg(format!(
                "{}x{} matrix is inconsistent with mode {mode} of {dims:?}",
                self.rows, self.cols
            ));
        }
        let rows = self.rows;
        let inner: usize = dims[..mode].iter().product();
        let outer: usize = dims[mode + 1..].iter().product();
        let mut values = vec![0.0; len];
        for q in 0..outer {
            for i in 0..rows {
                let dst = (q * rows + i) * inner;
                for left in 0..inner {
                    values[dst + left] = self.entries[i + rows * (left + q * inner)];
                }
            }
        }
        Ok(DenseTensor {
            dims: dims.clone(),
            values,
        })
    }
}

/// Sum of elementwise products of two same-shape tensors.
pub fn inner(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    a.expect_same_dims(b, "inner")?;
    Ok(dot(&a.values, &b.values))
}

/// Dot product with eight independent partial sums (fixed order, so the
/// result is deterministic but not bit-equal to a left-to-right sum).
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    dot(&t.values, &t.values).sqrt()
}

/// Average over modes of the nuclear norm of each unfolding.
pub fn tensor_trace_norm(t: &DenseTensor) -> Result<f64> {
    let mut total = 0.0;
    for mode in 0..t.order() {
        total += linalg::nuclear_norm(&t.unfold(mode)?.to_matrix())?;
    }
    Ok(total / t.order() as f64)
}

/// Tensor Kronecker product: dims `I_k J_k`, block `(i_1..i_N)` equals `a[i] * b`.
pub fn kronecker(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    if a.order() != b.order() {
        return arg(format!(
            "kronecker needs equal orders, got {} and {}",
            a.order(),
            b.order()
        ));
    }
    let dims: Vec<usize> = a.dims.iter().zip(&b.dims).map(|(i, j)| i * j).collect();
    let (outer_off, inner_off) = block_offsets(&a.dims, &b.dims);
    let mut values = vec![0.0; outer_off.len() * inner_off.len()];
    for (&ai, &oa) in a.values.iter().zip(&outer_off) {
        if ai == 0.0 {
            continue;
        }
        for (&bj, &ob) in b.values.iter().zip(&inner_off) {
            values[oa + ob] = ai * bj;
        }
    }
    Ok(DenseTensor { dims, values })
}

/// Offsets into a tensor of dims `outer_k * inner_k` such that element `j`
/// of block `i` lives at `outer[i] + inner[j]`.
pub(crate) fn block_offsets(outer: &[usize], inner: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let big: Vec<usize> = outer.iter().zip(inner).map(|(i, j)| i * j).collect();
    let s = strides(&big);
    let outer_w: Vec<usize> = s.iter().zip(inner).map(|(s, j)| s * j).collect();
    (
        weighted_offsets(outer, &outer_w),
        weighted_offsets(inner, &s),
    )
}

/// Blockwise contraction: element `i` of the result is the inner product of
/// `w` with the `i`-th `w`-shaped block of `b`.
pub fn grid_tr(w: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    let expected: Vec<usize> = w.dims.iter().map(|d| d * d).collect();
    if b.dims != expected {
        return arg(format!(
            "grid_tr: block tensor dims {:?} do not match squared weight dims {expected:?}",
            b.dims
        ));
    }
    let (outer_off, inner_off) = block_offsets(&w.dims, &w.dims);
    let first = w.dims[0];
    let values = outer_off
        .iter()
        .map(|&oa| {
            // inner_off is contiguous along the first mode; walk it in runs.
            let mut acc = 0.0;
            for (wrun, orun) in w.values.chunks(first).zip(inner_off.chunks(first)) {
                let base = oa + orun[0];
                acc += dot(wrun, &b.values[base..base + first]);
            }
            acc
        })
        .collect();
    Ok(DenseTensor {
        dims: w.dims.clone(),
        values,
    })
}

/// Outer product of `N` vectors.
pub fn rank_one(vectors: &[Vec<f64>]) -> Result<DenseTensor> {
    if vectors.is_empty() {
        return arg("rank_one needs at least one vector");
    }
    let dims: Vec<usize> = vectors.iter().map(Vec::len).collect();
    check_dims(&dims)?;
    let mut values = vec![1.0];
    for v in vectors {
        let prev = std::mem::take(&mut values);
        values.reserve(prev.len() * v.len());
        for &x in v {
            values.extend(prev.iter().map(|&p| p * x));
        }
    }
    Ok(DenseTensor { dims, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_222() -> DenseTensor {
        DenseTensor::new(vec![2, 2, 2], (1..=8).map(f64::from).collect()).unwrap()
    }

    fn rows(m: &UnfoldedMatrix) -> Vec<Vec<f64>> {
        (0..m.rows())
            .map(|r| (0..m.cols()).map(|c| m.get(r, c)).collect())
            .collect()
    }

    #[test]
    fn unfold_matches_hand_applied_index_map() {
        let t = seq_222();
        assert_eq!(
            rows(&t.unfold(0).unwrap()),
            vec![vec![1., 3., 5., 7.], vec![2., 4., 6., 8.]]
        );
        assert_eq!(
            rows(&t.unfold(1).unwrap()),
            vec![vec![1., 2., 5., 6.], vec![3., 4., 7., 8.]]
        );
        assert_eq!(
            rows(&t.unfold(2).unwrap()),
            vec![vec![1., 2., 3., 4.], vec![5., 6., 7., 8.]]
        );
    }

    #[test]
    fn unfold_rejects_bad_mode() {
        assert!(seq_222().unfold(3).is_err());
    }

    #[test]
    fn refold_examples() {
        let m = UnfoldedMatrix::new(1, 1, 0, vec![1], vec![5.0]).unwrap();
        let t = m.refold().unwrap();
        assert_eq!(t.dims(), &[1]);
        assert_eq!(t.values(), &[5.0]);

        // [[1,2,5,6],[3,4,7,8]] column-major
        let m = UnfoldedMatrix::new(2, 4, 1, vec![2, 2, 2], vec![1., 3., 2., 4., 5., 7., 6., 8.])
            .unwrap();
        assert_eq!(m.refold().unwrap(), seq_222());
    }

    #[test]
    fn refold_rejects_inconsistent_shape() {
        assert!(UnfoldedMatrix::new(2, 3, 0, vec![2, 2, 2], vec![0.0; 6]).is_err());
        assert!(UnfoldedMatrix::new(4, 2, 0, vec![2, 2, 2], vec![0.0; 8]).is_err());
    }

    #[test]
    fn inner_and_norms() {
        let a = DenseTensor::new(vec![2, 2], vec![1., 3., 2., 4.]).unwrap();
        let eye = DenseTensor::new(vec![2, 2], vec![1., 0., 0., 1.]).unwrap();
        assert_eq!(inner(&a, &eye).unwrap(), 5.0);
        assert_eq!(inner(&a, &a.zeros_like()).unwrap(), 0.0);
        assert_eq!(inner(&a, &a).unwrap(), frobenius_norm(&a).powi(2));
        let ones = DenseTensor::filled(&[2, 2, 2], 1.0).unwrap();
        assert!((frobenius_norm(&ones) - 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            frobenius_norm(&DenseTensor::new(vec![2], vec![3., 4.]).unwrap()),
            5.0
        );
        assert!(inner(&a, &ones).is_err());
    }

    #[test]
    fn trace_norm_of_diagonal_cube() {
        let t = DenseTensor::from_fn(&[2, 2, 2], |i| match i {
            [0, 0, 0] => 3.0,
            [1, 1, 1] => 1.0,
            _ => 0.0,
        })
        .unwrap();
        assert!((tensor_trace_norm(&t).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(tensor_trace_norm(&t.zeros_like()).unwrap(), 0.0);
    }

    #[test]
    fn kronecker_examples() {
        let a = DenseTensor::new(vec![2], vec![1., 2.]).unwrap();
        let b = DenseTensor::new(vec![2], vec![3., 4.]).unwrap();
        assert_eq!(kronecker(&a, &b).unwrap().values(), &[3., 4., 6., 8.]);
        let z = kronecker(&a, &b.zeros_like()).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let c = DenseTensor::zeros(&[2, 2]).unwrap();
        assert!(kronecker(&a, &c).is_err());
    }

    #[test]
    fn grid_tr_rejects_wrong_block_shape() {
        let w = DenseTensor::zeros(&[2, 2]).unwrap();
        let b = DenseTensor::zeros(&[4, 3]).unwrap();
        assert!(grid_tr(&w, &b).is_err());
        let ok = grid_tr(&w, &DenseTensor::filled(&[4, 4], 1.0).unwrap()).unwrap();
        assert!(ok.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rank_one_examples() {
        let ones = rank_one(&[vec![1., 1.], vec![1., 1.], vec![1., 1.]]).unwrap();
        assert_eq!(ones, DenseTensor::filled(&[2, 2, 2], 1.0).unwrap());
        let m = rank_one(&[vec![1., 2.], vec![3., 4.]]).unwrap();
        // [[3,4],[6,8]] column-major
        assert_eq!(m.values(), &[3., 6., 4., 8.]);
        let z = rank_one(&[vec![1., 2.], vec![0., 0.]]).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert!(rank_one(&[]).is_err());
    }

    #[test]
    fn constructor_invariants() {
        assert!(DenseTensor::new(vec![], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    }
}
