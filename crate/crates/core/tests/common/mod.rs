#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracenorm::{DenseTensor, LabeledDataset, Sample};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_ish(rng: &mut ChaCha8Rng) -> f64 {
    // Sum of uniforms; plenty for test data.
    (0..4).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>() * 0.866
}

pub fn random_tensor(dims: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
    DenseTensor::from_fn(dims, |_| normal_ish(rng)).unwrap()
}

pub fn random_dataset(dims: &[usize], n: usize, rng: &mut ChaCha8Rng) -> LabeledDataset {
    let samples = (0..n)
        .map(|_| Sample::new(random_tensor(dims, rng), rng.gen_range(0.0..5.0)))
        .collect();
    LabeledDataset::new(samples).unwrap()
}

pub fn to_matrix(t: &DenseTensor) -> DMatrix<f64> {
    let d = t.dims();
    DMatrix::from_column_slice(d[0], d[1], t.values())
}

pub fn rel_err(a: &DenseTensor, b: &DenseTensor) -> f64 {
    let d = a.sub(b).unwrap();
    tracenorm::tensor::frobenius_norm(&d) / tracenorm::tensor::frobenius_norm(b).max(1e-300)
}

/// Closed-form minimizer of `L/2 ||W - P||^2 + lambda ||W||_*` for matrices.
pub fn matrix_prox(p: &DenseTensor, l: f64, lambda: f64) -> DenseTensor {
    use tracenorm::prox::{svt, Threshold};
    let m = svt(&to_matrix(p), Threshold::new(lambda / l).unwrap()).unwrap();
    DenseTensor::new(p.dims().to_vec(), m.as_slice().to_vec()).unwrap()
}
