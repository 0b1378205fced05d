//! Synthetic CP-rank data: each sample is a sum of `r` rank-one tensors with
//! factor entries drawn i.i.d. from the open interval (0, 1), labeled `y = r`.
//!
//! Randomness comes from ChaCha8. Sample `i` of a dataset uses stream `i` of
//! the generator seeded with the dataset seed, so datasets are reproducible
//! and samples can be generated independently.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{LabeledDataset, Sample};
use crate::error::{arg, Result};
use crate::tensor::{rank_one, DenseTensor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSpec {
    pub dims: Vec<usize>,
    pub rank_min: usize,
    pub rank_max: usize,
    pub count: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return arg(format!("invalid dims {:?}", self.dims));
        }
        if self.rank_min < 1 || self.rank_min > self.rank_max {
            return arg(format!(
                "need 1 <= rank_min <= rank_max, got {}..{}",
                self.rank_min, self.rank_max
            ));
        }
        if self.count < 1 {
            return arg("count must be at least 1");
        }
        Ok(())
    }
}

/// Sum of `r` random rank-one tensors with U(0, 1) factors.
pub fn gen_rank_r<R: Rng + ?Sized>(dims: &[usize], r: usize, rng: &mut R) -> Result<DenseTensor> {
    if r < 1 {
        return arg("rank must be at least 1");
    }
    let mut acc = DenseTensor::zeros(dims)?;
    for _ in 0..r {
        let factors: Vec<Vec<f64>> = dims
            .iter()
            .map(|&d| (0..d).map(|_| rng.sample(Open01)).collect())
            .collect();
        acc.axpy(1.0, &rank_one(&factors)?);
    }
    Ok(acc)
}

/// Generator for sample `index` of a dataset with the given seed.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn gen_sample(spec: &DatasetSpec, index: usize) -> Result<Sample> {
    let mut rng = sample_rng(spec.seed, index as u64);
    let r = rng.gen_range(spec.rank_min..=spec.rank_max);
    Ok(Sample::new(gen_rank_r(&spec.dims, r, &mut rng)?, r as f64))
}

pub fn gen_dataset(spec: &DatasetSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let samples = (0..spec.count)
        .map(|i| gen_sample(spec, i))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;

    fn spec(rank_min: usize, rank_max: usize, count: usize, seed: u64) -> DatasetSpec {
        DatasetSpec {
            dims: vec![3, 4, 2],
            rank_min,
            rank_max,
            count,
            seed,
        }
    }

    fn numerical_rank(t: &DenseTensor, mode: usize) -> usize {
        let s = singular_values(&t.unfold(mode).unwrap().to_matrix()).unwrap();
        let top = s.max();
        s.iter().filter(|&&v| v > 1e-10 * top).count()
    }

    #[test]
    fn rank_one_samples_have_unit_n_ranks() {
        let mut rng = sample_rng(7, 0);
        let t = gen_rank_r(&[4, 3, 5], 1, &mut rng).unwrap();
        for mode in 0..3 {
            assert_eq!(numerical_rank(&t, mode), 1);
        }
    }

    #[test]
    fn rank_two_mode_one_unfolding() {
        let mut rng = sample_rng(11, 3);
        let t = gen_rank_r(&[3, 3, 3], 2, &mut rng).unwrap();
        assert_eq!(numerical_rank(&t, 0), 2);
    }

    #[test]
    fn elements_lie_in_open_range() {
        let mut rng = sample_rng(1, 1);
        for r in 1..=4 {
            let t = gen_rank_r(&[3, 3, 3], r, &mut rng).unwrap();
            assert!(t.values().iter().all(|&v| v > 0.0 && v < r as f64));
        }
        assert!(gen_rank_r(&[2, 2], 0, &mut rng).is_err());
    }

    #[test]
    fn datasets_are_deterministic() {
        let a = gen_dataset(&spec(1, 4, 20, 99)).unwrap();
        let b = gen_dataset(&spec(1, 4, 20, 99)).unwrap();
        assert_eq!(a, b);
        let c = gen_dataset(&spec(1, 4, 20, 100)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn fixed_rank_labels() {
        let d = gen_dataset(&spec(3, 3, 10, 5)).unwrap();
        assert!(d.labels().iter().all(|&y| y == 3.0));
    }

    #[test]
    fn spec_validation() {
        assert!(spec(0, 2, 5, 0).validate().is_err());
        assert!(spec(3, 2, 5, 0).validate().is_err());
        assert!(spec(1, 2, 0, 0).validate().is_err());
    }
}
