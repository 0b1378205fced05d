use crate::error::{arg, Result};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: DenseTensor,
    pub y: f64,
}

impl Sample {
    pub fn new(x: DenseTensor, y: f64) -> Self {
        Self { x, y }
    }
}

/// A nonempty list of labeled samples sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dims: Vec<usize>,
    samples: Vec<Sample>,
}

impl LabeledDataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return arg("dataset must contain at least one sample");
        };
        let dims = first.x.dims().to_vec();
        if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.x.dims() != dims) {
            return arg(format!(
                "sample {i} has dims {:?}, expected {dims:?}",
                s.x.dims()
            ));
        }
        Ok(Self { dims, samples })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y).collect()
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    /// First `n` samples (all of them if `n >= len`).
    pub fn head(&self, n: usize) -> Result<Self> {
        Self::new(self.samples[..n.min(self.len())].to_vec())
    }
}
