//! Online training from sufficient statistics.
//!
//! For the squared loss the full-history gradient depends on the samples only
//! through `A = sum y X`, `B = sum X (x) X` (tensor Kronecker product),
//! `c = sum y` and `D = sum X`:
//!
//! ```text
//! grad f_t(Z, b) = -2 (A - GridTr(Z, B) - b D)
//! ```
//!
//! so each new mini-batch updates the accumulators and then warm-starts an
//! APG run from the previous `(W, b)`. `B` holds `prod(I)^2` values, which is
//! the dominant memory cost (10^6 doubles for 10x10x10 samples).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::apg::{apg_sweep, ApgConfig, ClassifierModel, Progress};
use crate::data::{LabeledDataset, Sample};
use crate::error::{arg, Error, Result};
use crate::tensor::{block_offsets, dot, grid_tr, inner, DenseTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    a: DenseTensor,
    b_kron: DenseTensor,
    c: f64,
    d: DenseTensor,
    l: f64,
    sq_mass: f64,
    t: usize,
    outer_off: Vec<usize>,
    inner_off: Vec<usize>,
}

impl SufficientStats {
    pub fn new(dims: &[usize]) -> Result<Self> {
        let zeros = DenseTensor::zeros(dims)?;
        let squared: Vec<usize> = dims.iter().map(|d| d * d).collect();
        let (outer_off, inner_off) = block_offsets(dims, dims);
        Ok(Self {
            b_kron: DenseTensor::zeros(&squared)?,
            a: zeros.clone(),
            d: zeros,
            c: 0.0,
            l: 0.0,
            sq_mass: 0.0,
            t: 0,
            outer_off,
            inner_off,
        })
    }

    pub fn dims(&self) -> &[usize] {
        self.a.dims()
    }

    /// `sum y_i X_i`
    pub fn a(&self) -> &DenseTensor {
        &self.a
    }

    /// `sum X_i (x) X_i`
    pub fn b_kron(&self) -> &DenseTensor {
        &self.b_kron
    }

    /// `sum y_i`
    pub fn c(&self) -> f64 {
        self.c
    }

    /// `sum X_i`
    pub fn d(&self) -> &DenseTensor {
        &self.d
    }

    /// `2 prod(I) sum ||X_i||^2`
    pub fn l(&self) -> f64 {
        self.l
    }

    /// `sum ||X_i||^2`
    pub fn squared_mass(&self) -> f64 {
        self.sq_mass
    }

    /// Samples accumulated so far.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn lipschitz(&self, tight: bool) -> f64 {
        if tight {
            2.0 * self.sq_mass
        } else {
            self.l
        }
    }

    /// Adds a mini-batch, one sample at a time in batch order.
    pub fn update(&mut self, batch: &[Sample]) -> Result<()> {
        if batch.is_empty() {
            return arg("mini-batch must be nonempty");
        }
        if let Some(s) = batch.iter().find(|s| s.x.dims() != self.dims()) {
            return arg(format!(
                "sample dims {:?} do not match statistics dims {:?}",
                s.x.dims(),
                self.dims()
            ));
        }
        let size = self.a.len() as f64;
        for s in batch {
            let x = s.x.values();
            self.a.axpy(s.y, &s.x);
            let bv = self.b_kron.values_mut();
            for (&xi, &oa) in x.iter().zip(&self.outer_off) {
                if xi == 0.0 {
                    continue;
                }
                for (&xj, &ob) in x.iter().zip(&self.inner_off) {
                    bv[oa + ob] += xi * xj;
                }
            }
            self.c += s.y;
            self.d.axpy(1.0, &s.x);
            let sq = dot(x, x);
            self.l += 2.0 * size * sq;
            self.sq_mass += sq;
            self.t += 1;
        }
        Ok(())
    }

    fn require_samples(&self) -> Result<()> {
        if self.t == 0 {
            Err(Error::State(
                "sufficient statistics are empty (t = 0)".into(),
            ))
        } else {
            Ok(())
        }
    }

    /// `-2 (A - GridTr(Z, B) - b D)`, the squared-loss gradient over every
    /// accumulated sample.
    pub fn gradient(&self, z: &DenseTensor, b: f64) -> Result<DenseTensor> {
        self.require_samples()?;
        let mut g = grid_tr(z, &self.b_kron)?;
        g.axpy(-1.0, &self.a);
        g.axpy(b, &self.d);
        g.scale(2.0);
        Ok(g)
    }

    /// `(c - <W, D>) / t`, the closed-form bias over accumulated samples.
    pub fn bias(&self, w: &DenseTensor) -> Result<f64> {
        self.require_samples()?;
        Ok((self.c - inner(w, &self.d)?) / self.t as f64)
    }
}

pub fn stats_update(stats: &mut SufficientStats, batch: &[Sample]) -> Result<()> {
    stats.update(batch)
}

pub fn stats_gradient(stats: &SufficientStats, z: &DenseTensor, b: f64) -> Result<DenseTensor> {
    stats.gradient(z, b)
}

pub fn online_bias(stats: &SufficientStats, w: &DenseTensor) -> Result<f64> {
    stats.bias(w)
}

/// A stream of same-shape samples.
pub trait SampleSource {
    fn dims(&self) -> &[usize];
    fn next_sample(&mut self) -> Option<Sample>;
}

/// Uniform draws with replacement from a dataset (ChaCha8 generator).
#[derive(Debug, Clone)]
pub struct UniformSampler<'a> {
    data: &'a LabeledDataset,
    rng: ChaCha8Rng,
}

impl<'a> UniformSampler<'a> {
    pub fn new(data: &'a LabeledDataset, seed: u64) -> Self {
        Self {
            data,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl SampleSource for UniformSampler<'_> {
    fn dims(&self) -> &[usize] {
        self.data.dims()
    }

    fn next_sample(&mut self) -> Option<Sample> {
        let i = self.rng.gen_range(0..self.data.len());
        Some(self.data.samples()[i].clone())
    }
}

/// Samples in dataset order, optionally restarting from the top.
#[derive(Debug, Clone)]
pub struct SequentialSampler<'a> {
    data: &'a LabeledDataset,
    pos: usize,
    cycle: bool,
}

impl<'a> SequentialSampler<'a> {
    pub fn new(data: &'a LabeledDataset, cycle: bool) -> Self {
        Self {
            data,
            pos: 0,
            cycle,
        }
    }
}

impl SampleSource for SequentialSampler<'_> {
    fn dims(&self) -> &[usize] {
        self.data.dims()
    }

    fn next_sample(&mut self) -> Option<Sample> {
        if self.pos == self.data.len() {
            if !self.cycle {
                return None;
            }
            self.pos = 0;
        }
        self.pos += 1;
        Some(self.data.samples()[self.pos - 1].clone())
    }
}

/// Adapts any sample iterator with a known shape.
pub struct IterSource<I> {
    dims: Vec<usize>,
    iter: I,
}

impl<I: Iterator<Item = Sample>> IterSource<I> {
    pub fn new(dims: &[usize], iter: I) -> Self {
        Self {
            dims: dims.to_vec(),
            iter,
        }
    }
}

impl<I: Iterator<Item = Sample>> SampleSource for IterSource<I> {
    fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn next_sample(&mut self) -> Option<Sample> {
        self.iter.next()
    }
}

/// Outcome of online training: the model plus the statistics it was fit on.
#[derive(Debug, Clone)]
pub struct OnlineFit {
    pub model: ClassifierModel,
    pub stats: SufficientStats,
    /// Sample steps actually completed.
    pub steps: usize,
    /// The stream ran dry before `t_max` steps.
    pub exhausted: bool,
    /// APG iterations used at each completed step.
    pub step_iterations: Vec<usize>,
}

pub fn fit_online(
    stream: &mut dyn SampleSource,
    cfg: &ApgConfig,
    mu: usize,
    t_max: usize,
) -> Result<OnlineFit> {
    fit_online_observed(stream, cfg, mu, t_max, |_| {})
}

/// Online trainer with a callback after every sample step.
///
/// Starts from `W = 0, b = 0`. Each step draws `mu` samples (fewer if the
/// stream ends), updates the statistics, and runs APG from the previous
/// solution with step `1/L_t`, refitting the bias after every APG iteration.
/// The returned model is flagged as not converged when `t_max == 0`, when
/// the stream was exhausted, or when the last step hit its iteration cap.
pub fn fit_online_observed(
    stream: &mut dyn SampleSource,
    cfg: &ApgConfig,
    mu: usize,
    t_max: usize,
    mut observer: impl FnMut(&Progress<'_>),
) -> Result<OnlineFit> {
    cfg.validate()?;
    if mu == 0 {
        return arg("mini-batch size must be at least 1");
    }
    let dims = stream.dims().to_vec();
    let mut stats = SufficientStats::new(&dims)?;
    let mut w = DenseTensor::zeros(&dims)?;
    let mut b = 0.0;
    let mut total = 0usize;
    let mut exhausted = false;
    let mut last_converged = false;
    let mut step_iterations = Vec::new();

    for t in 1..=t_max {
        let batch: Vec<Sample> = std::iter::from_fn(|| stream.next_sample())
            .take(mu)
            .collect();
        if batch.len() < mu {
            exhausted = true;
        }
        if batch.is_empty() {
            break;
        }
        stats.update(&batch)?;
        let lipschitz = stats.lipschitz(cfg.tight_lipschitz);
        let iterations = if lipschitz > 0.0 {
            let mut bias = |w: &DenseTensor| stats.bias(w);
            let sweep = apg_sweep(
                w,
                b,
                lipschitz,
                cfg,
                |z, b| stats.gradient(z, b),
                Some(&mut bias),
                |_, _, _| {},
            )?;
            w = sweep.w;
            b = sweep.b;
            last_converged = sweep.converged;
            sweep.iterations
        } else {
            // Only zero tensors so far: W stays put, the bias is the label mean.
            b = stats.bias(&w)?;
            last_converged = true;
            0
        };
        total += iterations;
        step_iterations.push(iterations);
        observer(&Progress {
            outer_iter: total,
            samples_seen: stats.t(),
            step: t,
            step_iterations: iterations,
            w: &w,
            b,
        });
        if exhausted {
            break;
        }
    }

    let steps = step_iterations.len();
    Ok(OnlineFit {
        model: ClassifierModel {
            w,
            b,
            lambda: cfg.lambda,
            converged: t_max > 0 && !exhausted && last_converged,
            iterations: total,
        },
        stats,
        steps,
        exhausted,
        step_iterations,
    })
}
