//! Batch training by accelerated proximal gradient (APG).
//!
//! With the bias held fixed, each APG step takes a gradient step of length
//! `1/L` from the search point `Z_k` and solves the resulting trace-norm
//! proximal problem with the configured inner solver. Search points follow
//! the Nesterov sequence `alpha_{k+1} = (1 + sqrt(1 + 4 alpha_k^2)) / 2`.
//! The bias is refit in closed form between APG sweeps until both `W` and `b`
//! meet the relative-change stopping rule.

use crate::data::LabeledDataset;
use crate::error::{arg, Error, Result};
use crate::inner::{InnerConfig, InnerProblem};
use crate::tensor::{dot, frobenius_norm, inner, tensor_trace_norm, DenseTensor};

pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_EPS: f64 = 1e-10;
pub const DEFAULT_MAX_OUTER: usize = 10_000;
pub const DEFAULT_MAX_ALTERNATIONS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub w: DenseTensor,
    pub b: f64,
    pub lambda: f64,
    pub converged: bool,
    /// Total APG iterations performed.
    pub iterations: usize,
}

impl ClassifierModel {
    pub fn zeros(dims: &[usize], lambda: f64) -> Result<Self> {
        Ok(Self {
            w: DenseTensor::zeros(dims)?,
            b: 0.0,
            lambda,
            converged: false,
            iterations: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApgConfig {
    pub lambda: f64,
    /// Relative-change tolerance on `W`.
    pub eps1: f64,
    /// Relative-change tolerance on `b`.
    pub eps2: f64,
    /// APG iteration cap per sweep (per sample step in online training).
    pub max_outer: usize,
    pub inner: InnerConfig,
    /// Cap on W-sweep / bias-update alternations in batch training.
    pub max_alternations: usize,
    /// Use `2 sum ||X_i||^2` instead of `2 prod(I) sum ||X_i||^2`.
    pub tight_lipschitz: bool,
    pub bias_schedule: BiasSchedule,
}

/// When batch training refits the bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasSchedule {
    /// After every APG iteration, as in the online trainer.
    Interleaved,
    /// After each full APG sweep with `b` held fixed.
    Alternating,
}

impl Default for ApgConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            eps1: DEFAULT_EPS,
            eps2: DEFAULT_EPS,
            max_outer: DEFAULT_MAX_OUTER,
            inner: InnerConfig::default(),
            max_alternations: DEFAULT_MAX_ALTERNATIONS,
            tight_lipschitz: false,
            bias_schedule: BiasSchedule::Interleaved,
        }
    }
}

impl ApgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return arg(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.eps1 > 0.0) || !(self.eps2 > 0.0) {
            return arg("stopping tolerances must be > 0");
        }
        if self.max_outer == 0 || self.max_alternations == 0 {
            return arg("iteration caps must be at least 1");
        }
        Ok(())
    }

    /// Per-sample Lipschitz contribution `2 prod(I) ||x||^2` (or `2 ||x||^2`).
    pub fn lipschitz_term(&self, x: &DenseTensor) -> f64 {
        let sq = dot(x.values(), x.values());
        if self.tight_lipschitz {
            2.0 * sq
        } else {
            2.0 * x.len() as f64 * sq
        }
    }
}

/// `L = 2 prod(I_m) sum_i ||X_i||_F^2`.
pub fn lipschitz_constant(data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return arg("empty dataset");
    }
    let size = data.samples()[0].x.len() as f64;
    Ok(2.0 * size * squared_mass(data))
}

/// `2 sum_i ||X_i||_F^2`, the Cauchy-Schwarz bound.
pub fn tight_lipschitz_constant(data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return arg("empty dataset");
    }
    Ok(2.0 * squared_mass(data))
}

fn squared_mass(data: &LabeledDataset) -> f64 {
    data.samples()
        .iter()
        .map(|s| dot(s.x.values(), s.x.values()))
        .sum()
}

fn check_shape(w: &DenseTensor, data: &LabeledDataset) -> Result<()> {
    if w.dims() != data.dims() {
        return arg(format!(
            "weight dims {:?} do not match data dims {:?}",
            w.dims(),
            data.dims()
        ));
    }
    Ok(())
}

/// `y_i - <W, X_i> - b` for every sample, in dataset order.
pub fn residuals(w: &DenseTensor, b: f64, data: &LabeledDataset) -> Result<Vec<f64>> {
    check_shape(w, data)?;
    Ok(data
        .samples()
        .iter()
        .map(|s| s.y - dot(w.values(), s.x.values()) - b)
        .collect())
}

/// `-2 sum_i (y_i - <W, X_i> - b) X_i`.
pub fn gradient(w: &DenseTensor, b: f64, data: &LabeledDataset) -> Result<DenseTensor> {
    let r = residuals(w, b, data)?;
    let mut g = w.zeros_like();
    for (s, ri) in data.samples().iter().zip(r) {
        g.axpy(-2.0 * ri, &s.x);
    }
    Ok(g)
}

/// `sum_i (y_i - <W, X_i> - b)^2 + lambda ||W||_*`.
pub fn objective(w: &DenseTensor, b: f64, data: &LabeledDataset, lambda: f64) -> Result<f64> {
    let loss: f64 = residuals(w, b, data)?.iter().map(|r| r * r).sum();
    let reg = if lambda == 0.0 {
        0.0
    } else {
        lambda * tensor_trace_norm(w)?
    };
    Ok(loss + reg)
}

/// Closed-form bias for fixed `W`: the mean of `y_i - <W, X_i>`.
pub fn update_bias(w: &DenseTensor, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return arg("empty dataset");
    }
    let r = residuals(w, 0.0, data)?;
    Ok(r.iter().sum::<f64>() / r.len() as f64)
}

pub fn predict(model: &ClassifierModel, x: &DenseTensor) -> Result<f64> {
    Ok(inner(&model.w, x)? + model.b)
}

/// Relative change used by both stopping tests.
pub(crate) fn rel_change(new: &DenseTensor, old: &DenseTensor) -> f64 {
    let mut d = new.clone();
    d.axpy(-1.0, old);
    frobenius_norm(&d) / (frobenius_norm(old) + 1.0)
}

pub(crate) fn rel_change_scalar(new: f64, old: f64) -> f64 {
    (new - old).abs() / (old.abs() + 1.0)
}

/// Snapshot handed to training observers.
#[derive(Debug)]
pub struct Progress<'a> {
    /// Cumulative APG iterations.
    pub outer_iter: usize,
    /// Samples that contributed to the current objective.
    pub samples_seen: usize,
    /// Batch: alternation index. Online: sample step `t`.
    pub step: usize,
    /// APG iterations spent in the current sweep / sample step so far.
    pub step_iterations: usize,
    pub w: &'a DenseTensor,
    pub b: f64,
}

/// Bias refit hook for `apg_sweep`.
pub(crate) type BiasFn<'a> = &'a mut dyn FnMut(&DenseTensor) -> Result<f64>;

pub(crate) struct SweepOutcome {
    pub w: DenseTensor,
    pub b: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One APG run from warm start `(w0, b0)` with constant step `1/lipschitz`.
/// When `bias` is given, `b` is refit after every `W` step and must also
/// settle before the run counts as converged.
#[allow(clippy::too_many_arguments)]
pub(crate) fn apg_sweep(
    w0: DenseTensor,
    b0: f64,
    lipschitz: f64,
    cfg: &ApgConfig,
    mut grad: impl FnMut(&DenseTensor, f64) -> Result<DenseTensor>,
    mut bias: Option<BiasFn<'_>>,
    mut on_iter: impl FnMut(usize, &DenseTensor, f64),
) -> Result<SweepOutcome> {
    let mut w = w0.clone();
    let mut z = w0;
    let mut b = b0;
    let mut alpha = 1.0f64;
    for k in 1..=cfg.max_outer {
        let mut p = z.clone();
        p.axpy(-1.0 / lipschitz, &grad(&z, b)?);
        let problem = InnerProblem::new(p, lipschitz, cfg.lambda)?;
        let sol = cfg.inner.solve(&problem)?;
        if !sol.w.is_finite() {
            return Err(Error::Numerical(format!(
                "inner solver produced non-finite weights at APG iteration {k}"
            )));
        }
        let w_new = sol.w;
        let alpha_next = (1.0 + (1.0 + 4.0 * alpha * alpha).sqrt()) / 2.0;
        z = w_new.clone();
        let momentum = (alpha - 1.0) / alpha_next;
        if momentum != 0.0 {
            z.axpy(momentum, &w_new);
            z.axpy(-momentum, &w);
        }
        alpha = alpha_next;
        let w_prev = std::mem::replace(&mut w, w_new);

        let w_done = rel_change(&w, &w_prev) < cfg.eps1;
        let b_done = match bias.as_mut() {
            Some(f) => {
                let b_new = f(&w)?;
                let done = rel_change_scalar(b_new, b) < cfg.eps2;
                b = b_new;
                done
            }
            None => true,
        };
        on_iter(k, &w, b);
        if w_done && b_done {
            return Ok(SweepOutcome {
                w,
                b,
                iterations: k,
                converged: true,
            });
        }
    }
    Ok(SweepOutcome {
        w,
        b,
        iterations: cfg.max_outer,
        converged: false,
    })
}

/// Batch trainer; see the module docs.
pub fn fit_batch(data: &LabeledDataset, cfg: &ApgConfig) -> Result<ClassifierModel> {
    fit_batch_observed(data, cfg, |_| {})
}

/// [`fit_batch`] with a callback after every APG iteration.
pub fn fit_batch_observed(
    data: &LabeledDataset,
    cfg: &ApgConfig,
    mut observer: impl FnMut(&Progress<'_>),
) -> Result<ClassifierModel> {
    cfg.validate()?;
    let lipschitz = if cfg.tight_lipschitz {
        tight_lipschitz_constant(data)?
    } else {
        lipschitz_constant(data)?
    };
    if !(lipschitz > 0.0) {
        return arg("all training samples are zero; the Lipschitz constant vanishes");
    }
    let mut w = DenseTensor::zeros(data.dims())?;
    let mean_y = data.labels().iter().sum::<f64>() / data.len() as f64;
    let mut b = mean_y;
    let mut total = 0usize;
    let mut converged = false;
    for alternation in 0..cfg.max_alternations {
        let mut refit = |w: &DenseTensor| update_bias(w, data);
        let interleaved = cfg.bias_schedule == BiasSchedule::Interleaved;
        let sweep = apg_sweep(
            w,
            b,
            lipschitz,
            cfg,
            |z, b| gradient(z, b, data),
            interleaved.then_some(&mut refit as _),
            |k, w, b| {
                observer(&Progress {
                    outer_iter: total + k,
                    samples_seen: data.len(),
                    step: alternation,
                    step_iterations: k,
                    w,
                    b,
                })
            },
        )?;
        total += sweep.iterations;
        w = sweep.w;
        b = sweep.b;
        let b_new = update_bias(&w, data)?;
        let b_done = rel_change_scalar(b_new, b) < cfg.eps2;
        b = b_new;
        if sweep.converged && b_done {
            converged = true;
            break;
        }
    }
    Ok(ClassifierModel {
        w,
        b,
        lambda: cfg.lambda,
        converged,
        iterations: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;

    fn one_sample(values: Vec<f64>, dims: Vec<usize>, y: f64) -> LabeledDataset {
        LabeledDataset::new(vec![Sample::new(
            DenseTensor::new(dims, values).unwrap(),
            y,
        )])
        .unwrap()
    }

    #[test]
    fn lipschitz_examples() {
        // ||X||^2 = 2 on a 2x2x2 tensor
        let mut v = vec![0.0; 8];
        v[0] = 1.0;
        v[5] = -1.0;
        let d = one_sample(v, vec![2, 2, 2], 1.0);
        assert_eq!(lipschitz_constant(&d).unwrap(), 32.0);
        assert_eq!(tight_lipschitz_constant(&d).unwrap(), 4.0);

        let mut v = vec![0.0; 1000];
        v[17] = 1.0;
        let d = one_sample(v, vec![10, 10, 10], 0.0);
        assert_eq!(lipschitz_constant(&d).unwrap(), 2000.0);

        let d = one_sample(vec![0.0; 8], vec![2, 2, 2], 1.0);
        assert_eq!(lipschitz_constant(&d).unwrap(), 0.0);
        assert!(fit_batch(&d, &ApgConfig::default()).is_err());
    }

    #[test]
    fn gradient_examples() {
        let x = vec![1.0, -2.0, 0.5, 3.0];
        let d = one_sample(x.clone(), vec![2, 2], 1.5);
        let w0 = DenseTensor::zeros(&[2, 2]).unwrap();
        let g = gradient(&w0, 0.0, &d).unwrap();
        for (gi, xi) in g.values().iter().zip(&x) {
            assert_eq!(*gi, -2.0 * 1.5 * xi);
        }
        // <W, X> = 0.5 - 0.5 = 0, so y = 0.75 is fit exactly with b = 0.75
        let w = DenseTensor::new(vec![2, 2], vec![0.5, 0.25, 0.0, 0.0]).unwrap();
        let d = one_sample(x, vec![2, 2], 0.75);
        let g = gradient(&w, 0.75, &d).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        assert!(gradient(&DenseTensor::zeros(&[4]).unwrap(), 0.0, &d).is_err());
    }

    #[test]
    fn objective_and_bias_examples() {
        let x1 = DenseTensor::new(vec![2], vec![1.0, 0.0]).unwrap();
        let x2 = DenseTensor::new(vec![2], vec![0.0, 1.0]).unwrap();
        let d = LabeledDataset::new(vec![Sample::new(x1, 1.0), Sample::new(x2, 3.0)]).unwrap();
        let w0 = DenseTensor::zeros(&[2]).unwrap();
        assert_eq!(objective(&w0, 0.0, &d, 1.0).unwrap(), 10.0);
        assert_eq!(update_bias(&w0, &d).unwrap(), 2.0);
        let w = DenseTensor::new(vec![2], vec![1.0, 3.0]).unwrap();
        assert_eq!(objective(&w, 0.0, &d, 0.0).unwrap(), 0.0);
        assert_eq!(update_bias(&w, &d).unwrap(), 0.0);
        let f1 = objective(&w, 0.0, &d, 1.5).unwrap();
        let f2 = objective(&w, 0.0, &d, 3.0).unwrap();
        assert!((f2 - f1 - 1.5 * tensor_trace_norm(&w).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn predict_examples() {
        let x = DenseTensor::new(vec![2, 2], vec![3.0, 0.0, 4.0, 0.0]).unwrap();
        let mut m = ClassifierModel::zeros(&[2, 2], 1.0).unwrap();
        m.b = 0.25;
        assert_eq!(predict(&m, &x).unwrap(), 0.25);
        assert_eq!(predict(&m, &x.zeros_like()).unwrap(), 0.25);
        m.w = x.scaled(1.0 / frobenius_norm(&x));
        m.b = 0.0;
        assert!((predict(&m, &x).unwrap() - 5.0).abs() < 1e-12);
        assert!(predict(&m, &DenseTensor::zeros(&[4]).unwrap()).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ApgConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.eps1 = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = ApgConfig {
            max_outer: 0,
            ..ApgConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
