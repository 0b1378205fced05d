//! Solvers for the proximal subproblem of each APG step:
//!
//! ```text
//! min_W  L/2 ||W - P||_F^2 + lambda * ||W||_*
//! ```
//!
//! where `||W||_*` is the tensor trace norm (mean of the unfolding nuclear
//! norms). Two splittings are provided: Douglas-Rachford on the product space
//! of `N + 1` copies of `W`, and ADMM with one auxiliary copy per mode.

use crate::error::{arg, Error, Result};
use crate::prox::{mode_svt, prox_quadratic, Threshold};
use crate::tensor::{frobenius_norm, tensor_trace_norm, DenseTensor};

pub const DEFAULT_GAMMA: f64 = 1e-7;
pub const DEFAULT_BETA: f64 = 1e7;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 500;

#[derive(Debug, Clone)]
pub struct InnerProblem {
    p: DenseTensor,
    lipschitz: f64,
    lambda: f64,
}

impl InnerProblem {
    pub fn new(p: DenseTensor, lipschitz: f64, lambda: f64) -> Result<Self> {
        if !(lipschitz > 0.0) || !lipschitz.is_finite() {
            return arg(format!("lipschitz constant must be > 0, got {lipschitz}"));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return arg(format!("lambda must be >= 0, got {lambda}"));
        }
        if !p.is_finite() {
            return Err(Error::Numerical(
                "subproblem point has non-finite entries".into(),
            ));
        }
        Ok(Self {
            p,
            lipschitz,
            lambda,
        })
    }

    pub fn p(&self) -> &DenseTensor {
        &self.p
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `L/2 ||w - P||^2 + lambda * ||w||_*`.
    pub fn objective(&self, w: &DenseTensor) -> Result<f64> {
        let d = frobenius_norm(&w.sub(&self.p)?);
        Ok(0.5 * self.lipschitz * d * d + self.lambda * tensor_trace_norm(w)?)
    }
}

#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub w: DenseTensor,
    pub converged: bool,
    pub iterations: usize,
    /// Last value of the stopping statistic.
    pub residual: f64,
}

/// Douglas-Rachford iterate on the product space: components `W_0..W_N`.
/// `W_0` carries the quadratic term, `W_i` the mode-`i` nuclear norm.
#[derive(Debug, Clone)]
pub struct DrState {
    components: Vec<DenseTensor>,
    average: DenseTensor,
    gamma: f64,
    relaxation: f64,
}

fn mean_of(components: &[DenseTensor]) -> DenseTensor {
    let mut avg = components[0].zeros_like();
    let weight = 1.0 / components.len() as f64;
    for c in components {
        avg.axpy(weight, c);
    }
    avg
}

fn relative_change(new: &DenseTensor, old: &DenseTensor) -> f64 {
    let mut d = new.clone();
    d.axpy(-1.0, old);
    frobenius_norm(&d) / (frobenius_norm(old) + 1.0)
}

impl DrState {
    /// All components start at `P`.
    pub fn new(problem: &InnerProblem, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return arg(format!("gamma must be > 0, got {gamma}"));
        }
        let components = vec![problem.p.clone(); problem.p.order() + 1];
        Ok(Self {
            average: problem.p.clone(),
            components,
            gamma,
            relaxation: 1.0,
        })
    }

    /// Relaxation `t_n` in `[0, 2]`; defaults to 1.
    pub fn with_relaxation(mut self, t: f64) -> Result<Self> {
        if !(0.0..=2.0).contains(&t) {
            return arg(format!("relaxation must lie in [0, 2], got {t}"));
        }
        self.relaxation = t;
        Ok(self)
    }

    /// Projection of the current iterate onto the consensus set.
    pub fn estimate(&self) -> &DenseTensor {
        &self.average
    }

    pub fn components(&self) -> &[DenseTensor] {
        &self.components
    }

    /// One sweep; returns the relative change of the consensus estimate.
    pub fn step(&mut self, problem: &InnerProblem) -> Result<f64> {
        let n = problem.p.order();
        let eps = Threshold::new(problem.lambda * (n as f64 + 1.0) * self.gamma / n as f64)?;
        let avg = &self.average;
        let mut updated = Vec::with_capacity(n + 1);
        for (i, comp) in self.components.iter().enumerate() {
            let mut reflected = avg.scaled(2.0);
            reflected.axpy(-1.0, comp);
            let prox = if i == 0 {
                prox_quadratic(&reflected, &problem.p, problem.lipschitz, self.gamma, n)?
            } else {
                mode_svt(&reflected, i - 1, eps)?
            };
            let mut next = comp.clone();
            next.axpy(self.relaxation, &prox);
            next.axpy(-self.relaxation, avg);
            updated.push(next);
        }
        self.components = updated;
        let new_avg = mean_of(&self.components);
        let change = relative_change(&new_avg, &self.average);
        self.average = new_avg;
        Ok(change)
    }
}

/// ADMM iterate: `W`, per-mode copies `Y_i`, and multipliers `U_i`.
#[derive(Debug, Clone)]
pub struct AdmState {
    w: DenseTensor,
    y: Vec<DenseTensor>,
    u: Vec<DenseTensor>,
    beta: f64,
}

/// Convergence statistics of one ADMM sweep.
#[derive(Debug, Clone, Copy)]
pub struct AdmResiduals {
    /// `max_i ||W - Y_i||_F / (1 + ||W||_F)`.
    pub primal: f64,
    /// `||W_new - W_old||_F / (1 + ||W_old||_F)`.
    pub change: f64,
}

impl AdmState {
    /// `W = Y_i = P`, `U_i = 0`.
    pub fn new(problem: &InnerProblem, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return arg(format!("beta must be > 0, got {beta}"));
        }
        let n = problem.p.order();
        Ok(Self {
            w: problem.p.clone(),
            y: vec![problem.p.clone(); n],
            u: vec![problem.p.zeros_like(); n],
            beta,
        })
    }

    pub fn w(&self) -> &DenseTensor {
        &self.w
    }

    pub fn y(&self) -> &[DenseTensor] {
        &self.y
    }

    pub fn u(&self) -> &[DenseTensor] {
        &self.u
    }

    pub fn step(&mut self, problem: &InnerProblem) -> Result<AdmResiduals> {
        let n = self.y.len();
        let beta = self.beta;
        let l = problem.lipschitz;
        let denom = l + beta * n as f64;

        let mut w = problem.p.scaled(l / denom);
        for (y, u) in self.y.iter().zip(&self.u) {
            w.axpy(beta / denom, y);
            w.axpy(1.0 / denom, u);
        }

        let eps = Threshold::new(problem.lambda / (beta * n as f64))?;
        let w_norm = frobenius_norm(&w);
        let mut primal: f64 = 0.0;
        for (i, (y, u)) in self.y.iter_mut().zip(self.u.iter_mut()).enumerate() {
            let mut arg = w.clone();
            arg.axpy(-1.0 / beta, u);
            *y = mode_svt(&arg, i, eps)?;
            let gap = w.sub(y)?;
            u.axpy(-beta, &gap);
            primal = primal.max(frobenius_norm(&gap));
        }
        let change = relative_change(&w, &self.w);
        self.w = w;
        Ok(AdmResiduals {
            primal: primal / (1.0 + w_norm),
            change,
        })
    }
}

fn check_budget(tol: f64, max_iter: usize) -> Result<()> {
    if !(tol > 0.0) {
        return arg(format!("tolerance must be > 0, got {tol}"));
    }
    if max_iter == 0 {
        return arg("max_iter must be at least 1");
    }
    Ok(())
}

/// Douglas-Rachford splitting. Stops when the consensus estimate changes by
/// less than `tol` relative; otherwise returns the last estimate flagged as
/// not converged.
pub fn solve_dr(
    problem: &InnerProblem,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<InnerSolution> {
    check_budget(tol, max_iter)?;
    let mut state = DrState::new(problem, gamma)?;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        residual = state.step(problem)?;
        if residual < tol {
            return Ok(InnerSolution {
                w: state.average,
                converged: true,
                iterations: it,
                residual,
            });
        }
    }
    Ok(InnerSolution {
        w: state.average,
        converged: false,
        iterations: max_iter,
        residual,
    })
}

/// ADMM. Stops when every consensus gap `||W - Y_i||` and the change in `W`
/// are below `tol * (1 + ||W||)`.
pub fn solve_adm(
    problem: &InnerProblem,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<InnerSolution> {
    check_budget(tol, max_iter)?;
    let mut state = AdmState::new(problem, beta)?;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let r = state.step(problem)?;
        residual = r.primal.max(r.change);
        if residual <= tol {
            return Ok(InnerSolution {
                w: state.w,
                converged: true,
                iterations: it,
                residual,
            });
        }
    }
    Ok(InnerSolution {
        w: state.w,
        converged: false,
        iterations: max_iter,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerSolver {
    DouglasRachford { gamma: f64 },
    Admm { beta: f64 },
}

impl InnerSolver {
    pub fn dr() -> Self {
        InnerSolver::DouglasRachford {
            gamma: DEFAULT_GAMMA,
        }
    }

    pub fn adm() -> Self {
        InnerSolver::Admm { beta: DEFAULT_BETA }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InnerSolver::DouglasRachford { .. } => "dr",
            InnerSolver::Admm { .. } => "adm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    pub solver: InnerSolver,
    pub tol: f64,
    pub max_iter: usize,
    /// Treat `gamma`/`beta` as multipliers of `1/L` and `L` respectively.
    ///
    /// Fixed values only suit one problem scale; the splittings converge
    /// fastest when the step is matched to the quadratic's curvature.
    pub scale_by_lipschitz: bool,
}

impl InnerConfig {
    pub fn new(solver: InnerSolver) -> Self {
        Self {
            solver,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            scale_by_lipschitz: false,
        }
    }

    /// Config with `gamma = 1/L` or `beta = L`, resolved per problem.
    pub fn lipschitz_scaled(kind: &str) -> Result<Self> {
        let solver = match kind {
            "dr" => InnerSolver::DouglasRachford { gamma: 1.0 },
            "adm" => InnerSolver::Admm { beta: 1.0 },
            other => return arg(format!("unknown inner solver {other:?}")),
        };
        Ok(Self {
            scale_by_lipschitz: true,
            ..Self::new(solver)
        })
    }

    /// The solver parameters actually used for `problem`.
    pub fn resolved(&self, problem: &InnerProblem) -> InnerSolver {
        if !self.scale_by_lipschitz {
            return self.solver;
        }
        let l = problem.lipschitz;
        match self.solver {
            InnerSolver::DouglasRachford { gamma } => {
                InnerSolver::DouglasRachford { gamma: gamma / l }
            }
            InnerSolver::Admm { beta } => InnerSolver::Admm { beta: beta * l },
        }
    }

    pub fn solve(&self, problem: &InnerProblem) -> Result<InnerSolution> {
        match self.resolved(problem) {
            InnerSolver::DouglasRachford { gamma } => {
                solve_dr(problem, gamma, self.tol, self.max_iter)
            }
            InnerSolver::Admm { beta } => solve_adm(problem, beta, self.tol, self.max_iter),
        }
    }
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self::new(InnerSolver::adm())
    }
}
