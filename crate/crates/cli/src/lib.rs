//! Benchmark driver behind the `tracenorm` binary: dataset generation,
//! batch/online training with either inner solver, and evaluation.
//!
//! Everything the binary does is reachable from here so tests can run
//! the same code paths without spawning processes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tracenorm::apg::{objective, BiasSchedule, Progress};
use tracenorm::datagen::{gen_dataset, DatasetSpec};
use tracenorm::inner::{self, InnerSolver};
use tracenorm::metrics::{evaluate, MetricsRecord, CSV_HEADER};
use tracenorm::online::{fit_online_observed, SampleSource, SequentialSampler, UniformSampler};
use tracenorm::{apg, io, ApgConfig, ClassifierModel, InnerConfig, LabeledDataset};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tracenorm::Error),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.to_path_buf(),
        source,
    }
}

/// Attaches the offending path to I/O failures coming out of the core crate.
fn with_path<T>(path: &Path, r: tracenorm::Result<T>) -> Result<T> {
    match r {
        Err(tracenorm::Error::Io(e)) => Err(file_err(path)(e)),
        other => Ok(other?),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "tracenorm",
    version,
    about = "Trace-norm regularized tensor regression benchmark"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled dataset of random CP-rank-r tensors.
    Gen(GenArgs),
    /// Train a model and write it (plus optional metrics CSV).
    Train(TrainArgs),
    /// Score a model on a dataset.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Comma-separated tensor dimensions, e.g. 10,10,10.
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long)]
    pub rank_min: usize,
    #[arg(long)]
    pub rank_max: usize,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Batch,
    Online,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Dr,
    Adm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleOrder {
    /// Uniform draws with replacement, seeded by --seed.
    Uniform,
    /// Dataset order, wrapping around after each pass.
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BiasMode {
    Interleaved,
    Alternating,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Batch)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = SolverKind::Adm)]
    pub solver: SolverKind,
    /// Mini-batch size for online mode.
    #[arg(long, default_value_t = 1)]
    pub mu: usize,
    #[arg(long, default_value_t = apg::DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// ADMM penalty (a multiplier of L with --scale-inner).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Douglas-Rachford step (a multiplier of 1/L with --scale-inner).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = apg::DEFAULT_EPS)]
    pub eps1: f64,
    #[arg(long, default_value_t = apg::DEFAULT_EPS)]
    pub eps2: f64,
    /// APG iteration cap per sweep (batch) or per sample step (online).
    #[arg(long, default_value_t = apg::DEFAULT_MAX_OUTER)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Held-out set for the metrics columns (defaults to the training set).
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    /// Online mode: write a metrics row every K sample steps.
    #[arg(long, default_value_t = 10)]
    pub log_every: usize,
    /// Use L = 2 sum ||X||^2 instead of the looser bound with the prod(I) factor.
    #[arg(long)]
    pub tight_lipschitz: bool,
    /// Interpret --beta / --gamma relative to the step's Lipschitz constant.
    #[arg(long)]
    pub scale_inner: bool,
    #[arg(long, default_value_t = inner::DEFAULT_TOL)]
    pub inner_tol: f64,
    #[arg(long, default_value_t = inner::DEFAULT_MAX_ITER)]
    pub inner_max_iter: usize,
    /// Online mode: number of passes over the data (total samples = passes * n).
    #[arg(long, default_value_t = 1)]
    pub passes: usize,
    /// Online mode: sample order.
    #[arg(long, value_enum, default_value_t = SampleOrder::Uniform)]
    pub order: SampleOrder,
    /// Batch mode: bias update schedule.
    #[arg(long, value_enum, default_value_t = BiasMode::Interleaved)]
    pub bias: BiasMode,
    /// Batch mode: cap on sweep / bias-refit alternations.
    #[arg(long, default_value_t = apg::DEFAULT_MAX_ALTERNATIONS)]
    pub max_alternations: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
}

impl TrainArgs {
    /// Training args with the documented defaults.
    pub fn new(data: impl Into<PathBuf>, model: impl Into<PathBuf>) -> Self {
        Cli::parse_from([
            "tracenorm".as_ref(),
            "train".as_ref(),
            "--data".as_ref(),
            data.into().as_os_str(),
            "--model".as_ref(),
            model.into().as_os_str(),
        ])
        .command
        .into_train()
        .expect("train subcommand")
    }

    pub fn apg_config(&self) -> Result<ApgConfig> {
        if self.mu == 0 {
            return Err(CliError::Usage("--mu must be at least 1".into()));
        }
        if self.log_every == 0 {
            return Err(CliError::Usage("--log-every must be at least 1".into()));
        }
        if self.eta.is_nan() || self.eta <= 0.0 {
            return Err(CliError::Usage(format!(
                "--eta must be > 0, got {}",
                self.eta
            )));
        }
        let unit = if self.scale_inner { Some(1.0) } else { None };
        let solver = match self.solver {
            SolverKind::Dr => InnerSolver::DouglasRachford {
                gamma: self.gamma.or(unit).unwrap_or(inner::DEFAULT_GAMMA),
            },
            SolverKind::Adm => InnerSolver::Admm {
                beta: self.beta.or(unit).unwrap_or(inner::DEFAULT_BETA),
            },
        };
        let inner = InnerConfig {
            solver,
            tol: self.inner_tol,
            max_iter: self.inner_max_iter,
            scale_by_lipschitz: self.scale_inner,
        };
        let cfg = ApgConfig {
            lambda: self.lambda,
            eps1: self.eps1,
            eps2: self.eps2,
            max_outer: self.max_outer,
            inner,
            max_alternations: self.max_alternations,
            tight_lipschitz: self.tight_lipschitz,
            bias_schedule: match self.bias {
                BiasMode::Interleaved => BiasSchedule::Interleaved,
                BiasMode::Alternating => BiasSchedule::Alternating,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Command {
    fn into_train(self) -> Option<TrainArgs> {
        match self {
            Command::Train(a) => Some(a),
            _ => None,
        }
    }
}

pub fn gen(args: &GenArgs) -> Result<LabeledDataset> {
    let spec = DatasetSpec {
        dims: args.dims.clone(),
        rank_min: args.rank_min,
        rank_max: args.rank_max,
        count: args.count,
        seed: args.seed,
    };
    let data = gen_dataset(&spec)?;
    with_path(&args.out, io::write_dataset(&args.out, &data))?;
    Ok(data)
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    with_path(path, io::read_dataset(path))
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: ClassifierModel,
    /// Training objective of the final model.
    pub objective: f64,
    pub records: Vec<MetricsRecord>,
}

/// Collects metrics rows; evaluation time is kept off the training clock.
struct Recorder<'a> {
    train: &'a LabeledDataset,
    test: &'a LabeledDataset,
    lambda: f64,
    eta: f64,
    start: Instant,
    paused: Duration,
    records: Vec<MetricsRecord>,
    error: Option<CliError>,
}

impl Recorder<'_> {
    fn record(&mut self, p: &Progress<'_>) {
        let elapsed = self.start.elapsed() - self.paused;
        let t0 = Instant::now();
        if self.error.is_none() {
            match self.row(p, elapsed) {
                Ok(r) => self.records.push(r),
                Err(e) => self.error = Some(e),
            }
        }
        self.paused += t0.elapsed();
    }

    fn row(&self, p: &Progress<'_>, elapsed: Duration) -> Result<MetricsRecord> {
        let model = ClassifierModel {
            w: p.w.clone(),
            b: p.b,
            lambda: self.lambda,
            converged: false,
            iterations: p.outer_iter,
        };
        let (test_mse, test_acc) = evaluate(&model, self.test, self.eta)?;
        Ok(MetricsRecord {
            elapsed_sec: elapsed.as_secs_f64(),
            samples_seen: p.samples_seen,
            outer_iter: p.outer_iter,
            objective: objective(p.w, p.b, self.train, self.lambda)?,
            test_mse,
            test_acc,
        })
    }
}

/// Trains per `args` on already-loaded data; writes nothing.
pub fn train_on(
    args: &TrainArgs,
    train: &LabeledDataset,
    test: Option<&LabeledDataset>,
) -> Result<TrainReport> {
    let cfg = args.apg_config()?;
    let test = test.unwrap_or(train);
    if test.dims() != train.dims() {
        return Err(CliError::Usage(format!(
            "test dims {:?} differ from training dims {:?}",
            test.dims(),
            train.dims()
        )));
    }
    let want_rows = args.metrics.is_some();
    let mut rec = Recorder {
        train,
        test,
        lambda: cfg.lambda,
        eta: args.eta,
        start: Instant::now(),
        paused: Duration::ZERO,
        records: Vec::new(),
        error: None,
    };
    let model = match args.mode {
        Mode::Batch => apg::fit_batch_observed(train, &cfg, |p| {
            if want_rows {
                rec.record(p)
            }
        })?,
        Mode::Online => {
            let total = args
                .passes
                .checked_mul(train.len())
                .ok_or_else(|| CliError::Usage("--passes too large".into()))?;
            let t_max = total.div_ceil(args.mu);
            let mut uniform;
            let mut sequential;
            let stream: &mut dyn SampleSource = match args.order {
                SampleOrder::Uniform => {
                    uniform = UniformSampler::new(train, args.seed).take_total(total);
                    &mut uniform
                }
                SampleOrder::Sequential => {
                    sequential = SequentialSampler::new(train, true).take_total(total);
                    &mut sequential
                }
            };
            let log_every = args.log_every;
            let fit = fit_online_observed(stream, &cfg, args.mu, t_max, |p| {
                if want_rows && (p.step % log_every == 0 || p.step == t_max) {
                    rec.record(p)
                }
            })?;
            fit.model
        }
    };
    if let Some(e) = rec.error {
        return Err(e);
    }
    let objective = objective(&model.w, model.b, train, cfg.lambda)?;
    Ok(TrainReport {
        model,
        objective,
        records: rec.records,
    })
}

/// Caps a sample source at a fixed number of draws.
struct Limited<S> {
    inner: S,
    left: usize,
}

trait TakeTotal: Sized {
    fn take_total(self, n: usize) -> Limited<Self> {
        Limited {
            inner: self,
            left: n,
        }
    }
}

impl<S: SampleSource> TakeTotal for S {}

impl<S: SampleSource> SampleSource for Limited<S> {
    fn dims(&self) -> &[usize] {
        self.inner.dims()
    }

    fn next_sample(&mut self) -> Option<tracenorm::Sample> {
        if self.left == 0 {
            return None;
        }
        self.left -= 1;
        self.inner.next_sample()
    }
}

pub fn write_metrics(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let f = File::create(path).map_err(file_err(path))?;
    let mut w = BufWriter::new(f);
    let res = (|| {
        writeln!(w, "{CSV_HEADER}")?;
        for r in records {
            writeln!(w, "{}", r.csv_row())?;
        }
        w.flush()
    })();
    res.map_err(file_err(path))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let f = File::open(path).map_err(file_err(path))?;
    let mut lines = BufReader::new(f).lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == CSV_HEADER => {}
        Some(Err(e)) => return Err(file_err(path)(e)),
        _ => {
            return Err(CliError::Usage(format!(
                "{}: missing metrics header",
                path.display()
            )))
        }
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line.map_err(file_err(path))?;
        if !line.trim().is_empty() {
            out.push(MetricsRecord::parse_csv_row(&line)?);
        }
    }
    Ok(out)
}

/// Loads the inputs, trains, and writes the model and metrics files.
pub fn train(args: &TrainArgs) -> Result<TrainReport> {
    let data = load_dataset(&args.data)?;
    let test = args.test.as_deref().map(load_dataset).transpose()?;
    let report = train_on(args, &data, test.as_ref())?;
    with_path(&args.model, io::write_model(&args.model, &report.model))?;
    if let Some(path) = &args.metrics {
        write_metrics(path, &report.records)?;
    }
    Ok(report)
}

pub fn eval(args: &EvalArgs) -> Result<(f64, f64)> {
    let model = with_path(&args.model, io::read_model(&args.model))?;
    let data = load_dataset(&args.data)?;
    Ok(evaluate(&model, &data, args.eta)?)
}

/// Runs one parsed command, printing its summary to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let io_err = |e| CliError::File {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    match &cli.command {
        Command::Gen(a) => {
            let data = gen(a)?;
            writeln!(out, "wrote {} samples to {}", data.len(), a.out.display()).map_err(io_err)
        }
        Command::Train(a) => {
            let r = train(a)?;
            writeln!(
                out,
                "objective {:.10e}\nb {:.10e}\niterations {}\nconverged {}",
                r.objective, r.model.b, r.model.iterations, r.model.converged
            )
            .map_err(io_err)
        }
        Command::Eval(a) => {
            let (mse, acc) = eval(a)?;
            writeln!(out, "mse {mse:.10e}\naccuracy {acc:.6}").map_err(io_err)
        }
    }
}
