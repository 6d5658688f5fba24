//! The `mcpca` subcommands.
//!
//! Exit codes: 0 success, 2 bad flags, 3 unreadable or malformed input,
//! 4 degenerate data, 5 data incompatible with the model.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mcpca_core::continuous::{fit_continuous_with, KnotRule};
use mcpca_core::data::{encode_columns, encode_with_schema, ColumnKind, DataMatrix};
use mcpca_core::linalg::{ky_fan, sym_eig, Matrix};
use mcpca_core::metrics::{explained_variance_fraction, spearman_distance_correlation, DEFAULT_PAIR_BUDGET};
use mcpca_core::restart::{FitConfig, Init};
use mcpca_core::sample::{apply_model, sample_fit_with, Applied, McpcaModel, Method};
use mcpca_core::synth::{gen_block_discrete, gen_lowrank_continuous, Block, LowRankTransform};
use mcpca_core::Error as CoreError;

use crate::experiments::{self, Experiment};
use crate::model_file;
use crate::table::{self, format_number};
use crate::threads::Threaded;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;
pub const EXIT_SCHEMA: i32 = 5;

/// An error together with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

type Outcome<T = ()> = Result<T, Failure>;

trait WithCode<T> {
    fn code(self, code: i32) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for Result<T, E> {
    fn code(self, code: i32) -> Outcome<T> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

fn fail<T>(code: i32, msg: impl fmt::Display) -> Outcome<T> {
    Err(Failure {
        code,
        error: anyhow!("{msg}"),
    })
}

// Exit code for a library error raised while reading or fitting data.
fn classify(e: CoreError) -> Failure {
    let code = match &e {
        CoreError::RaggedRow { .. } | CoreError::NonFinite => EXIT_INPUT,
        CoreError::QOutOfRange { .. } | CoreError::InvalidArgument(_) => EXIT_USAGE,
        CoreError::SchemaMismatch { .. } | CoreError::DimensionMismatch { .. } => EXIT_SCHEMA,
        _ => EXIT_DEGENERATE,
    };
    Failure {
        code,
        error: e.into(),
    }
}

#[derive(Debug, Parser)]
#[command(name = "mcpca", version, about = "Maximally correlated principal component analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV table and write it as JSON.
    Fit(FitArgs),
    /// Apply a fitted model: transformed features and scores as CSV.
    Transform(TransformArgs),
    /// Explained variance (and distance preservation) of a model on data.
    Eval(EvalArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Run a named experiment and write its results as CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Mcpca,
    Pca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KnotArg {
    EqualFrequency,
    Uniform,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Number of restarts (restart 0 is the rank-one closed form).
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    /// Stop when a sweep improves the objective by less than this.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Seed for every random choice; results are identical for equal seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for restarts; 0 uses every core. Results do not depend
    /// on this.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

impl SolverArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            restarts: self.restarts,
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
        }
    }

    fn executor(&self) -> Threaded {
        if self.threads == 0 {
            Threaded::available()
        } else {
            Threaded::new(self.threads)
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Mcpca)]
    pub method: MethodArg,
    /// Number of directions.
    #[arg(long)]
    pub q: usize,
    /// Piecewise-linear resolution for continuous columns (1 = linear).
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    #[arg(long, value_enum, default_value_t = KnotArg::EqualFrequency)]
    pub knots: KnotArg,
    /// Column names to treat as discrete regardless of their values.
    #[arg(long, value_delimiter = ',')]
    pub discrete: Vec<String>,
    /// Column names to treat as continuous regardless of their values.
    #[arg(long, value_delimiter = ',')]
    pub continuous: Vec<String>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Reference coordinates (numeric CSV, one row per input row); enables
    /// the distance-preservation metric.
    #[arg(long)]
    pub latent: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PAIR_BUDGET)]
    pub pair_budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    BlockDiscrete,
    Lowrank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformArg {
    Polynomial,
    Piecewise,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Number of variables (default 50 for block-discrete, 20 for lowrank).
    #[arg(long)]
    pub p: Option<usize>,
    /// Rank of the latent matrix (lowrank).
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    /// Quantization levels (block-discrete).
    #[arg(long, default_value_t = 10)]
    pub levels: usize,
    /// Variables per block (block-discrete); the last block may be smaller.
    #[arg(long, default_value_t = 10)]
    pub block_size: usize,
    /// Within-block correlations, reused cyclically (block-discrete).
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.7,0.6,0.5,0.4")]
    pub correlations: Vec<f64>,
    /// Observation maps (lowrank).
    #[arg(long, value_enum, default_value_t = TransformArg::Polynomial)]
    pub transform: TransformArg,
    /// Add standard Gaussian noise to the latent matrix (lowrank).
    #[arg(long)]
    pub noise: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the latent cells (block-discrete) or coordinates (lowrank).
    #[arg(long)]
    pub latent: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Per-repeat CSV; standard output when omitted (medians then go to
    /// standard error).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Fit(a) => fit(&a),
        Command::Transform(a) => transform(&a),
        Command::Eval(a) => eval(&a),
        Command::Synth(a) => synth(&a),
        Command::Bench(a) => bench(&a),
    }
}

fn read_training(args: &FitArgs) -> Outcome<DataMatrix> {
    let raw = table::read_raw_path(&args.input).code(EXIT_INPUT)?;
    let header = raw.header.clone().unwrap_or_default();
    let mut hints = vec![None; header.len()];
    for (names, kind) in [(&args.discrete, ColumnKind::Discrete), (&args.continuous, ColumnKind::Continuous)] {
        for name in names {
            match header.iter().position(|h| h == name) {
                Some(j) if hints[j].is_some() => return fail(EXIT_USAGE, format!("column {name} given two kinds")),
                Some(j) => hints[j] = Some(kind),
                None => return fail(EXIT_USAGE, format!("no column named {name}")),
            }
        }
    }
    encode_columns(&raw, &hints).map_err(|e| match e {
        CoreError::SchemaMismatch { .. } => Failure {
            code: EXIT_INPUT,
            error: e.into(),
        },
        other => classify(other),
    })
}

pub fn fit_model(data: &DataMatrix, args: &FitArgs) -> Outcome<McpcaModel> {
    let config = args.solver.config();
    let exec = args.solver.executor();
    let rule = match args.knots {
        KnotArg::EqualFrequency => KnotRule::EqualFrequency,
        KnotArg::Uniform => KnotRule::Uniform,
    };
    let model = match args.method {
        MethodArg::Pca => fit_continuous_with(data, args.q, 1, rule, &config, &exec).map(|mut m| {
            m.method = Method::Pca;
            m.d = None;
            m
        }),
        MethodArg::Mcpca if data.all_discrete() => sample_fit_with(data, args.q, &config, &Init::plan(&config), &exec),
        MethodArg::Mcpca => fit_continuous_with(data, args.q, args.d, rule, &config, &exec),
    };
    model.map_err(classify)
}

fn fit(args: &FitArgs) -> Outcome {
    if args.solver.restarts == 0 {
        return fail(EXIT_USAGE, "--restarts must be at least 1");
    }
    let data = read_training(args)?;
    let model = fit_model(&data, args)?;
    model_file::save(&model, &args.out).code(EXIT_INPUT)?;
    for w in &model.warnings {
        eprintln!("warning: {}", serde_json::to_string(w).unwrap_or_default());
    }
    print_report(&model).code(EXIT_INPUT)
}

fn print_report(model: &McpcaModel) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    let method = match model.method {
        Method::Mcpca => "mcpca",
        Method::Pca => "pca",
    };
    write!(out, "method {method}  n_features {}  q {}", model.p(), model.q)?;
    if let Some(d) = model.d {
        write!(out, "  d {d}")?;
    }
    writeln!(
        out,
        "  restart {}  iterations {}  converged {}",
        model.restart, model.iterations, model.converged
    )?;
    writeln!(out, "objective trajectory")?;
    for (it, v) in model.objective_trajectory.iter().enumerate() {
        writeln!(out, "{it:>6}  {v:.12}")?;
    }
    writeln!(out, "explained variance")?;
    writeln!(out, "{:>6}  {:>14}  {:>10}", "q'", "ky_fan", "fraction")?;
    let p = model.p();
    for qp in 1..=p {
        writeln!(
            out,
            "{qp:>6}  {:>14.9}  {:>10.6}",
            ky_fan(&model.eigen.values, qp)?,
            explained_variance_fraction(&model.eigen.values, qp, p)
        )?;
    }
    Ok(())
}

fn apply_to_file(model: &McpcaModel, input: &Path) -> Outcome<(Applied, usize)> {
    let raw = table::read_raw_path(input).code(EXIT_INPUT)?;
    let names: Vec<&str> = model.schema.iter().map(|s| s.name.as_str()).collect();
    let header = raw.header.clone().unwrap_or_default();
    if header.iter().map(String::as_str).ne(names.iter().copied()) {
        return fail(
            EXIT_SCHEMA,
            format!("columns {header:?} do not match the model's {names:?}"),
        );
    }
    let (data, unseen) = encode_with_schema(&raw.rows, &model.schema).map_err(classify)?;
    let applied = apply_model(model, &data).map_err(classify)?;
    Ok((applied, unseen))
}

fn transform(args: &TransformArgs) -> Outcome {
    let model = model_file::load(&args.model).code(EXIT_INPUT)?;
    let (applied, unseen) = apply_to_file(&model, &args.input)?;
    let mut header: Vec<String> = model.schema.iter().map(|s| format!("phi_{}", s.name)).collect();
    header.extend((1..=model.q).map(|r| format!("score_{r}")));
    let n = applied.transformed.rows();
    let rows = (0..n).map(|i| {
        applied
            .transformed
            .row(i)
            .iter()
            .chain(applied.scores.row(i))
            .map(|&x| format_number(x))
            .collect()
    });
    match &args.out {
        Some(path) => table::write_rows(table::create(path).code(EXIT_INPUT)?, &header, rows).code(EXIT_INPUT)?,
        None => table::write_rows(std::io::stdout().lock(), &header, rows).code(EXIT_INPUT)?,
    }
    eprintln!("rows {n}  unseen categories {unseen}");
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ExplainedVariance {
    pub q: usize,
    /// Share of the (standardized) transformed features' variance along the
    /// model's first `q` directions.
    pub captured: f64,
    /// Share captured by the top `q` eigenvectors of the same data.
    pub spectral: f64,
}

#[derive(Debug, Serialize)]
pub struct Metrics {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub unseen: usize,
    pub explained_variance: Vec<ExplainedVariance>,
    pub spearman_distance_correlation: Option<f64>,
}

/// Correlation matrix of the columns of `x`; constant columns get zero rows
/// and columns.
pub fn correlation_matrix(x: &Matrix) -> Matrix {
    let (n, p) = (x.rows(), x.cols());
    let nf = n as f64;
    let mean: Vec<f64> = (0..p).map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / nf).collect();
    let sd: Vec<f64> = (0..p)
        .map(|j| ((0..n).map(|i| (x[(i, j)] - mean[j]).powi(2)).sum::<f64>() / nf).sqrt())
        .collect();
    let mut c = Matrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            if sd[a] > 0.0 && sd[b] > 0.0 {
                let v = (0..n)
                    .map(|i| (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b]))
                    .sum::<f64>()
                    / (nf * sd[a] * sd[b]);
                c[(a, b)] = v;
                c[(b, a)] = v;
            }
        }
    }
    c
}

pub fn evaluate(model: &McpcaModel, applied: &Applied, unseen: usize) -> anyhow::Result<Metrics> {
    let c = correlation_matrix(&applied.transformed);
    let spectrum = sym_eig(&c)?.values;
    let p = model.p();
    let mut captured = 0.0;
    let explained_variance = model
        .directions
        .iter()
        .enumerate()
        .map(|(r, v)| {
            captured += v.iter().zip(c.mul_vec(v)).map(|(a, b)| a * b).sum::<f64>();
            ExplainedVariance {
                q: r + 1,
                captured: captured / p as f64,
                spectral: explained_variance_fraction(&spectrum, r + 1, p),
            }
        })
        .collect();
    Ok(Metrics {
        n: applied.transformed.rows(),
        p,
        q: model.q,
        unseen,
        explained_variance,
        spearman_distance_correlation: None,
    })
}

fn eval(args: &EvalArgs) -> Outcome {
    let model = model_file::load(&args.model).code(EXIT_INPUT)?;
    let (applied, unseen) = apply_to_file(&model, &args.input)?;
    let mut metrics = evaluate(&model, &applied, unseen).map_err(|e| Failure {
        code: EXIT_DEGENERATE,
        error: e,
    })?;
    if let Some(path) = &args.latent {
        let latent = table::read_matrix_path(path).code(EXIT_INPUT)?;
        if latent.rows() != applied.scores.rows() {
            return fail(
                EXIT_SCHEMA,
                format!(
                    "{} latent rows for {} data rows",
                    latent.rows(),
                    applied.scores.rows()
                ),
            );
        }
        let s = spearman_distance_correlation(&latent, &applied.scores, args.pair_budget, args.seed)
            .map_err(classify)?;
        metrics.spearman_distance_correlation = Some(s);
    }
    let mut json = serde_json::to_string_pretty(&metrics).code(EXIT_INPUT)?;
    json.push('\n');
    match &args.out {
        Some(path) => std::fs::write(path, json).code(EXIT_INPUT),
        None => std::io::stdout().write_all(json.as_bytes()).code(EXIT_INPUT),
    }
}

fn names(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("{prefix}{j}")).collect()
}

fn synth(args: &SynthArgs) -> Outcome {
    match args.family {
        Family::BlockDiscrete => {
            let p = args.p.unwrap_or(50);
            if args.block_size == 0 || args.correlations.is_empty() {
                return fail(EXIT_USAGE, "need a positive block size and at least one correlation");
            }
            let blocks: Vec<Block> = (0..p.div_ceil(args.block_size))
                .map(|b| Block {
                    size: args.block_size.min(p - b * args.block_size),
                    correlation: args.correlations[b % args.correlations.len()],
                })
                .collect();
            let data = gen_block_discrete(args.n, &blocks, args.levels, args.seed).map_err(|e| Failure {
                code: EXIT_USAGE,
                error: e.into(),
            })?;
            let observed = data.observed.numeric_matrix();
            table::write_matrix(table::create(&args.out).code(EXIT_INPUT)?, &names("x", p), &observed)
                .code(EXIT_INPUT)?;
            if let Some(path) = &args.latent {
                let cells = data.latent.numeric_matrix();
                table::write_matrix(table::create(path).code(EXIT_INPUT)?, &names("y", p), &cells)
                    .code(EXIT_INPUT)?;
            }
        }
        Family::Lowrank => {
            let p = args.p.unwrap_or(20);
            let transform = match args.transform {
                TransformArg::Polynomial => LowRankTransform::Polynomial,
                TransformArg::Piecewise => LowRankTransform::Piecewise,
            };
            let data = gen_lowrank_continuous(args.n, p, args.q, args.noise, transform, args.seed).map_err(|e| {
                Failure {
                    code: EXIT_USAGE,
                    error: e.into(),
                }
            })?;
            table::write_matrix(
                table::create(&args.out).code(EXIT_INPUT)?,
                &names("x", p),
                &data.observed.numeric_matrix(),
            )
            .code(EXIT_INPUT)?;
            if let Some(path) = &args.latent {
                table::write_matrix(table::create(path).code(EXIT_INPUT)?, &names("z", args.q), &data.coordinates)
                    .code(EXIT_INPUT)?;
            }
        }
    }
    Ok(())
}

/// Grouping keys for the median summary of each experiment.
fn summary_keys(e: Experiment) -> &'static [&'static str] {
    match e {
        Experiment::Fig3 => &["q", "q_prime"],
        Experiment::Consistency | Experiment::Scaling => &["n"],
        Experiment::Ternary | Experiment::Gaussian => &["q"],
        Experiment::Fig4a | Experiment::Fig4b | Experiment::Fig4c | Experiment::Fig4d | Experiment::Rank1 => &[],
    }
}

fn bench(args: &BenchArgs) -> Outcome {
    let outcome = experiments::run(
        args.experiment,
        args.repeats,
        args.solver.seed,
        &args.solver.config(),
        &args.solver.executor(),
    )
    .map_err(|e| match e.downcast::<CoreError>() {
        Ok(core) => classify(core),
        Err(e) => Failure {
            code: EXIT_USAGE,
            error: e,
        },
    })?;
    let rows = |t: &experiments::Table| -> Vec<Vec<String>> {
        t.rows
            .iter()
            .map(|r| r.iter().map(|&x| format_number(x)).collect())
            .collect()
    };
    let summary = outcome.table.medians(summary_keys(args.experiment));
    match &args.out {
        Some(path) => {
            table::write_rows(table::create(path).code(EXIT_INPUT)?, &outcome.table.header, rows(&outcome.table))
                .code(EXIT_INPUT)?;
            println!("medians");
            table::write_rows(std::io::stdout().lock(), &summary.header, rows(&summary)).code(EXIT_INPUT)?;
        }
        None => {
            table::write_rows(std::io::stdout().lock(), &outcome.table.header, rows(&outcome.table))
                .code(EXIT_INPUT)?;
            eprintln!("medians");
            table::write_rows(std::io::stderr().lock(), &summary.header, rows(&summary)).code(EXIT_INPUT)?;
        }
    }
    Ok(())
}
