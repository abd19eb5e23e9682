//! Command-line harness for the distillation experiments.
//!
//! Every subcommand writes one report (CSV by default) to `--out` or stdout.
//! Failures exit with status 1 (bad arguments: 2) after printing a single
//! JSON line `{"error": <kind>, "message": <text>}` to stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use distillery::experiments::{
    emit_report, resolve_data_dir, run_cifar_semisup, run_experiment, run_mnist, run_multitask, run_synthetic,
    CifarRun, ExperimentError, ExperimentReport, GridSettings, MnistRun, MultitaskRun, ReportFormat, SyntheticRun,
    TrainSettings,
};
use distillery::rng::RngStream;
use distillery::synthetic::{generate, write_dump, Hyperplane, SyntheticExperiment, SyntheticSpec};

#[derive(Parser)]
#[command(name = "distillery", version, about = "Generalized distillation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic logistic-regression problems 1-4.
    Synthetic(SyntheticArgs),
    /// MNIST: 28x28 teacher, 7x7 student.
    Mnist(MnistArgs),
    /// CIFAR-10 semi-supervised distillation with noisy student inputs.
    Cifar(CifarArgs),
    /// Multitask regression on a 21-input, 7-target table.
    Multitask(MultitaskArgs),
    /// Rerun the experiment described by a JSON report's config snapshot.
    Rerun(RerunArgs),
    /// Write one synthetic data set in the text dump format.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Repetitions (defaults depend on the experiment).
    #[arg(long)]
    reps: Option<usize>,
    /// Temperatures, comma separated.
    #[arg(long = "T", value_delimiter = ',')]
    temperatures: Option<Vec<f64>>,
    /// Imitation weights in [0, 1], comma separated.
    #[arg(long = "lambda", value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Divide student logits by T as well.
    #[arg(long)]
    match_temperature: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Override the learning rate of both learners.
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Override the epoch count of both learners.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the minibatch size of both learners.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Override the L2 coefficient of both learners.
    #[arg(long)]
    l2: Option<f64>,
}

impl Common {
    fn grid(&self, default: GridSettings) -> GridSettings {
        GridSettings {
            temperatures: self.temperatures.clone().unwrap_or(default.temperatures),
            lambdas: self.lambdas.clone().unwrap_or(default.lambdas),
            match_temperature: self.match_temperature || default.match_temperature,
            ..default
        }
    }

    fn tune(&self, s: &mut TrainSettings) {
        if let Some(v) = self.learning_rate {
            s.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            s.epochs = v;
        }
        if let Some(v) = self.batch_size {
            s.batch_size = v;
        }
        if let Some(v) = self.l2 {
            s.l2 = v;
        }
    }
}

#[derive(Args)]
struct SyntheticArgs {
    /// Problem number, 1-4.
    #[arg(long, short = 'e')]
    experiment: u8,
    #[command(flatten)]
    common: Common,
    /// Use raw features instead of training-split standardization.
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct MnistArgs {
    #[command(flatten)]
    common: Common,
    /// Directory with the IDX files (default: $DISTILLERY_DATA_DIR/mnist).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Training sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    test_limit: Option<usize>,
}

#[derive(Args)]
struct CifarArgs {
    #[command(flatten)]
    common: Common,
    /// Directory with the binary batches (default: $DISTILLERY_DATA_DIR/cifar-10-batches-bin).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 300)]
    n_labeled: usize,
    /// Cap on the unlabeled soft-labeled pool.
    #[arg(long)]
    max_unlabeled: Option<usize>,
    /// Weight on soft terms of unlabeled images.
    #[arg(long, default_value_t = 1.0)]
    unlabeled_weight: f64,
    #[arg(long)]
    test_limit: Option<usize>,
}

#[derive(Args)]
struct MultitaskArgs {
    #[command(flatten)]
    common: Common,
    /// Training table (default: $DISTILLERY_DATA_DIR/sarcos/sarcos_inv.csv).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Optional separate test table.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[arg(long, default_value_t = 300)]
    n_train: usize,
    #[arg(long)]
    test_limit: Option<usize>,
}

#[derive(Args)]
struct RerunArgs {
    /// JSON report whose config snapshot is replayed.
    #[arg(long)]
    from: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, short = 'e')]
    experiment: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn experiment(n: u8) -> Result<SyntheticExperiment, ExperimentError> {
    SyntheticExperiment::from_number(n).ok_or_else(|| ExperimentError::Config(format!("experiment {n} not in 1..=4")))
}

fn generate_dump(a: GenerateArgs) -> Result<(), ExperimentError> {
    let root = RngStream::new(a.seed, 0);
    let spec = SyntheticSpec::new(experiment(a.experiment)?, root.fork_named("data"));
    let alpha = Hyperplane::draw(spec.d, &root.fork_named("alpha"));
    let data = generate(&spec, &alpha)?.dataset;
    let io = |path: PathBuf| move |e| ExperimentError::Io { path, source: e };
    match a.out {
        Some(p) => {
            let f = std::fs::File::create(&p).map_err(io(p.clone()))?;
            write_dump(&data, std::io::BufWriter::new(f)).map_err(io(p))
        }
        None => write_dump(&data, std::io::stdout().lock()).map_err(io("<stdout>".into())),
    }
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    let (report, out, format): (ExperimentReport, Option<PathBuf>, ReportFormat) = match cli.command {
        Command::Synthetic(a) => {
            let mut r = SyntheticRun::new(experiment(a.experiment)?, a.common.seed);
            r.reps = a.common.reps.unwrap_or(r.reps);
            r.grid = a.common.grid(r.grid);
            r.standardize = !a.raw;
            a.common.tune(&mut r.teacher);
            a.common.tune(&mut r.student);
            (run_synthetic(&r)?, a.common.out, a.common.format)
        }
        Command::Mnist(a) => {
            let mut r = MnistRun::new(resolve_data_dir(a.data, "mnist")?, a.common.seed);
            r.reps = a.common.reps.unwrap_or(r.reps);
            r.grid = a.common.grid(r.grid);
            r.sample_sizes = a.sizes.unwrap_or(r.sample_sizes);
            r.test_limit = a.test_limit;
            a.common.tune(&mut r.teacher);
            a.common.tune(&mut r.student);
            (run_mnist(&r)?, a.common.out, a.common.format)
        }
        Command::Cifar(a) => {
            let mut r = CifarRun::new(resolve_data_dir(a.data, "cifar-10-batches-bin")?, a.common.seed);
            r.reps = a.common.reps.unwrap_or(r.reps);
            r.grid = a.common.grid(r.grid);
            r.grid.unlabeled_weight = a.unlabeled_weight;
            r.sigma = a.sigma;
            r.n_labeled = a.n_labeled;
            r.max_unlabeled = a.max_unlabeled;
            r.test_limit = a.test_limit;
            a.common.tune(&mut r.teacher);
            a.common.tune(&mut r.student);
            (run_cifar_semisup(&r)?, a.common.out, a.common.format)
        }
        Command::Multitask(a) => {
            let path = match a.data {
                Some(p) => p,
                None => resolve_data_dir(None, "sarcos")?.join("sarcos_inv.csv"),
            };
            if !a.delimiter.is_ascii() {
                return Err(ExperimentError::Config(format!("delimiter {:?} is not ASCII", a.delimiter)));
            }
            let mut r = MultitaskRun::new(path, a.common.seed);
            r.test_path = a.test;
            r.delimiter = a.delimiter as u8;
            r.n_train = a.n_train;
            r.test_limit = a.test_limit;
            r.reps = a.common.reps.unwrap_or(r.reps);
            r.grid = a.common.grid(r.grid);
            a.common.tune(&mut r.teacher);
            a.common.tune(&mut r.student);
            (run_multitask(&r)?, a.common.out, a.common.format)
        }
        Command::Rerun(a) => {
            let file = std::fs::File::open(&a.from).map_err(|e| ExperimentError::Io {
                path: a.from.clone(),
                source: e,
            })?;
            let old = distillery::experiments::read_json(std::io::BufReader::new(file))?;
            (run_experiment(&old.config)?, a.out, a.format)
        }
        Command::Generate(a) => return generate_dump(a),
    };
    emit_report(&report, format, out.as_deref())?;
    for f in &report.failures {
        eprintln!("warning: {f}");
    }
    Ok(())
}

fn kind(e: &ExperimentError) -> &'static str {
    match e {
        ExperimentError::Config(_) => "config",
        ExperimentError::MissingInput(_) => "missing-input",
        ExperimentError::Data(_) => "data",
        ExperimentError::Distill(_) => "distill",
        ExperimentError::Model(_) => "model",
        ExperimentError::Synthetic(_) => "synthetic",
        ExperimentError::Io { .. } => "io",
        ExperimentError::Json(_) => "json",
        ExperimentError::Csv(_) => "csv",
    }
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let line = serde_json::json!({ "error": kind, "message": message.replace('\n', " ") });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return fail("usage", first.to_string(), 2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(kind(&e), e.to_string(), 1),
    }
}
