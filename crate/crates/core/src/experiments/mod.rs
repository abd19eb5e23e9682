//! Experiment harness: the three arms (privileged, regular, distilled) over
//! repetitions and temperature/imitation grids, aggregated into reports.

mod cifar;
mod mnist;
mod multitask;
mod report;
mod synthetic;

pub use cifar::{run_cifar_semisup, CifarRun, CIFAR_TEST_BATCH, CIFAR_TRAIN_BATCHES};
pub use mnist::{run_mnist, MnistRun, MNIST_TEST_IMAGES, MNIST_TEST_LABELS, MNIST_TRAIN_IMAGES, MNIST_TRAIN_LABELS};
pub use multitask::{run_multitask, MultitaskRun};
pub use report::{
    emit_report, read_csv_rows, read_json, report_to_csv, write_csv, write_json, CsvRow, ReportFormat, CSV_HEADER,
};
pub use synthetic::{run_synthetic, SyntheticRun};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::DataError;
use crate::distill::{DistillConfig, DistillError, LearnerConfig};
use crate::model::{Architecture, InitScheme, ModelError, TrainConfig};
use crate::rng::RngStream;
use crate::synthetic::SyntheticError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable consulted for dataset directories.
pub const DATA_DIR_ENV: &str = "DISTILLERY_DATA_DIR";

pub const DEFAULT_TEMPERATURES: [f64; 6] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0];
pub const DEFAULT_LAMBDAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    MissingInput(PathBuf),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Distill(#[from] DistillError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synthetic(#[from] SyntheticError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Which classifier a cell describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    /// Teacher trained and tested on privileged features.
    Privileged,
    /// Student trained on regular features and hard labels only.
    Regular,
    /// Student distilled from the teacher's soft labels.
    Distilled,
    /// Student distilled using labeled examples only (semi-supervised runs).
    DistilledLabeled,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Privileged => "privileged",
            Arm::Regular => "regular",
            Arm::Distilled => "distilled",
            Arm::DistilledLabeled => "distilled-labeled",
        }
    }

    pub fn parse(s: &str) -> Option<Arm> {
        [Arm::Privileged, Arm::Regular, Arm::Distilled, Arm::DistilledLabeled]
            .into_iter()
            .find(|a| a.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Complete,
    Incomplete,
}

/// Aggregate of one arm (and grid point) across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub arm: Arm,
    /// Sub-experiment label, e.g. `n=300` or `task=2`; empty when unused.
    pub group: String,
    pub temperature: Option<f64>,
    pub lambda: Option<f64>,
    pub metric: Metric,
    pub mean: f64,
    /// Sample standard deviation across repetitions (0 for one repetition).
    pub std: f64,
    /// Repetitions that produced a value.
    pub reps: usize,
    pub status: CellStatus,
    pub values: Vec<f64>,
}

impl Cell {
    /// Aggregates per-repetition values; `None` marks a failed repetition.
    pub fn from_values(
        arm: Arm,
        group: impl Into<String>,
        temperature: Option<f64>,
        lambda: Option<f64>,
        metric: Metric,
        values: &[Option<f64>],
    ) -> Cell {
        let ok: Vec<f64> = values.iter().flatten().copied().collect();
        let (mean, std) = mean_std(&ok);
        Cell {
            arm,
            group: group.into(),
            temperature,
            lambda,
            metric,
            mean,
            std,
            reps: ok.len(),
            status: if ok.len() == values.len() && !ok.is_empty() {
                CellStatus::Complete
            } else {
                CellStatus::Incomplete
            },
            values: ok,
        }
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Optimizer and architecture of one learner, without its random stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub architecture: Architecture,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub init: InitScheme,
}

impl TrainSettings {
    pub fn linear() -> Self {
        let d = TrainConfig::linear_default(RngStream::new(0, 0));
        TrainSettings {
            architecture: Architecture::Linear,
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            batch_size: d.batch_size,
            l2: d.l2,
            init: d.init,
        }
    }

    pub fn mlp() -> Self {
        let d = TrainConfig::mlp_default(RngStream::new(0, 0));
        TrainSettings {
            architecture: Architecture::mlp(20, 20),
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            batch_size: d.batch_size,
            l2: d.l2,
            init: d.init,
        }
    }

    pub fn learner(&self, rng: RngStream) -> LearnerConfig {
        LearnerConfig {
            architecture: self.architecture.clone(),
            train: TrainConfig {
                learning_rate: self.learning_rate,
                epochs: self.epochs,
                batch_size: self.batch_size,
                l2: self.l2,
                init: self.init,
                rng,
            },
        }
    }
}

/// Temperature / imitation grid and distillation switches shared by runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub temperatures: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub unlabeled_weight: f64,
    pub match_temperature: bool,
}

impl GridSettings {
    pub fn single(temperature: f64, lambda: f64) -> Self {
        GridSettings {
            temperatures: vec![temperature],
            lambdas: vec![lambda],
            unlabeled_weight: 1.0,
            match_temperature: false,
        }
    }

    pub fn default_grid() -> Self {
        GridSettings {
            temperatures: DEFAULT_TEMPERATURES.to_vec(),
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            unlabeled_weight: 1.0,
            match_temperature: false,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.temperatures.is_empty() || self.lambdas.is_empty() {
            return Err(ExperimentError::Config("empty temperature or imitation grid".into()));
        }
        if let Some(t) = self.temperatures.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(ExperimentError::Config(format!("temperature {t} must be positive")));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(ExperimentError::Config(format!("imitation {l} outside [0, 1]")));
        }
        Ok(())
    }

    /// Every `(T, lambda)` pair, temperature-major.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.temperatures
            .iter()
            .flat_map(|&t| self.lambdas.iter().map(move |&l| (t, l)))
            .collect()
    }

    pub(crate) fn distill_config(
        &self,
        temperature: f64,
        lambda: f64,
        teacher: LearnerConfig,
        student: LearnerConfig,
    ) -> DistillConfig {
        DistillConfig {
            temperature,
            imitation: lambda,
            unlabeled_weight: self.unlabeled_weight,
            match_temperature: self.match_temperature,
            teacher,
            student,
        }
    }
}

/// Everything needed to rerun an experiment; stored inside its report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExperimentConfig {
    Synthetic(SyntheticRun),
    Mnist(MnistRun),
    Cifar(CifarRun),
    Multitask(MultitaskRun),
}

impl ExperimentConfig {
    pub fn master_seed(&self) -> u64 {
        match self {
            ExperimentConfig::Synthetic(r) => r.seed,
            ExperimentConfig::Mnist(r) => r.seed,
            ExperimentConfig::Cifar(r) => r.seed,
            ExperimentConfig::Multitask(r) => r.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub artifact_version: String,
    pub experiment: String,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    /// One message per failed repetition or arm.
    pub failures: Vec<String>,
}

impl ExperimentReport {
    pub(crate) fn new(experiment: String, config: ExperimentConfig, cells: Vec<Cell>, failures: Vec<String>) -> Self {
        ExperimentReport {
            schema_version: REPORT_SCHEMA_VERSION,
            artifact_version: ARTIFACT_VERSION.to_string(),
            experiment,
            master_seed: config.master_seed(),
            config,
            cells,
            failures,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(|c| c.status == CellStatus::Complete)
    }

    pub fn cell(&self, arm: Arm, group: &str, temperature: Option<f64>, lambda: Option<f64>) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.arm == arm && c.group == group && c.temperature == temperature && c.lambda == lambda)
    }

    /// Highest-mean (accuracy) or lowest-mean (MSE) cell of an arm in a group.
    pub fn best_cell(&self, arm: Arm, group: &str) -> Option<&Cell> {
        let mut it = self.cells.iter().filter(|c| c.arm == arm && c.group == group && c.reps > 0);
        let first = it.next()?;
        Some(it.fold(first, |best, c| {
            let better = match c.metric {
                Metric::Accuracy => c.mean > best.mean,
                Metric::Mse => c.mean < best.mean,
            };
            if better {
                c
            } else {
                best
            }
        }))
    }
}

/// Reruns whatever experiment a report's config snapshot describes.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    match config {
        ExperimentConfig::Synthetic(r) => run_synthetic(r),
        ExperimentConfig::Mnist(r) => run_mnist(r),
        ExperimentConfig::Cifar(r) => run_cifar_semisup(r),
        ExperimentConfig::Multitask(r) => run_multitask(r),
    }
}

/// Dataset directory from an explicit flag or `DISTILLERY_DATA_DIR`.
pub fn resolve_data_dir(explicit: Option<PathBuf>, subdir: &str) -> Result<PathBuf, ExperimentError> {
    match explicit {
        Some(p) => Ok(p),
        None => std::env::var_os(DATA_DIR_ENV)
            .map(|d| PathBuf::from(d).join(subdir))
            .ok_or_else(|| ExperimentError::Config(format!("no data path given and {DATA_DIR_ENV} is unset"))),
    }
}

pub(crate) fn require_files(paths: &[PathBuf]) -> Result<(), ExperimentError> {
    match paths.iter().find(|p| !p.is_file()) {
        Some(p) => Err(ExperimentError::MissingInput(p.clone())),
        None => Ok(()),
    }
}

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
/// Results come back in index order either way.
pub(crate) fn map_reps<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
