use std::path::PathBuf;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{
    map_reps, require_files, Arm, Cell, ExperimentConfig, ExperimentError, ExperimentReport, GridSettings, Metric,
    TrainSettings,
};
use crate::datasets::{downscale, load_idx, ImageSet};
use crate::distill::{distill_student, soft_labels, train_regular, train_teacher, DistillConfig};
use crate::model::{Model, Task};
use crate::rng::{sample_without_replacement, RngStream};
use crate::triplet::{Dataset, Header, Triplet};

pub const MNIST_TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const MNIST_TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const MNIST_TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnistRun {
    pub seed: u64,
    /// Directory holding the four IDX files under their usual names.
    pub data_dir: PathBuf,
    pub sample_sizes: Vec<usize>,
    pub reps: usize,
    pub grid: GridSettings,
    pub teacher: TrainSettings,
    pub student: TrainSettings,
    /// Evaluate on the first `k` test images only; `None` uses all of them.
    pub test_limit: Option<usize>,
    /// How the privileged 28x28 view becomes the regular view.
    pub downscale: String,
}

impl MnistRun {
    /// Ten repetitions per sample size over the default grid. Both networks
    /// train at learning rate 0.1 for 200 epochs: the generic MLP default
    /// (0.01 for 100 epochs) leaves the 300-sample teacher badly underfit.
    pub fn new(data_dir: PathBuf, seed: u64) -> Self {
        let net = TrainSettings {
            learning_rate: 0.1,
            epochs: 200,
            ..TrainSettings::mlp()
        };
        MnistRun {
            seed,
            data_dir,
            sample_sizes: vec![300, 500],
            reps: 10,
            grid: GridSettings::default_grid(),
            teacher: net.clone(),
            student: net,
            test_limit: None,
            downscale: "4x4 block mean".into(),
        }
    }

    fn paths(&self) -> [PathBuf; 4] {
        [MNIST_TRAIN_IMAGES, MNIST_TRAIN_LABELS, MNIST_TEST_IMAGES, MNIST_TEST_LABELS].map(|f| self.data_dir.join(f))
    }
}

/// Evaluation matrices for both views, built once per run.
pub(crate) struct TestViews {
    pub privileged: Array2<f64>,
    pub regular: Array2<f64>,
    pub labels: Vec<usize>,
}

impl TestViews {
    pub fn accuracy(&self, model: &Model, privileged: bool) -> Result<f64, ExperimentError> {
        let xs = if privileged { &self.privileged } else { &self.regular };
        Ok(model.accuracy(xs.view(), &self.labels)?)
    }
}

pub(crate) fn one_hot(label: usize, classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    v[label] = 1.0;
    v
}

pub(crate) fn rows_to_matrix(rows: Vec<Vec<f64>>, width: usize) -> Array2<f64> {
    let n = rows.len();
    Array2::from_shape_vec((n, width), rows.into_iter().flatten().collect()).expect("rows have equal width")
}

fn test_views(set: &ImageSet, limit: Option<usize>) -> Result<TestViews, ExperimentError> {
    let n = limit.map_or(set.len(), |k| k.min(set.len()));
    let regular = (0..n).map(|i| downscale(set.image(i))).collect::<Result<Vec<_>, _>>()?;
    Ok(TestViews {
        privileged: rows_to_matrix((0..n).map(|i| set.features(i)).collect(), set.image_size()),
        regular: rows_to_matrix(regular, 49),
        labels: (0..n).map(|i| set.label(i)).collect(),
    })
}

fn train_subset(set: &ImageSet, idx: &[usize]) -> Result<Dataset, ExperimentError> {
    let header = Header {
        d: 49,
        d_star: set.image_size(),
        c: set.classes,
        task: Task::Classification,
    };
    let examples = idx
        .iter()
        .map(|&i| {
            Ok(Triplet {
                id: i as u64,
                x: Some(downscale(set.image(i))?),
                x_star: Some(set.features(i)),
                y: Some(one_hot(set.label(i), set.classes)),
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(Dataset::new(header, examples).map_err(crate::distill::DistillError::from)?)
}

pub(crate) struct GridOutcome {
    pub privileged: Option<f64>,
    pub regular: Option<f64>,
    pub distilled: Vec<Option<f64>>,
    pub failures: Vec<String>,
}

/// Teacher, baseline and every grid cell for one training sample.
fn run_rep(run: &MnistRun, train: &ImageSet, test: &TestViews, n: usize, rep: usize) -> GridOutcome {
    let cells = run.grid.cells();
    let mut out = GridOutcome {
        privileged: None,
        regular: None,
        distilled: vec![None; cells.len()],
        failures: Vec::new(),
    };
    let tag = format!("n={n} rep {rep}");
    let root = RngStream::new(run.seed, 0).fork_named("mnist").fork(n as u64).fork(rep as u64);
    let idx = sample_without_replacement(&mut root.fork_named("sample").generator(), train.len(), n);
    let data = match train_subset(train, &idx) {
        Ok(d) => d,
        Err(e) => {
            out.failures.push(format!("{tag}: data: {e}"));
            return out;
        }
    };
    let base = run.grid.distill_config(
        1.0,
        0.0,
        run.teacher.learner(root.fork_named("teacher")),
        run.student.learner(root.fork_named("student")),
    );
    let teacher = match train_teacher(&data, &base) {
        Ok(t) => t,
        Err(e) => {
            out.failures.push(format!("{tag}: teacher: {e}"));
            return out;
        }
    };
    match test.accuracy(&teacher, true) {
        Ok(a) => out.privileged = Some(a),
        Err(e) => out.failures.push(format!("{tag}: privileged: {e}")),
    }
    match train_regular(&data, &base).map_err(ExperimentError::from).and_then(|m| test.accuracy(&m, false)) {
        Ok(a) => out.regular = Some(a),
        Err(e) => out.failures.push(format!("{tag}: regular: {e}")),
    }
    for (k, &(t, l)) in cells.iter().enumerate() {
        let cfg = DistillConfig {
            temperature: t,
            imitation: l,
            ..base.clone()
        };
        let acc = soft_labels(&teacher, &data, t)
            .and_then(|s| distill_student(&data, &s, &cfg))
            .map_err(ExperimentError::from)
            .and_then(|m| test.accuracy(&m, false));
        match acc {
            Ok(a) => out.distilled[k] = Some(a),
            Err(e) => out.failures.push(format!("{tag}: distilled T={t} lambda={l}: {e}")),
        }
    }
    out
}

pub(crate) fn grid_cells(group: &str, grid: &GridSettings, outcomes: &[&GridOutcome], metric: Metric) -> Vec<Cell> {
    let mut cells = vec![
        Cell::from_values(
            Arm::Privileged,
            group,
            None,
            None,
            metric,
            &outcomes.iter().map(|o| o.privileged).collect::<Vec<_>>(),
        ),
        Cell::from_values(
            Arm::Regular,
            group,
            None,
            None,
            metric,
            &outcomes.iter().map(|o| o.regular).collect::<Vec<_>>(),
        ),
    ];
    for (k, &(t, l)) in grid.cells().iter().enumerate() {
        cells.push(Cell::from_values(
            Arm::Distilled,
            group,
            Some(t),
            Some(l),
            metric,
            &outcomes.iter().map(|o| o.distilled[k]).collect::<Vec<_>>(),
        ));
    }
    cells
}

/// Teacher on 28x28 pixels, students on 7x7 block means, for every
/// training size and grid cell. All files are checked before any training.
pub fn run_mnist(run: &MnistRun) -> Result<ExperimentReport, ExperimentError> {
    run.grid.validate()?;
    if run.reps == 0 || run.sample_sizes.is_empty() {
        return Err(ExperimentError::Config("need at least one repetition and one sample size".into()));
    }
    let [tri, trl, tei, tel] = run.paths();
    require_files(&[tri.clone(), trl.clone(), tei.clone(), tel.clone()])?;
    let train = load_idx(&tri, &trl)?;
    let test = load_idx(&tei, &tel)?;
    for set in [&train, &test] {
        if (set.height, set.width) != (28, 28) {
            return Err(crate::datasets::DataError::Shape {
                expected: (28, 28),
                actual: (set.height, set.width),
            }
            .into());
        }
    }
    if let Some(&n) = run.sample_sizes.iter().find(|&&n| n == 0 || n > train.len()) {
        return Err(ExperimentError::Config(format!(
            "sample size {n} not in 1..={}",
            train.len()
        )));
    }
    let views = test_views(&test, run.test_limit)?;

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for &n in &run.sample_sizes {
        let outcomes = map_reps(run.reps, |r| run_rep(run, &train, &views, n, r));
        cells.extend(grid_cells(
            &format!("n={n}"),
            &run.grid,
            &outcomes.iter().collect::<Vec<_>>(),
            Metric::Accuracy,
        ));
        failures.extend(outcomes.into_iter().flat_map(|o| o.failures));
    }
    Ok(ExperimentReport::new(
        "mnist".into(),
        ExperimentConfig::Mnist(run.clone()),
        cells,
        failures,
    ))
}
