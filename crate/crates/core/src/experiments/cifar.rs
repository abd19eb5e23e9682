use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::mnist::{one_hot, rows_to_matrix, GridOutcome, TestViews};
use super::{
    map_reps, require_files, Arm, Cell, ExperimentConfig, ExperimentError, ExperimentReport, GridSettings, Metric,
    TrainSettings,
};
use crate::datasets::{load_cifar, pollute, ImageSet};
use crate::distill::{distill_student, soft_labels, train_regular, train_teacher, DistillConfig, DistillError, SoftLabel};
use crate::math::softmax;
use crate::model::{Model, Task};
use crate::rng::{sample_without_replacement, shuffle, RngStream};
use crate::triplet::{Dataset, Header, Triplet};

pub const CIFAR_TRAIN_BATCHES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const CIFAR_TEST_BATCH: &str = "test_batch.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CifarRun {
    pub seed: u64,
    /// Directory holding the binary batches (`data_batch_*.bin`, `test_batch.bin`).
    pub data_dir: PathBuf,
    pub n_labeled: usize,
    /// Standard deviation of the additive pixel noise on `[0, 1]` features.
    pub sigma: f64,
    /// Cap on the unlabeled soft-labeled pool; `None` uses every remaining
    /// training image.
    pub max_unlabeled: Option<usize>,
    pub reps: usize,
    pub grid: GridSettings,
    pub teacher: TrainSettings,
    pub student: TrainSettings,
    pub test_limit: Option<usize>,
}

impl CifarRun {
    pub fn new(data_dir: PathBuf, seed: u64) -> Self {
        CifarRun {
            seed,
            data_dir,
            n_labeled: 300,
            sigma: 0.5,
            max_unlabeled: None,
            reps: 1,
            grid: GridSettings::default_grid(),
            teacher: TrainSettings::mlp(),
            student: TrainSettings::mlp(),
            test_limit: None,
        }
    }

    fn paths(&self) -> (Vec<PathBuf>, PathBuf) {
        (
            CIFAR_TRAIN_BATCHES.iter().map(|f| self.data_dir.join(f)).collect(),
            self.data_dir.join(CIFAR_TEST_BATCH),
        )
    }
}

/// The noisy (regular) view of image `i`. Noise is a property of the data
/// set, so it depends on the image index and split but not the repetition.
fn noisy(set: &ImageSet, i: usize, sigma: f64, noise: &RngStream) -> Result<Vec<f64>, ExperimentError> {
    Ok(pollute(&set.features(i), sigma, &noise.fork(i as u64))?)
}

struct CifarOutcome {
    grid: GridOutcome,
    labeled_only: Vec<Option<f64>>,
}

fn run_rep(run: &CifarRun, train: &ImageSet, test: &TestViews, rep: usize) -> CifarOutcome {
    let cells = run.grid.cells();
    let mut out = CifarOutcome {
        grid: GridOutcome {
            privileged: None,
            regular: None,
            distilled: vec![None; cells.len()],
            failures: Vec::new(),
        },
        labeled_only: vec![None; cells.len()],
    };
    match rep_inner(run, train, test, rep, &mut out) {
        Ok(()) => {}
        Err(e) => out.grid.failures.push(format!("rep {rep}: {e}")),
    }
    out
}

fn rep_inner(
    run: &CifarRun,
    train: &ImageSet,
    test: &TestViews,
    rep: usize,
    out: &mut CifarOutcome,
) -> Result<(), ExperimentError> {
    let root = RngStream::new(run.seed, 0).fork_named("cifar").fork(rep as u64);
    let noise = RngStream::new(run.seed, 0).fork_named("cifar-train-noise");
    let mut order: Vec<usize> = (0..train.len()).collect();
    shuffle(&mut root.fork_named("partition").generator(), &mut order);
    let (labeled_idx, rest) = order.split_at(run.n_labeled);
    let unlabeled_idx: Vec<usize> = match run.max_unlabeled {
        Some(k) if k < rest.len() => {
            let mut pick: Vec<usize> = sample_without_replacement(&mut root.fork_named("pool").generator(), rest.len(), k)
                .into_iter()
                .map(|j| rest[j])
                .collect();
            pick.sort_unstable();
            pick
        }
        _ => {
            let mut all = rest.to_vec();
            all.sort_unstable();
            all
        }
    };

    let size = train.image_size();
    let labeled = Dataset::new(
        Header {
            d: size,
            d_star: size,
            c: train.classes,
            task: Task::Classification,
        },
        labeled_idx
            .iter()
            .map(|&i| {
                Ok(Triplet {
                    id: i as u64,
                    x: Some(noisy(train, i, run.sigma, &noise)?),
                    x_star: Some(train.features(i)),
                    y: Some(one_hot(train.label(i), train.classes)),
                })
            })
            .collect::<Result<Vec<_>, ExperimentError>>()?,
    )
    .map_err(DistillError::from)?;

    let base = run.grid.distill_config(
        1.0,
        0.0,
        run.teacher.learner(root.fork_named("teacher")),
        run.student.learner(root.fork_named("student")),
    );
    let teacher = train_teacher(&labeled, &base)?;
    out.grid.privileged = Some(test.accuracy(&teacher, true)?);
    let regular = train_regular(&labeled, &base)?;
    out.grid.regular = Some(test.accuracy(&regular, false)?);

    // Unlabeled examples keep only the noisy view; their soft labels are
    // computed from the clean images as they stream past, so the clean
    // pool is never held in memory twice.
    let mut all = labeled.examples().to_vec();
    let mut unlabeled_logits = Vec::with_capacity(unlabeled_idx.len());
    for &i in &unlabeled_idx {
        unlabeled_logits.push((i as u64, teacher.forward(&train.features(i))?));
        all.push(Triplet {
            id: i as u64,
            x: Some(noisy(train, i, run.sigma, &noise)?),
            x_star: None,
            y: None,
        });
    }
    let full = labeled.with_examples(all).map_err(DistillError::from)?;

    for (k, &(t, l)) in run.grid.cells().iter().enumerate() {
        let cfg = DistillConfig {
            temperature: t,
            imitation: l,
            ..base.clone()
        };
        let labeled_soft = soft_labels(&teacher, &labeled, t)?;
        let cell = |data: &Dataset, soft: &[SoftLabel]| -> Result<f64, ExperimentError> {
            let m: Model = distill_student(data, soft, &cfg)?;
            test.accuracy(&m, false)
        };
        match cell(&labeled, &labeled_soft) {
            Ok(a) => out.labeled_only[k] = Some(a),
            Err(e) => out.grid.failures.push(format!("rep {rep}: labeled-only T={t} lambda={l}: {e}")),
        }
        let mut soft = labeled_soft;
        for (id, z) in &unlabeled_logits {
            soft.push(SoftLabel {
                id: *id,
                target: softmax(z, t).map_err(DistillError::from)?.into_inner(),
            });
        }
        match cell(&full, &soft) {
            Ok(a) => out.grid.distilled[k] = Some(a),
            Err(e) => out.grid.failures.push(format!("rep {rep}: semi-supervised T={t} lambda={l}: {e}")),
        }
    }
    Ok(())
}

/// Semi-supervised distillation: the teacher learns from `n_labeled` clean
/// images and soft-labels the rest of the training set; students see noisy
/// images only. Reports the teacher, the supervised student, labeled-only
/// distillation (`distilled-labeled`) and semi-supervised distillation.
pub fn run_cifar_semisup(run: &CifarRun) -> Result<ExperimentReport, ExperimentError> {
    run.grid.validate()?;
    if run.reps == 0 || run.n_labeled == 0 {
        return Err(ExperimentError::Config("need at least one repetition and one labeled image".into()));
    }
    if !(run.sigma >= 0.0 && run.sigma.is_finite()) {
        return Err(ExperimentError::Config(format!("noise sigma {} must be non-negative", run.sigma)));
    }
    let (train_paths, test_path) = run.paths();
    let mut all_paths = train_paths.clone();
    all_paths.push(test_path.clone());
    require_files(&all_paths)?;
    let train = load_cifar(&train_paths)?;
    let test = load_cifar(&[test_path])?;
    if run.n_labeled > train.len() {
        return Err(ExperimentError::Config(format!(
            "{} labeled images requested, only {} available",
            run.n_labeled,
            train.len()
        )));
    }
    let limit = run.test_limit.map_or(test.len(), |k| k.min(test.len()));
    let test_noise = RngStream::new(run.seed, 0).fork_named("cifar-test-noise");
    let views = TestViews {
        privileged: rows_to_matrix((0..limit).map(|i| test.features(i)).collect(), test.image_size()),
        regular: rows_to_matrix(
            (0..limit)
                .map(|i| noisy(&test, i, run.sigma, &test_noise))
                .collect::<Result<Vec<_>, _>>()?,
            test.image_size(),
        ),
        labels: (0..limit).map(|i| test.label(i)).collect(),
    };

    let outcomes = map_reps(run.reps, |r| run_rep(run, &train, &views, r));
    let mut cells = super::mnist::grid_cells(
        "",
        &run.grid,
        &outcomes.iter().map(|o| &o.grid).collect::<Vec<_>>(),
        Metric::Accuracy,
    );
    for (k, &(t, l)) in run.grid.cells().iter().enumerate() {
        cells.push(Cell::from_values(
            Arm::DistilledLabeled,
            "",
            Some(t),
            Some(l),
            Metric::Accuracy,
            &outcomes.iter().map(|o| o.labeled_only[k]).collect::<Vec<_>>(),
        ));
    }
    let failures = outcomes.into_iter().flat_map(|o| o.grid.failures).collect();
    Ok(ExperimentReport::new(
        "cifar-semisup".into(),
        ExperimentConfig::Cifar(run.clone()),
        cells,
        failures,
    ))
}
