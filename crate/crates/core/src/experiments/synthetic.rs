use serde::{Deserialize, Serialize};

use super::{map_reps, Arm, Cell, ExperimentConfig, ExperimentError, ExperimentReport, GridSettings, Metric, TrainSettings};
use crate::datasets::Standardizer;
use crate::distill::{distill_student, soft_labels, train_regular, train_teacher};
use crate::model::Model;
use crate::rng::RngStream;
use crate::synthetic::{generate, Hyperplane, SyntheticExperiment, SyntheticSpec};
use crate::triplet::{Dataset, Fields, Triplet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRun {
    pub experiment: SyntheticExperiment,
    pub seed: u64,
    pub reps: usize,
    pub d: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub relevant: usize,
    pub grid: GridSettings,
    pub teacher: TrainSettings,
    pub student: TrainSettings,
    /// Standardize each feature view with training-split statistics.
    pub standardize: bool,
    /// Draw a fresh hyperplane every repetition; when false one hyperplane
    /// (drawn from the master seed) is shared by all repetitions.
    pub redraw_alpha: bool,
}

impl SyntheticRun {
    /// 100 repetitions, `d = 50`, 200 training and 10 000 test points,
    /// `T = lambda = 1`, linear teacher and student.
    pub fn new(experiment: SyntheticExperiment, seed: u64) -> Self {
        SyntheticRun {
            experiment,
            seed,
            reps: 100,
            d: 50,
            n_train: 200,
            n_test: 10_000,
            relevant: 3,
            grid: GridSettings::single(1.0, 1.0),
            teacher: TrainSettings::linear(),
            student: TrainSettings::linear(),
            standardize: true,
            redraw_alpha: true,
        }
    }

    pub fn name(&self) -> String {
        format!("synthetic-{}", self.experiment.number())
    }
}

/// Standardizes `x` and `x*` separately using statistics of `train`.
fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset), ExperimentError> {
    let sx = Standardizer::fit(train.examples().iter().filter_map(|t| t.x.as_deref()));
    let ss = Standardizer::fit(train.examples().iter().filter_map(|t| t.x_star.as_deref()));
    let apply = |d: &Dataset| -> Result<Dataset, ExperimentError> {
        let ex = d
            .examples()
            .iter()
            .map(|t| Triplet {
                id: t.id,
                x: t.x.as_deref().map(|x| sx.apply(x)),
                x_star: t.x_star.as_deref().map(|x| ss.apply(x)),
                y: t.y.clone(),
            })
            .collect();
        Ok(d.with_examples(ex).map_err(crate::distill::DistillError::from)?)
    };
    Ok((apply(train)?, apply(test)?))
}

pub(crate) fn accuracy_on(model: &Model, data: &Dataset, view: Fields) -> Result<f64, ExperimentError> {
    let (_, xs) = data.matrix(view);
    Ok(model.accuracy(xs.view(), &data.class_labels())?)
}

struct RepOutcome {
    privileged: Option<f64>,
    regular: Option<f64>,
    distilled: Vec<Option<f64>>,
    failures: Vec<String>,
}

fn run_rep(run: &SyntheticRun, rep: usize) -> RepOutcome {
    let cells = run.grid.cells();
    let mut out = RepOutcome {
        privileged: None,
        regular: None,
        distilled: vec![None; cells.len()],
        failures: Vec::new(),
    };
    let master = RngStream::new(run.seed, 0).fork_named(&run.name());
    let root = master.fork(rep as u64);
    let spec = SyntheticSpec {
        experiment: run.experiment,
        d: run.d,
        n_train: run.n_train,
        n_test: run.n_test,
        relevant: run.relevant,
        label_noise: true,
        rng: root.fork_named("data"),
    };
    let alpha_stream = if run.redraw_alpha { root } else { master };
    let alpha = Hyperplane::draw(run.d, &alpha_stream.fork_named("alpha"));
    let split = generate(&spec, &alpha).map_err(ExperimentError::from).and_then(|g| {
        let (train, test) = g.train_test();
        if run.standardize {
            standardize(&train, &test)
        } else {
            Ok((train, test))
        }
    });
    let (train, test) = match split {
        Ok(s) => s,
        Err(e) => {
            out.failures.push(format!("rep {rep}: data: {e}"));
            return out;
        }
    };

    let teacher_cfg = run.teacher.learner(root.fork_named("teacher"));
    let student_cfg = run.student.learner(root.fork_named("student"));
    let base = run.grid.distill_config(1.0, 0.0, teacher_cfg, student_cfg);

    let teacher = match train_teacher(&train, &base) {
        Ok(t) => t,
        Err(e) => {
            out.failures.push(format!("rep {rep}: teacher: {e}"));
            return out;
        }
    };
    match accuracy_on(&teacher, &test, Fields::X_STAR) {
        Ok(a) => out.privileged = Some(a),
        Err(e) => out.failures.push(format!("rep {rep}: privileged: {e}")),
    }
    match train_regular(&train, &base).map_err(ExperimentError::from).and_then(|m| accuracy_on(&m, &test, Fields::X)) {
        Ok(a) => out.regular = Some(a),
        Err(e) => out.failures.push(format!("rep {rep}: regular: {e}")),
    }
    for (k, &(t, l)) in cells.iter().enumerate() {
        let cfg = crate::distill::DistillConfig { temperature: t, imitation: l, ..base.clone() };
        let acc = soft_labels(&teacher, &train, t)
            .and_then(|s| distill_student(&train, &s, &cfg))
            .map_err(ExperimentError::from)
            .and_then(|m| accuracy_on(&m, &test, Fields::X));
        match acc {
            Ok(a) => out.distilled[k] = Some(a),
            Err(e) => out.failures.push(format!("rep {rep}: distilled T={t} lambda={l}: {e}")),
        }
    }
    out
}

/// Runs the three arms of one synthetic problem over `run.reps` fresh
/// problems (new hyperplane and data each repetition). Within a repetition
/// the regular and distilled students see the same data and the same
/// initialization stream.
pub fn run_synthetic(run: &SyntheticRun) -> Result<ExperimentReport, ExperimentError> {
    run.grid.validate()?;
    if run.reps == 0 {
        return Err(ExperimentError::Config("reps must be at least 1".into()));
    }
    SyntheticSpec {
        experiment: run.experiment,
        d: run.d,
        n_train: run.n_train,
        n_test: run.n_test,
        relevant: run.relevant,
        label_noise: true,
        rng: RngStream::new(run.seed, 0),
    }
    .validate()?;

    let reps = map_reps(run.reps, |r| run_rep(run, r));
    let grid = run.grid.cells();
    let mut cells = vec![
        Cell::from_values(
            Arm::Privileged,
            "",
            None,
            None,
            Metric::Accuracy,
            &reps.iter().map(|r| r.privileged).collect::<Vec<_>>(),
        ),
        Cell::from_values(
            Arm::Regular,
            "",
            None,
            None,
            Metric::Accuracy,
            &reps.iter().map(|r| r.regular).collect::<Vec<_>>(),
        ),
    ];
    for (k, &(t, l)) in grid.iter().enumerate() {
        cells.push(Cell::from_values(
            Arm::Distilled,
            "",
            Some(t),
            Some(l),
            Metric::Accuracy,
            &reps.iter().map(|r| r.distilled[k]).collect::<Vec<_>>(),
        ));
    }
    let failures = reps.into_iter().flat_map(|r| r.failures).collect();
    Ok(ExperimentReport::new(
        run.name(),
        ExperimentConfig::Synthetic(run.clone()),
        cells,
        failures,
    ))
}
