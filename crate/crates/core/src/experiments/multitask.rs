use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{
    map_reps, require_files, Arm, Cell, ExperimentConfig, ExperimentError, ExperimentReport, GridSettings, Metric,
    TrainSettings,
};
use crate::datasets::{load_multitask_csv, MultitaskTable, Standardizer, MULTITASK_INPUTS, MULTITASK_TASKS};
use crate::distill::{distill_student, multitask_views, soft_labels, train_regular, train_teacher, DistillConfig};
use crate::model::Model;
use crate::rng::{shuffle, RngStream};
use crate::triplet::{Dataset, Fields};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultitaskRun {
    pub seed: u64,
    /// Training table (21 inputs then 7 targets per row).
    pub path: PathBuf,
    /// Separate test table; without one, rows not drawn for training are
    /// used for testing.
    pub test_path: Option<PathBuf>,
    pub delimiter: u8,
    pub n_train: usize,
    pub test_limit: Option<usize>,
    pub reps: usize,
    /// Only the imitation weights are used: temperature does not act on
    /// regression outputs.
    pub grid: GridSettings,
    pub teacher: TrainSettings,
    pub student: TrainSettings,
    /// Standardize inputs and every task's target with training-split
    /// statistics, so MSE is in units of target variance.
    pub standardize: bool,
}

impl MultitaskRun {
    pub fn new(path: PathBuf, seed: u64) -> Self {
        MultitaskRun {
            seed,
            path,
            test_path: None,
            delimiter: b',',
            n_train: 300,
            test_limit: None,
            reps: 10,
            grid: GridSettings::default_grid(),
            teacher: TrainSettings::mlp(),
            student: TrainSettings::mlp(),
            standardize: true,
        }
    }
}

fn identity(width: usize) -> Standardizer {
    Standardizer {
        mean: vec![0.0; width],
        scale: vec![1.0; width],
    }
}

fn standardized(table: &MultitaskTable, idx: &[usize], sx: &Standardizer, sy: &Standardizer) -> Result<MultitaskTable, ExperimentError> {
    let rows = idx
        .iter()
        .map(|&i| {
            let mut r = sx.apply(table.inputs(i));
            r.extend(sy.apply(table.outputs(i)));
            r
        })
        .collect();
    Ok(MultitaskTable::from_rows(rows)?)
}

fn mse(model: &Model, data: &Dataset, view: Fields) -> Result<f64, ExperimentError> {
    let (_, xs) = data.matrix(view);
    let (_, ys) = data.matrix(Fields::Y);
    Ok(model.mean_squared_error(xs.view(), ys.view())?)
}

/// `[task][arm slot]`: slot 0 privileged, 1 regular, then one per lambda.
type RepMse = Vec<Vec<Option<f64>>>;

fn run_rep(run: &MultitaskRun, train: &MultitaskTable, test: Option<&MultitaskTable>, rep: usize) -> (RepMse, Vec<String>) {
    let slots = 2 + run.grid.lambdas.len();
    let mut out = vec![vec![None; slots]; MULTITASK_TASKS];
    let mut failures = Vec::new();
    let root = RngStream::new(run.seed, 0).fork_named("multitask").fork(rep as u64);

    let mut order: Vec<usize> = (0..train.len()).collect();
    shuffle(&mut root.fork_named("partition").generator(), &mut order);
    let (tr_idx, rest) = order.split_at(run.n_train);
    let (test_table, te_idx): (&MultitaskTable, Vec<usize>) = match test {
        Some(t) => (t, (0..t.len()).collect()),
        None => (train, rest.to_vec()),
    };
    let te_idx = &te_idx[..run.test_limit.map_or(te_idx.len(), |k| k.min(te_idx.len()))];

    let (sx, sy) = if run.standardize {
        (
            Standardizer::fit(tr_idx.iter().map(|&i| train.inputs(i))),
            Standardizer::fit(tr_idx.iter().map(|&i| train.outputs(i))),
        )
    } else {
        (identity(MULTITASK_INPUTS), identity(MULTITASK_TASKS))
    };
    let tables = standardized(train, tr_idx, &sx, &sy).and_then(|a| Ok((a, standardized(test_table, te_idx, &sx, &sy)?)));
    let (tr, te) = match tables {
        Ok(t) => t,
        Err(e) => {
            failures.push(format!("rep {rep}: data: {e}"));
            return (out, failures);
        }
    };

    for (task, slot) in out.iter_mut().enumerate() {
        let tag = format!("rep {rep} task {}", task + 1);
        let views = multitask_views(&tr, task).and_then(|a| Ok((a, multitask_views(&te, task)?)));
        let (train_view, test_view) = match views {
            Ok(v) => v,
            Err(e) => {
                failures.push(format!("{tag}: {e}"));
                continue;
            }
        };
        let stream = root.fork(task as u64);
        let base = run.grid.distill_config(
            1.0,
            0.0,
            run.teacher.learner(stream.fork_named("teacher")),
            run.student.learner(stream.fork_named("student")),
        );
        let teacher = match train_teacher(&train_view, &base) {
            Ok(t) => t,
            Err(e) => {
                failures.push(format!("{tag}: teacher: {e}"));
                continue;
            }
        };
        match mse(&teacher, &test_view, Fields::X_STAR) {
            Ok(v) => slot[0] = Some(v),
            Err(e) => failures.push(format!("{tag}: privileged: {e}")),
        }
        match train_regular(&train_view, &base)
            .map_err(ExperimentError::from)
            .and_then(|m| mse(&m, &test_view, Fields::X))
        {
            Ok(v) => slot[1] = Some(v),
            Err(e) => failures.push(format!("{tag}: regular: {e}")),
        }
        let soft = match soft_labels(&teacher, &train_view, 1.0) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("{tag}: soft labels: {e}"));
                continue;
            }
        };
        for (k, &l) in run.grid.lambdas.iter().enumerate() {
            let cfg = DistillConfig {
                imitation: l,
                ..base.clone()
            };
            match distill_student(&train_view, &soft, &cfg)
                .map_err(ExperimentError::from)
                .and_then(|m| mse(&m, &test_view, Fields::X))
            {
                Ok(v) => slot[2 + k] = Some(v),
                Err(e) => failures.push(format!("{tag}: distilled lambda={l}: {e}")),
            }
        }
    }
    (out, failures)
}

/// Per task: a teacher predicting that torque from the other six, a
/// regression student on the 21 inputs, and distilled students for each
/// imitation weight. Inputs and targets are standardized with training-split
/// statistics unless `standardize` is off. Also reports the per-repetition
/// mean over tasks as group `mean`.
pub fn run_multitask(run: &MultitaskRun) -> Result<ExperimentReport, ExperimentError> {
    run.grid.validate()?;
    if run.reps == 0 || run.n_train == 0 {
        return Err(ExperimentError::Config("need at least one repetition and one training row".into()));
    }
    let mut paths = vec![run.path.clone()];
    paths.extend(run.test_path.clone());
    require_files(&paths)?;
    let train = load_multitask_csv(&run.path, run.delimiter)?;
    let test = run
        .test_path
        .as_ref()
        .map(|p| load_multitask_csv(p, run.delimiter))
        .transpose()?;
    let needed = run.n_train + usize::from(test.is_none());
    if train.len() < needed {
        return Err(ExperimentError::Config(format!(
            "{} rows in {}, need at least {needed}",
            train.len(),
            run.path.display()
        )));
    }
    if test.as_ref().is_some_and(|t| t.is_empty()) {
        return Err(ExperimentError::Config("empty test table".into()));
    }

    let reps = map_reps(run.reps, |r| run_rep(run, &train, test.as_ref(), r));
    let slot_cell = |group: &str, slot: usize, values: &[Option<f64>]| {
        let (arm, lambda) = match slot {
            0 => (Arm::Privileged, None),
            1 => (Arm::Regular, None),
            k => (Arm::Distilled, Some(run.grid.lambdas[k - 2])),
        };
        Cell::from_values(arm, group, None, lambda, Metric::Mse, values)
    };
    let slots = 2 + run.grid.lambdas.len();
    let mut cells = Vec::new();
    for task in 0..MULTITASK_TASKS {
        for slot in 0..slots {
            let values: Vec<Option<f64>> = reps.iter().map(|(m, _)| m[task][slot]).collect();
            cells.push(slot_cell(&format!("task={}", task + 1), slot, &values));
        }
    }
    for slot in 0..slots {
        let values: Vec<Option<f64>> = reps
            .iter()
            .map(|(m, _)| {
                let per_task: Option<Vec<f64>> = m.iter().map(|t| t[slot]).collect();
                per_task.map(|v| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        cells.push(slot_cell("mean", slot, &values));
    }
    let failures = reps.into_iter().flat_map(|(_, f)| f).collect();
    Ok(ExperimentReport::new(
        "multitask".into(),
        ExperimentConfig::Multitask(run.clone()),
        cells,
        failures,
    ))
}
