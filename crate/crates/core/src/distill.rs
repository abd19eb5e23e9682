//! The generalized distillation pipeline: fit a teacher on privileged
//! features, soften its predictions with a temperature, then train a student
//! on regular features against a mix of hard labels and soft labels.
//!
//! Every step works on clean subsets, so examples with missing fields are
//! routed to whichever steps can use them: an unlabeled example with both
//! views still receives a soft label and contributes to the student.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::{MultitaskTable, MULTITASK_INPUTS, MULTITASK_TASKS};
use crate::math::{self, MathError, SimplexVector};
use crate::model::{fit, Architecture, Example, Model, ModelError, Task, TrainConfig, WeightedTarget};
use crate::rng::RngStream;
use crate::triplet::{Dataset, DatasetError, Fields, Header, Triplet};

/// Smallest retained probability mass accepted when restricting to classes.
pub const MIN_RESTRICTED_MASS: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("no examples with {0}")]
    EmptySubset(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("soft label for unknown example {0}")]
    UnknownExample(u64),
    #[error("class set {0:?} is invalid for {1} classes")]
    Classes(Vec<usize>, usize),
    #[error("retained probability mass {0:e} is numerically zero")]
    ZeroMass(f64),
    #[error("task {target} out of range for {tasks} tasks")]
    TaskOutOfRange { target: usize, tasks: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub architecture: Architecture,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    /// Softening temperature applied to the teacher's logits.
    pub temperature: f64,
    /// Imitation weight: `0` ignores soft labels, `1` ignores hard labels.
    pub imitation: f64,
    /// Extra factor on soft terms of examples without a hard label.
    pub unlabeled_weight: f64,
    /// Divide the student's logits by the same temperature when fitting soft
    /// labels. Off by default: soft labels are fit at temperature one.
    pub match_temperature: bool,
    pub teacher: LearnerConfig,
    pub student: LearnerConfig,
}

impl DistillConfig {
    /// Linear teacher and student with the synthetic-experiment defaults.
    pub fn linear(rng: RngStream) -> Self {
        DistillConfig {
            temperature: 1.0,
            imitation: 1.0,
            unlabeled_weight: 1.0,
            match_temperature: false,
            teacher: LearnerConfig {
                architecture: Architecture::Linear,
                train: TrainConfig::linear_default(rng.fork_named("teacher")),
            },
            student: LearnerConfig {
                architecture: Architecture::Linear,
                train: TrainConfig::linear_default(rng.fork_named("student")),
            },
        }
    }

    /// Two hidden layers of 20 ReLUs for both teacher and student.
    pub fn mlp(rng: RngStream) -> Self {
        let arch = Architecture::mlp(20, 20);
        DistillConfig {
            temperature: 1.0,
            imitation: 1.0,
            unlabeled_weight: 1.0,
            match_temperature: false,
            teacher: LearnerConfig {
                architecture: arch.clone(),
                train: TrainConfig::mlp_default(rng.fork_named("teacher")),
            },
            student: LearnerConfig {
                architecture: arch,
                train: TrainConfig::mlp_default(rng.fork_named("student")),
            },
        }
    }

    pub fn validate(&self) -> Result<(), DistillError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(DistillError::Config(format!("temperature {}", self.temperature)));
        }
        if !(0.0..=1.0).contains(&self.imitation) {
            return Err(DistillError::Config(format!("imitation {} outside [0, 1]", self.imitation)));
        }
        if !(self.unlabeled_weight >= 0.0 && self.unlabeled_weight.is_finite()) {
            return Err(DistillError::Config(format!("unlabeled weight {}", self.unlabeled_weight)));
        }
        Ok(())
    }
}

/// Teacher output for one example, keyed by example id. A probability
/// vector for classifiers, the raw prediction for regressors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabel {
    pub id: u64,
    pub target: Vec<f64>,
}

fn hard_examples(data: &Dataset, field: Fields) -> Vec<Example> {
    data.examples()
        .iter()
        .filter_map(|t| {
            let x = if field == Fields::X { t.x.as_ref() } else { t.x_star.as_ref() };
            Some(Example {
                id: t.id,
                x: x?.clone(),
                target: WeightedTarget::hard(t.y.clone()?),
            })
        })
        .collect()
}

/// Step one: fit the teacher on `(x*, y)` pairs with hard labels only.
pub fn train_teacher(data: &Dataset, cfg: &DistillConfig) -> Result<Model, DistillError> {
    cfg.validate()?;
    let examples = hard_examples(data, Fields::X_STAR);
    if examples.is_empty() {
        return Err(DistillError::EmptySubset("privileged features and labels"));
    }
    let h = data.header();
    let out = fit(
        cfg.teacher.architecture.clone(),
        h.task,
        h.d_star,
        h.c,
        &examples,
        &cfg.teacher.train,
        1.0,
    )?;
    Ok(out.model)
}

/// Baseline student: `(x, y)` pairs with hard labels only, using the
/// student's architecture and training stream.
pub fn train_regular(data: &Dataset, cfg: &DistillConfig) -> Result<Model, DistillError> {
    let examples = hard_examples(data, Fields::X);
    if examples.is_empty() {
        return Err(DistillError::EmptySubset("regular features and labels"));
    }
    let h = data.header();
    let out = fit(
        cfg.student.architecture.clone(),
        h.task,
        h.d,
        h.c,
        &examples,
        &cfg.student.train,
        1.0,
    )?;
    Ok(out.model)
}

/// Step two: soft labels for every example with privileged features,
/// labeled or not. Classifier outputs are `softmax(f_t(x*) / T)`; regressor
/// outputs are passed through unchanged.
pub fn soft_labels(teacher: &Model, data: &Dataset, temperature: f64) -> Result<Vec<SoftLabel>, DistillError> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(MathError::Temperature(temperature).into());
    }
    let (ids, xs) = data.matrix(Fields::X_STAR);
    if ids.is_empty() {
        return Ok(Vec::new());
    }
    let z = teacher.forward_batch(xs.view())?;
    let mut out = Vec::with_capacity(ids.len());
    for (id, row) in ids.into_iter().zip(z.outer_iter()) {
        let mut target = row.to_vec();
        if teacher.task() == Task::Classification {
            math::softmax_in_place(&mut target, temperature);
        }
        out.push(SoftLabel { id, target });
    }
    Ok(out)
}

/// Per-example targets for the student; examples whose every weight is zero
/// are left out entirely.
fn student_examples(data: &Dataset, soft: &[SoftLabel], cfg: &DistillConfig) -> Result<Vec<Example>, DistillError> {
    let known: HashMap<u64, &Triplet> = data.examples().iter().map(|t| (t.id, t)).collect();
    let mut by_id: HashMap<u64, &[f64]> = HashMap::with_capacity(soft.len());
    for s in soft {
        if !known.contains_key(&s.id) {
            return Err(DistillError::UnknownExample(s.id));
        }
        if s.target.len() != data.header().c {
            return Err(ModelError::Dimension {
                expected: data.header().c,
                actual: s.target.len(),
            }
            .into());
        }
        by_id.insert(s.id, &s.target);
    }

    let lambda = cfg.imitation;
    let mut out = Vec::new();
    for t in data.examples() {
        let Some(x) = &t.x else { continue };
        let soft = by_id.get(&t.id).copied();
        let (hard, soft) = match (&t.y, soft) {
            (Some(y), Some(s)) => (Some((y, 1.0 - lambda)), Some((s, lambda))),
            (Some(y), None) => (Some((y, 1.0 - lambda)), None),
            (None, Some(s)) => (None, Some((s, lambda * cfg.unlabeled_weight))),
            (None, None) => (None, None),
        };
        let hard = hard.filter(|(_, w)| *w > 0.0).map(|(y, w)| (y.clone(), w));
        let soft = soft.filter(|(_, w)| *w > 0.0).map(|(s, w)| (s.to_vec(), w));
        if hard.is_none() && soft.is_none() {
            continue;
        }
        out.push(Example {
            id: t.id,
            x: x.clone(),
            target: WeightedTarget::new(hard, soft)?,
        });
    }
    Ok(out)
}

/// Step three: train the student on regular features against
/// `(1 - lambda) * hard + lambda * soft`; unlabeled examples carry only
/// the soft term, scaled by `unlabeled_weight`.
pub fn distill_student(data: &Dataset, soft: &[SoftLabel], cfg: &DistillConfig) -> Result<Model, DistillError> {
    cfg.validate()?;
    let examples = student_examples(data, soft, cfg)?;
    if examples.is_empty() {
        return Err(DistillError::EmptySubset("regular features and a usable target"));
    }
    let h = data.header();
    let t_student = if cfg.match_temperature && h.task == Task::Classification {
        cfg.temperature
    } else {
        1.0
    };
    let out = fit(
        cfg.student.architecture.clone(),
        h.task,
        h.d,
        h.c,
        &examples,
        &cfg.student.train,
        t_student,
    )?;
    Ok(out.model)
}

#[derive(Debug, Clone)]
pub struct Distilled {
    pub teacher: Model,
    pub soft_labels: Vec<SoftLabel>,
    pub student: Model,
}

/// All three steps, run one after the other.
pub fn generalized_distillation(data: &Dataset, cfg: &DistillConfig) -> Result<Distilled, DistillError> {
    let teacher = train_teacher(data, cfg)?;
    let soft = soft_labels(&teacher, data, cfg.temperature)?;
    let student = distill_student(data, &soft, cfg)?;
    Ok(Distilled {
        teacher,
        soft_labels: soft,
        student,
    })
}

/// Keeps the entries of `p` listed in `classes` (in that order) and
/// renormalizes them to sum to one.
pub fn restrict_to_classes(p: &SimplexVector, classes: &[usize]) -> Result<SimplexVector, DistillError> {
    let c = p.len();
    let mut seen = vec![false; c];
    for &k in classes {
        if k >= c || std::mem::replace(&mut seen[k], true) {
            return Err(DistillError::Classes(classes.to_vec(), c));
        }
    }
    if classes.is_empty() {
        return Err(DistillError::Classes(Vec::new(), c));
    }
    let kept: Vec<f64> = classes.iter().map(|&k| p.as_slice()[k]).collect();
    let mass: f64 = kept.iter().sum();
    if mass < MIN_RESTRICTED_MASS {
        return Err(DistillError::ZeroMass(mass));
    }
    Ok(SimplexVector::new(kept.into_iter().map(|v| v / mass).collect())?)
}

/// Soft labels from a teacher trained on every class (those of interest and
/// the Universum), restricted to the classes of interest.
pub fn universum_soft_labels(
    teacher: &Model,
    data: &Dataset,
    temperature: f64,
    classes: &[usize],
) -> Result<Vec<SoftLabel>, DistillError> {
    if teacher.task() != Task::Classification {
        return Err(ModelError::NotClassifier.into());
    }
    soft_labels(teacher, data, temperature)?
        .into_iter()
        .map(|s| {
            let p = SimplexVector::new(s.target)?;
            Ok(SoftLabel {
                id: s.id,
                target: restrict_to_classes(&p, classes)?.into_inner(),
            })
        })
        .collect()
}

/// Views a multitask table as a privileged-information problem for task
/// `target`: `x` is the shared inputs, `x*` the other tasks' outputs (in task
/// order) and `y` the target task's output. Example ids are row indices.
pub fn multitask_views(table: &MultitaskTable, target: usize) -> Result<Dataset, DistillError> {
    if target >= MULTITASK_TASKS {
        return Err(DistillError::TaskOutOfRange {
            target,
            tasks: MULTITASK_TASKS,
        });
    }
    let header = Header {
        d: MULTITASK_INPUTS,
        d_star: MULTITASK_TASKS - 1,
        c: 1,
        task: Task::Regression,
    };
    let examples = (0..table.len())
        .map(|i| {
            let out = table.outputs(i);
            Triplet {
                id: i as u64,
                x: Some(table.inputs(i).to_vec()),
                x_star: Some(
                    out.iter()
                        .enumerate()
                        .filter(|&(k, _)| k != target)
                        .map(|(_, &v)| v)
                        .collect(),
                ),
                y: Some(vec![out[target]]),
            }
        })
        .collect();
    Ok(Dataset::new(header, examples)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1, Array2};

    fn toy(n: usize, labeled: usize) -> Dataset {
        let header = Header { d: 2, d_star: 1, c: 2, task: Task::Classification };
        let mut g = RngStream::new(4, 4).generator();
        let examples = (0..n)
            .map(|i| {
                let x = vec![crate::rng::standard_normal(&mut g), crate::rng::standard_normal(&mut g)];
                let m = x[0] - 0.5 * x[1];
                Triplet {
                    id: i as u64,
                    x: Some(x),
                    x_star: Some(vec![m]),
                    y: (i < labeled).then(|| if m > 0.0 { vec![0.0, 1.0] } else { vec![1.0, 0.0] }),
                }
            })
            .collect();
        Dataset::new(header, examples).unwrap()
    }

    fn quick_cfg() -> DistillConfig {
        let mut cfg = DistillConfig::linear(RngStream::new(8, 0));
        cfg.teacher.train.epochs = 30;
        cfg.student.train.epochs = 30;
        cfg
    }

    #[test]
    fn teacher_needs_privileged_labeled_examples() {
        let ds = toy(10, 10);
        let stripped: Vec<Triplet> = ds.examples().iter().map(|t| Triplet { x_star: None, ..t.clone() }).collect();
        let ds = ds.with_examples(stripped).unwrap();
        assert!(matches!(train_teacher(&ds, &quick_cfg()), Err(DistillError::EmptySubset(_))));
    }

    #[test]
    fn soft_label_limits() {
        let ds = toy(20, 20);
        let teacher = train_teacher(&ds, &quick_cfg()).unwrap();
        for s in soft_labels(&teacher, &ds, 1e9).unwrap() {
            assert!(s.target.iter().all(|v| (v - 0.5).abs() < 1e-5));
        }
        let at_one = soft_labels(&teacher, &ds, 1.0).unwrap();
        for (s, t) in at_one.iter().zip(ds.examples()) {
            let z = teacher.forward(t.x_star.as_ref().unwrap()).unwrap();
            assert_eq!(s.target, crate::math::softmax(&z, 1.0).unwrap().into_inner());
        }

        let mut zero = Model::zeros(Architecture::Linear, Task::Classification, 1, 2);
        let layer = crate::model::Layer { weights: Array2::zeros((1, 2)), bias: array![1.0, -1.0] };
        zero = Model::from_layers(zero.architecture().clone(), Task::Classification, vec![layer]).unwrap();
        let expected = crate::math::softmax(&[1.0, -1.0], 2.0).unwrap().into_inner();
        for s in soft_labels(&zero, &ds, 2.0).unwrap() {
            assert_eq!(s.target, expected);
        }
    }

    #[test]
    fn imitation_zero_is_the_plain_student() {
        let ds = toy(40, 25);
        let mut cfg = quick_cfg();
        cfg.imitation = 0.0;
        let d = generalized_distillation(&ds, &cfg).unwrap();
        assert_eq!(d.soft_labels.len(), 40);
        assert_eq!(d.student, train_regular(&ds, &cfg).unwrap());
    }

    #[test]
    fn unlabeled_weight_zero_ignores_unlabeled_examples() {
        let ds = toy(40, 25);
        let mut cfg = quick_cfg();
        cfg.imitation = 0.5;
        cfg.unlabeled_weight = 0.0;
        let teacher = train_teacher(&ds, &cfg).unwrap();
        let soft = soft_labels(&teacher, &ds, 1.0).unwrap();
        let labeled_only = ds.clean(Fields::Y);
        let a = distill_student(&ds, &soft, &cfg).unwrap();
        let b = distill_student(&labeled_only, &soft[..25], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_soft_label_is_rejected() {
        let ds = toy(5, 5);
        let soft = vec![SoftLabel { id: 99, target: vec![0.5, 0.5] }];
        assert!(matches!(distill_student(&ds, &soft, &quick_cfg()), Err(DistillError::UnknownExample(99))));
    }

    #[test]
    fn restriction_examples() {
        let p = SimplexVector::new(vec![0.5, 0.3, 0.2]).unwrap();
        let r = restrict_to_classes(&p, &[0, 1]).unwrap();
        assert!((r.as_slice()[0] - 0.625).abs() < 1e-15);
        assert!((r.as_slice()[1] - 0.375).abs() < 1e-15);
        assert_eq!(restrict_to_classes(&p, &[0, 1, 2]).unwrap(), p);
        let u = SimplexVector::uniform(5).unwrap();
        let r = restrict_to_classes(&u, &[4, 1, 2]).unwrap();
        assert!(r.as_slice().iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(restrict_to_classes(&p, &[]).is_err());
        assert!(restrict_to_classes(&p, &[0, 0]).is_err());
        assert!(restrict_to_classes(&p, &[3]).is_err());
        let tiny = SimplexVector::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(restrict_to_classes(&tiny, &[1]), Err(DistillError::ZeroMass(_))));
    }

    #[test]
    fn universum_restricts_teacher_output() {
        let layer = crate::model::Layer { weights: Array2::zeros((1, 3)), bias: Array1::from(vec![0.5f64.ln(), 0.3f64.ln(), 0.2f64.ln()]) };
        let teacher = Model::from_layers(Architecture::Linear, Task::Classification, vec![layer]).unwrap();
        let header = Header { d: 1, d_star: 1, c: 2, task: Task::Classification };
        let ds = Dataset::new(header, vec![Triplet { id: 3, x: Some(vec![0.0]), x_star: Some(vec![1.0]), y: None }]).unwrap();
        let s = universum_soft_labels(&teacher, &ds, 1.0, &[0, 1]).unwrap();
        assert_eq!(s[0].id, 3);
        assert!((s[0].target[0] - 0.625).abs() < 1e-12);
    }

    #[test]
    fn multitask_partition() {
        let rows: Vec<Vec<f64>> = (0..3).map(|i| (0..28).map(|j| (i * 100 + j) as f64).collect()).collect();
        let table = MultitaskTable::from_rows(rows.clone()).unwrap();
        let first = multitask_views(&table, 0).unwrap();
        let t = &first.examples()[1];
        assert_eq!(t.x_star.as_ref().unwrap(), &rows[1][22..28].to_vec());
        assert_eq!(t.y.as_ref().unwrap(), &vec![rows[1][21]]);
        let last = multitask_views(&table, 6).unwrap();
        assert_eq!(last.examples()[0].x_star.as_ref().unwrap(), &rows[0][21..27].to_vec());
        for target in 0..7 {
            let v = multitask_views(&table, target).unwrap();
            let t = &v.examples()[2];
            let mut all = t.x_star.clone().unwrap();
            all.insert(target, t.y.as_ref().unwrap()[0]);
            assert_eq!(all, rows[2][21..].to_vec());
            assert_eq!(t.x.as_ref().unwrap(), &rows[2][..21].to_vec());
        }
        assert!(matches!(multitask_views(&table, 7), Err(DistillError::TaskOutOfRange { .. })));
    }

    #[test]
    fn config_validation() {
        let mut cfg = quick_cfg();
        cfg.imitation = 1.2;
        assert!(cfg.validate().is_err());
        cfg.imitation = 0.5;
        cfg.temperature = 0.0;
        assert!(cfg.validate().is_err());
    }
}
