//! Generative models for the four synthetic privileged-information problems.
//!
//! Every generator draws `n_train + n_test` examples from one stream, so the
//! problem-level randomness (the relevant index set of the third problem)
//! is shared by the training and test splits.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Task;
use crate::rng::{fill_standard_normal, sample_without_replacement, standard_normal, RngStream};
use crate::triplet::{Dataset, DatasetError, Header, Triplet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticExperiment {
    /// `x* = <alpha, x>`, labels flipped by Gaussian noise on the margin.
    CleanLabels,
    /// `x = x* + noise`, labels from the clean `x*`.
    CleanFeatures,
    /// `x*` is a fixed random subset of the coordinates of `x`.
    RelevantFeatures,
    /// `x*` keeps a per-example random subset of the coordinates of `x`.
    SampleRelevantFeatures,
}

impl SyntheticExperiment {
    pub const ALL: [SyntheticExperiment; 4] = [
        SyntheticExperiment::CleanLabels,
        SyntheticExperiment::CleanFeatures,
        SyntheticExperiment::RelevantFeatures,
        SyntheticExperiment::SampleRelevantFeatures,
    ];

    pub fn number(self) -> u8 {
        match self {
            SyntheticExperiment::CleanLabels => 1,
            SyntheticExperiment::CleanFeatures => 2,
            SyntheticExperiment::RelevantFeatures => 3,
            SyntheticExperiment::SampleRelevantFeatures => 4,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.get(usize::from(n).wrapping_sub(1)).copied()
    }
}

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("dump line {line}: {message}")]
    Dump { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub experiment: SyntheticExperiment,
    pub d: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Size of the relevant index set (third and fourth problems).
    pub relevant: usize,
    /// When false, the label noise of the first problem is forced to zero.
    pub label_noise: bool,
    pub rng: RngStream,
}

impl SyntheticSpec {
    pub fn new(experiment: SyntheticExperiment, rng: RngStream) -> Self {
        SyntheticSpec {
            experiment,
            d: 50,
            n_train: 200,
            n_test: 10_000,
            relevant: 3,
            label_noise: true,
            rng,
        }
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        if self.relevant == 0 || self.relevant > self.d {
            return Err(SyntheticError::Spec(format!(
                "need 1 <= relevant ({}) <= d ({})",
                self.relevant, self.d
            )));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(SyntheticError::Spec("n_train and n_test must be positive".into()));
        }
        Ok(())
    }

    pub fn d_star(&self) -> usize {
        match self.experiment {
            SyntheticExperiment::CleanLabels => 1,
            SyntheticExperiment::CleanFeatures => self.d,
            SyntheticExperiment::RelevantFeatures => self.relevant,
            // Masked copy of x: zeros outside the example's relevant set.
            SyntheticExperiment::SampleRelevantFeatures => self.d,
        }
    }
}

/// Separating hyperplane, `alpha ~ N(0, I_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub alpha: Vec<f64>,
}

impl Hyperplane {
    pub fn draw(d: usize, rng: &RngStream) -> Self {
        let mut alpha = vec![0.0; d];
        fill_standard_normal(&mut rng.generator(), &mut alpha);
        Hyperplane { alpha }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.alpha.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `<alpha_J, x_J>` for an index set `J` and values `x_J` in the same order.
    pub fn dot_subset(&self, idx: &[usize], values: &[f64]) -> f64 {
        idx.iter().zip(values).map(|(&j, v)| self.alpha[j] * v).sum()
    }
}

/// A generated data set plus the latent quantities needed to replay labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub dataset: Dataset,
    /// Relevant index set per example (problems 3 and 4), ascending.
    pub relevant: Vec<Vec<usize>>,
    /// Noise per example: the scalar margin noise (problem 1) or the
    /// feature noise vector (problem 2).
    pub noise: Vec<Vec<f64>>,
    pub n_train: usize,
}

impl Generated {
    pub fn train_test(&self) -> (Dataset, Dataset) {
        self.dataset.split_at(self.n_train)
    }
}

fn one_hot(positive: bool) -> Vec<f64> {
    if positive {
        vec![0.0, 1.0]
    } else {
        vec![1.0, 0.0]
    }
}

fn header(spec: &SyntheticSpec) -> Header {
    Header {
        d: spec.d,
        d_star: spec.d_star(),
        c: 2,
        task: Task::Classification,
    }
}

fn check(spec: &SyntheticSpec, alpha: &Hyperplane, which: SyntheticExperiment) -> Result<(), SyntheticError> {
    spec.validate()?;
    if spec.experiment != which {
        return Err(SyntheticError::Spec(format!(
            "spec is for experiment {}, not {}",
            spec.experiment.number(),
            which.number()
        )));
    }
    if alpha.alpha.len() != spec.d {
        return Err(SyntheticError::Spec(format!(
            "hyperplane has dimension {}, spec says {}",
            alpha.alpha.len(),
            spec.d
        )));
    }
    Ok(())
}

fn gaussian<R: Rng>(g: &mut R, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    fill_standard_normal(g, &mut v);
    v
}

fn sorted_subset<R: Rng>(g: &mut R, d: usize, k: usize) -> Vec<usize> {
    let mut j = sample_without_replacement(g, d, k);
    j.sort_unstable();
    j
}

/// Clean labels as privileged information.
pub fn gen_exp1(spec: &SyntheticSpec, alpha: &Hyperplane) -> Result<Generated, SyntheticError> {
    check(spec, alpha, SyntheticExperiment::CleanLabels)?;
    let mut g = spec.rng.generator();
    let n = spec.n_train + spec.n_test;
    let mut examples = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    for i in 0..n {
        let x = gaussian(&mut g, spec.d);
        let margin = alpha.dot(&x);
        let eps = standard_normal(&mut g);
        let eps = if spec.label_noise { eps } else { 0.0 };
        examples.push(Triplet {
            id: i as u64,
            x: Some(x),
            x_star: Some(vec![margin]),
            y: Some(one_hot(margin + eps > 0.0)),
        });
        noise.push(vec![eps]);
    }
    Ok(Generated {
        dataset: Dataset::new(header(spec), examples)?,
        relevant: Vec::new(),
        noise,
        n_train: spec.n_train,
    })
}

/// Clean features as privileged information.
pub fn gen_exp2(spec: &SyntheticSpec, alpha: &Hyperplane) -> Result<Generated, SyntheticError> {
    check(spec, alpha, SyntheticExperiment::CleanFeatures)?;
    let mut g = spec.rng.generator();
    let n = spec.n_train + spec.n_test;
    let mut examples = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    for i in 0..n {
        let x_star = gaussian(&mut g, spec.d);
        let eps = gaussian(&mut g, spec.d);
        let x: Vec<f64> = x_star.iter().zip(&eps).map(|(a, b)| a + b).collect();
        let y = one_hot(alpha.dot(&x_star) > 0.0);
        examples.push(Triplet {
            id: i as u64,
            x: Some(x),
            x_star: Some(x_star),
            y: Some(y),
        });
        noise.push(eps);
    }
    Ok(Generated {
        dataset: Dataset::new(header(spec), examples)?,
        relevant: Vec::new(),
        noise,
        n_train: spec.n_train,
    })
}

/// Relevant features as privileged information; one index set for all examples.
pub fn gen_exp3(spec: &SyntheticSpec, alpha: &Hyperplane) -> Result<Generated, SyntheticError> {
    check(spec, alpha, SyntheticExperiment::RelevantFeatures)?;
    let mut g = spec.rng.generator();
    let n = spec.n_train + spec.n_test;
    let subset = sorted_subset(&mut g, spec.d, spec.relevant);
    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let x = gaussian(&mut g, spec.d);
        let x_star: Vec<f64> = subset.iter().map(|&j| x[j]).collect();
        let y = one_hot(alpha.dot_subset(&subset, &x_star) > 0.0);
        examples.push(Triplet {
            id: i as u64,
            x: Some(x),
            x_star: Some(x_star),
            y: Some(y),
        });
    }
    Ok(Generated {
        dataset: Dataset::new(header(spec), examples)?,
        relevant: vec![subset; n],
        noise: Vec::new(),
        n_train: spec.n_train,
    })
}

/// Sample-dependent relevant features. `x*` is `x` with every coordinate
/// outside the example's own index set zeroed, so `<alpha, x*>` equals
/// `<alpha_J, x_J>` and the teacher stays linear.
pub fn gen_exp4(spec: &SyntheticSpec, alpha: &Hyperplane) -> Result<Generated, SyntheticError> {
    check(spec, alpha, SyntheticExperiment::SampleRelevantFeatures)?;
    let mut g = spec.rng.generator();
    let n = spec.n_train + spec.n_test;
    let mut examples = Vec::with_capacity(n);
    let mut relevant = Vec::with_capacity(n);
    for i in 0..n {
        let x = gaussian(&mut g, spec.d);
        let subset = sorted_subset(&mut g, spec.d, spec.relevant);
        let mut x_star = vec![0.0; spec.d];
        for &j in &subset {
            x_star[j] = x[j];
        }
        let values: Vec<f64> = subset.iter().map(|&j| x[j]).collect();
        let y = one_hot(alpha.dot_subset(&subset, &values) > 0.0);
        examples.push(Triplet {
            id: i as u64,
            x: Some(x),
            x_star: Some(x_star),
            y: Some(y),
        });
        relevant.push(subset);
    }
    Ok(Generated {
        dataset: Dataset::new(header(spec), examples)?,
        relevant,
        noise: Vec::new(),
        n_train: spec.n_train,
    })
}

pub fn generate(spec: &SyntheticSpec, alpha: &Hyperplane) -> Result<Generated, SyntheticError> {
    match spec.experiment {
        SyntheticExperiment::CleanLabels => gen_exp1(spec, alpha),
        SyntheticExperiment::CleanFeatures => gen_exp2(spec, alpha),
        SyntheticExperiment::RelevantFeatures => gen_exp3(spec, alpha),
        SyntheticExperiment::SampleRelevantFeatures => gen_exp4(spec, alpha),
    }
}

/// Recomputes the class of example `i` from the documented quantities only.
pub fn replay_label(generated: &Generated, alpha: &Hyperplane, experiment: SyntheticExperiment, i: usize) -> usize {
    let t = &generated.dataset.examples()[i];
    let positive = match experiment {
        SyntheticExperiment::CleanLabels => {
            let x = t.x.as_ref().expect("generated");
            alpha.dot(x) + generated.noise[i][0] > 0.0
        }
        SyntheticExperiment::CleanFeatures => alpha.dot(t.x_star.as_ref().expect("generated")) > 0.0,
        SyntheticExperiment::RelevantFeatures | SyntheticExperiment::SampleRelevantFeatures => {
            let x = t.x.as_ref().expect("generated");
            let subset = &generated.relevant[i];
            let values: Vec<f64> = subset.iter().map(|&j| x[j]).collect();
            alpha.dot_subset(subset, &values) > 0.0
        }
    };
    usize::from(positive)
}

fn dump_field<W: Write>(out: &mut W, v: Option<&Vec<f64>>) -> std::io::Result<()> {
    match v {
        None => write!(out, "_"),
        Some(v) => {
            for (k, x) in v.iter().enumerate() {
                if k > 0 {
                    write!(out, ",")?;
                }
                write!(out, "{x:?}")?;
            }
            Ok(())
        }
    }
}

/// Writes a classification data set as text: a header line `d d* c n`,
/// then one line per example with tab-separated fields `id`, `x`, `x*`, `y`.
/// Vector fields are comma separated; a missing field is the token `_`.
pub fn write_dump<W: Write>(data: &Dataset, mut out: W) -> std::io::Result<()> {
    let h = data.header();
    writeln!(out, "{} {} {} {}", h.d, h.d_star, h.c, data.len())?;
    for t in data.examples() {
        write!(out, "{}\t", t.id)?;
        dump_field(&mut out, t.x.as_ref())?;
        write!(out, "\t")?;
        dump_field(&mut out, t.x_star.as_ref())?;
        write!(out, "\t")?;
        dump_field(&mut out, t.y.as_ref())?;
        writeln!(out)?;
    }
    out.flush()
}

/// Parses the format written by [`write_dump`].
pub fn read_dump<R: BufRead>(input: R) -> Result<Dataset, SyntheticError> {
    let bad = |line: usize, message: String| SyntheticError::Dump { line, message };
    let mut lines = input.lines();
    let head = lines.next().ok_or_else(|| bad(1, "missing header".into()))??;
    let nums: Vec<usize> = head
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| bad(1, format!("bad header value {w:?}"))))
        .collect::<Result<_, _>>()?;
    let [d, d_star, c, n] = nums[..] else {
        return Err(bad(1, format!("header needs 4 values, found {}", nums.len())));
    };
    let header = Header {
        d,
        d_star,
        c,
        task: Task::Classification,
    };
    let mut examples = Vec::with_capacity(n);
    for (k, line) in lines.enumerate() {
        let no = k + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad(no, format!("expected 4 tab-separated fields, found {}", fields.len())));
        }
        let id = fields[0].parse().map_err(|_| bad(no, format!("bad id {:?}", fields[0])))?;
        let vector = |f: &str| -> Result<Option<Vec<f64>>, SyntheticError> {
            if f == "_" {
                return Ok(None);
            }
            f.split(',')
                .map(|v| v.parse::<f64>().map_err(|_| bad(no, format!("bad number {v:?}"))))
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
        };
        examples.push(Triplet {
            id,
            x: vector(fields[1])?,
            x_star: vector(fields[2])?,
            y: vector(fields[3])?,
        });
    }
    if examples.len() != n {
        return Err(bad(1, format!("header promises {n} examples, found {}", examples.len())));
    }
    Ok(Dataset::new(header, examples)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(experiment: SyntheticExperiment, n: usize) -> (SyntheticSpec, Hyperplane) {
        let root = RngStream::new(99, u64::from(experiment.number()));
        let spec = SyntheticSpec {
            n_train: n,
            n_test: 1,
            ..SyntheticSpec::new(experiment, root.fork_named("data"))
        };
        let alpha = Hyperplane::draw(spec.d, &root.fork_named("alpha"));
        (spec, alpha)
    }

    #[test]
    fn headers() {
        for e in SyntheticExperiment::ALL {
            let (spec, alpha) = small(e, 10);
            let g = generate(&spec, &alpha).unwrap();
            let h = g.dataset.header();
            assert_eq!((h.d, h.c), (50, 2));
            assert_eq!(h.d_star, spec.d_star());
            assert_eq!(g.dataset.len(), 11);
        }
        assert_eq!(small(SyntheticExperiment::CleanLabels, 1).0.d_star(), 1);
        assert_eq!(small(SyntheticExperiment::CleanFeatures, 1).0.d_star(), 50);
    }

    #[test]
    fn noiseless_first_problem_labels_by_margin() {
        let (mut spec, alpha) = small(SyntheticExperiment::CleanLabels, 500);
        spec.label_noise = false;
        let g = gen_exp1(&spec, &alpha).unwrap();
        for t in g.dataset.examples() {
            let positive = t.x_star.as_ref().unwrap()[0] > 0.0;
            assert_eq!(crate::math::argmax(t.y.as_ref().unwrap()), usize::from(positive));
        }
    }

    #[test]
    fn relevant_set_is_shared_and_projected() {
        let (spec, alpha) = small(SyntheticExperiment::RelevantFeatures, 200);
        let g = gen_exp3(&spec, &alpha).unwrap();
        let j = &g.relevant[0];
        assert_eq!(j.len(), 3);
        for (t, r) in g.dataset.examples().iter().zip(&g.relevant) {
            assert_eq!(r, j);
            let x = t.x.as_ref().unwrap();
            let projected: Vec<f64> = j.iter().map(|&k| x[k]).collect();
            assert_eq!(t.x_star.as_ref().unwrap(), &projected);
        }
    }

    #[test]
    fn per_example_sets_vary() {
        let (spec, alpha) = small(SyntheticExperiment::SampleRelevantFeatures, 99);
        let g = gen_exp4(&spec, &alpha).unwrap();
        let mut distinct = g.relevant.clone();
        distinct.sort();
        distinct.dedup();
        assert!(distinct.len() >= 2);
        for (t, r) in g.dataset.examples().iter().zip(&g.relevant) {
            let xs = t.x_star.as_ref().unwrap();
            assert_eq!(xs.iter().filter(|v| **v != 0.0).count(), r.len());
        }
    }

    #[test]
    fn spec_mismatch_is_rejected() {
        let (spec, alpha) = small(SyntheticExperiment::CleanLabels, 5);
        assert!(gen_exp2(&spec, &alpha).is_err());
        let bad = SyntheticSpec { relevant: 60, ..spec.clone() };
        assert!(gen_exp1(&bad, &alpha).is_err());
        assert!(gen_exp1(&spec, &Hyperplane { alpha: vec![1.0; 3] }).is_err());
        assert_eq!(SyntheticExperiment::from_number(3), Some(SyntheticExperiment::RelevantFeatures));
        assert_eq!(SyntheticExperiment::from_number(0), None);
        assert_eq!(SyntheticExperiment::from_number(5), None);
    }

    #[test]
    fn dump_round_trip_keeps_missing_fields() {
        let (spec, alpha) = small(SyntheticExperiment::CleanLabels, 5);
        let g = generate(&spec, &alpha).unwrap();
        let mut ex = g.dataset.examples().to_vec();
        ex[1].y = None;
        ex[2].x_star = None;
        let data = g.dataset.with_examples(ex).unwrap();
        let mut buf = Vec::new();
        write_dump(&data, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("50 1 2 6\n"));
        assert!(text.lines().nth(2).unwrap().ends_with("\t_"));
        assert_eq!(read_dump(buf.as_slice()).unwrap(), data);
    }

    #[test]
    fn dump_errors_name_the_line() {
        let err = read_dump("1 1 2 1\n0\t0.5\t_\n".as_bytes()).unwrap_err();
        assert!(matches!(err, SyntheticError::Dump { line: 2, .. }));
        assert!(matches!(read_dump("1 1 2\n".as_bytes()), Err(SyntheticError::Dump { line: 1, .. })));
        assert!(matches!(read_dump("1 1 2 2\n0\t1\t2\t0,1\n".as_bytes()), Err(SyntheticError::Dump { line: 1, .. })));
    }
}
