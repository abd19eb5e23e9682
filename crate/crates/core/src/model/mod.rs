//! Small differentiable models: multinomial logistic regression and ReLU
//! networks with hand-derived gradients of the weighted hard/soft objective.

mod io;
mod train;

pub use io::{read_model, write_model, MODEL_FORMAT_VERSION};
pub use train::{fit, train, train_with_history, InitScheme, TrainConfig, TrainOutcome};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{self, MathError};
use crate::rng::{fill_standard_normal, RngStream};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid target: {0}")]
    Target(String),
    #[error("model is not a classifier")]
    NotClassifier,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Math(#[from] MathError),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    /// A single affine map `d -> c`.
    Linear,
    /// Affine layers of the given hidden widths with ReLU in between.
    Mlp { hidden: Vec<usize> },
}

impl Architecture {
    pub fn mlp(h1: usize, h2: usize) -> Self {
        Architecture::Mlp {
            hidden: vec![h1, h2],
        }
    }

    /// Widths of every layer boundary, input first and output last.
    pub fn widths(&self, input: usize, output: usize) -> Vec<usize> {
        let mut w = vec![input];
        if let Architecture::Mlp { hidden } = self {
            w.extend_from_slice(hidden);
        }
        w.push(output);
        w
    }
}

/// An affine layer; `weights` is `fan_in x fan_out` so a batch maps as `X W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    architecture: Architecture,
    task: Task,
    layers: Vec<Layer>,
}

/// Gradient with one entry per layer, shaped like the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn norm(&self) -> f64 {
        self.flatten().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.weights.iter().copied());
        out.extend(l.bias.iter().copied());
    }
    out
}

/// Hard and/or soft target for one example with their loss weights.
///
/// For classification both targets are probability vectors; for regression
/// they are real vectors compared by squared error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTarget {
    hard: Option<Vec<f64>>,
    soft: Option<Vec<f64>>,
    hard_weight: f64,
    soft_weight: f64,
}

fn check_weight(w: f64) -> Result<(), ModelError> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::Target(format!("weight {w} is not a finite non-negative number")))
    }
}

impl WeightedTarget {
    pub fn new(
        hard: Option<(Vec<f64>, f64)>,
        soft: Option<(Vec<f64>, f64)>,
    ) -> Result<Self, ModelError> {
        if hard.is_none() && soft.is_none() {
            return Err(ModelError::Target("neither hard nor soft target present".into()));
        }
        let (hard, hard_weight) = match hard {
            Some((y, w)) => {
                check_weight(w)?;
                (Some(y), w)
            }
            None => (None, 0.0),
        };
        let (soft, soft_weight) = match soft {
            Some((s, w)) => {
                check_weight(w)?;
                (Some(s), w)
            }
            None => (None, 0.0),
        };
        Ok(WeightedTarget {
            hard,
            soft,
            hard_weight,
            soft_weight,
        })
    }

    /// Plain supervised target with weight one.
    pub fn hard(y: Vec<f64>) -> Self {
        WeightedTarget {
            hard: Some(y),
            soft: None,
            hard_weight: 1.0,
            soft_weight: 0.0,
        }
    }

    /// The two-term mix `(1 - lambda) * hard + lambda * soft`.
    pub fn mixed(hard: Vec<f64>, soft: Vec<f64>, lambda: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(ModelError::Target(format!("imitation {lambda} outside [0, 1]")));
        }
        WeightedTarget::new(Some((hard, 1.0 - lambda)), Some((soft, lambda)))
    }

    pub fn hard_target(&self) -> Option<&[f64]> {
        self.hard.as_deref()
    }

    pub fn soft_target(&self) -> Option<&[f64]> {
        self.soft.as_deref()
    }

    pub fn hard_weight(&self) -> f64 {
        self.hard_weight
    }

    pub fn soft_weight(&self) -> f64 {
        self.soft_weight
    }

    fn terms(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.hard
            .as_deref()
            .map(|y| (y, self.hard_weight))
            .into_iter()
            .chain(self.soft.as_deref().map(|s| (s, self.soft_weight)))
    }
}

/// One training example. `id` fixes the example's place in the seeded shuffle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: u64,
    pub x: Vec<f64>,
    pub target: WeightedTarget,
}

impl Model {
    /// Builds a model from explicit layers, checking that widths chain.
    pub fn from_layers(architecture: Architecture, task: Task, layers: Vec<Layer>) -> Result<Self, ModelError> {
        let expected_layers = match &architecture {
            Architecture::Linear => 1,
            Architecture::Mlp { hidden } => hidden.len() + 1,
        };
        if layers.len() != expected_layers {
            return Err(ModelError::Config(format!(
                "{:?} needs {expected_layers} layers, got {}",
                architecture,
                layers.len()
            )));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.ncols() {
                return Err(ModelError::Dimension {
                    expected: l.weights.ncols(),
                    actual: l.bias.len(),
                });
            }
            if i > 0 && layers[i - 1].weights.ncols() != l.weights.nrows() {
                return Err(ModelError::Dimension {
                    expected: layers[i - 1].weights.ncols(),
                    actual: l.weights.nrows(),
                });
            }
            if let Architecture::Mlp { hidden } = &architecture {
                if i < hidden.len() && hidden[i] != l.weights.ncols() {
                    return Err(ModelError::Dimension {
                        expected: hidden[i],
                        actual: l.weights.ncols(),
                    });
                }
            }
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(ModelError::Config("non-finite parameter".into()));
            }
        }
        Ok(Model {
            architecture,
            task,
            layers,
        })
    }

    pub fn zeros(architecture: Architecture, task: Task, input: usize, output: usize) -> Self {
        let widths = architecture.widths(input, output);
        let layers = widths.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Model {
            architecture,
            task,
            layers,
        }
    }

    /// Random initialization: `N(0, 2/fan_in)` for layers feeding a ReLU,
    /// `N(0, 1/fan_in)` for the output layer, zero biases.
    pub fn init(
        architecture: Architecture,
        task: Task,
        input: usize,
        output: usize,
        scheme: InitScheme,
        rng: &RngStream,
    ) -> Self {
        let mut m = Model::zeros(architecture, task, input, output);
        if scheme == InitScheme::Zeros {
            return m;
        }
        let mut g = rng.generator();
        let last = m.layers.len() - 1;
        for (i, l) in m.layers.iter_mut().enumerate() {
            let fan_in = l.weights.nrows().max(1) as f64;
            let gain = if i == last { 1.0 } else { 2.0 };
            let std = (gain / fan_in).sqrt();
            let w = l.weights.as_slice_mut().expect("standard layout");
            fill_standard_normal(&mut g, w);
            w.iter_mut().for_each(|v| *v *= std);
        }
        m
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.ncols()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then bias.
    pub fn parameters(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<(), ModelError> {
        if flat.len() != self.num_parameters() {
            return Err(ModelError::Dimension {
                expected: self.num_parameters(),
                actual: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Logits (classification) or predictions (regression) for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        if x.len() != self.input_dim() {
            return Err(ModelError::Dimension {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let row = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
        Ok(self.forward_unchecked(row).into_raw_vec_and_offset().0)
    }

    /// Row-wise forward pass over a batch.
    pub fn forward_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>, ModelError> {
        if xs.ncols() != self.input_dim() {
            return Err(ModelError::Dimension {
                expected: self.input_dim(),
                actual: xs.ncols(),
            });
        }
        Ok(self.forward_unchecked(xs))
    }

    fn forward_unchecked(&self, xs: ArrayView2<'_, f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut a = xs.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            a = a.dot(&l.weights) + &l.bias;
            if i < last {
                a.mapv_inplace(relu);
            }
        }
        a
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize, ModelError> {
        if self.task != Task::Classification {
            return Err(ModelError::NotClassifier);
        }
        Ok(math::argmax(&self.forward(x)?))
    }

    /// Fraction of rows whose argmax logit equals the label.
    pub fn accuracy(&self, xs: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64, ModelError> {
        if self.task != Task::Classification {
            return Err(ModelError::NotClassifier);
        }
        if labels.len() != xs.nrows() {
            return Err(ModelError::Dimension {
                expected: xs.nrows(),
                actual: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let z = self.forward_batch(xs)?;
        let hits = z
            .outer_iter()
            .zip(labels)
            .filter(|(row, &y)| math::argmax(row.as_slice().expect("row-major")) == y)
            .count();
        Ok(hits as f64 / labels.len() as f64)
    }

    /// Mean over rows of the squared error summed across outputs.
    pub fn mean_squared_error(&self, xs: ArrayView2<'_, f64>, ys: ArrayView2<'_, f64>) -> Result<f64, ModelError> {
        let z = self.forward_batch(xs)?;
        if z.dim() != ys.dim() {
            return Err(ModelError::Dimension {
                expected: z.len(),
                actual: ys.len(),
            });
        }
        if z.nrows() == 0 {
            return Err(ModelError::EmptyBatch);
        }
        Ok((&z - &ys).mapv(|v| v * v).sum() / z.nrows() as f64)
    }

    /// `l2 * sum of squared weights`; biases are not penalized.
    pub fn l2_penalty(&self, l2: f64) -> f64 {
        l2 * self
            .layers
            .iter()
            .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>())
            .sum::<f64>()
    }

    pub(crate) fn apply_step(&mut self, grad: &Gradient, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grad.layers) {
            l.weights.scaled_add(-lr, &g.weights);
            l.bias.scaled_add(-lr, &g.bias);
        }
    }

    pub(crate) fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn validate_batch(model: &Model, batch: &[Example], t_student: f64) -> Result<(), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    if !(t_student > 0.0 && t_student.is_finite()) {
        return Err(MathError::Temperature(t_student).into());
    }
    let (d, c) = (model.input_dim(), model.output_dim());
    for ex in batch {
        if ex.x.len() != d {
            return Err(ModelError::Dimension {
                expected: d,
                actual: ex.x.len(),
            });
        }
        if let Some(k) = ex.x.iter().position(|v| !v.is_finite()) {
            return Err(MathError::NonFinite(k).into());
        }
        for (t, _) in ex.target.terms() {
            if t.len() != c {
                return Err(ModelError::Dimension {
                    expected: c,
                    actual: t.len(),
                });
            }
            match model.task {
                Task::Classification => math::validate_simplex(t)?,
                Task::Regression => {
                    if let Some(k) = t.iter().position(|v| !v.is_finite()) {
                        return Err(MathError::NonFinite(k).into());
                    }
                }
            }
        }
    }
    Ok(())
}

/// Weighted objective on a batch: mean over examples of
/// `hard_weight * l(hard, z) + soft_weight * l(soft, z)` plus `l2 * ||W||^2`,
/// where `l` is cross-entropy at temperature `t_student` for classifiers and
/// squared error for regressors.
pub fn loss(model: &Model, batch: &[Example], t_student: f64, l2: f64) -> Result<f64, ModelError> {
    validate_batch(model, batch, t_student)?;
    Ok(objective(model, batch, t_student, l2, false).0)
}

/// Exact gradient of [`loss`] with respect to every parameter.
pub fn gradient(model: &Model, batch: &[Example], t_student: f64, l2: f64) -> Result<Gradient, ModelError> {
    validate_batch(model, batch, t_student)?;
    Ok(objective(model, batch, t_student, l2, true).1.expect("requested"))
}

/// Loss and gradient together, sharing one forward pass.
pub fn loss_and_gradient(
    model: &Model,
    batch: &[Example],
    t_student: f64,
    l2: f64,
) -> Result<(f64, Gradient), ModelError> {
    validate_batch(model, batch, t_student)?;
    let (l, g) = objective(model, batch, t_student, l2, true);
    Ok((l, g.expect("requested")))
}

pub(crate) fn objective(
    model: &Model,
    batch: &[Example],
    t: f64,
    l2: f64,
    want_grad: bool,
) -> (f64, Option<Gradient>) {
    let n = batch.len();
    let d = model.input_dim();
    let mut xs = Array2::zeros((n, d));
    for (mut row, ex) in xs.outer_iter_mut().zip(batch) {
        row.assign(&ndarray::ArrayView1::from(&ex.x[..]));
    }

    // Forward, keeping every layer input for backprop.
    let last = model.layers.len() - 1;
    let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(model.layers.len());
    let mut a = xs;
    for (i, l) in model.layers.iter().enumerate() {
        let z = a.dot(&l.weights) + &l.bias;
        inputs.push(a);
        a = if i < last { z.mapv(relu) } else { z };
    }
    let logits = a;

    let scale = 1.0 / n as f64;
    let mut data_loss = 0.0;
    let mut delta = Array2::<f64>::zeros(logits.dim());
    for ((z, ex), mut dz) in logits.outer_iter().zip(batch).zip(delta.outer_iter_mut()) {
        let z = z.as_slice().expect("row-major");
        match model.task {
            Task::Classification => {
                let mut p = z.to_vec();
                math::softmax_in_place(&mut p, t);
                for (target, w) in ex.target.terms() {
                    if w == 0.0 {
                        continue;
                    }
                    data_loss += w * math::cross_entropy_unchecked(target, z, t);
                    if want_grad {
                        for k in 0..p.len() {
                            dz[k] += scale * w * (p[k] - target[k]) / t;
                        }
                    }
                }
            }
            Task::Regression => {
                for (target, w) in ex.target.terms() {
                    if w == 0.0 {
                        continue;
                    }
                    for k in 0..z.len() {
                        let r = z[k] - target[k];
                        data_loss += w * r * r;
                        if want_grad {
                            dz[k] += scale * 2.0 * w * r;
                        }
                    }
                }
            }
        }
    }
    let value = data_loss * scale + model.l2_penalty(l2);
    if !want_grad {
        return (value, None);
    }

    let mut grads: Vec<Layer> = Vec::with_capacity(model.layers.len());
    for i in (0..model.layers.len()).rev() {
        let l = &model.layers[i];
        let input = &inputs[i];
        let mut gw = input.t().dot(&delta);
        if l2 != 0.0 {
            gw.scaled_add(2.0 * l2, &l.weights);
        }
        let gb = delta.sum_axis(Axis(0));
        if i > 0 {
            let mut back = delta.dot(&l.weights.t());
            // `input` is the ReLU output of the previous layer; its positive
            // entries are exactly where the pre-activation was positive.
            ndarray::Zip::from(&mut back).and(input).for_each(|g, &h| {
                if h <= 0.0 {
                    *g = 0.0;
                }
            });
            delta = back;
        }
        grads.push(Layer { weights: gw, bias: gb });
    }
    grads.reverse();
    (value, Some(Gradient { layers: grads }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::SimplexVector;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn identity_linear(d: usize) -> Model {
        let layer = Layer {
            weights: Array2::eye(d),
            bias: Array1::zeros(d),
        };
        Model::from_layers(Architecture::Linear, Task::Classification, vec![layer]).unwrap()
    }

    #[test]
    fn zero_linear_gives_zero_logits() {
        let m = Model::zeros(Architecture::Linear, Task::Classification, 4, 3);
        assert_eq!(m.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_linear_maps_basis_vectors() {
        let m = identity_linear(3);
        assert_eq!(m.forward(&[0.0, 0.0, 1.0]).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(m.predict_class(&[0.0, 0.0, 1.0]).unwrap(), 2);
    }

    #[test]
    fn zero_mlp_returns_output_bias() {
        let mut m = Model::zeros(Architecture::mlp(4, 3), Task::Classification, 2, 3);
        m.layers[2].bias = array![0.5, -1.0, 2.0];
        assert_eq!(m.forward(&[7.0, -7.0]).unwrap(), vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn forward_checks_dimension() {
        let m = Model::zeros(Architecture::Linear, Task::Classification, 3, 2);
        assert!(matches!(
            m.forward(&[1.0, 2.0]),
            Err(ModelError::Dimension { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn predict_class_ties_and_task() {
        let mut m = Model::zeros(Architecture::Linear, Task::Classification, 1, 3);
        m.layers[0].bias = array![0.1, 0.9, 0.3];
        assert_eq!(m.predict_class(&[0.0]).unwrap(), 1);
        m.layers[0].bias = array![0.5, 0.5, 0.0];
        assert_eq!(m.predict_class(&[0.0]).unwrap(), 0);
        let r = Model::zeros(Architecture::Linear, Task::Regression, 1, 1);
        assert!(matches!(r.predict_class(&[0.0]), Err(ModelError::NotClassifier)));
    }

    #[test]
    fn from_layers_rejects_inconsistent_shapes() {
        let bad = vec![
            Layer { weights: Array2::zeros((2, 3)), bias: Array1::zeros(3) },
            Layer { weights: Array2::zeros((4, 2)), bias: Array1::zeros(2) },
        ];
        assert!(Model::from_layers(Architecture::Mlp { hidden: vec![3] }, Task::Classification, bad).is_err());
    }

    #[test]
    fn loss_of_self_prediction_is_entropy() {
        let mut m = Model::zeros(Architecture::Linear, Task::Classification, 2, 3);
        m.layers[0].weights = array![[0.3, -0.2, 1.0], [0.5, 0.1, -0.4]];
        m.layers[0].bias = array![0.1, 0.0, -0.3];
        let x = vec![0.7, -1.2];
        let p = crate::math::softmax(&m.forward(&x).unwrap(), 1.0).unwrap();
        // Oracle: -sum p log p, with p computed from exponentials directly.
        let z = m.forward(&x).unwrap();
        let e: Vec<f64> = z.iter().map(|v| v.exp()).collect();
        let s: f64 = e.iter().sum();
        let oracle: f64 = -e.iter().map(|v| (v / s) * (v / s).ln()).sum::<f64>();
        let l2 = 0.01;
        let penalty: f64 = l2 * m.layers[0].weights.iter().map(|w| w * w).sum::<f64>();
        let batch = vec![Example { id: 0, x, target: WeightedTarget::hard(p.into_inner()) }];
        assert_abs_diff_eq!(loss(&m, &batch, 1.0, l2).unwrap(), oracle + penalty, epsilon = 1e-12);
    }

    #[test]
    fn zero_weights_give_zero_gradient() {
        let m = Model::init(Architecture::mlp(3, 3), Task::Classification, 2, 2, InitScheme::ScaledNormal, &RngStream::new(1, 1));
        let t = WeightedTarget::new(
            Some((SimplexVector::one_hot(0, 2).unwrap().into_inner(), 0.0)),
            Some((vec![0.5, 0.5], 0.0)),
        )
        .unwrap();
        let batch = vec![Example { id: 0, x: vec![0.3, 0.2], target: t }];
        let g = gradient(&m, &batch, 1.0, 0.0).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn l2_only_gradient_is_weights() {
        let m = Model::init(Architecture::mlp(3, 4), Task::Classification, 2, 2, InitScheme::ScaledNormal, &RngStream::new(2, 0));
        let t = WeightedTarget::new(Some((vec![1.0, 0.0], 0.0)), None).unwrap();
        let batch = vec![Example { id: 0, x: vec![0.3, 0.2], target: t }];
        let g = gradient(&m, &batch, 1.0, 0.5).unwrap();
        for (gl, ml) in g.layers.iter().zip(m.layers()) {
            assert_eq!(gl.weights, ml.weights);
            assert!(gl.bias.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn loss_rejects_bad_batches() {
        let m = Model::zeros(Architecture::Linear, Task::Classification, 2, 2);
        assert!(matches!(loss(&m, &[], 1.0, 0.0), Err(ModelError::EmptyBatch)));
        let bad = vec![Example { id: 0, x: vec![0.0, 0.0], target: WeightedTarget::hard(vec![0.7, 0.7]) }];
        assert!(matches!(loss(&m, &bad, 1.0, 0.0), Err(ModelError::Math(_))));
        let wrong_dim = vec![Example { id: 0, x: vec![0.0], target: WeightedTarget::hard(vec![1.0, 0.0]) }];
        assert!(matches!(loss(&m, &wrong_dim, 1.0, 0.0), Err(ModelError::Dimension { .. })));
        assert!(WeightedTarget::new(None, None).is_err());
        assert!(WeightedTarget::mixed(vec![1.0, 0.0], vec![0.5, 0.5], 1.5).is_err());
    }

    #[test]
    fn regression_loss_is_squared_error() {
        let mut m = Model::zeros(Architecture::Linear, Task::Regression, 1, 1);
        m.layers[0].weights = array![[2.0]];
        let t = WeightedTarget::new(Some((vec![1.0], 0.25)), Some((vec![3.0], 0.75))).unwrap();
        let batch = vec![Example { id: 0, x: vec![1.0], target: t }];
        // prediction 2: 0.25 * 1 + 0.75 * 1
        assert_abs_diff_eq!(loss(&m, &batch, 1.0, 0.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn parameter_round_trip() {
        let mut m = Model::init(Architecture::mlp(3, 2), Task::Classification, 4, 3, InitScheme::ScaledNormal, &RngStream::new(3, 3));
        let p = m.parameters();
        assert_eq!(p.len(), m.num_parameters());
        let doubled: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        m.set_parameters(&doubled).unwrap();
        assert_eq!(m.parameters(), doubled);
        assert!(m.set_parameters(&p[1..]).is_err());
    }
}
