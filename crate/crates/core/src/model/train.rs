use serde::{Deserialize, Serialize};

use super::{objective, validate_batch, Architecture, Example, Model, ModelError, Task};
use crate::rng::{shuffle, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// `N(0, 2/fan_in)` into ReLUs, `N(0, 1/fan_in)` at the output, zero biases.
    ScaledNormal,
    Zeros,
}

/// Mini-batch SGD settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub init: InitScheme,
    pub rng: RngStream,
}

impl TrainConfig {
    /// Defaults for the linear models of the synthetic experiments.
    pub fn linear_default(rng: RngStream) -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 32,
            l2: 1e-4,
            init: InitScheme::ScaledNormal,
            rng,
        }
    }

    /// Defaults for the two-hidden-layer networks used on image data.
    pub fn mlp_default(rng: RngStream) -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 100,
            batch_size: 32,
            l2: 1e-4,
            init: InitScheme::ScaledNormal,
            rng,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::Config(format!("learning rate {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(ModelError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ModelError::Config("batch size must be at least 1".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(ModelError::Config(format!("l2 strength {}", self.l2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean mini-batch objective per epoch, measured before each step.
    pub epoch_losses: Vec<f64>,
}

pub fn train(m0: &Model, data: &[Example], cfg: &TrainConfig, t_student: f64) -> Result<Model, ModelError> {
    train_with_history(m0, data, cfg, t_student).map(|o| o.model)
}

/// Mini-batch gradient descent from `m0`.
///
/// Examples are put in id order before the first epoch, and each epoch
/// shuffles that order with the config's stream. The result therefore does
/// not depend on the order of `data`. A batch size larger than the data set
/// means full-batch descent.
pub fn train_with_history(
    m0: &Model,
    data: &[Example],
    cfg: &TrainConfig,
    t_student: f64,
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    validate_batch(m0, data, t_student)?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by_key(|&i| data[i].id);
    if order.windows(2).any(|w| data[w[0]].id == data[w[1]].id) {
        return Err(ModelError::Config("duplicate example id".into()));
    }

    let batch_size = cfg.batch_size.min(data.len());
    let mut gen = cfg.rng.fork_named("shuffle").generator();
    let mut model = m0.clone();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut batch: Vec<Example> = Vec::with_capacity(batch_size);

    for epoch in 0..cfg.epochs {
        let mut perm = order.clone();
        shuffle(&mut gen, &mut perm);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in perm.chunks(batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            let (l, g) = objective(&model, &batch, t_student, cfg.l2, true);
            if !l.is_finite() {
                return Err(ModelError::Diverged { epoch });
            }
            model.apply_step(&g.expect("requested"), cfg.learning_rate);
            total += l;
            batches += 1;
        }
        if !model.all_finite() {
            return Err(ModelError::Diverged { epoch });
        }
        epoch_losses.push(total / batches as f64);
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}

/// Initializes a model from `cfg.init` on the config's `"init"` sub-stream,
/// then trains it.
pub fn fit(
    architecture: Architecture,
    task: Task,
    input: usize,
    output: usize,
    data: &[Example],
    cfg: &TrainConfig,
    t_student: f64,
) -> Result<TrainOutcome, ModelError> {
    let m0 = Model::init(
        architecture,
        task,
        input,
        output,
        cfg.init,
        &cfg.rng.fork_named("init"),
    );
    train_with_history(&m0, data, cfg, t_student)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gradient, loss, WeightedTarget};

    fn separable() -> Vec<Example> {
        // Two clusters on either side of x0 = 0 with margin 1.
        (0..20)
            .map(|i| {
                let class = i % 2;
                let sign = if class == 1 { 1.0 } else { -1.0 };
                let x = vec![sign * (1.0 + 0.1 * (i / 2) as f64), ((i * 7) % 5) as f64 - 2.0];
                let mut y = vec![0.0, 0.0];
                y[class] = 1.0;
                Example { id: i as u64, x, target: WeightedTarget::hard(y) }
            })
            .collect()
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let data = separable();
        let cfg = TrainConfig::linear_default(RngStream::new(11, 0));
        let out = fit(Architecture::Linear, Task::Classification, 2, 2, &data, &cfg, 1.0).unwrap();
        let correct = data
            .iter()
            .filter(|e| out.model.predict_class(&e.x).unwrap() == crate::math::argmax(e.target.hard_target().unwrap()))
            .count();
        assert_eq!(correct, 20);
    }

    #[test]
    fn training_is_deterministic_and_order_free() {
        let data = separable();
        let cfg = TrainConfig { epochs: 20, batch_size: 3, ..TrainConfig::linear_default(RngStream::new(5, 9)) };
        let a = fit(Architecture::mlp(4, 3), Task::Classification, 2, 2, &data, &cfg, 1.0).unwrap();
        let b = fit(Architecture::mlp(4, 3), Task::Classification, 2, 2, &data, &cfg, 1.0).unwrap();
        assert_eq!(a.model, b.model);
        let mut reversed = data.clone();
        reversed.reverse();
        let c = fit(Architecture::mlp(4, 3), Task::Classification, 2, 2, &reversed, &cfg, 1.0).unwrap();
        assert_eq!(a.model, c.model);
        assert_eq!(a.epoch_losses, c.epoch_losses);
    }

    #[test]
    fn rejects_bad_configs_and_duplicates() {
        let data = separable();
        let m = Model::zeros(Architecture::Linear, Task::Classification, 2, 2);
        let mut cfg = TrainConfig::linear_default(RngStream::new(0, 0));
        cfg.epochs = 0;
        assert!(matches!(train(&m, &data, &cfg, 1.0), Err(ModelError::Config(_))));
        cfg.epochs = 1;
        let mut dup = data.clone();
        dup[1].id = dup[0].id;
        assert!(matches!(train(&m, &dup, &cfg, 1.0), Err(ModelError::Config(_))));
        assert!(matches!(train(&m, &[], &cfg, 1.0), Err(ModelError::EmptyBatch)));
    }

    #[test]
    fn divergence_reports_epoch() {
        let data = separable();
        let m = Model::zeros(Architecture::Linear, Task::Regression, 2, 2);
        let cfg = TrainConfig { learning_rate: 1e3, batch_size: 20, ..TrainConfig::linear_default(RngStream::new(0, 0)) };
        match train(&m, &data, &cfg, 1.0) {
            Err(ModelError::Diverged { epoch }) => assert!(epoch < cfg.epochs),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn full_batch_descent_decreases_loss() {
        let data = separable();
        let cfg = TrainConfig { epochs: 300, batch_size: 20, l2: 0.1, init: InitScheme::Zeros, ..TrainConfig::linear_default(RngStream::new(1, 2)) };
        let out = fit(Architecture::Linear, Task::Classification, 2, 2, &data, &cfg, 1.0).unwrap();
        assert!(out.epoch_losses.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        let final_loss = loss(&out.model, &data, 1.0, 0.1).unwrap();
        assert!(final_loss <= out.epoch_losses[0]);
        assert!(gradient(&out.model, &data, 1.0, 0.1).unwrap().norm() < 1e-3);
    }
}
