#![allow(dead_code)]

use distillery::model::{gradient, loss, Architecture, Example, InitScheme, Model, Task, TrainConfig, WeightedTarget};
use distillery::math::softmax;
use distillery::rng::{standard_normal, RngStream};
use rand::Rng;

pub const CONVEX_L2: f64 = 0.1;
pub const CONVEX_LAMBDA: f64 = 0.3;

/// Minimum of the convex instance below, from BFGS (gtol 1e-12, best of
/// five random starts) in scipy on an independent numpy objective.
pub const CONVEX_ORACLE_MIN: f64 = 0.6626430273081527;

/// Twenty points in the plane; labels follow a line with every sixth one
/// flipped; soft targets are a fixed ramp mixed in with weight 0.3.
pub fn convex_points() -> Vec<([f64; 2], [f64; 2], [f64; 2])> {
    (0..20)
        .map(|i| {
            let x = [((i * 37) % 19) as f64 / 9.0 - 1.0, ((i * 11) % 17) as f64 / 8.0 - 1.0];
            let positive = (x[0] + 0.5 * x[1] > 0.0) != (i % 6 == 0);
            let y = if positive { [0.0, 1.0] } else { [1.0, 0.0] };
            let s0 = 0.2 + 0.03 * (i % 10) as f64;
            (x, y, [s0, 0.8 - 0.03 * (i % 10) as f64])
        })
        .collect()
}

pub fn convex_examples() -> Vec<Example> {
    convex_points()
        .into_iter()
        .enumerate()
        .map(|(i, (x, y, s))| Example {
            id: i as u64,
            x: x.to_vec(),
            target: WeightedTarget::mixed(y.to_vec(), s.to_vec(), CONVEX_LAMBDA).unwrap(),
        })
        .collect()
}

/// The same objective written out directly: parameters are
/// `[w00, w01, w10, w11, b0, b1]` with class-major weights.
pub fn direct_objective(p: &[f64; 6]) -> f64 {
    let pts = convex_points();
    let mut total = 0.0;
    for (x, y, s) in &pts {
        let z = [
            p[0] * x[0] + p[1] * x[1] + p[4],
            p[2] * x[0] + p[3] * x[1] + p[5],
        ];
        let m = z[0].max(z[1]);
        let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
        let ce = |t: &[f64; 2]| -(t[0] * (z[0] - lse) + t[1] * (z[1] - lse));
        total += (1.0 - CONVEX_LAMBDA) * ce(y) + CONVEX_LAMBDA * ce(s);
    }
    let w2: f64 = p[..4].iter().map(|w| w * w).sum();
    total / pts.len() as f64 + CONVEX_L2 * w2
}

/// Compass search: try +-step on each coordinate, halve the step when no
/// move improves. Derivative free, so it shares nothing with the trainer.
pub fn pattern_search() -> f64 {
    let mut p = [0.0; 6];
    let mut best = direct_objective(&p);
    let mut step = 1.0;
    while step > 1e-9 {
        let mut moved = false;
        for k in 0..6 {
            for sign in [1.0, -1.0] {
                let mut q = p;
                q[k] += sign * step;
                let v = direct_objective(&q);
                if v < best {
                    best = v;
                    p = q;
                    moved = true;
                }
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    best
}

/// Full-batch descent from zero until the gradient norm is at most `tol`.
/// Returns the model, its loss, its gradient norm and the epochs used.
pub fn train_convex(tol: f64) -> (Model, f64, f64, usize) {
    let data = convex_examples();
    let cfg = TrainConfig {
        learning_rate: 0.5,
        epochs: 100,
        batch_size: data.len(),
        l2: CONVEX_L2,
        init: InitScheme::Zeros,
        rng: RngStream::new(0, 0),
    };
    let mut model = Model::zeros(Architecture::Linear, Task::Classification, 2, 2);
    let mut epochs = 0;
    loop {
        let norm = gradient(&model, &data, 1.0, CONVEX_L2).unwrap().norm();
        if norm <= tol || epochs >= 100_000 {
            let l = loss(&model, &data, 1.0, CONVEX_L2).unwrap();
            return (model, l, norm, epochs);
        }
        model = distillery::model::train(&model, &data, &cfg, 1.0).unwrap();
        epochs += cfg.epochs;
    }
}

pub fn random_target(g: &mut impl Rng, task: Task, c: usize, lambda: f64) -> WeightedTarget {
    match task {
        Task::Classification => {
            let mut hard = vec![0.0; c];
            hard[g.random_range(0..c)] = 1.0;
            let z: Vec<f64> = (0..c).map(|_| standard_normal(g)).collect();
            let soft = softmax(&z, 1.0).unwrap().into_inner();
            WeightedTarget::mixed(hard, soft, lambda).unwrap()
        }
        Task::Regression => {
            let hard: Vec<f64> = (0..c).map(|_| standard_normal(g)).collect();
            let soft: Vec<f64> = (0..c).map(|_| standard_normal(g)).collect();
            WeightedTarget::mixed(hard, soft, lambda).unwrap()
        }
    }
}

pub fn random_batch(g: &mut impl Rng, n: usize, d: usize, task: Task, c: usize, lambda: f64) -> Vec<Example> {
    (0..n)
        .map(|i| Example {
            id: i as u64,
            x: (0..d).map(|_| standard_normal(g)).collect(),
            target: random_target(g, task, c, lambda),
        })
        .collect()
}

/// Central differences at step 1e-5 over every parameter, compared in
/// relative norm.
pub fn finite_difference_error(model: &Model, batch: &[Example], t: f64, l2: f64) -> f64 {
    let analytic = gradient(model, batch, t, l2).unwrap().flatten();
    let theta = model.parameters();
    let h = 1e-5;
    let mut m = model.clone();
    let numeric: Vec<f64> = (0..theta.len())
        .map(|k| {
            let mut p = theta.clone();
            p[k] = theta[k] + h;
            m.set_parameters(&p).unwrap();
            let up = loss(&m, batch, t, l2).unwrap();
            p[k] = theta[k] - h;
            m.set_parameters(&p).unwrap();
            let down = loss(&m, batch, t, l2).unwrap();
            (up - down) / (2.0 * h)
        })
        .collect();
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        2.0 * diff / scale
    }
}
