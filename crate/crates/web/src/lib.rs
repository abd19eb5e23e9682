//! Browser bindings for the demo page in `www/`.
//!
//! Every export is a thin wrapper over a plain function so the same logic
//! runs under `cargo test` on the host.

use distillery::experiments::{run_synthetic, Arm, ExperimentReport, GridSettings, SyntheticRun};
use distillery::math::softmax;
use distillery::synthetic::SyntheticExperiment;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Test points per repetition; the CLI uses 10 000.
pub const DEMO_TEST_POINTS: usize = 2_000;
pub const MAX_REPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Softened {
    pub probabilities: Vec<f64>,
    pub entropy: f64,
}

/// Softmax of `logits / t` and its entropy in nats.
pub fn soften(logits: &[f64], t: f64) -> Result<Softened, String> {
    let p = softmax(logits, t).map_err(|e| e.to_string())?;
    Ok(Softened {
        entropy: p.entropy(),
        probabilities: p.into_inner(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arms {
    pub privileged: f64,
    pub regular: f64,
    pub distilled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub accuracy: f64,
}

fn demo_run(experiment: u8, seed: u64, reps: usize, grid: GridSettings) -> Result<ExperimentReport, String> {
    let e = SyntheticExperiment::from_number(experiment).ok_or_else(|| format!("experiment {experiment} not in 1..=4"))?;
    if reps == 0 || reps > MAX_REPS {
        return Err(format!("repetitions must be in 1..={MAX_REPS}"));
    }
    let mut run = SyntheticRun::new(e, seed);
    run.reps = reps;
    run.n_test = DEMO_TEST_POINTS;
    run.grid = grid;
    run_synthetic(&run).map_err(|e| e.to_string())
}

fn mean_of(report: &ExperimentReport, arm: Arm, t: Option<f64>, l: Option<f64>) -> Result<f64, String> {
    report
        .cell(arm, "", t, l)
        .filter(|c| c.reps > 0)
        .map(|c| c.mean)
        .ok_or_else(|| format!("no {} result: {}", arm.as_str(), report.failures.join("; ")))
}

/// Mean test accuracy of the three arms on one synthetic problem.
pub fn compare(experiment: u8, seed: u64, reps: usize, t: f64, lambda: f64) -> Result<Arms, String> {
    let report = demo_run(experiment, seed, reps, GridSettings::single(t, lambda))?;
    Ok(Arms {
        privileged: mean_of(&report, Arm::Privileged, None, None)?,
        regular: mean_of(&report, Arm::Regular, None, None)?,
        distilled: mean_of(&report, Arm::Distilled, Some(t), Some(lambda))?,
    })
}

/// Distilled accuracy at `steps + 1` evenly spaced imitation weights.
pub fn sweep(experiment: u8, seed: u64, reps: usize, t: f64, steps: usize) -> Result<Vec<SweepPoint>, String> {
    if !(1..=20).contains(&steps) {
        return Err("steps must be in 1..=20".into());
    }
    let lambdas: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let grid = GridSettings {
        temperatures: vec![t],
        lambdas: lambdas.clone(),
        ..GridSettings::single(t, 1.0)
    };
    let report = demo_run(experiment, seed, reps, grid)?;
    lambdas
        .into_iter()
        .map(|l| {
            Ok(SweepPoint {
                lambda: l,
                accuracy: mean_of(&report, Arm::Distilled, Some(t), Some(l))?,
            })
        })
        .collect()
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// JSON `{probabilities, entropy}`.
#[wasm_bindgen]
pub fn soften_json(logits: Vec<f64>, t: f64) -> Result<String, JsError> {
    to_js(soften(&logits, t))
}

/// JSON `{privileged, regular, distilled}`.
#[wasm_bindgen]
pub fn compare_json(experiment: u8, seed: u32, reps: u32, t: f64, lambda: f64) -> Result<String, JsError> {
    to_js(compare(experiment, u64::from(seed), reps as usize, t, lambda))
}

/// JSON array of `{lambda, accuracy}`.
#[wasm_bindgen]
pub fn sweep_json(experiment: u8, seed: u32, reps: u32, t: f64, steps: u32) -> Result<String, JsError> {
    to_js(sweep(experiment, u64::from(seed), reps as usize, t, steps as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soften_flattens_with_temperature() {
        let cold = soften(&[2.0, 0.0, -1.0], 1.0).unwrap();
        let hot = soften(&[2.0, 0.0, -1.0], 20.0).unwrap();
        assert!((cold.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(hot.entropy > cold.entropy);
        assert!(hot.entropy <= 3f64.ln());
        assert!(soften(&[1.0], 0.0).is_err());
        assert!(soften(&[], 1.0).is_err());
    }

    #[test]
    fn compare_matches_the_library_run() {
        let arms = compare(3, 1, 3, 1.0, 1.0).unwrap();
        let mut run = SyntheticRun::new(SyntheticExperiment::RelevantFeatures, 1);
        run.reps = 3;
        run.n_test = DEMO_TEST_POINTS;
        let r = run_synthetic(&run).unwrap();
        assert_eq!(arms.regular, r.cell(Arm::Regular, "", None, None).unwrap().mean);
        assert!(arms.privileged > arms.regular);
    }

    #[test]
    fn sweep_starts_at_the_regular_student() {
        let points = sweep(1, 0, 2, 1.0, 4).unwrap();
        assert_eq!(points.len(), 5);
        assert_eq!(points[0].lambda, 0.0);
        assert_eq!(points[4].lambda, 1.0);
        let arms = compare(1, 0, 2, 1.0, 1.0).unwrap();
        assert_eq!(points[0].accuracy, arms.regular);
        assert_eq!(points[4].accuracy, arms.distilled);
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(compare(5, 0, 2, 1.0, 1.0).is_err());
        assert!(compare(1, 0, 0, 1.0, 1.0).is_err());
        assert!(compare(1, 0, MAX_REPS + 1, 1.0, 1.0).is_err());
        assert!(compare(1, 0, 1, 1.0, 2.0).is_err());
        assert!(sweep(1, 0, 1, 1.0, 0).is_err());
    }

    #[test]
    fn json_shapes() {
        let s = serde_json::to_string(&soften(&[0.0, 0.0], 1.0).unwrap()).unwrap();
        assert_eq!(s, r#"{"probabilities":[0.5,0.5],"entropy":0.6931471805599453}"#);
    }
}
