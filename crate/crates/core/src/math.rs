//! Probability-simplex primitives: temperature softmax, cross-entropy and
//! log-sum-exp, all computed from logits with max-subtraction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `|sum(p) - 1|` accepted by [`SimplexVector::new`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathError {
    #[error("temperature must be positive and finite, got {0}")]
    Temperature(f64),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("empty input")]
    Empty,
    #[error("not a probability vector: {0}")]
    NotSimplex(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
}

/// A point of the probability simplex: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(p: Vec<f64>) -> Result<Self, MathError> {
        validate_simplex(&p)?;
        Ok(SimplexVector(p))
    }

    /// Hard label `e_k` over `classes` classes.
    pub fn one_hot(k: usize, classes: usize) -> Result<Self, MathError> {
        if k >= classes {
            return Err(MathError::NotSimplex(format!(
                "class {k} out of range for {classes} classes"
            )));
        }
        let mut p = vec![0.0; classes];
        p[k] = 1.0;
        Ok(SimplexVector(p))
    }

    pub fn uniform(classes: usize) -> Result<Self, MathError> {
        if classes == 0 {
            return Err(MathError::Empty);
        }
        Ok(SimplexVector(vec![1.0 / classes as f64; classes]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.0)
    }
}

impl TryFrom<Vec<f64>> for SimplexVector {
    type Error = MathError;

    fn try_from(p: Vec<f64>) -> Result<Self, Self::Error> {
        SimplexVector::new(p)
    }
}

impl From<SimplexVector> for Vec<f64> {
    fn from(p: SimplexVector) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for SimplexVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn validate_simplex(p: &[f64]) -> Result<(), MathError> {
    if p.is_empty() {
        return Err(MathError::Empty);
    }
    let mut sum = 0.0;
    for (k, &v) in p.iter().enumerate() {
        if !v.is_finite() {
            return Err(MathError::NonFinite(k));
        }
        if v < 0.0 {
            return Err(MathError::NotSimplex(format!("entry {k} is negative ({v})")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(MathError::NotSimplex(format!("entries sum to {sum}")));
    }
    Ok(())
}

fn check_temperature(t: f64) -> Result<(), MathError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(MathError::Temperature(t))
    }
}

fn check_finite(z: &[f64]) -> Result<(), MathError> {
    match z.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(MathError::NonFinite(k)),
        None => Ok(()),
    }
}

/// `log(sum(exp(z)))`, shifted by the maximum so large entries do not overflow.
pub fn log_sum_exp(z: &[f64]) -> Result<f64, MathError> {
    if z.is_empty() {
        return Err(MathError::Empty);
    }
    check_finite(z)?;
    Ok(log_sum_exp_unchecked(z))
}

pub(crate) fn log_sum_exp_unchecked(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = z.iter().map(|&v| (v - m).exp()).sum();
    m + s.ln()
}

/// `softmax(z / t)`.
pub fn softmax(z: &[f64], t: f64) -> Result<SimplexVector, MathError> {
    check_temperature(t)?;
    if z.is_empty() {
        return Err(MathError::Empty);
    }
    check_finite(z)?;
    let mut p = z.to_vec();
    softmax_in_place(&mut p, t);
    Ok(SimplexVector(p))
}

/// Overwrites `z` with `softmax(z / t)`. Inputs are assumed validated.
pub(crate) fn softmax_in_place(z: &mut [f64], t: f64) {
    for v in z.iter_mut() {
        *v /= t;
    }
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

/// Cross-entropy `-sum_k y_k log softmax(z / t)_k`, evaluated through
/// log-sum-exp so it stays finite for every finite logit vector.
pub fn cross_entropy(y: &SimplexVector, z: &[f64], t: f64) -> Result<f64, MathError> {
    check_temperature(t)?;
    if y.len() != z.len() {
        return Err(MathError::Dimension {
            expected: y.len(),
            actual: z.len(),
        });
    }
    check_finite(z)?;
    Ok(cross_entropy_unchecked(y.as_slice(), z, t))
}

pub(crate) fn cross_entropy_unchecked(y: &[f64], z: &[f64], t: f64) -> f64 {
    let scaled: Vec<f64> = z.iter().map(|v| v / t).collect();
    let lse = log_sum_exp_unchecked(&scaled);
    let mut loss = 0.0;
    for (&yk, &sk) in y.iter().zip(&scaled) {
        if yk != 0.0 {
            loss -= yk * (sk - lse);
        }
    }
    // `lse >= s_k` always, so the sum is non-negative up to rounding.
    loss.max(0.0)
}

/// Shannon entropy in nats; `0 log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let p = softmax(&[0.0, 0.0, 0.0], 1.0).unwrap();
        for &v in p.as_slice() {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_of_log_two() {
        // exp(ln 2) = 2, exp(0) = 1, so the masses are 2/3 and 1/3.
        let p = softmax(&[std::f64::consts::LN_2, 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(p.as_slice()[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.as_slice()[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn huge_temperature_flattens() {
        let p = softmax(&[5.0, -3.0, 1.0], 1e6).unwrap();
        for &v in p.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-5);
        }
    }

    #[test]
    fn softmax_rejects_bad_inputs() {
        assert_eq!(softmax(&[1.0], 0.0), Err(MathError::Temperature(0.0)));
        assert_eq!(softmax(&[1.0], -2.0), Err(MathError::Temperature(-2.0)));
        assert_eq!(softmax(&[1.0, f64::NAN], 1.0), Err(MathError::NonFinite(1)));
        assert_eq!(softmax(&[f64::INFINITY], 1.0), Err(MathError::NonFinite(0)));
        assert_eq!(softmax(&[], 1.0), Err(MathError::Empty));
    }

    #[test]
    fn softmax_survives_extreme_scaled_logits() {
        let p = softmax(&[700.0, -700.0, 0.0], 1.0).unwrap();
        assert!(p.as_slice().iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(p.as_slice()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_examples() {
        let e1 = SimplexVector::one_hot(0, 2).unwrap();
        let confident = cross_entropy(&e1, &[1000.0, -1000.0], 1.0).unwrap();
        assert!(confident <= 1e-9);

        let half = SimplexVector::new(vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(
            cross_entropy(&half, &[0.0, 0.0], 1.0).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );

        // -(0.3 ln 0.3 + 0.7 ln 0.7), evaluated independently.
        let y = SimplexVector::new(vec![0.3, 0.7]).unwrap();
        let ce = cross_entropy(&y, &[0.3f64.ln(), 0.7f64.ln()], 1.0).unwrap();
        assert_abs_diff_eq!(ce, 0.610_864_302_054_894, epsilon = 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_mismatch() {
        let y = SimplexVector::uniform(3).unwrap();
        assert!(matches!(
            cross_entropy(&y, &[0.0, 0.0], 1.0),
            Err(MathError::Dimension { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn simplex_validation() {
        assert!(SimplexVector::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexVector::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexVector::new(vec![]).is_err());
        assert!(SimplexVector::new(vec![0.25; 4]).is_ok());
        assert!(SimplexVector::one_hot(2, 2).is_err());
        let parsed: Result<SimplexVector, _> = serde_json::from_str("[0.9, 0.9]");
        assert!(parsed.is_err());
    }

    #[test]
    fn log_sum_exp_examples() {
        assert_eq!(log_sum_exp(&[0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(log_sum_exp(&[0.0, 0.0]).unwrap(), std::f64::consts::LN_2);
        assert_abs_diff_eq!(
            log_sum_exp(&[1000.0, 1000.0]).unwrap(),
            1000.0 + std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        assert_eq!(log_sum_exp(&[]), Err(MathError::Empty));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}
