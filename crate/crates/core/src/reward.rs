//! Fitness of a candidate expression: `1 / (1 + NMSE)`.

use serde::{Deserialize, Serialize};

use crate::constopt::ConstFitter;
use crate::expr::{evaluate_traversal, variance, Dataset, Evaluation, TokenLibrary, Traversal};

/// Mean squared error divided by the population variance of `y`.
pub fn nmse(y_hat: &[f64], y: &[f64]) -> f64 {
    assert_eq!(y_hat.len(), y.len(), "prediction and target lengths differ");
    let mse = y_hat
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64;
    mse / variance(y)
}

pub fn reward_from_nmse(nmse: f64) -> f64 {
    if nmse.is_nan() {
        0.0
    } else {
        1.0 / (1.0 + nmse.max(0.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardValue {
    pub value: f64,
    pub invalid: bool,
}

impl RewardValue {
    pub const INVALID: RewardValue = RewardValue {
        value: 0.0,
        invalid: true,
    };
}

/// Reward together with the fitted constants that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub reward: RewardValue,
    pub nmse: f64,
    pub constants: Vec<f64>,
    /// Objective evaluations spent fitting constants.
    pub const_evals: usize,
}

/// Fits constants (if any), then scores the expression on `data`.
/// `seed` drives the random restart of the constant fit.
pub fn score(t: &Traversal, lib: &TokenLibrary, data: &Dataset, fitter: &ConstFitter, seed: u64) -> Scored {
    let fit = fitter.fit(t, lib, data, seed);
    let (reward, nmse) = match evaluate_traversal(t.ids(), lib, &fit.values, data.columns()) {
        Evaluation::Valid(v) => {
            let e = nmse(&v, data.y());
            (
                RewardValue {
                    value: reward_from_nmse(e),
                    invalid: false,
                },
                e,
            )
        }
        Evaluation::Invalid => (RewardValue::INVALID, f64::INFINITY),
    };
    Scored {
        reward,
        nmse,
        constants: fit.values,
        const_evals: fit.n_evals,
    }
}

pub fn reward(t: &Traversal, lib: &TokenLibrary, data: &Dataset, fitter: &ConstFitter, seed: u64) -> RewardValue {
    score(t, lib, data, fitter, seed).reward
}

/// NMSE of a traversal with given constants on `data`; `inf` when invalid.
pub fn nmse_of(t: &Traversal, lib: &TokenLibrary, constants: &[f64], data: &Dataset) -> f64 {
    match evaluate_traversal(t.ids(), lib, constants, data.columns()) {
        Evaluation::Valid(v) => nmse(&v, data.y()),
        Evaluation::Invalid => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nmse_examples() {
        let y = [0.0, 1.0, 2.0];
        assert_eq!(nmse(&y, &y), 0.0);
        assert!((nmse(&[1.0, 1.0, 1.0], &y) - 1.0).abs() < 1e-15);
        assert!((nmse(&[0.0, 1.0, 4.0], &y) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn reward_examples() {
        let lib = TokenLibrary::from_symbols(&["add", "mul", "log", "x1", "const"]).unwrap();
        let x = vec![-0.5, 0.25, 0.5, 1.0];
        let y: Vec<f64> = x.iter().map(|v| v * v + v).collect();
        let d = Dataset::new(vec![x], y).unwrap();
        let f = ConstFitter::default();
        let truth = lib.parse_traversal("add mul x1 x1 x1").unwrap();
        assert_eq!(reward(&truth, &lib, &d, &f, 0).value, 1.0);
        let bad = lib.parse_traversal("log x1").unwrap();
        assert_eq!(reward(&bad, &lib, &d, &f, 0), RewardValue::INVALID);
        let mean = lib.parse_traversal("const").unwrap();
        let r = reward(&mean, &lib, &d, &f, 0);
        assert!((r.value - 0.5).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn reported_reward_matches_fitted_constants() {
        let lib = TokenLibrary::from_symbols(&["add", "mul", "sin", "x1", "const"]).unwrap();
        let x: Vec<f64> = (0..20).map(|i| -1.0 + i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.3 * v.sin() + 0.2 * v).collect();
        let d = Dataset::new(vec![x], y).unwrap();
        let t = lib.parse_traversal("mul const sin x1").unwrap();
        let s = score(&t, &lib, &d, &ConstFitter::default(), 3);
        let direct = reward_from_nmse(nmse_of(&t, &lib, &s.constants, &d));
        assert_eq!(direct, s.reward.value);
    }
}
