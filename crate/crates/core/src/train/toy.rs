//! Exact objectives for a product-Bernoulli model over binary strings.
//!
//! The model is `p(t) = prod_i theta_i^t_i (1 - theta_i)^(1 - t_i)` and
//! the search space is every string of length `theta.len()`, so all
//! expectations are finite sums.

use rand::Rng;

use super::empirical_quantile;

pub const MAX_BITS: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliProduct {
    pub theta: Vec<f64>,
}

impl BernoulliProduct {
    pub fn new(theta: Vec<f64>) -> Self {
        assert!(theta.len() <= MAX_BITS, "too many bits to enumerate");
        assert!(theta.iter().all(|p| (0.0..=1.0).contains(p)));
        BernoulliProduct { theta }
    }

    pub fn n_outcomes(&self) -> usize {
        1 << self.theta.len()
    }

    /// Bit `i` of `outcome` is `t_i`.
    pub fn bits(&self, outcome: usize) -> Vec<bool> {
        (0..self.theta.len()).map(|i| outcome >> i & 1 == 1).collect()
    }

    pub fn prob(&self, outcome: usize) -> f64 {
        self.theta
            .iter()
            .enumerate()
            .map(|(i, p)| if outcome >> i & 1 == 1 { *p } else { 1.0 - p })
            .product()
    }

    /// `d log p(t) / d theta_i = t_i / theta_i - (1 - t_i) / (1 - theta_i)`.
    pub fn grad_log_prob(&self, outcome: usize) -> Vec<f64> {
        self.theta
            .iter()
            .enumerate()
            .map(|(i, p)| if outcome >> i & 1 == 1 { 1.0 / p } else { -1.0 / (1.0 - p) })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.theta
            .iter()
            .enumerate()
            .fold(0, |acc, (i, p)| if rng.gen::<f64>() < *p { acc | 1 << i } else { acc })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactObjectives {
    pub expected_reward: f64,
    pub entropy: f64,
    /// `log sum_t exp(R(t))`.
    pub log_partition: f64,
    /// `KL[p || exp(R)/Z]`, summed directly.
    pub kl_to_gibbs: f64,
    /// Lower `(1 - eps)` quantile of the reward distribution under `p`.
    pub risk_quantile: f64,
    /// `E[R | R >= quantile]`.
    pub risk_objective: f64,
}

/// Closed-form objectives by enumeration; `rewards[o]` is the reward of
/// outcome `o`.
pub fn exact_objectives(model: &BernoulliProduct, rewards: &[f64], epsilon: f64) -> ExactObjectives {
    assert_eq!(rewards.len(), model.n_outcomes());
    let probs: Vec<f64> = (0..model.n_outcomes()).map(|o| model.prob(o)).collect();
    let m = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = m + rewards.iter().map(|r| (r - m).exp()).sum::<f64>().ln();
    let mut expected = 0.0;
    let mut entropy = 0.0;
    let mut kl = 0.0;
    for (p, r) in probs.iter().zip(rewards) {
        if *p > 0.0 {
            expected += p * r;
            entropy -= p * p.ln();
            kl += p * (p.ln() - (r - log_z));
        }
    }
    let q = population_quantile(&probs, rewards, epsilon);
    let (mut mass, mut tail) = (0.0, 0.0);
    for (p, r) in probs.iter().zip(rewards) {
        if *r >= q {
            mass += p;
            tail += p * r;
        }
    }
    ExactObjectives {
        expected_reward: expected,
        entropy,
        log_partition: log_z,
        kl_to_gibbs: kl,
        risk_quantile: q,
        risk_objective: tail / mass,
    }
}

/// Smallest reward `r` with `P(R <= r) >= 1 - eps`.
pub fn population_quantile(probs: &[f64], rewards: &[f64], epsilon: f64) -> f64 {
    let mut order: Vec<usize> = (0..rewards.len()).filter(|&i| probs[i] > 0.0).collect();
    order.sort_by(|&a, &b| rewards[a].total_cmp(&rewards[b]));
    let mut cum = 0.0;
    for &i in &order {
        cum += probs[i];
        if cum >= 1.0 - epsilon - 1e-12 {
            return rewards[i];
        }
    }
    rewards[*order.last().expect("no outcome with positive probability")]
}

/// `grad E[R] = sum_t p(t) (R(t) - b) grad log p(t)`; independent of `b`.
pub fn expected_reward_gradient(model: &BernoulliProduct, rewards: &[f64], baseline: f64) -> Vec<f64> {
    let mut g = vec![0.0; model.theta.len()];
    for (o, r) in rewards.iter().enumerate() {
        let p = model.prob(o);
        for (gi, d) in g.iter_mut().zip(model.grad_log_prob(o)) {
            *gi += p * (r - baseline) * d;
        }
    }
    g
}

/// Expectation of the risk-seeking estimator with the threshold held at
/// `quantile`: `(1/eps) sum_t p(t) (R - q) 1[R >= q] grad log p(t)`.
pub fn risk_gradient(model: &BernoulliProduct, rewards: &[f64], epsilon: f64, quantile: f64) -> Vec<f64> {
    let mut g = vec![0.0; model.theta.len()];
    for (o, r) in rewards.iter().enumerate() {
        if *r < quantile {
            continue;
        }
        let p = model.prob(o);
        for (gi, d) in g.iter_mut().zip(model.grad_log_prob(o)) {
            *gi += p * (r - quantile) * d / epsilon;
        }
    }
    g
}

/// One batch of the Monte-Carlo risk-seeking estimator, using the same
/// quantile rule as the trainer.
pub fn sampled_risk_gradient<R: Rng + ?Sized>(
    model: &BernoulliProduct,
    rewards: &[f64],
    epsilon: f64,
    batch: usize,
    rng: &mut R,
) -> Vec<f64> {
    let outcomes: Vec<usize> = (0..batch).map(|_| model.sample(rng)).collect();
    let r: Vec<f64> = outcomes.iter().map(|&o| rewards[o]).collect();
    let w = super::rspg_weights(&r, epsilon);
    let mut g = vec![0.0; model.theta.len()];
    for (o, wi) in outcomes.iter().zip(&w) {
        if *wi != 0.0 {
            for (gi, d) in g.iter_mut().zip(model.grad_log_prob(*o)) {
                *gi += wi * d;
            }
        }
    }
    g
}

/// Batch quantile of a sampled batch, exposed for diagnostics.
pub fn sampled_quantile<R: Rng + ?Sized>(
    model: &BernoulliProduct,
    rewards: &[f64],
    epsilon: f64,
    batch: usize,
    rng: &mut R,
) -> f64 {
    let r: Vec<f64> = (0..batch).map(|_| rewards[model.sample(rng)]).collect();
    empirical_quantile(&r, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Outcome index is `t1 + 2 t2`.
    const REWARDS: [f64; 4] = [0.2, 0.5, 1.0, 0.8];

    #[test]
    fn probabilities_sum_to_one() {
        let m = BernoulliProduct::new(vec![0.8, 0.2]);
        let probs: Vec<f64> = (0..4).map(|o| m.prob(o)).collect();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((probs[1] - 0.64).abs() < 1e-15);
        assert!((probs[2] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn gibbs_identity() {
        let m = BernoulliProduct::new(vec![0.8, 0.2]);
        let e = exact_objectives(&m, &REWARDS, 0.1);
        let rhs = -e.entropy - e.expected_reward + e.log_partition;
        assert!((e.kl_to_gibbs - rhs).abs() < 1e-12);
    }

    #[test]
    fn uniform_model_flat_rewards_has_zero_kl() {
        let m = BernoulliProduct::new(vec![0.5, 0.5]);
        let e = exact_objectives(&m, &[0.3; 4], 0.1);
        assert!(e.kl_to_gibbs.abs() < 1e-15);
    }

    #[test]
    fn near_deterministic_limit() {
        let m = BernoulliProduct::new(vec![1.0 - 1e-9, 1e-9]);
        let e = exact_objectives(&m, &REWARDS, 0.1);
        assert!((e.expected_reward - REWARDS[1]).abs() < 1e-8);
        assert!(e.entropy < 1e-7);
    }

    #[test]
    fn baseline_does_not_change_expected_gradient() {
        let m = BernoulliProduct::new(vec![0.8, 0.2]);
        let a = expected_reward_gradient(&m, &REWARDS, 0.0);
        let b = expected_reward_gradient(&m, &REWARDS, 0.37);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        // E[R] = 0.16*0.2 + 0.64*0.5 + 0.04*1.0 + 0.16*0.8; d/dtheta1 by hand
        let d1 = (1.0 - 0.2) * (0.5 - 0.2) + 0.2 * (0.8 - 1.0);
        assert!((a[0] - d1).abs() < 1e-12);
    }

    #[test]
    fn population_quantile_of_table() {
        let m = BernoulliProduct::new(vec![0.8, 0.2]);
        let e = exact_objectives(&m, &REWARDS, 0.1);
        assert_eq!(e.risk_quantile, 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sampled_quantile(&m, &REWARDS, 0.1, 1000, &mut rng), 0.8);
    }
}
