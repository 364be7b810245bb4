//! Policy-gradient trainers (vanilla, risk-seeking, priority-queue), the
//! outer search loop, and exact objectives on an enumerable toy model.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constopt::{ConstFitter, DEFAULT_CONST_BUDGET, DEFAULT_CONST_STARTS};
use crate::error::{Error, Result};
use crate::expr::{Dataset, ExpressionTree, TokenLibrary, Traversal};
use crate::gp::{self, GpConfig, Individual};
use crate::policy::{PolicyParams, DEFAULT_HIDDEN};
use crate::priors::LogitAdjusters;
use crate::reward::{score, Scored};

pub mod toy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainerKind {
    Vpg,
    Rspg,
    Pqt,
}

impl TrainerKind {
    pub fn name(self) -> &'static str {
        match self {
            TrainerKind::Vpg => "vpg",
            TrainerKind::Rspg => "rspg",
            TrainerKind::Pqt => "pqt",
        }
    }
}

impl std::str::FromStr for TrainerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vpg" => Ok(TrainerKind::Vpg),
            "rspg" => Ok(TrainerKind::Rspg),
            "pqt" => Ok(TrainerKind::Pqt),
            other => Err(Error::Config(format!(
                "unknown trainer `{other}` (expected vpg, rspg or pqt)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Fixed-step gradient ascent.
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub kind: TrainerKind,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    /// Fraction of each batch kept by the risk-seeking trainer.
    pub epsilon: f64,
    pub batch_size: usize,
    pub queue_size: usize,
    pub baseline_decay: f64,
    pub max_evaluations: u64,
    pub optimizer: OptimizerKind,
    pub hidden_size: usize,
    pub const_budget: usize,
    pub const_starts: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            kind: TrainerKind::Rspg,
            learning_rate: 5e-4,
            entropy_coef: 0.005,
            epsilon: 0.05,
            batch_size: 1000,
            queue_size: 10,
            baseline_decay: 0.99,
            max_evaluations: 500_000,
            optimizer: OptimizerKind::Adam,
            hidden_size: DEFAULT_HIDDEN,
            const_budget: DEFAULT_CONST_BUDGET,
            const_starts: DEFAULT_CONST_STARTS,
        }
    }
}

impl TrainerConfig {
    pub fn with_kind(kind: TrainerKind) -> Self {
        TrainerConfig {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail(format!("trainer.epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("trainer.learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return fail(format!("trainer.entropy_coef must be non-negative, got {}", self.entropy_coef));
        }
        if self.batch_size == 0 {
            return fail("trainer.batch_size must be at least 1".into());
        }
        if self.kind == TrainerKind::Rspg && (self.batch_size as f64) * self.epsilon < 1.0 {
            return fail(format!(
                "trainer.batch_size must be at least 1/epsilon = {} for rspg",
                (1.0 / self.epsilon).ceil()
            ));
        }
        if self.queue_size == 0 {
            return fail("trainer.queue_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return fail(format!("trainer.baseline_decay must lie in [0, 1), got {}", self.baseline_decay));
        }
        if self.hidden_size == 0 {
            return fail("trainer.hidden_size must be at least 1".into());
        }
        if self.const_starts == 0 {
            return fail("trainer.const_starts must be at least 1".into());
        }
        Ok(())
    }

    pub fn const_fitter(&self) -> ConstFitter {
        ConstFitter {
            budget: self.const_budget,
            starts: self.const_starts,
        }
    }
}

/// The `ceil((1 - eps) N)`-th smallest reward (1-based, no interpolation).
///
/// At least `ceil(eps N)` rewards are `>=` the result.
pub fn empirical_quantile(rewards: &[f64], epsilon: f64) -> f64 {
    assert!(!rewards.is_empty(), "quantile of an empty batch");
    let mut sorted = rewards.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (((1.0 - epsilon) * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}

/// Indices of samples at or above the quantile, with the quantile itself.
pub fn retained_set(rewards: &[f64], epsilon: f64) -> (Vec<usize>, f64) {
    let q = empirical_quantile(rewards, epsilon);
    let idx = (0..rewards.len()).filter(|&i| rewards[i] >= q).collect();
    (idx, q)
}

/// Per-sample log-probability weights of the risk-seeking estimator:
/// `(R - R_eps) / (eps N)` for retained samples, zero otherwise.
pub fn rspg_weights(rewards: &[f64], epsilon: f64) -> Vec<f64> {
    let q = empirical_quantile(rewards, epsilon);
    let scale = 1.0 / (epsilon * rewards.len() as f64);
    rewards
        .iter()
        .map(|&r| if r >= q { (r - q) * scale } else { 0.0 })
        .collect()
}

/// `(R - b) / N` per sample.
pub fn vpg_weights(rewards: &[f64], baseline: f64) -> Vec<f64> {
    let n = rewards.len() as f64;
    rewards.iter().map(|r| (r - baseline) / n).collect()
}

/// One term of a surrogate objective
/// `sum_i w_lp_i log p(t_i) + w_ent_i H(t_i)`, whose gradient is the
/// trainer's update direction.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSequence {
    pub traversal: Traversal,
    pub w_log_prob: f64,
    pub w_entropy: f64,
}

/// Gradient terms for the risk-seeking trainer: the retained set carries
/// both the quantile-shifted reward weights and the entropy bonus.
pub fn rspg_terms(traversals: &[Traversal], rewards: &[f64], epsilon: f64, entropy_coef: f64) -> Vec<WeightedSequence> {
    let (keep, _) = retained_set(rewards, epsilon);
    let w = rspg_weights(rewards, epsilon);
    let ent = entropy_coef / keep.len() as f64;
    keep.into_iter()
        .map(|i| WeightedSequence {
            traversal: traversals[i].clone(),
            w_log_prob: w[i],
            w_entropy: ent,
        })
        .collect()
}

pub fn vpg_terms(traversals: &[Traversal], rewards: &[f64], baseline: f64, entropy_coef: f64) -> Vec<WeightedSequence> {
    let ent = entropy_coef / traversals.len() as f64;
    vpg_weights(rewards, baseline)
        .into_iter()
        .zip(traversals)
        .map(|(w, t)| WeightedSequence {
            traversal: t.clone(),
            w_log_prob: w,
            w_entropy: ent,
        })
        .collect()
}

/// Mean log-likelihood of the queue plus the entropy bonus over the batch.
pub fn pqt_terms(queue: &TopKQueue, batch: &[Traversal], entropy_coef: f64) -> Vec<WeightedSequence> {
    let mut out = Vec::new();
    if !queue.is_empty() {
        let w = 1.0 / queue.len() as f64;
        out.extend(queue.entries().iter().map(|e| WeightedSequence {
            traversal: e.traversal.clone(),
            w_log_prob: w,
            w_entropy: 0.0,
        }));
    }
    if !batch.is_empty() && entropy_coef > 0.0 {
        let ent = entropy_coef / batch.len() as f64;
        out.extend(batch.iter().map(|t| WeightedSequence {
            traversal: t.clone(),
            w_log_prob: 0.0,
            w_entropy: ent,
        }));
    }
    out
}

/// Entropy-only terms: `lambda / n` on each sequence.
pub fn entropy_terms(batch: &[Traversal], entropy_coef: f64) -> Vec<WeightedSequence> {
    let ent = entropy_coef / batch.len().max(1) as f64;
    batch
        .iter()
        .map(|t| WeightedSequence {
            traversal: t.clone(),
            w_log_prob: 0.0,
            w_entropy: ent,
        })
        .collect()
}

pub fn surrogate_value(
    policy: &PolicyParams,
    lib: &TokenLibrary,
    adjusters: &LogitAdjusters,
    terms: &[WeightedSequence],
) -> Result<f64> {
    let mut total = 0.0;
    for t in terms {
        let (lp, h) = policy.evaluate_sequence(&t.traversal, lib, adjusters)?;
        total += t.w_log_prob * lp + t.w_entropy * h;
    }
    Ok(total)
}

pub fn surrogate_gradient(
    policy: &PolicyParams,
    lib: &TokenLibrary,
    adjusters: &LogitAdjusters,
    terms: &[WeightedSequence],
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; policy.n_params()];
    for t in terms {
        if t.w_log_prob == 0.0 && t.w_entropy == 0.0 {
            continue;
        }
        policy.accumulate_grad(&t.traversal, lib, adjusters, t.w_log_prob, t.w_entropy, &mut grad)?;
    }
    Ok(grad)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub traversal: Traversal,
    pub reward: f64,
}

/// The `K` best distinct traversals seen so far, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct TopKQueue {
    capacity: usize,
    entries: Vec<QueueEntry>,
}

impl TopKQueue {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        TopKQueue {
            capacity,
            entries: Vec::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[QueueEntry] {
        &self.entries
    }

    pub fn contains(&self, t: &Traversal) -> bool {
        self.entries.iter().any(|e| &e.traversal == t)
    }

    /// Reward a newcomer must beat: the K-th best stored reward, or `-inf`
    /// while the queue has free slots. Never decreases.
    pub fn threshold(&self) -> f64 {
        if self.entries.len() < self.capacity {
            f64::NEG_INFINITY
        } else {
            self.entries.last().map_or(f64::NEG_INFINITY, |e| e.reward)
        }
    }

    /// Inserts unless the traversal is already stored or does not beat the
    /// threshold. Returns whether the queue changed.
    pub fn push(&mut self, traversal: Traversal, reward: f64) -> bool {
        if reward.is_nan() || reward <= self.threshold() || self.contains(&traversal) {
            return false;
        }
        let pos = self.entries.partition_point(|e| e.reward >= reward);
        self.entries.insert(pos, QueueEntry { traversal, reward });
        self.entries.truncate(self.capacity);
        true
    }
}

#[derive(Clone, Debug)]
enum OptimizerState {
    Sgd,
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl OptimizerState {
    fn new(kind: OptimizerKind, n: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam => OptimizerState::Adam {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
        }
    }

    /// Ascent step along `grad`.
    fn apply(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            OptimizerState::Sgd => {
                for (p, g) in theta.iter_mut().zip(grad) {
                    *p += lr * g;
                }
            }
            OptimizerState::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*t);
                let c2 = 1.0 - ADAM_BETA2.powi(*t);
                for i in 0..theta.len() {
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
                    theta[i] += lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Highest-reward expression seen during a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestExpression {
    pub traversal: Traversal,
    pub reward: f64,
    pub nmse: f64,
    pub constants: Vec<f64>,
    pub infix: String,
    /// 1-based iteration in which it was first sampled.
    pub iteration: usize,
}

impl BestExpression {
    pub fn tree(&self, lib: &TokenLibrary) -> Result<ExpressionTree> {
        Ok(ExpressionTree::from_traversal(&self.traversal, lib)?.with_constants(self.constants.clone()))
    }
}

/// One row of the per-iteration reward trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub evals: u64,
    pub mean_r: f64,
    pub top_eps_mean_r: f64,
    pub best_r: f64,
    pub invalid_frac: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best: Option<BestExpression>,
    pub trace: Vec<TraceRow>,
    /// Sampled and GP-generated expressions scored, each counted once.
    pub evals_used: u64,
    /// Objective evaluations spent inside constant fitting.
    pub const_evals: u64,
    pub iterations: usize,
    /// Mean over iterations of the batch invalid fraction.
    pub invalid_fraction: f64,
    pub elites_dropped: usize,
}

/// Per-run state of the outer search loop: sample, score, optionally evolve,
/// form the trainer's gradient, apply it, and track the best expression.
pub struct Searcher<'a> {
    cfg: TrainerConfig,
    gp: Option<GpConfig>,
    lib: &'a TokenLibrary,
    data: &'a Dataset,
    adjusters: &'a LogitAdjusters,
    max_len: usize,
    fitter: ConstFitter,
    policy: PolicyParams,
    optimizer: OptimizerState,
    baseline: Option<f64>,
    queue: TopKQueue,
    cache: HashMap<Traversal, Scored>,
    best: Option<BestExpression>,
    seed: u64,
    rng: ChaCha8Rng,
    evals_used: u64,
    const_evals: u64,
    trace: Vec<TraceRow>,
    invalid_sum: f64,
    elites_dropped: usize,
    fit_threshold: f64,
    near_perfect: Vec<Traversal>,
}

impl<'a> Searcher<'a> {
    pub fn new(
        cfg: &TrainerConfig,
        gp: Option<&GpConfig>,
        lib: &'a TokenLibrary,
        data: &'a Dataset,
        adjusters: &'a LogitAdjusters,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if let Some(g) = gp {
            g.validate()?;
        }
        data.check_library(lib)?;
        let max_len = adjusters.hard_length_cap().ok_or_else(|| {
            Error::Config("constraints must include `length` so every sample terminates".into())
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = PolicyParams::init(cfg.hidden_size, lib, rng.gen())?;
        let optimizer = OptimizerState::new(cfg.optimizer, policy.n_params());
        Ok(Searcher {
            cfg: cfg.clone(),
            gp: gp.cloned(),
            lib,
            data,
            adjusters,
            max_len,
            fitter: cfg.const_fitter(),
            policy,
            optimizer,
            baseline: None,
            queue: TopKQueue::new(cfg.queue_size),
            cache: HashMap::new(),
            best: None,
            seed,
            rng,
            evals_used: 0,
            const_evals: 0,
            trace: Vec::new(),
            invalid_sum: 0.0,
            elites_dropped: 0,
            fit_threshold: 0.0,
            near_perfect: Vec::new(),
        })
    }

    /// Records every newly scored expression with training NMSE below
    /// `threshold`; see [`Searcher::near_perfect`].
    pub fn with_fit_threshold(mut self, threshold: f64) -> Self {
        self.fit_threshold = threshold;
        self
    }

    /// Distinct expressions whose training NMSE fell below the fit
    /// threshold, in discovery order.
    pub fn near_perfect(&self) -> &[Traversal] {
        &self.near_perfect
    }

    /// Makes `t` the reported best expression if its reward ties or beats
    /// the current best. Returns whether it did.
    pub fn prefer(&mut self, t: &Traversal) -> bool {
        let Some(s) = self.cache.get(t) else { return false };
        let current = self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.reward);
        if s.reward.value < current {
            return false;
        }
        let iteration = self.best.as_ref().map_or(self.trace.len(), |b| b.iteration);
        self.best = Some(best_of(t, s, self.lib, iteration));
        true
    }

    pub fn policy(&self) -> &PolicyParams {
        &self.policy
    }

    pub fn best(&self) -> Option<&BestExpression> {
        self.best.as_ref()
    }

    pub fn queue(&self) -> &TopKQueue {
        &self.queue
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn evals_used(&self) -> u64 {
        self.evals_used
    }

    pub fn iteration(&self) -> usize {
        self.trace.len()
    }

    /// Whether another full batch fits in the evaluation budget.
    pub fn can_step(&self) -> bool {
        self.evals_used + self.cfg.batch_size as u64 <= self.cfg.max_evaluations
    }

    /// Scores traversals through the per-run cache, updating the best
    /// expression. Uncached expressions are fitted in parallel.
    fn score_all(&mut self, ts: &[Traversal]) -> Vec<f64> {
        let mut fresh: Vec<&Traversal> = Vec::new();
        let mut seen = HashSet::new();
        for t in ts {
            if !self.cache.contains_key(t) && seen.insert(t) {
                fresh.push(t);
            }
        }
        let (lib, data, fitter, seed) = (self.lib, self.data, &self.fitter, self.seed);
        let scored: Vec<Scored> = fresh
            .par_iter()
            .map(|t| score(t, lib, data, fitter, expression_seed(seed, t)))
            .collect();
        for (t, s) in fresh.into_iter().zip(scored) {
            self.const_evals += s.const_evals as u64;
            if s.nmse < self.fit_threshold {
                self.near_perfect.push(t.clone());
            }
            self.cache.insert(t.clone(), s);
        }
        let iteration = self.trace.len() + 1;
        let mut out = Vec::with_capacity(ts.len());
        for t in ts {
            let s = &self.cache[t];
            out.push(s.reward.value);
            if self.best.as_ref().is_none_or(|b| s.reward.value > b.reward) {
                self.best = Some(best_of(t, s, lib, iteration));
            }
        }
        out
    }

    fn is_invalid(&self, t: &Traversal) -> bool {
        self.cache.get(t).is_some_and(|s| s.reward.invalid)
    }

    /// Runs one outer iteration. Returns the new trace row.
    pub fn step(&mut self) -> Result<TraceRow> {
        let n = self.cfg.batch_size;
        let samples = self.policy.sample_many(self.lib, self.adjusters, &mut self.rng, self.max_len, n)?;
        let mut traversals: Vec<Traversal> = samples.into_iter().map(|s| s.traversal).collect();
        let mut rewards = self.score_all(&traversals);
        self.evals_used += n as u64;
        let invalid = traversals.iter().filter(|t| self.is_invalid(t)).count() as f64 / n as f64;
        let mean_r = rewards.iter().sum::<f64>() / n as f64;
        let (keep, _) = retained_set(&rewards, self.cfg.epsilon);
        let top_eps = keep.iter().map(|&i| rewards[i]).sum::<f64>() / keep.len() as f64;

        if let Some(gcfg) = self.gp.clone() {
            if gcfg.generations > 0 {
                let population = gp::seed_population(&traversals, &rewards);
                let remaining = self.cfg.max_evaluations - self.evals_used;
                let mut gp_rng = ChaCha8Rng::seed_from_u64(self.rng.gen());
                let (lib, adjusters) = (self.lib, self.adjusters);
                let outcome = gp::evolve(
                    population,
                    &gcfg,
                    lib,
                    adjusters,
                    &mut gp_rng,
                    remaining,
                    &mut |ts: &[Traversal]| self.score_all(ts),
                );
                self.evals_used += outcome.evaluations;
                for Individual { traversal, reward } in outcome.elites {
                    match self.policy.evaluate_sequence(&traversal, lib, adjusters) {
                        Ok(_) => {
                            traversals.push(traversal);
                            rewards.push(reward);
                        }
                        Err(_) => self.elites_dropped += 1,
                    }
                }
            }
        }

        let terms = match self.cfg.kind {
            TrainerKind::Rspg => rspg_terms(&traversals, &rewards, self.cfg.epsilon, self.cfg.entropy_coef),
            TrainerKind::Vpg => {
                let batch_mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
                let b = *self.baseline.get_or_insert(batch_mean);
                let terms = vpg_terms(&traversals, &rewards, b, self.cfg.entropy_coef);
                let d = self.cfg.baseline_decay;
                self.baseline = Some(d * b + (1.0 - d) * batch_mean);
                terms
            }
            TrainerKind::Pqt => {
                for (t, r) in traversals.iter().zip(&rewards) {
                    if !self.is_invalid(t) {
                        self.queue.push(t.clone(), *r);
                    }
                }
                pqt_terms(&self.queue, &traversals, self.cfg.entropy_coef)
            }
        };
        let grad = surrogate_gradient(&self.policy, self.lib, self.adjusters, &terms)?;
        self.optimizer
            .apply(self.policy.as_mut_slice(), &grad, self.cfg.learning_rate);

        self.invalid_sum += invalid;
        let row = TraceRow {
            iter: self.trace.len() + 1,
            evals: self.evals_used,
            mean_r,
            top_eps_mean_r: top_eps,
            best_r: self.best.as_ref().map_or(0.0, |b| b.reward),
            invalid_frac: invalid,
        };
        self.trace.push(row.clone());
        Ok(row)
    }

    /// Steps until the budget is spent or `stop` returns true.
    pub fn run_until<F: FnMut(&Searcher<'a>) -> bool>(&mut self, mut stop: F) -> Result<()> {
        while self.can_step() {
            self.step()?;
            if stop(self) {
                break;
            }
        }
        Ok(())
    }

    pub fn into_result(self) -> RunResult {
        let iterations = self.trace.len();
        RunResult {
            best: self.best,
            trace: self.trace,
            evals_used: self.evals_used,
            const_evals: self.const_evals,
            iterations,
            invalid_fraction: if iterations == 0 {
                0.0
            } else {
                self.invalid_sum / iterations as f64
            },
            elites_dropped: self.elites_dropped,
        }
    }

    pub fn into_parts(self) -> (PolicyParams, RunResult) {
        let policy = self.policy.clone();
        (policy, self.into_result())
    }
}

fn best_of(t: &Traversal, s: &Scored, lib: &TokenLibrary, iteration: usize) -> BestExpression {
    let infix = ExpressionTree::from_traversal(t, lib)
        .map(|tree| tree.with_constants(s.constants.clone()).infix())
        .unwrap_or_default();
    BestExpression {
        traversal: t.clone(),
        reward: s.reward.value,
        nmse: s.nmse,
        constants: s.constants.clone(),
        infix,
        iteration,
    }
}

/// Runs the full search loop until the evaluation budget is spent.
pub fn train_loop(
    cfg: &TrainerConfig,
    gp: Option<&GpConfig>,
    lib: &TokenLibrary,
    data: &Dataset,
    adjusters: &LogitAdjusters,
    seed: u64,
) -> Result<RunResult> {
    let mut s = Searcher::new(cfg, gp, lib, data, adjusters, seed)?;
    s.run_until(|_| false)?;
    Ok(s.into_result())
}

/// Seed for the random restart of one expression's constant fit.
pub fn expression_seed(run_seed: u64, t: &Traversal) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ run_seed;
    for id in t.ids() {
        h ^= id.0 as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(h)
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
