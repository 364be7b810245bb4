//! Genetic-programming inner loop seeded from the policy's batch.
//!
//! Individuals are pre-order traversals; variation works on subtree spans.
//! Every offspring must pass the same hard constraints as sampled
//! sequences, otherwise the variation is redrawn and finally replaced by a
//! copy of its parent.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{subtree_end, TokenId, TokenLibrary, Traversal};
use crate::priors::LogitAdjusters;

/// Variation attempts before an offspring falls back to its parent.
pub const REPAIR_ATTEMPTS: usize = 8;
/// Depth limit of freshly grown subtrees.
pub const GROW_DEPTH: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub generations: usize,
    pub elites: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            generations: 25,
            elites: 25,
            tournament_size: 5,
            crossover_prob: 0.5,
            mutation_prob: 0.5,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.tournament_size == 0 {
            return fail("gp.tournament_size must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return fail("gp.crossover_prob must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return fail("gp.mutation_prob must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    /// Swap one token for another of the same arity.
    Point,
    /// Wrap a subtree in a new operator.
    Insert,
    /// Replace an operator by one of its child subtrees.
    Delete,
    /// Replace a subtree by a freshly grown one.
    Replace,
}

pub const MUTATION_KINDS: [MutationKind; 4] = [
    MutationKind::Point,
    MutationKind::Insert,
    MutationKind::Delete,
    MutationKind::Replace,
];

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub traversal: Traversal,
    pub reward: f64,
}

/// The batch itself, unchanged, as generation zero.
pub fn seed_population(traversals: &[Traversal], rewards: &[f64]) -> Vec<Individual> {
    assert_eq!(traversals.len(), rewards.len());
    traversals
        .iter()
        .zip(rewards)
        .map(|(t, r)| Individual {
            traversal: t.clone(),
            reward: *r,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GpOutcome {
    pub population: Vec<Individual>,
    /// Best distinct individuals of the final population, best first.
    pub elites: Vec<Individual>,
    /// Offspring whose fitness had to be computed.
    pub evaluations: u64,
    pub generations: usize,
}

/// Runs up to `cfg.generations` generations, stopping early rather than
/// exceed `budget` fitness evaluations.
pub fn evolve<R: Rng + ?Sized>(
    mut population: Vec<Individual>,
    cfg: &GpConfig,
    lib: &TokenLibrary,
    adjusters: &LogitAdjusters,
    rng: &mut R,
    budget: u64,
    fitness: &mut dyn FnMut(&[Traversal]) -> Vec<f64>,
) -> GpOutcome {
    let mut evaluations = 0u64;
    let mut generations = 0;
    for _ in 0..cfg.generations {
        if population.is_empty() || evaluations + population.len() as u64 > budget {
            break;
        }
        let (mut offspring, changed) = gp_generation(&population, cfg, lib, adjusters, rng);
        let to_score: Vec<Traversal> = changed.iter().map(|&i| offspring[i].traversal.clone()).collect();
        let scores = fitness(&to_score);
        for (&i, r) in changed.iter().zip(scores) {
            offspring[i].reward = r;
        }
        evaluations += changed.len() as u64;
        population = offspring;
        generations += 1;
    }
    let elites = top_unique(&population, cfg.elites);
    GpOutcome {
        population,
        elites,
        evaluations,
        generations,
    }
}

pub fn top_unique(population: &[Individual], m: usize) -> Vec<Individual> {
    let mut sorted: Vec<&Individual> = population.iter().collect();
    sorted.sort_by(|a, b| b.reward.total_cmp(&a.reward));
    let mut out: Vec<Individual> = Vec::with_capacity(m);
    for ind in sorted {
        if out.len() == m {
            break;
        }
        if !out.iter().any(|o| o.traversal == ind.traversal) {
            out.push(ind.clone());
        }
    }
    out
}

/// One generation: tournament selection, pairwise crossover, mutation.
/// Returns the offspring and the indices whose traversal changed (their
/// rewards are stale).
pub fn gp_generation<R: Rng + ?Sized>(
    population: &[Individual],
    cfg: &GpConfig,
    lib: &TokenLibrary,
    adjusters: &LogitAdjusters,
    rng: &mut R,
) -> (Vec<Individual>, Vec<usize>) {
    let n = population.len();
    let mut off: Vec<Individual> = (0..n)
        .map(|_| tournament(population, cfg.tournament_size, rng).clone())
        .collect();
    let mut changed = vec![false; n];
    for pair in (0..n.saturating_sub(1)).step_by(2) {
        if rng.gen::<f64>() < cfg.crossover_prob {
            let (a, b) = (off[pair].traversal.clone(), off[pair + 1].traversal.clone());
            let (ca, cb) = repaired_crossover(&a, &b, lib, adjusters, rng);
            if ca != a {
                off[pair].traversal = ca;
                changed[pair] = true;
            }
            if cb != b {
                off[pair + 1].traversal = cb;
                changed[pair + 1] = true;
            }
        }
    }
    for (i, ind) in off.iter_mut().enumerate() {
        if rng.gen::<f64>() < cfg.mutation_prob {
            let kind = *MUTATION_KINDS.choose(rng).unwrap();
            let m = repaired_mutation(&ind.traversal, kind, lib, adjusters, rng);
            if m != ind.traversal {
                ind.traversal = m;
                changed[i] = true;
            }
        }
    }
    let changed = (0..n).filter(|&i| changed[i]).collect();
    (off, changed)
}

fn tournament<'p, R: Rng + ?Sized>(pop: &'p [Individual], size: usize, rng: &mut R) -> &'p Individual {
    let mut best = &pop[rng.gen_range(0..pop.len())];
    for _ in 1..size {
        let c = &pop[rng.gen_range(0..pop.len())];
        if c.reward > best.reward {
            best = c;
        }
    }
    best
}

fn admissible(t: &Traversal, lib: &TokenLibrary, adjusters: &LogitAdjusters) -> bool {
    adjusters.admits(t, lib).is_ok()
}

fn repaired_crossover<R: Rng + ?Sized>(
    a: &Traversal,
    b: &Traversal,
    lib: &TokenLibrary,
    adjusters: &LogitAdjusters,
    rng: &mut R,
) -> (Traversal, Traversal) {
    let mut out_a = None;
    let mut out_b = None;
    for _ in 0..REPAIR_ATTEMPTS {
        let (ca, cb) = crossover(a, b, lib, rng);
        if out_a.is_none() && admissible(&ca, lib, adjusters) {
            out_a = Some(ca);
        }
        if out_b.is_none() && admissible(&cb, lib, adjusters) {
            out_b = Some(cb);
        }
        if out_a.is_some() && out_b.is_some() {
            break;
        }
    }
    (out_a.unwrap_or_else(|| a.clone()), out_b.unwrap_or_else(|| b.clone()))
}

fn repaired_mutation<R: Rng + ?Sized>(
    t: &Traversal,
    kind: MutationKind,
    lib: &TokenLibrary,
    adjusters: &LogitAdjusters,
    rng: &mut R,
) -> Traversal {
    for _ in 0..REPAIR_ATTEMPTS {
        if let Some(m) = mutate(t, kind, lib, rng) {
            if admissible(&m, lib, adjusters) {
                return m;
            }
        }
    }
    t.clone()
}

fn splice(ids: &[TokenId], start: usize, end: usize, insert: &[TokenId]) -> Traversal {
    let mut v = Vec::with_capacity(ids.len() - (end - start) + insert.len());
    v.extend_from_slice(&ids[..start]);
    v.extend_from_slice(insert);
    v.extend_from_slice(&ids[end..]);
    Traversal::new(v)
}

/// Swaps one uniformly chosen subtree of `a` with one of `b`.
pub fn crossover<R: Rng + ?Sized>(
    a: &Traversal,
    b: &Traversal,
    lib: &TokenLibrary,
    rng: &mut R,
) -> (Traversal, Traversal) {
    let (ia, ib) = (rng.gen_range(0..a.len()), rng.gen_range(0..b.len()));
    crossover_at(a, ia, b, ib, lib)
}

pub fn crossover_at(
    a: &Traversal,
    ia: usize,
    b: &Traversal,
    ib: usize,
    lib: &TokenLibrary,
) -> (Traversal, Traversal) {
    let ea = subtree_end(a.ids(), ia, lib);
    let eb = subtree_end(b.ids(), ib, lib);
    (
        splice(a.ids(), ia, ea, &b.ids()[ib..eb]),
        splice(b.ids(), ib, eb, &a.ids()[ia..ea]),
    )
}

/// Applies one mutation; `None` when the kind has no valid site.
pub fn mutate<R: Rng + ?Sized>(
    t: &Traversal,
    kind: MutationKind,
    lib: &TokenLibrary,
    rng: &mut R,
) -> Option<Traversal> {
    let ids = t.ids();
    match kind {
        MutationKind::Point => {
            let i = rng.gen_range(0..ids.len());
            let arity = lib.arity(ids[i]);
            let alts: Vec<TokenId> = lib.ids().filter(|&c| c != ids[i] && lib.arity(c) == arity).collect();
            let &new = alts.choose(rng)?;
            let mut v = ids.to_vec();
            v[i] = new;
            Some(Traversal::new(v))
        }
        MutationKind::Insert => {
            let i = rng.gen_range(0..ids.len());
            let end = subtree_end(ids, i, lib);
            let ops: Vec<TokenId> = lib.ids().filter(|&c| lib.arity(c) > 0).collect();
            let &op = ops.choose(rng)?;
            let arity = lib.arity(op);
            let slot = rng.gen_range(0..arity);
            let mut insert = vec![op];
            for k in 0..arity {
                if k == slot {
                    insert.extend_from_slice(&ids[i..end]);
                } else {
                    insert.push(random_terminal(lib, rng)?);
                }
            }
            Some(splice(ids, i, end, &insert))
        }
        MutationKind::Delete => {
            let ops: Vec<usize> = (0..ids.len()).filter(|&i| lib.arity(ids[i]) > 0).collect();
            let &i = ops.choose(rng)?;
            let end = subtree_end(ids, i, lib);
            let mut children = Vec::new();
            let mut c = i + 1;
            while c < end {
                let ce = subtree_end(ids, c, lib);
                children.push((c, ce));
                c = ce;
            }
            let &(cs, ce) = children.choose(rng)?;
            let child = ids[cs..ce].to_vec();
            Some(splice(ids, i, end, &child))
        }
        MutationKind::Replace => {
            let i = rng.gen_range(0..ids.len());
            let end = subtree_end(ids, i, lib);
            let fresh = grow(lib, GROW_DEPTH, rng)?;
            Some(splice(ids, i, end, &fresh))
        }
    }
}

fn random_terminal<R: Rng + ?Sized>(lib: &TokenLibrary, rng: &mut R) -> Option<TokenId> {
    let terms: Vec<TokenId> = lib.ids().filter(|&c| lib.arity(c) == 0).collect();
    terms.choose(rng).copied()
}

/// Random tree where each node below `max_depth` is drawn uniformly from
/// the whole library and nodes at `max_depth` are terminals.
pub fn grow<R: Rng + ?Sized>(lib: &TokenLibrary, max_depth: usize, rng: &mut R) -> Option<Vec<TokenId>> {
    let all: Vec<TokenId> = lib.ids().collect();
    let mut out = Vec::new();
    let mut open = vec![0usize];
    while let Some(depth) = open.pop() {
        let id = if depth >= max_depth {
            random_terminal(lib, rng)?
        } else {
            *all.choose(rng)?
        };
        out.push(id);
        for _ in 0..lib.arity(id) {
            open.push(depth + 1);
        }
    }
    Some(out)
}
