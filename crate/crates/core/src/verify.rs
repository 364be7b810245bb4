//! Independent oracles: finite-difference gradient checks, a tree-scanning
//! constraint checker, and a self-test suite built on both.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::expr::{TokenId, TokenLibrary, Traversal};
use crate::policy::PolicyParams;
use crate::priors::LogitAdjusters;
use crate::train::toy::{exact_objectives, BernoulliProduct};
use crate::train::{
    entropy_terms, pqt_terms, retained_set, rspg_terms, surrogate_gradient, surrogate_value, vpg_terms,
    TopKQueue, WeightedSequence,
};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// Central differences of `f` at `x`.
pub fn finite_difference_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max |a - b| / max(max |a|, max |b|)`; zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Relative error between the analytic gradient of a surrogate objective and
/// its finite-difference estimate.
pub fn check_surrogate_gradient(
    policy: &PolicyParams,
    lib: &TokenLibrary,
    adjusters: &LogitAdjusters,
    terms: &[WeightedSequence],
    h: f64,
) -> Result<f64> {
    let analytic = surrogate_gradient(policy, lib, adjusters, terms)?;
    let mut probe = policy.clone();
    let numeric = finite_difference_gradient(
        |theta| {
            probe.as_mut_slice().copy_from_slice(theta);
            surrogate_value(&probe, lib, adjusters, terms).unwrap_or(f64::NAN)
        },
        policy.as_slice(),
        h,
    );
    Ok(relative_error(&analytic, &numeric))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Incomplete,
    Length(usize),
    /// Operator at this pre-order position has only constant children.
    ConstChildren(usize),
    /// Unary operator at this position directly wraps its inverse.
    InverseChild(usize),
    /// Trigonometric operator at this position has a trigonometric descendant.
    NestedTrig(usize),
}

struct ScanNode {
    pos: usize,
    symbol: String,
    children: Vec<ScanNode>,
}

fn scan(ids: &[TokenId], lib: &TokenLibrary, pos: &mut usize) -> Option<ScanNode> {
    let id = *ids.get(*pos)?;
    let tok = lib.get(id).ok()?;
    let here = *pos;
    *pos += 1;
    let mut children = Vec::new();
    for _ in 0..tok.arity() {
        children.push(scan(ids, lib, pos)?);
    }
    Some(ScanNode {
        pos: here,
        symbol: tok.symbol.clone(),
        children,
    })
}

fn is_trig_symbol(s: &str) -> bool {
    s == "sin" || s == "cos"
}

fn inverse_pair(outer: &str, inner: &str) -> bool {
    matches!(
        (outer, inner),
        ("exp", "log") | ("log", "exp") | ("sqrt", "n2") | ("n2", "sqrt") | ("neg", "neg")
    )
}

fn contains_trig(n: &ScanNode) -> bool {
    n.children.iter().any(|c| is_trig_symbol(&c.symbol) || contains_trig(c))
}

fn check_node(n: &ScanNode, out: &mut Vec<Violation>) {
    if !n.children.is_empty() {
        if n.children.iter().all(|c| c.symbol == "const") {
            out.push(Violation::ConstChildren(n.pos));
        }
        if n.children.len() == 1 && inverse_pair(&n.symbol, &n.children[0].symbol) {
            out.push(Violation::InverseChild(n.pos));
        }
        if is_trig_symbol(&n.symbol) && contains_trig(n) {
            out.push(Violation::NestedTrig(n.pos));
        }
    }
    for c in &n.children {
        check_node(c, out);
    }
}

/// Rebuilds the tree recursively and lists every broken rule of the
/// standard constraint set.
pub fn constraint_violations(t: &Traversal, lib: &TokenLibrary, min_len: usize, max_len: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    if t.len() < min_len || t.len() > max_len {
        out.push(Violation::Length(t.len()));
    }
    let mut pos = 0;
    match scan(t.ids(), lib, &mut pos) {
        Some(root) if pos == t.len() => check_node(&root, &mut out),
        _ => out.push(Violation::Incomplete),
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckOutcome {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Small library used by the gradient checks.
pub fn check_library() -> TokenLibrary {
    TokenLibrary::from_symbols(&["add", "mul", "div", "sin", "cos", "exp", "log", "x1", "x2", "const"])
        .expect("static library")
}

/// Worst relative error of each trainer's surrogate over `cases` random
/// policies, in the order vpg, rspg, pqt, entropy.
pub fn trainer_gradient_errors(cases: usize, seed: u64) -> Result<[f64; 4]> {
    let lib = check_library();
    let adj = LogitAdjusters::from_names(&["length", "no_const_children", "inverse", "trig"], 2, 12, &lib)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 4];
    for _ in 0..cases {
        let hidden = rng.gen_range(2..=6);
        let mut policy = PolicyParams::init(hidden, &lib, rng.gen())?;
        for v in policy.as_mut_slice() {
            *v *= 5.0;
        }
        let n = rng.gen_range(3..=6);
        let batch: Vec<Traversal> = policy
            .sample_many(&lib, &adj, &mut rng, 12, n)?
            .into_iter()
            .map(|s| s.traversal)
            .collect();
        let rewards: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let mut queue = TopKQueue::new(3);
        for (t, r) in batch.iter().zip(&rewards) {
            queue.push(t.clone(), *r);
        }
        let lambda = 0.5;
        let term_sets = [
            vpg_terms(&batch, &rewards, 0.37, lambda),
            rspg_terms(&batch, &rewards, 0.5, lambda),
            pqt_terms(&queue, &batch, lambda),
            entropy_terms(&batch, lambda),
        ];
        for (w, terms) in worst.iter_mut().zip(&term_sets) {
            let e = check_surrogate_gradient(&policy, &lib, &adj, terms, FD_STEP)?;
            *w = w.max(e);
        }
    }
    Ok(worst)
}

/// `max |KL - (-H - E[R] + log Z)|` on the four-outcome model with
/// `theta = (0.8, 0.2)`.
pub fn gibbs_identity_error(rewards: &[f64; 4]) -> f64 {
    let m = BernoulliProduct::new(vec![0.8, 0.2]);
    let e = exact_objectives(&m, rewards, 0.1);
    (e.kl_to_gibbs - (-e.entropy - e.expected_reward + e.log_partition)).abs()
}

/// Samples `n` sequences under the standard constraints and counts
/// traversals with at least one violation.
pub fn sampled_violations(lib: &TokenLibrary, n: usize, seed: u64) -> Result<usize> {
    let (min_len, max_len) = (4, 30);
    let adj = LogitAdjusters::from_names(&["length", "no_const_children", "inverse", "trig"], min_len, max_len, lib)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let policy = PolicyParams::init(16, lib, rng.gen())?;
    let mut bad = 0;
    for _ in 0..n {
        let s = policy.sample_sequence(lib, &adj, &mut rng, max_len)?;
        if !constraint_violations(&s.traversal, lib, min_len, max_len).is_empty() {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Checks the retained-set lower bound on random batches and the queue
/// threshold over random insertions. Returns `(bad batches, bad inserts)`.
pub fn quantile_queue_failures(batches: usize, inserts: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad_batches = 0;
    for _ in 0..batches {
        let n = rng.gen_range(2..=500);
        let eps = rng.gen_range(0.01..0.99);
        let levels = rng.gen_range(1..=20);
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
        let (keep, q) = retained_set(&r, eps);
        let need = (eps * n as f64 - 1e-9).ceil() as usize;
        if keep.len() < need || keep.iter().any(|&i| r[i] < q) {
            bad_batches += 1;
        }
    }
    let mut queue = TopKQueue::new(10);
    let mut last = f64::NEG_INFINITY;
    let mut bad_inserts = 0;
    for _ in 0..inserts {
        let len = rng.gen_range(1..=3);
        let t = Traversal::new((0..len).map(|_| TokenId(rng.gen_range(0..4))).collect());
        let r = rng.gen_range(0..100) as f64 / 100.0;
        let was_present = queue.contains(&t);
        let before = queue.clone();
        queue.push(t, r);
        let th = queue.threshold();
        let unique = {
            let mut ts: Vec<&Traversal> = queue.entries().iter().map(|e| &e.traversal).collect();
            ts.sort();
            ts.windows(2).all(|w| w[0] != w[1])
        };
        if th < last || !unique || (was_present && queue != before) || queue.len() > 10 {
            bad_inserts += 1;
        }
        last = th;
    }
    (bad_batches, bad_inserts)
}

/// Fast checks run by the `selftest` command.
pub fn selftest(seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    match trainer_gradient_errors(20, seed) {
        Ok(errs) => {
            for (name, e) in ["vpg", "rspg", "pqt", "entropy"].iter().zip(errs) {
                out.push(CheckOutcome::new(
                    &format!("gradient/{name}"),
                    e < FD_TOLERANCE,
                    format!("max relative error {e:.2e}"),
                ));
            }
        }
        Err(e) => out.push(CheckOutcome::new("gradient", false, e.to_string())),
    }
    let e = gibbs_identity_error(&[0.2, 0.5, 1.0, 0.8]);
    out.push(CheckOutcome::new("gibbs-identity", e < 1e-12, format!("error {e:.1e}")));
    let lib = TokenLibrary::from_symbols(&[
        "add", "sub", "mul", "div", "sin", "cos", "exp", "log", "sqrt", "n2", "neg", "x1", "x2", "const",
    ])
    .expect("static library");
    match sampled_violations(&lib, 10_000, seed) {
        Ok(v) => out.push(CheckOutcome::new(
            "constraints",
            v == 0,
            format!("{v} of 10000 samples violate a constraint"),
        )),
        Err(e) => out.push(CheckOutcome::new("constraints", false, e.to_string())),
    }
    let (b, q) = quantile_queue_failures(1000, 10_000, seed);
    out.push(CheckOutcome::new(
        "quantile-queue",
        b == 0 && q == 0,
        format!("{b} bad batches, {q} bad insertions"),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scanner_flags_each_rule() {
        let lib = TokenLibrary::from_symbols(&["add", "sin", "cos", "exp", "log", "x1", "const"]).unwrap();
        let v = |s: &str| constraint_violations(&lib.parse_traversal(s).unwrap(), &lib, 1, 30);
        assert!(v("add x1 sin x1").is_empty());
        assert_eq!(v("add const const"), vec![Violation::ConstChildren(0)]);
        assert_eq!(v("exp log x1"), vec![Violation::InverseChild(0)]);
        assert_eq!(v("sin add x1 cos x1"), vec![Violation::NestedTrig(0)]);
        assert_eq!(v("add x1"), vec![Violation::Incomplete]);
        assert_eq!(
            constraint_violations(&lib.parse_traversal("x1").unwrap(), &lib, 4, 30),
            vec![Violation::Length(1)]
        );
    }

    #[test]
    fn fd_of_quadratic() {
        let g = finite_difference_gradient(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, 1.0], 1e-5);
        assert!(relative_error(&g, &[4.0, 3.0]) < 1e-9);
    }

    #[test]
    fn selftest_passes() {
        for c in selftest(1) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
