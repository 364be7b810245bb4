//! Symbolic equivalence of expression trees.
//!
//! The first stage rewrites both trees into a sum of monomials over variables
//! and unary "kernel" atoms (`sin(P)`, `cos(P)`, `exp(P)`, `log(P)`,
//! `sqrt(P)`, `1/P`), with constant folding, flattening of `+`/`*`, integer
//! exponents and collection of like terms. If the difference normalizes to
//! zero the trees are equivalent. Otherwise the result is inconclusive and a
//! numeric probe on quasi-random points decides; matches from that stage are
//! reported as [`Equivalence::Numeric`] so callers can keep them apart.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::eval::{evaluate_perturbed, Evaluation};
use super::library::{BinaryOp, Kind, UnaryOp};
use super::tree::{ExpressionTree, Node};

/// Coefficient tolerance used by constant folding.
pub const FOLD_TOLERANCE: f64 = 1e-9;
/// Probe points used by the numeric fallback.
pub const PROBE_POINTS: usize = 64;
/// Maximum absolute difference accepted by the numeric fallback.
pub const PROBE_TOLERANCE: f64 = 1e-10;
/// Relative shift applied to a subtree when testing whether it matters.
pub const INFLUENCE_SHIFT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equivalence {
    /// Difference normalizes to zero.
    Canonical,
    /// Normal forms differ but the trees agree on every probe point.
    Numeric,
    NotEquivalent,
}

impl Equivalence {
    pub fn is_equivalent(self) -> bool {
        !matches!(self, Equivalence::NotEquivalent)
    }
}

/// Two-stage equivalence check. `domain` gives a `(low, high)` sampling range
/// per input variable for the numeric fallback.
pub fn symbolically_equivalent(
    candidate: &ExpressionTree,
    truth: &ExpressionTree,
    domain: &[(f64, f64)],
) -> Equivalence {
    if canonically_equal(candidate, truth) {
        return Equivalence::Canonical;
    }
    if numerically_equal(candidate, truth, domain) {
        Equivalence::Numeric
    } else {
        Equivalence::NotEquivalent
    }
}

/// Algebraic stage alone; `false` means "not shown equal", not "different".
pub fn canonically_equal(a: &ExpressionTree, b: &ExpressionTree) -> bool {
    match (canonical_form(a), canonical_form(b)) {
        (Some(pa), Some(pb)) => pa.sub(&pb).is_some_and(|d| d.is_zero()),
        _ => false,
    }
}

pub fn numerically_equal(a: &ExpressionTree, b: &ExpressionTree, domain: &[(f64, f64)]) -> bool {
    let columns = halton_points(domain, PROBE_POINTS);
    match (a.evaluate(&columns), b.evaluate(&columns)) {
        (Evaluation::Valid(va), Evaluation::Valid(vb)) => {
            va.iter().zip(&vb).all(|(x, y)| (x - y).abs() < PROBE_TOLERANCE)
                && !has_inert_subtree(a, &columns)
                && !has_inert_subtree(b, &columns)
        }
        _ => false,
    }
}

/// True when shifting some subtree's value leaves the output unchanged to
/// within the probe tolerance at every point. Such a tree agrees with
/// others only through overflow, underflow or saturation, e.g.
/// `cos(exp(-exp(10 x)))`, so a numeric match says nothing.
pub fn has_inert_subtree(t: &ExpressionTree, columns: &[Vec<f64>]) -> bool {
    let kinds = t.kinds();
    let Evaluation::Valid(base) = evaluate_perturbed(&kinds, &t.constants, columns, None) else {
        return false;
    };
    (0..kinds.len()).any(|node| {
        match evaluate_perturbed(&kinds, &t.constants, columns, Some((node, INFLUENCE_SHIFT))) {
            Evaluation::Valid(v) => v.iter().zip(&base).all(|(a, b)| (a - b).abs() < PROBE_TOLERANCE),
            Evaluation::Invalid => false,
        }
    })
}

/// Column-major Halton sequence scaled into `domain`, skipping index 0.
pub fn halton_points(domain: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    domain
        .iter()
        .enumerate()
        .map(|(j, &(lo, hi))| {
            let base = PRIMES[j % PRIMES.len()];
            (1..=n as u64)
                .map(|i| lo + (hi - lo) * radical_inverse(i, base))
                .collect()
        })
        .collect()
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Snaps near-rational values so that float noise does not split like terms.
fn snap(c: f64) -> f64 {
    if c.abs() <= FOLD_TOLERANCE {
        return 0.0;
    }
    let tol = FOLD_TOLERANCE * c.abs().max(1.0);
    for d in [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 9.0, 10.0, 12.0, 16.0, 24.0, 32.0, 64.0] {
        let r = (c * d).round() / d;
        if (c - r).abs() <= tol {
            return r;
        }
    }
    c
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Kernel {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Recip,
}

#[derive(Clone, Debug)]
enum Atom {
    Var(usize),
    Func(Kernel, Poly),
}

impl Atom {
    fn cmp_key(&self, other: &Atom) -> Ordering {
        match (self, other) {
            (Atom::Var(a), Atom::Var(b)) => a.cmp(b),
            (Atom::Var(_), Atom::Func(..)) => Ordering::Less,
            (Atom::Func(..), Atom::Var(_)) => Ordering::Greater,
            (Atom::Func(ka, pa), Atom::Func(kb, pb)) => ka.cmp(kb).then_with(|| pa.cmp(pb)),
        }
    }
}

impl PartialEq for Atom {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_key(other) == Ordering::Equal
    }
}
impl Eq for Atom {}
impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_key(other)
    }
}

/// Product of atoms with nonzero integer exponents, sorted by atom.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
struct Monomial(Vec<(Atom, i32)>);

/// Sum of `coefficient * monomial`, sorted, no zero coefficients.
#[derive(Clone, Debug, Default)]
struct Poly(Vec<(Monomial, f64)>);

impl PartialEq for Poly {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Poly {}
impl PartialOrd for Poly {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Poly {
    fn cmp(&self, other: &Self) -> Ordering {
        for ((ma, ca), (mb, cb)) in self.0.iter().zip(&other.0) {
            let o = ma.cmp(mb).then_with(|| ca.total_cmp(cb));
            if o != Ordering::Equal {
                return o;
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

type Canon = Option<Poly>;

impl Poly {
    fn constant(c: f64) -> Canon {
        if !c.is_finite() {
            return None;
        }
        let c = snap(c);
        if c == 0.0 {
            Some(Poly(Vec::new()))
        } else {
            Some(Poly(vec![(Monomial::default(), c)]))
        }
    }

    fn atom(a: Atom) -> Poly {
        Poly(vec![(Monomial(vec![(a, 1)]), 1.0)])
    }

    fn from_map(map: BTreeMap<Monomial, f64>) -> Poly {
        Poly(
            map.into_iter()
                .map(|(m, c)| (m, snap(c)))
                .filter(|(_, c)| *c != 0.0)
                .collect(),
        )
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn as_constant(&self) -> Option<f64> {
        match self.0.as_slice() {
            [] => Some(0.0),
            [(m, c)] if m.0.is_empty() => Some(*c),
            _ => None,
        }
    }

    fn add(&self, other: &Poly) -> Canon {
        let mut map: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (m, c) in self.0.iter().chain(&other.0) {
            *map.entry(m.clone()).or_insert(0.0) += c;
        }
        if map.values().any(|c| !c.is_finite()) {
            return None;
        }
        Some(Poly::from_map(map))
    }

    fn scale(&self, k: f64) -> Canon {
        if !k.is_finite() {
            return None;
        }
        let mut map = BTreeMap::new();
        for (m, c) in &self.0 {
            map.insert(m.clone(), c * k);
        }
        Some(Poly::from_map(map))
    }

    fn sub(&self, other: &Poly) -> Canon {
        self.add(&other.scale(-1.0)?)
    }

    fn mul(&self, other: &Poly) -> Canon {
        let mut acc = Poly::default();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &other.0 {
                let term = monomial_product(ma, mb)?.scale(ca * cb)?;
                acc = acc.add(&term)?;
            }
        }
        Some(acc)
    }

    fn powi(&self, n: i32) -> Canon {
        if n < 0 {
            return Poly::constant(1.0)?.div(&self.powi(-n)?);
        }
        let mut acc = Poly::constant(1.0)?;
        for _ in 0..n {
            acc = acc.mul(self)?;
        }
        Some(acc)
    }

    fn div(&self, den: &Poly) -> Canon {
        if den.is_zero() {
            return None;
        }
        if let [(m, c)] = den.0.as_slice() {
            let inv: Vec<(Atom, i32)> = m.0.iter().map(|(a, e)| (a.clone(), -e)).collect();
            let inv = normalize_monomial(inv)?;
            return self.mul(&inv)?.scale(1.0 / c);
        }
        // Exact multiple of the denominator.
        if self.0.len() == den.0.len() && !self.is_zero() {
            let k = self.0[0].1 / den.0[0].1;
            if let Some(scaled) = den.scale(k) {
                if scaled == *self {
                    return Poly::constant(k);
                }
            }
        }
        // Pull the leading coefficient out so 1/(2P) and 1/P share an atom.
        let lead = den.0[0].1;
        let unit = den.scale(1.0 / lead)?;
        self.mul(&Poly::atom(Atom::Func(Kernel::Recip, unit)))?
            .scale(1.0 / lead)
    }
}

fn monomial_product(a: &Monomial, b: &Monomial) -> Canon {
    let mut merged = a.0.clone();
    merged.extend(b.0.iter().cloned());
    normalize_monomial(merged)
}

/// Combines exponents, merges exponentials, and unfolds integer powers of
/// `sqrt` and negative powers of `1/P` back into polynomials.
fn normalize_monomial(factors: Vec<(Atom, i32)>) -> Canon {
    let mut exps: BTreeMap<Atom, i32> = BTreeMap::new();
    let mut exp_arg = Poly::default();
    for (a, e) in factors {
        if let Atom::Func(Kernel::Exp, p) = &a {
            exp_arg = exp_arg.add(&p.scale(e as f64)?)?;
            continue;
        }
        *exps.entry(a).or_insert(0) += e;
    }
    let mut scalar = 1.0;
    let mut extra: Vec<Poly> = Vec::new();
    let mut kept: Vec<(Atom, i32)> = Vec::new();
    for (a, e) in exps {
        if e == 0 {
            continue;
        }
        match a {
            Atom::Func(Kernel::Recip, p) if e < 0 => extra.push(p.powi(-e)?),
            Atom::Func(Kernel::Sqrt, p) if e >= 2 => {
                extra.push(p.powi(e / 2)?);
                if e % 2 == 1 {
                    kept.push((Atom::Func(Kernel::Sqrt, p), 1));
                }
            }
            a => kept.push((a, e)),
        }
    }
    if !exp_arg.is_zero() {
        let (c, rest) = split_constant(&exp_arg);
        scalar *= c.exp();
        if !rest.is_zero() {
            kept.push((Atom::Func(Kernel::Exp, rest), 1));
        }
    }
    kept.sort_by(|x, y| x.0.cmp(&y.0));
    let mut out = Poly(vec![(Monomial(kept), 1.0)]).scale(scalar)?;
    for p in extra {
        out = out.mul(&p)?;
    }
    Some(out)
}

fn split_constant(p: &Poly) -> (f64, Poly) {
    let mut c = 0.0;
    let mut rest = Vec::new();
    for (m, k) in &p.0 {
        if m.0.is_empty() {
            c += k;
        } else {
            rest.push((m.clone(), *k));
        }
    }
    (c, Poly(rest))
}

fn kernel(k: Kernel, arg: Poly) -> Canon {
    if let Some(c) = arg.as_constant() {
        let v = match k {
            Kernel::Sin => c.sin(),
            Kernel::Cos => c.cos(),
            Kernel::Exp => c.exp(),
            Kernel::Log => c.ln(),
            Kernel::Sqrt => c.sqrt(),
            Kernel::Recip => 1.0 / c,
        };
        return Poly::constant(v);
    }
    match k {
        Kernel::Exp => normalize_monomial(vec![(Atom::Func(Kernel::Exp, arg), 1)]),
        Kernel::Log => {
            // log(exp(R)) = R for real R.
            if let [(m, c)] = arg.0.as_slice() {
                if *c == 1.0 {
                    if let [(Atom::Func(Kernel::Exp, r), 1)] = m.0.as_slice() {
                        return Some(r.clone());
                    }
                }
            }
            Some(Poly::atom(Atom::Func(Kernel::Log, arg)))
        }
        Kernel::Recip => Poly::constant(1.0)?.div(&arg),
        _ => Some(Poly::atom(Atom::Func(k, arg))),
    }
}

fn canonical_form(tree: &ExpressionTree) -> Canon {
    let mut next_const = 0;
    canon_node(&tree.root, &tree.constants, &mut next_const)
}

fn canon_node(node: &Node, constants: &[f64], next_const: &mut usize) -> Canon {
    match node.kind {
        Kind::Variable(i) => Some(Poly::atom(Atom::Var(i))),
        Kind::Literal(v) => Poly::constant(v),
        Kind::Const => {
            let v = *constants.get(*next_const)?;
            *next_const += 1;
            Poly::constant(v)
        }
        Kind::Unary(op) => {
            let a = canon_node(&node.children[0], constants, next_const)?;
            match op {
                UnaryOp::Sin => kernel(Kernel::Sin, a),
                UnaryOp::Cos => kernel(Kernel::Cos, a),
                UnaryOp::Exp => kernel(Kernel::Exp, a),
                UnaryOp::Log => kernel(Kernel::Log, a),
                UnaryOp::Sqrt => kernel(Kernel::Sqrt, a),
                UnaryOp::Square => a.mul(&a),
                UnaryOp::Neg => a.scale(-1.0),
            }
        }
        Kind::Binary(op) => {
            let a = canon_node(&node.children[0], constants, next_const)?;
            let b = canon_node(&node.children[1], constants, next_const)?;
            match op {
                BinaryOp::Add => a.add(&b),
                BinaryOp::Sub => a.sub(&b),
                BinaryOp::Mul => a.mul(&b),
                BinaryOp::Div => a.div(&b),
                BinaryOp::Pow => match b.as_constant() {
                    Some(n) if n == n.trunc() && n.abs() <= 16.0 => a.powi(n as i32),
                    _ => {
                        let log_a = kernel(Kernel::Log, a)?;
                        kernel(Kernel::Exp, b.mul(&log_a)?)
                    }
                },
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::TokenLibrary;

    fn lib() -> TokenLibrary {
        TokenLibrary::from_symbols(&[
            "add", "sub", "mul", "div", "pow", "sin", "cos", "exp", "log", "sqrt", "x1", "x2",
            "1", "2", "0.5", "const",
        ])
        .unwrap()
    }

    fn tree(s: &str) -> ExpressionTree {
        let lib = lib();
        ExpressionTree::from_traversal(&lib.parse_traversal(s).unwrap(), &lib).unwrap()
    }

    const D1: [(f64, f64); 1] = [(-1.0, 1.0)];
    const D2: [(f64, f64); 2] = [(0.1, 2.0), (0.1, 2.0)];

    #[test]
    fn commutativity_and_collection() {
        assert_eq!(
            symbolically_equivalent(&tree("add x1 x1"), &tree("mul x1 2"), &D1),
            Equivalence::Canonical
        );
    }

    #[test]
    fn missing_term_is_not_equivalent() {
        assert_eq!(
            symbolically_equivalent(
                &tree("add add mul x1 mul x1 x1 mul x1 x1 x1"),
                &tree("add mul x1 mul x1 x1 mul x1 x1"),
                &D1
            ),
            Equivalence::NotEquivalent
        );
    }

    #[test]
    fn nguyen5_reordered() {
        let truth = tree("sub mul sin mul x1 x1 cos x1 1");
        let cand = tree("sub mul cos x1 sin mul x1 x1 div x1 x1");
        assert_eq!(
            symbolically_equivalent(&cand, &truth, &D1),
            Equivalence::Canonical
        );
    }

    #[test]
    fn power_via_exp_log() {
        let truth = tree("pow x1 x2");
        let cand = tree("exp mul x2 log x1");
        assert_eq!(
            symbolically_equivalent(&cand, &truth, &D2),
            Equivalence::Canonical
        );
    }

    #[test]
    fn rational_division() {
        // (x^2 + x) / x == x + 1
        let a = tree("div add mul x1 x1 x1 x1");
        let b = tree("add x1 1");
        assert!(canonically_equal(&a, &b));
        // 2 sin(x) cos(y) written with halves
        let a = tree("div sin x1 div 0.5 cos x2");
        let b = tree("mul 2 mul sin x1 cos x2");
        assert!(canonically_equal(&a, &b));
    }

    #[test]
    fn fitted_constants_use_tolerance() {
        let a = tree("mul const x1").with_constants(vec![2.0 + 1e-12]);
        let b = tree("add x1 x1");
        assert!(canonically_equal(&a, &b));
        let a = tree("mul const x1").with_constants(vec![2.001]);
        assert_eq!(
            symbolically_equivalent(&a, &b, &D1),
            Equivalence::NotEquivalent
        );
    }

    #[test]
    fn numeric_fallback_is_labelled() {
        // log(a) + log(b) = log(ab) is outside the normal form.
        let a = tree("add log x1 log x2");
        let b = tree("log mul x1 x2");
        assert!(!canonically_equal(&a, &b));
        assert_eq!(symbolically_equivalent(&a, &b, &D2), Equivalence::Numeric);
    }

    #[test]
    fn saturated_near_identity_is_rejected() {
        // cos(exp(x - exp(exp(exp(x) + 2)))) underflows to cos(0) = 1
        let cand = tree("add x1 sub cos exp sub x1 exp exp add exp x1 2 1");
        let truth = tree("x1");
        let cols = halton_points(&D1, PROBE_POINTS);
        let diff: f64 = match (cand.evaluate(&cols), truth.evaluate(&cols)) {
            (Evaluation::Valid(a), Evaluation::Valid(b)) => {
                a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
            }
            _ => panic!("both evaluate"),
        };
        assert!(diff < PROBE_TOLERANCE);
        assert!(has_inert_subtree(&cand, &cols));
        assert!(!has_inert_subtree(&truth, &cols));
        assert_eq!(
            symbolically_equivalent(&cand, &truth, &D1),
            Equivalence::NotEquivalent
        );
    }

    #[test]
    fn invalid_everywhere_is_not_equivalent() {
        let a = tree("log sub x1 add x1 1");
        assert_eq!(
            symbolically_equivalent(&a, &a.clone(), &D1),
            Equivalence::NotEquivalent
        );
    }

    #[test]
    fn sqrt_square_unfolds() {
        let a = tree("mul sqrt x1 sqrt x1");
        let b = tree("x1");
        assert!(canonically_equal(&a, &b));
    }

    #[test]
    fn halton_is_in_domain() {
        let pts = halton_points(&[(0.0, 4.0), (-1.0, 1.0)], 64);
        assert_eq!(pts.len(), 2);
        assert!(pts[0].iter().all(|v| (0.0..4.0).contains(v)));
        assert!(pts[1].iter().all(|v| (-1.0..1.0).contains(v)));
    }
}
