//! Logit adjustments applied at every sampling step.
//!
//! Hard constraints add `-inf` to forbidden tokens and `0` elsewhere; priors
//! add finite biases. The composed adjustment is the element-wise sum, and a
//! step where every token ends up at `-inf` is reported as an error rather
//! than silently renormalized.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Kind, PrefixState, TokenId, TokenLibrary, Traversal};

pub const DEFAULT_MIN_LEN: usize = 4;
pub const DEFAULT_MAX_LEN: usize = 30;

/// Names accepted by [`LogitAdjusters::from_names`].
pub const CONSTRAINT_NAMES: [&str; 5] = ["length", "no_const_children", "inverse", "trig", "arity_prior"];

pub trait LogitAdjuster: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;

    /// Hard constraints only ever emit `0` or `-inf`.
    fn is_hard(&self) -> bool;

    /// Adds this adjuster's vector into `out` (length = library size).
    fn adjust(&self, state: &PrefixState, lib: &TokenLibrary, out: &mut [f64]);

    /// Upper bound this adjuster places on sequence length, if any.
    fn max_len(&self) -> Option<usize> {
        None
    }

    fn adjustment(&self, state: &PrefixState, lib: &TokenLibrary) -> Vec<f64> {
        let mut v = vec![0.0; lib.len()];
        self.adjust(state, lib, &mut v);
        v
    }
}

/// Bounds the final length to `[min_len, max_len]`.
///
/// Budget is reserved for every dangling slot, so a token is allowed only if
/// the expression can still be closed with terminals within `max_len`.
#[derive(Clone, Debug)]
pub struct LengthMask {
    pub min_len: usize,
    pub max_len: usize,
}

impl LogitAdjuster for LengthMask {
    fn name(&self) -> &str {
        "length"
    }

    fn is_hard(&self) -> bool {
        true
    }

    fn max_len(&self) -> Option<usize> {
        Some(self.max_len)
    }

    fn adjust(&self, state: &PrefixState, lib: &TokenLibrary, out: &mut [f64]) {
        let len = state.len();
        let dangling = state.dangling();
        for (i, v) in out.iter_mut().enumerate() {
            let arity = lib.arity(TokenId(i as u16));
            let after_dangling = dangling + arity - 1;
            let shortest_final = len + 1 + after_dangling;
            if shortest_final > self.max_len || (after_dangling == 0 && len + 1 < self.min_len) {
                *v = f64::NEG_INFINITY;
            }
        }
    }
}

/// Children of an operator must not all be constant placeholders.
#[derive(Clone, Debug, Default)]
pub struct NoAllConstChildren;

impl LogitAdjuster for NoAllConstChildren {
    fn name(&self) -> &str {
        "no_const_children"
    }

    fn is_hard(&self) -> bool {
        true
    }

    fn adjust(&self, state: &PrefixState, lib: &TokenLibrary, out: &mut [f64]) {
        let Some(parent) = state.parent() else { return };
        let forbid = match lib.arity(parent) {
            1 => true,
            2 => state.sibling().is_some_and(|s| lib.is_const(s)),
            _ => false,
        };
        if forbid {
            for t in lib.tokens() {
                if t.kind == Kind::Const {
                    out[t.id.index()] = f64::NEG_INFINITY;
                }
            }
        }
    }
}

/// The direct child of a unary operator must not be its inverse
/// (`log`/`exp`, `sqrt`/`n2`, `neg`/`neg`).
#[derive(Clone, Debug)]
pub struct NoInverseUnary {
    inverse: Vec<Option<TokenId>>,
}

impl NoInverseUnary {
    pub fn new(lib: &TokenLibrary) -> Self {
        let inverse = lib
            .tokens()
            .iter()
            .map(|t| match t.kind {
                Kind::Unary(op) => op.inverse().and_then(|inv| lib.id_of_kind(Kind::Unary(inv))),
                _ => None,
            })
            .collect();
        NoInverseUnary { inverse }
    }
}

impl LogitAdjuster for NoInverseUnary {
    fn name(&self) -> &str {
        "inverse"
    }

    fn is_hard(&self) -> bool {
        true
    }

    fn adjust(&self, state: &PrefixState, _lib: &TokenLibrary, out: &mut [f64]) {
        if let Some(inv) = state.parent().and_then(|p| self.inverse[p.index()]) {
            out[inv.index()] = f64::NEG_INFINITY;
        }
    }
}

/// No trigonometric operator anywhere below another one.
#[derive(Clone, Debug, Default)]
pub struct NoNestedTrig;

impl LogitAdjuster for NoNestedTrig {
    fn name(&self) -> &str {
        "trig"
    }

    fn is_hard(&self) -> bool {
        true
    }

    fn adjust(&self, state: &PrefixState, lib: &TokenLibrary, out: &mut [f64]) {
        if state.ancestors().iter().any(|a| lib.is_trig(*a)) {
            for t in lib.tokens() {
                if lib.is_trig(t.id) {
                    out[t.id.index()] = f64::NEG_INFINITY;
                }
            }
        }
    }
}

/// Soft prior equalizing the total probability of each arity class under
/// otherwise uniform logits.
#[derive(Clone, Debug)]
pub struct ArityBalancePrior {
    bias: Vec<f64>,
}

impl ArityBalancePrior {
    pub fn new(lib: &TokenLibrary) -> Self {
        let mut counts = [0usize; 3];
        for t in lib.tokens() {
            counts[t.arity()] += 1;
        }
        let present: Vec<f64> = counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| (c as f64).ln())
            .collect();
        let offset = present.iter().sum::<f64>() / present.len() as f64;
        let bias = lib
            .tokens()
            .iter()
            .map(|t| offset - (counts[t.arity()] as f64).ln())
            .collect();
        ArityBalancePrior { bias }
    }
}

impl LogitAdjuster for ArityBalancePrior {
    fn name(&self) -> &str {
        "arity_prior"
    }

    fn is_hard(&self) -> bool {
        false
    }

    fn adjust(&self, _state: &PrefixState, _lib: &TokenLibrary, out: &mut [f64]) {
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o += b;
        }
    }
}

/// Masks a fixed set of tokens at every step.
#[derive(Clone, Debug)]
pub struct TokenMask {
    pub masked: Vec<TokenId>,
}

impl LogitAdjuster for TokenMask {
    fn name(&self) -> &str {
        "mask"
    }

    fn is_hard(&self) -> bool {
        true
    }

    fn adjust(&self, _state: &PrefixState, _lib: &TokenLibrary, out: &mut [f64]) {
        for id in &self.masked {
            out[id.index()] = f64::NEG_INFINITY;
        }
    }
}

/// Allows only the next token of a fixed traversal.
#[derive(Clone, Debug)]
pub struct ForceSequence {
    pub target: Traversal,
}

impl LogitAdjuster for ForceSequence {
    fn name(&self) -> &str {
        "force"
    }

    fn is_hard(&self) -> bool {
        true
    }

    fn adjust(&self, state: &PrefixState, _lib: &TokenLibrary, out: &mut [f64]) {
        let allowed = self.target.ids().get(state.len()).copied();
        for (i, v) in out.iter_mut().enumerate() {
            if Some(TokenId(i as u16)) != allowed {
                *v = f64::NEG_INFINITY;
            }
        }
    }
}

/// Ordered collection of adjusters composed by element-wise sum.
#[derive(Clone, Debug, Default)]
pub struct LogitAdjusters {
    items: Vec<Arc<dyn LogitAdjuster>>,
}

impl LogitAdjusters {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds adjusters from configuration names (see [`CONSTRAINT_NAMES`]).
    pub fn from_names<S: AsRef<str>>(
        names: &[S],
        min_len: usize,
        max_len: usize,
        lib: &TokenLibrary,
    ) -> Result<Self> {
        let mut out = Self::new();
        for name in names {
            match name.as_ref() {
                "length" => out.push(LengthMask { min_len, max_len }),
                "no_const_children" => out.push(NoAllConstChildren),
                "inverse" => out.push(NoInverseUnary::new(lib)),
                "trig" => out.push(NoNestedTrig),
                "arity_prior" => out.push(ArityBalancePrior::new(lib)),
                other => {
                    return Err(Error::Config(format!(
                        "unknown constraint `{other}` (expected one of {})",
                        CONSTRAINT_NAMES.join(", ")
                    )))
                }
            }
        }
        Ok(out)
    }

    /// The four in-situ constraints with the default length bounds.
    pub fn standard(lib: &TokenLibrary) -> Self {
        Self::from_names(
            &["length", "no_const_children", "inverse", "trig"],
            DEFAULT_MIN_LEN,
            DEFAULT_MAX_LEN,
            lib,
        )
        .expect("standard constraint names are valid")
    }

    pub fn push<A: LogitAdjuster + 'static>(&mut self, a: A) {
        self.items.push(Arc::new(a));
    }

    pub fn with<A: LogitAdjuster + 'static>(mut self, a: A) -> Self {
        self.push(a);
        self
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Arc<dyn LogitAdjuster>> {
        self.items.iter()
    }

    /// Overwrites `out` with the summed adjustment for the next slot.
    pub fn compose_into(
        &self,
        state: &PrefixState,
        lib: &TokenLibrary,
        out: &mut [f64],
    ) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        for a in &self.items {
            a.adjust(state, lib, out);
        }
        if out.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(Error::Unsatisfiable { step: state.len() });
        }
        Ok(())
    }

    pub fn compose(&self, state: &PrefixState, lib: &TokenLibrary) -> Result<Vec<f64>> {
        let mut out = vec![0.0; lib.len()];
        self.compose_into(state, lib, &mut out)?;
        Ok(out)
    }

    /// Replays a traversal through the adjusters; `Ok` when every token is
    /// allowed at its step and the sequence is complete.
    pub fn admits(&self, t: &Traversal, lib: &TokenLibrary) -> Result<()> {
        let mut state = PrefixState::new();
        let mut buf = vec![0.0; lib.len()];
        for (step, id) in t.ids().iter().enumerate() {
            self.compose_into(&state, lib, &mut buf)?;
            if buf[id.index()] == f64::NEG_INFINITY {
                return Err(Error::Unreachable { step, token: *id });
            }
            state.push(*id, lib)?;
        }
        if !state.is_complete() {
            return Err(Error::Incomplete);
        }
        Ok(())
    }

    pub fn hard_length_cap(&self) -> Option<usize> {
        self.items.iter().filter_map(|a| a.max_len()).min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lib() -> TokenLibrary {
        TokenLibrary::from_symbols(&[
            "add", "sub", "mul", "div", "sin", "cos", "exp", "log", "x1", "const",
        ])
        .unwrap()
    }

    fn state_after(lib: &TokenLibrary, s: &str) -> PrefixState {
        let mut st = PrefixState::new();
        for id in lib.parse_traversal(s).unwrap().ids() {
            st.push(*id, lib).unwrap();
        }
        st
    }

    fn masked(lib: &TokenLibrary, v: &[f64]) -> Vec<String> {
        lib.tokens()
            .iter()
            .filter(|t| v[t.id.index()] == f64::NEG_INFINITY)
            .map(|t| t.symbol.clone())
            .collect()
    }

    #[test]
    fn length_mask_forbids_short_completion() {
        let lib = lib();
        let m = LengthMask { min_len: 4, max_len: 30 };
        let v = m.adjustment(&PrefixState::new(), &lib);
        assert_eq!(masked(&lib, &v), vec!["x1", "const"]);
    }

    #[test]
    fn length_mask_at_cap_allows_only_terminals() {
        let lib = lib();
        let m = LengthMask { min_len: 4, max_len: 30 };
        let mut st = PrefixState::new();
        // 28 unary tokens then one more keeps a single dangling slot at length 29.
        let sin = lib.id("exp").unwrap();
        for _ in 0..29 {
            st.push(sin, &lib).unwrap();
        }
        assert_eq!(st.len(), 29);
        assert_eq!(st.dangling(), 1);
        let v = m.adjustment(&st, &lib);
        for t in lib.tokens() {
            assert_eq!(v[t.id.index()] == 0.0, t.arity() == 0, "{}", t.symbol);
        }
    }

    #[test]
    fn const_children_rule() {
        let lib = lib();
        let v = NoAllConstChildren.adjustment(&state_after(&lib, "sin"), &lib);
        assert_eq!(masked(&lib, &v), vec!["const"]);
        let v = NoAllConstChildren.adjustment(&state_after(&lib, "add const"), &lib);
        assert_eq!(masked(&lib, &v), vec!["const"]);
        let v = NoAllConstChildren.adjustment(&state_after(&lib, "add x1"), &lib);
        assert!(masked(&lib, &v).is_empty());
        let v = NoAllConstChildren.adjustment(&state_after(&lib, "add"), &lib);
        assert!(masked(&lib, &v).is_empty());
    }

    #[test]
    fn inverse_rule() {
        let lib = lib();
        let r = NoInverseUnary::new(&lib);
        assert_eq!(masked(&lib, &r.adjustment(&state_after(&lib, "exp"), &lib)), vec!["log"]);
        assert_eq!(masked(&lib, &r.adjustment(&state_after(&lib, "log"), &lib)), vec!["exp"]);
        assert!(masked(&lib, &r.adjustment(&state_after(&lib, "sin"), &lib)).is_empty());
        // only the direct child
        assert!(masked(&lib, &r.adjustment(&state_after(&lib, "exp add"), &lib)).is_empty());
    }

    #[test]
    fn trig_rule_covers_all_descendants() {
        let lib = lib();
        let v = NoNestedTrig.adjustment(&state_after(&lib, "sin add x1 mul x1"), &lib);
        assert_eq!(masked(&lib, &v), vec!["sin", "cos"]);
        let v = NoNestedTrig.adjustment(&state_after(&lib, "add sin x1"), &lib);
        assert!(masked(&lib, &v).is_empty());
    }

    #[test]
    fn arity_prior_balanced_library_is_zero() {
        let lib = TokenLibrary::from_symbols(&[
            "add", "sub", "mul", "div", "sin", "cos", "exp", "log", "x1", "x2", "x3", "x4",
        ])
        .unwrap();
        let v = ArityBalancePrior::new(&lib).adjustment(&PrefixState::new(), &lib);
        assert!(v.iter().all(|b| b.abs() < 1e-15));
    }

    #[test]
    fn arity_prior_equalizes_classes() {
        // 5 binary, 3 unary, 3 terminal
        let lib = TokenLibrary::from_symbols(&[
            "add", "sub", "mul", "div", "pow", "sin", "cos", "exp", "x1", "x2", "x3",
        ])
        .unwrap();
        let v = ArityBalancePrior::new(&lib).adjustment(&PrefixState::new(), &lib);
        assert!(v.iter().all(|b| b.is_finite()));
        let z: f64 = v.iter().map(|b| b.exp()).sum();
        let mut per = [0.0; 3];
        for t in lib.tokens() {
            per[t.arity()] += v[t.id.index()].exp() / z;
        }
        for p in per {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn compose_is_sum_and_detects_unsatisfiable() {
        let lib = lib();
        let empty = LogitAdjusters::new();
        assert!(empty
            .compose(&PrefixState::new(), &lib)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));

        let mut st = PrefixState::new();
        let exp = lib.id("exp").unwrap();
        for _ in 0..29 {
            st.push(exp, &lib).unwrap();
        }
        let terminals: Vec<TokenId> = lib.ids().filter(|i| lib.arity(*i) == 0).collect();
        let bad = LogitAdjusters::new()
            .with(LengthMask { min_len: 4, max_len: 30 })
            .with(TokenMask { masked: terminals });
        assert_eq!(bad.compose(&st, &lib), Err(Error::Unsatisfiable { step: 29 }));

        let a = LogitAdjusters::standard(&lib).with(ArityBalancePrior::new(&lib));
        let mut b = LogitAdjusters::new().with(ArityBalancePrior::new(&lib));
        for item in LogitAdjusters::standard(&lib).iter().rev() {
            b.items.push(item.clone());
        }
        let st = state_after(&lib, "sin add");
        assert_eq!(a.compose(&st, &lib).unwrap(), b.compose(&st, &lib).unwrap());
    }

    #[test]
    fn length_cap_is_reported() {
        let lib = lib();
        assert_eq!(LogitAdjusters::standard(&lib).hard_length_cap(), Some(30));
        assert_eq!(LogitAdjusters::new().hard_length_cap(), None);
    }
}
