mod common;

use common::koza_const;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symopt_core::expr::PrefixState;
use symopt_core::policy::masked_softmax;
use symopt_core::priors::{
    ArityBalancePrior, LengthMask, LogitAdjuster, NoAllConstChildren, NoInverseUnary, NoNestedTrig, TokenMask,
};
use symopt_core::verify::{constraint_violations, sampled_violations};
use symopt_core::{Error, LogitAdjusters, PolicyParams, TokenId, TokenLibrary};

fn state(lib: &TokenLibrary, s: &str) -> PrefixState {
    let mut st = PrefixState::new();
    for id in lib.parse_traversal(s).unwrap().ids() {
        st.push(*id, lib).unwrap();
    }
    st
}

fn masked(lib: &TokenLibrary, v: &[f64]) -> Vec<String> {
    lib.ids()
        .filter(|id| v[id.index()] == f64::NEG_INFINITY)
        .map(|id| lib.token(id).symbol.clone())
        .collect()
}

fn all_adjusters(lib: &TokenLibrary) -> Vec<Box<dyn LogitAdjuster>> {
    vec![
        Box::new(LengthMask { min_len: 4, max_len: 30 }),
        Box::new(NoAllConstChildren),
        Box::new(NoInverseUnary::new(lib)),
        Box::new(NoNestedTrig),
        Box::new(ArityBalancePrior::new(lib)),
    ]
}

#[test]
fn length_mask_examples() {
    let lib = koza_const();
    let m = LengthMask { min_len: 4, max_len: 30 };
    let empty = m.adjustment(&PrefixState::new(), &lib);
    assert_eq!(masked(&lib, &empty), vec!["x1", "x2", "const"]);
    let mut st = PrefixState::new();
    for _ in 0..27 {
        st.push(lib.id("sin").unwrap(), &lib).unwrap();
    }
    st.push(lib.id("add").unwrap(), &lib).unwrap();
    st.push(lib.id("x1").unwrap(), &lib).unwrap();
    assert_eq!(st.len(), 29);
    assert_eq!(st.dangling(), 1);
    let v = m.adjustment(&st, &lib);
    for id in lib.ids() {
        assert_eq!(v[id.index()] == 0.0, lib.arity(id) == 0);
    }
}

#[test]
fn const_child_examples() {
    let lib = koza_const();
    let a = NoAllConstChildren;
    assert_eq!(masked(&lib, &a.adjustment(&state(&lib, "sin"), &lib)), vec!["const"]);
    assert_eq!(masked(&lib, &a.adjustment(&state(&lib, "add const"), &lib)), vec!["const"]);
    assert!(masked(&lib, &a.adjustment(&state(&lib, "add x1"), &lib)).is_empty());
}

#[test]
fn inverse_and_trig_examples() {
    let lib = koza_const();
    let inv = NoInverseUnary::new(&lib);
    assert_eq!(masked(&lib, &inv.adjustment(&state(&lib, "exp"), &lib)), vec!["log"]);
    assert_eq!(masked(&lib, &inv.adjustment(&state(&lib, "log"), &lib)), vec!["exp"]);
    assert!(masked(&lib, &inv.adjustment(&state(&lib, "sin"), &lib)).is_empty());
    let trig = NoNestedTrig;
    assert_eq!(masked(&lib, &trig.adjustment(&state(&lib, "sin add x1 mul x2"), &lib)), vec!["sin", "cos"]);
    assert!(masked(&lib, &trig.adjustment(&state(&lib, "add exp"), &lib)).is_empty());
}

#[test]
fn arity_prior_balances_classes() {
    let balanced = TokenLibrary::from_symbols(&[
        "add", "sub", "mul", "div", "sin", "cos", "exp", "log", "x1", "x2", "x3", "x4",
    ])
    .unwrap();
    let v = ArityBalancePrior::new(&balanced).adjustment(&PrefixState::new(), &balanced);
    assert!(v.iter().all(|&b| b.abs() < 1e-15));
    let skewed =
        TokenLibrary::from_symbols(&["add", "sub", "mul", "div", "pow", "sin", "cos", "exp", "x1", "x2", "x3"])
            .unwrap();
    let adj = ArityBalancePrior::new(&skewed).adjustment(&PrefixState::new(), &skewed);
    let (p, _) = masked_softmax(&vec![0.0; skewed.len()], &adj);
    for a in 0..3 {
        let mass: f64 = skewed.ids().filter(|&id| skewed.arity(id) == a).map(|id| p[id.index()]).sum();
        assert!((mass - 1.0 / 3.0).abs() < 1e-12, "arity {a} mass {mass}");
    }
    assert!(p.iter().all(|&q| q > 0.0));
}

#[test]
fn composition_examples() {
    let lib = koza_const();
    assert_eq!(LogitAdjusters::new().compose(&state(&lib, "add"), &lib).unwrap(), vec![0.0; lib.len()]);
    let leaves: Vec<TokenId> = lib.ids().filter(|&id| lib.arity(id) == 0).collect();
    let adj = LogitAdjusters::new()
        .with(LengthMask { min_len: 1, max_len: 3 })
        .with(TokenMask { masked: leaves });
    assert!(matches!(adj.compose(&state(&lib, "add"), &lib), Err(Error::Unsatisfiable { step: 1 })));
}

#[test]
fn constrained_samples_have_no_violations() {
    let lib = koza_const();
    assert_eq!(sampled_violations(&lib, 10_000, 21).unwrap(), 0);
}

#[test]
fn length_bounds_hold_for_random_rollouts() {
    let lib = koza_const();
    let adj = LogitAdjusters::new().with(LengthMask { min_len: 4, max_len: 30 });
    let p = PolicyParams::zeros(4, lib.len()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for s in p.sample_many(&lib, &adj, &mut rng, 30, 5_000).unwrap() {
        assert!((4..=30).contains(&s.traversal.len()));
        assert!(constraint_violations(&s.traversal, &lib, 4, 30)
            .iter()
            .all(|v| !matches!(v, symopt_core::verify::Violation::Length(_))));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn hard_masks_emit_zero_or_neg_inf_and_priors_stay_finite(seed in any::<u64>()) {
        let lib = koza_const();
        let standard = LogitAdjusters::standard(&lib);
        let p = PolicyParams::zeros(2, lib.len()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = p.sample_sequence(&lib, &standard, &mut rng, 30).unwrap().traversal;
        let mut st = PrefixState::new();
        for id in t.ids() {
            for a in all_adjusters(&lib) {
                let v = a.adjustment(&st, &lib);
                if a.is_hard() {
                    prop_assert!(v.iter().all(|&x| x == 0.0 || x == f64::NEG_INFINITY));
                } else {
                    prop_assert!(v.iter().all(|x| x.is_finite()));
                }
            }
            st.push(*id, &lib).unwrap();
        }
    }

    #[test]
    fn composition_is_order_independent(seed in any::<u64>()) {
        let lib = koza_const();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..5).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let build = |idx: &[usize]| {
            let mut adj = LogitAdjusters::new();
            for &i in idx {
                match i {
                    0 => adj.push(LengthMask { min_len: 4, max_len: 30 }),
                    1 => adj.push(NoAllConstChildren),
                    2 => adj.push(NoInverseUnary::new(&lib)),
                    3 => adj.push(NoNestedTrig),
                    _ => adj.push(ArityBalancePrior::new(&lib)),
                }
            }
            adj
        };
        let (a, b) = (build(&[0, 1, 2, 3, 4]), build(&order));
        let p = PolicyParams::zeros(2, lib.len()).unwrap();
        let t = p.sample_sequence(&lib, &a, &mut rng, 30).unwrap().traversal;
        let mut st = PrefixState::new();
        for id in t.ids() {
            let va = a.compose(&st, &lib).unwrap();
            let vb = b.compose(&st, &lib).unwrap();
            for (x, y) in va.iter().zip(&vb) {
                prop_assert!(x == y || (x - y).abs() < 1e-12);
            }
            st.push(*id, &lib).unwrap();
        }
    }
}
