mod common;

use common::{koza_const, random_traversal};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symopt_core::policy::{masked_softmax, step_entropy, Observation};
use symopt_core::priors::{ForceSequence, TokenMask};
use symopt_core::verify::{finite_difference_gradient, relative_error, FD_STEP, FD_TOLERANCE};
use symopt_core::{Error, LogitAdjusters, PolicyParams, TokenId, TokenLibrary};

fn standard(lib: &TokenLibrary) -> LogitAdjusters {
    LogitAdjusters::standard(lib)
}

#[test]
fn zero_params_give_uniform_logits() {
    let lib = koza_const();
    let p = PolicyParams::zeros(8, lib.len()).unwrap();
    let (logits, _) = p.step_logits(&p.initial_hidden(), Observation::default());
    assert_eq!(logits.len(), lib.len());
    assert!(logits.iter().all(|&v| v == logits[0]));
}

#[test]
fn step_logits_are_pure() {
    let lib = koza_const();
    let p = PolicyParams::init(8, &lib, 3).unwrap();
    let obs = Observation { parent: Some(TokenId(0)), sibling: Some(TokenId(8)) };
    let h = p.initial_hidden();
    let a = p.step_logits(&h, obs);
    let b = p.step_logits(&h, obs);
    assert_eq!(a, b);
    assert!(a.0.iter().all(|v| v.is_finite()));
}

#[test]
fn output_row_perturbation_moves_one_logit() {
    let lib = koza_const();
    let mut p = PolicyParams::init(6, &lib, 4).unwrap();
    let (hs, is) = (p.hidden(), p.input_size());
    let (before, _) = p.step_logits(&p.initial_hidden(), Observation::default());
    let row = 5;
    let start = 3 * hs * is + 3 * hs * hs + 3 * hs + row * hs;
    for v in &mut p.as_mut_slice()[start..start + hs] {
        *v += 0.25;
    }
    let (after, _) = p.step_logits(&p.initial_hidden(), Observation::default());
    for (j, (a, b)) in after.iter().zip(&before).enumerate() {
        if j == row {
            assert!((a - b).abs() > 1e-6);
        } else {
            assert_eq!(a, b);
        }
    }
}

#[test]
fn forced_choice_has_zero_log_prob() {
    let lib = koza_const();
    let x1 = lib.id("x1").unwrap();
    let masked: Vec<TokenId> = lib.ids().filter(|&id| id != x1).collect();
    let adj = LogitAdjusters::new().with(TokenMask { masked });
    let p = PolicyParams::init(8, &lib, 5).unwrap();
    let s = p.sample_sequence(&lib, &adj, &mut ChaCha8Rng::seed_from_u64(0), 30).unwrap();
    assert_eq!(s.traversal.ids(), &[x1]);
    assert_eq!(s.log_prob, 0.0);
    assert_eq!(s.entropy, 0.0);
}

#[test]
fn uniform_policy_log_prob() {
    let lib = koza_const();
    let p = PolicyParams::zeros(4, lib.len()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let t = random_traversal(&lib, 20, &mut rng);
        let (lp, _) = p.log_prob_and_grad(&t, &lib, &LogitAdjusters::new()).unwrap();
        let expect = -(t.len() as f64) * (lib.len() as f64).ln();
        assert!((lp - expect).abs() < 1e-12);
    }
}

#[test]
fn sampled_log_prob_matches_replay() {
    let lib = koza_const();
    let adj = standard(&lib);
    let p = PolicyParams::init(16, &lib, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for s in p.sample_many(&lib, &adj, &mut rng, 30, 500).unwrap() {
        let (lp, h) = p.evaluate_sequence(&s.traversal, &lib, &adj).unwrap();
        assert!((lp - s.log_prob).abs() < 1e-12);
        assert!((h - s.entropy).abs() < 1e-12);
        assert!(s.log_prob <= 0.0 && s.entropy >= 0.0);
    }
}

#[test]
fn mean_negative_log_prob_matches_entropy() {
    let lib = koza_const();
    let adj = standard(&lib);
    let mut p = PolicyParams::init(16, &lib, 8).unwrap();
    for v in p.as_mut_slice() {
        *v *= 10.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 20_000;
    let d: Vec<f64> = p
        .sample_many(&lib, &adj, &mut rng, 30, n)
        .unwrap()
        .iter()
        .map(|s| -s.log_prob - s.entropy)
        .collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
}

#[test]
fn log_prob_gradient_matches_finite_differences() {
    let lib = koza_const();
    let adj = LogitAdjusters::from_names(&["length", "no_const_children", "inverse", "trig"], 2, 10, &lib).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let mut p = PolicyParams::init(rng.gen_range(2..6), &lib, rng.gen()).unwrap();
        for v in p.as_mut_slice() {
            *v *= 5.0;
        }
        let t = p.sample_sequence(&lib, &adj, &mut rng, 10).unwrap().traversal;
        let (_, g) = p.log_prob_and_grad(&t, &lib, &adj).unwrap();
        assert_eq!(g.len(), p.n_params());
        let (hs, l) = (p.hidden(), p.n_tokens());
        let fd = finite_difference_gradient(
            |theta| {
                let q = PolicyParams::from_flat(hs, l, theta.to_vec()).unwrap();
                q.evaluate_sequence(&t, &lib, &adj).unwrap().0
            },
            p.as_slice(),
            FD_STEP,
        );
        assert!(relative_error(&g, &fd) < FD_TOLERANCE);
    }
}

#[test]
fn batch_gradient_is_sum_of_parts() {
    let lib = koza_const();
    let adj = standard(&lib);
    let p = PolicyParams::init(8, &lib, 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let batch = p.sample_many(&lib, &adj, &mut rng, 30, 5).unwrap();
    let mut total = vec![0.0; p.n_params()];
    for s in &batch {
        p.accumulate_grad(&s.traversal, &lib, &adj, 1.0, 0.0, &mut total).unwrap();
    }
    let mut sum = vec![0.0; p.n_params()];
    for s in &batch {
        for (a, b) in sum.iter_mut().zip(p.log_prob_and_grad(&s.traversal, &lib, &adj).unwrap().1) {
            *a += b;
        }
    }
    assert!(relative_error(&total, &sum) < 1e-12);
}

#[test]
fn unreachable_traversal_is_an_error() {
    let lib = koza_const();
    let t = lib.parse_traversal("exp log x1").unwrap();
    let p = PolicyParams::init(4, &lib, 11).unwrap();
    assert!(matches!(
        p.log_prob_and_grad(&t, &lib, &standard(&lib)),
        Err(Error::Unreachable { step: 1, .. })
    ));
}

#[test]
fn force_sequence_reproduces_its_target() {
    let lib = koza_const();
    let target = lib.parse_traversal("add mul x1 x2 sin x1").unwrap();
    let adj = LogitAdjusters::new().with(ForceSequence { target: target.clone() });
    let p = PolicyParams::init(4, &lib, 12).unwrap();
    let s = p.sample_sequence(&lib, &adj, &mut ChaCha8Rng::seed_from_u64(1), 30).unwrap();
    assert_eq!(s.traversal, target);
    assert_eq!(s.log_prob, 0.0);
}

#[test]
fn checkpoint_round_trip() {
    let lib = koza_const();
    let p = PolicyParams::init(7, &lib, 13).unwrap();
    let bytes = p.to_bytes();
    assert_eq!(&bytes[..8], b"SYMPOL01");
    assert_eq!(bytes.len(), 8 + 32 + 8 * p.n_params());
    assert_eq!(PolicyParams::from_bytes(&bytes).unwrap(), p);
    assert!(matches!(PolicyParams::from_bytes(&bytes[..20]), Err(Error::Checkpoint(_))));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(PolicyParams::from_bytes(&bad), Err(Error::Checkpoint(_))));
}

proptest! {
    #[test]
    fn softmax_sums_to_one_over_unmasked(
        logits in prop::collection::vec(-20.0f64..20.0, 2..16),
        mask_bits in prop::collection::vec(any::<bool>(), 16),
    ) {
        let n = logits.len();
        let mut adj: Vec<f64> = (0..n).map(|i| if mask_bits[i] { f64::NEG_INFINITY } else { 0.0 }).collect();
        adj[0] = 0.0;
        let (p, lp) = masked_softmax(&logits, &adj);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..n {
            if adj[i] == f64::NEG_INFINITY {
                prop_assert_eq!(p[i], 0.0);
            }
        }
        prop_assert!(step_entropy(&p, &lp) >= 0.0);
    }

    #[test]
    fn single_unmasked_token_has_zero_entropy(logits in prop::collection::vec(-20.0f64..20.0, 2..16), keep in 0usize..16) {
        let keep = keep % logits.len();
        let adj: Vec<f64> = (0..logits.len()).map(|i| if i == keep { 0.0 } else { f64::NEG_INFINITY }).collect();
        let (p, lp) = masked_softmax(&logits, &adj);
        prop_assert_eq!(p[keep], 1.0);
        prop_assert_eq!(step_entropy(&p, &lp), 0.0);
    }
}
