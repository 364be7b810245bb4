#![allow(dead_code)]

use rand::Rng;
use symopt_core::{TokenId, TokenLibrary, Traversal};

pub fn koza_const() -> TokenLibrary {
    TokenLibrary::from_symbols(&[
        "add", "sub", "mul", "div", "sin", "cos", "exp", "log", "x1", "x2", "const",
    ])
    .unwrap()
}

/// Uniform random complete traversal of at most `cap` tokens.
pub fn random_traversal<R: Rng + ?Sized>(lib: &TokenLibrary, cap: usize, rng: &mut R) -> Traversal {
    let leaves: Vec<TokenId> = lib.ids().filter(|&id| lib.arity(id) == 0).collect();
    let mut ids = Vec::new();
    let mut dangling = 1usize;
    while dangling > 0 {
        let room = cap - ids.len();
        let id = if room <= dangling {
            leaves[rng.gen_range(0..leaves.len())]
        } else {
            loop {
                let id = TokenId(rng.gen_range(0..lib.len()) as u16);
                if ids.len() + dangling + lib.arity(id) <= cap {
                    break id;
                }
            }
        };
        dangling = dangling + lib.arity(id) - 1;
        ids.push(id);
    }
    Traversal::new(ids)
}
