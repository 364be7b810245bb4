//! Autoregressive sequence policy: a single-layer GRU conditioned on the
//! parent and sibling of each slot, with exact gradients by backpropagation
//! through time.
//!
//! # Parameter layout
//!
//! All parameters live in one flat `f64` vector, in this order, every block
//! row-major. `H` is the hidden size, `L` the library size, and
//! `I = 2 (L + 1)` the input width (parent one-hot then sibling one-hot, each
//! with a trailing empty class). Gate blocks are ordered update, reset,
//! candidate.
//!
//! | block    | shape       |
//! |----------|-------------|
//! | `w_in`   | `3 x H x I` |
//! | `w_rec`  | `3 x H x H` |
//! | `b`      | `3 x H`     |
//! | `w_out`  | `L x H`     |
//! | `b_out`  | `L`         |
//!
//! The cell is
//! `z = sig(Wz x + Uz h + bz)`, `r = sig(Wr x + Ur h + br)`,
//! `n = tanh(Wn x + bn + Un (r * h))`, `h' = (1 - z) * n + z * h`,
//! and the logits are `w_out h' + b_out`. The initial hidden state is zero.
//!
//! # Checkpoint format
//!
//! Little-endian throughout: the 8 magic bytes `SYMPOL01`, then four `u64`
//! values (library size, input width, hidden size, parameter count), then
//! the parameter vector as `f64` in the layout above.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{PrefixState, TokenId, TokenLibrary, Traversal};
use crate::priors::LogitAdjusters;

pub const DEFAULT_HIDDEN: usize = 32;
pub const INIT_SCALE: f64 = 0.1;
const MAGIC: &[u8; 8] = b"SYMPOL01";

/// Conditioning for one sampling step. `None` stands for the empty token.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Observation {
    pub parent: Option<TokenId>,
    pub sibling: Option<TokenId>,
}

impl Observation {
    pub fn from_state(state: &PrefixState) -> Self {
        Observation {
            parent: state.parent(),
            sibling: state.sibling(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    n_tokens: usize,
    hidden: usize,
    theta: Vec<f64>,
}

/// One sampled sequence with its log-probability and summed step entropy,
/// both under the adjusted distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampled {
    pub traversal: Traversal,
    pub log_prob: f64,
    pub entropy: f64,
}

/// A scored batch of samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleBatch {
    pub traversals: Vec<Traversal>,
    pub log_probs: Vec<f64>,
    pub entropies: Vec<f64>,
    pub rewards: Vec<f64>,
}

impl SampleBatch {
    pub fn new(samples: Vec<Sampled>, rewards: Vec<f64>) -> Self {
        assert_eq!(samples.len(), rewards.len(), "one reward per sample");
        let mut b = SampleBatch {
            rewards,
            ..Default::default()
        };
        for s in samples {
            b.traversals.push(s.traversal);
            b.log_probs.push(s.log_prob);
            b.entropies.push(s.entropy);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.traversals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traversals.is_empty()
    }
}

/// Per-step values kept for the backward pass.
struct StepCache {
    parent: usize,
    sibling: usize,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    h: Vec<f64>,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    entropy: f64,
    action: usize,
}

struct Offsets {
    w_in: usize,
    w_rec: usize,
    b: usize,
    w_out: usize,
    b_out: usize,
    total: usize,
}

impl PolicyParams {
    /// Uniform initialization in `[-0.1, 0.1]`, deterministic in `seed`.
    pub fn init(hidden: usize, lib: &TokenLibrary, seed: u64) -> Result<Self> {
        Self::with_size(hidden, lib.len(), seed)
    }

    pub fn with_size(hidden: usize, n_tokens: usize, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(hidden, n_tokens)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in p.theta.iter_mut() {
            *v = rng.gen_range(-INIT_SCALE..=INIT_SCALE);
        }
        Ok(p)
    }

    pub fn zeros(hidden: usize, n_tokens: usize) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Config("hidden size must be at least 1".into()));
        }
        if n_tokens == 0 {
            return Err(Error::Library("library is empty".into()));
        }
        let mut p = PolicyParams {
            n_tokens,
            hidden,
            theta: Vec::new(),
        };
        p.theta = vec![0.0; p.offsets().total];
        Ok(p)
    }

    pub fn from_flat(hidden: usize, n_tokens: usize, theta: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(hidden, n_tokens)?;
        if theta.len() != p.theta.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, got {}",
                p.theta.len(),
                theta.len()
            )));
        }
        p.theta = theta;
        Ok(p)
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_size(&self) -> usize {
        2 * (self.n_tokens + 1)
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn initial_hidden(&self) -> Vec<f64> {
        vec![0.0; self.hidden]
    }

    fn offsets(&self) -> Offsets {
        let (h, i, l) = (self.hidden, self.input_size(), self.n_tokens);
        let w_in = 0;
        let w_rec = w_in + 3 * h * i;
        let b = w_rec + 3 * h * h;
        let w_out = b + 3 * h;
        let b_out = w_out + l * h;
        Offsets {
            w_in,
            w_rec,
            b,
            w_out,
            b_out,
            total: b_out + l,
        }
    }

    fn obs_indices(&self, obs: Observation) -> (usize, usize) {
        let empty = self.n_tokens;
        let p = obs.parent.map_or(empty, |t| t.index());
        let s = obs.sibling.map_or(empty, |t| t.index());
        assert!(p <= empty && s <= empty, "observation id outside the library");
        (p, self.n_tokens + 1 + s)
    }

    /// Runs the cell once; returns `(z, r, n, h_next)`.
    fn cell(&self, h_prev: &[f64], cols: (usize, usize)) -> [Vec<f64>; 4] {
        let o = self.offsets();
        let (hs, is) = (self.hidden, self.input_size());
        let th = &self.theta;
        let pre = |g: usize, i: usize| {
            let row = o.w_in + (g * hs + i) * is;
            th[row + cols.0] + th[row + cols.1] + th[o.b + g * hs + i]
        };
        let mut z = vec![0.0; hs];
        let mut r = vec![0.0; hs];
        for i in 0..hs {
            let uz = &th[o.w_rec + i * hs..o.w_rec + (i + 1) * hs];
            let ur = &th[o.w_rec + (hs + i) * hs..o.w_rec + (hs + i + 1) * hs];
            z[i] = sigmoid(pre(0, i) + dot(uz, h_prev));
            r[i] = sigmoid(pre(1, i) + dot(ur, h_prev));
        }
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        let mut n = vec![0.0; hs];
        let mut h = vec![0.0; hs];
        for i in 0..hs {
            let un = &th[o.w_rec + (2 * hs + i) * hs..o.w_rec + (2 * hs + i + 1) * hs];
            n[i] = (pre(2, i) + dot(un, &rh)).tanh();
            h[i] = (1.0 - z[i]) * n[i] + z[i] * h_prev[i];
        }
        [z, r, n, h]
    }

    fn project(&self, h: &[f64]) -> Vec<f64> {
        let o = self.offsets();
        let hs = self.hidden;
        (0..self.n_tokens)
            .map(|k| {
                dot(&self.theta[o.w_out + k * hs..o.w_out + (k + 1) * hs], h)
                    + self.theta[o.b_out + k]
            })
            .collect()
    }

    /// Raw logits for the next token and the updated hidden state.
    pub fn step_logits(&self, hidden: &[f64], obs: Observation) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(hidden.len(), self.hidden, "hidden state size mismatch");
        let [_, _, _, h] = self.cell(hidden, self.obs_indices(obs));
        (self.project(&h), h)
    }

    /// Samples one complete traversal from the adjusted distribution.
    ///
    /// Fails with `LengthExceeded` if the sequence is still open after
    /// `max_len` tokens, and with `Unsatisfiable` if every token is masked.
    pub fn sample_sequence<R: Rng + ?Sized>(
        &self,
        lib: &TokenLibrary,
        adjusters: &LogitAdjusters,
        rng: &mut R,
        max_len: usize,
    ) -> Result<Sampled> {
        self.check_library(lib)?;
        let mut state = PrefixState::new();
        let mut h = self.initial_hidden();
        let mut adj = vec![0.0; self.n_tokens];
        let mut ids = Vec::new();
        let mut log_prob = 0.0;
        let mut entropy = 0.0;
        while !state.is_complete() {
            if state.len() >= max_len {
                return Err(Error::LengthExceeded(max_len));
            }
            let (logits, h_next) = self.step_logits(&h, Observation::from_state(&state));
            h = h_next;
            adjusters.compose_into(&state, lib, &mut adj)?;
            let (probs, lp) = masked_softmax(&logits, &adj);
            let a = draw(&probs, rng);
            log_prob += lp[a];
            entropy += step_entropy(&probs, &lp);
            let id = TokenId(a as u16);
            state.push(id, lib)?;
            ids.push(id);
        }
        Ok(Sampled {
            traversal: Traversal::new(ids),
            log_prob,
            entropy,
        })
    }

    pub fn sample_many<R: Rng + ?Sized>(
        &self,
        lib: &TokenLibrary,
        adjusters: &LogitAdjusters,
        rng: &mut R,
        max_len: usize,
        n: usize,
    ) -> Result<Vec<Sampled>> {
        (0..n)
            .map(|_| self.sample_sequence(lib, adjusters, rng, max_len))
            .collect()
    }

    fn forward(
        &self,
        t: &Traversal,
        lib: &TokenLibrary,
        adjusters: &LogitAdjusters,
    ) -> Result<Vec<StepCache>> {
        self.check_library(lib)?;
        if !t.is_complete(lib)? {
            return Err(Error::Incomplete);
        }
        let mut state = PrefixState::new();
        let mut h = self.initial_hidden();
        let mut adj = vec![0.0; self.n_tokens];
        let mut steps = Vec::with_capacity(t.len());
        for (step, &id) in t.ids().iter().enumerate() {
            let cols = self.obs_indices(Observation::from_state(&state));
            let [z, r, n, h_next] = self.cell(&h, cols);
            let logits = self.project(&h_next);
            adjusters.compose_into(&state, lib, &mut adj)?;
            let (probs, lp) = masked_softmax(&logits, &adj);
            if lp[id.index()] == f64::NEG_INFINITY {
                return Err(Error::Unreachable { step, token: id });
            }
            let entropy = step_entropy(&probs, &lp);
            steps.push(StepCache {
                parent: cols.0,
                sibling: cols.1,
                h_prev: std::mem::replace(&mut h, h_next.clone()),
                z,
                r,
                n,
                h: h_next,
                probs,
                log_probs: lp,
                entropy,
                action: id.index(),
            });
            state.push(id, lib)?;
        }
        Ok(steps)
    }

    /// Log-probability and summed entropy of a complete traversal.
    pub fn evaluate_sequence(
        &self,
        t: &Traversal,
        lib: &TokenLibrary,
        adjusters: &LogitAdjusters,
    ) -> Result<(f64, f64)> {
        let steps = self.forward(t, lib, adjusters)?;
        Ok(steps.iter().fold((0.0, 0.0), |(lp, h), s| {
            (lp + s.log_probs[s.action], h + s.entropy)
        }))
    }

    pub fn log_prob_and_grad(
        &self,
        t: &Traversal,
        lib: &TokenLibrary,
        adjusters: &LogitAdjusters,
    ) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.n_params()];
        let (lp, _) = self.accumulate_grad(t, lib, adjusters, 1.0, 0.0, &mut grad)?;
        Ok((lp, grad))
    }

    /// Adds `w_log_prob * grad log p(t) + w_entropy * grad H(t)` into `grad`,
    /// where `H` is the summed per-step entropy. Returns `(log p, H)`.
    pub fn accumulate_grad(
        &self,
        t: &Traversal,
        lib: &TokenLibrary,
        adjusters: &LogitAdjusters,
        w_log_prob: f64,
        w_entropy: f64,
        grad: &mut [f64],
    ) -> Result<(f64, f64)> {
        assert_eq!(grad.len(), self.n_params(), "gradient buffer size mismatch");
        let steps = self.forward(t, lib, adjusters)?;
        let o = self.offsets();
        let (hs, is, l) = (self.hidden, self.input_size(), self.n_tokens);
        let th = &self.theta;
        let mut dh_next = vec![0.0; hs];
        let mut total_lp = 0.0;
        let mut total_h = 0.0;
        let mut dlogit = vec![0.0; l];
        let mut dh = vec![0.0; hs];
        let mut da = [vec![0.0; hs], vec![0.0; hs], vec![0.0; hs]];
        for s in steps.iter().rev() {
            total_lp += s.log_probs[s.action];
            total_h += s.entropy;
            for j in 0..l {
                let p = s.probs[j];
                let ent = if p > 0.0 { -p * (s.log_probs[j] + s.entropy) } else { 0.0 };
                let ind = if j == s.action { 1.0 } else { 0.0 };
                dlogit[j] = w_log_prob * (ind - p) + w_entropy * ent;
            }
            dh.copy_from_slice(&dh_next);
            for (k, g) in dlogit.iter().enumerate() {
                if *g == 0.0 {
                    continue;
                }
                let row = o.w_out + k * hs;
                for i in 0..hs {
                    grad[row + i] += g * s.h[i];
                    dh[i] += g * th[row + i];
                }
                grad[o.b_out + k] += g;
            }
            let rh: Vec<f64> = s.r.iter().zip(&s.h_prev).map(|(a, b)| a * b).collect();
            for i in 0..hs {
                let dn = dh[i] * (1.0 - s.z[i]);
                da[2][i] = dn * (1.0 - s.n[i] * s.n[i]);
                let dz = dh[i] * (s.h_prev[i] - s.n[i]);
                da[0][i] = dz * s.z[i] * (1.0 - s.z[i]);
                dh_next[i] = dh[i] * s.z[i];
            }
            // candidate recurrent path goes through r * h
            let mut drh = vec![0.0; hs];
            for i in 0..hs {
                let row = o.w_rec + (2 * hs + i) * hs;
                let g = da[2][i];
                for j in 0..hs {
                    grad[row + j] += g * rh[j];
                    drh[j] += g * th[row + j];
                }
            }
            for i in 0..hs {
                let dr = drh[i] * s.h_prev[i];
                da[1][i] = dr * s.r[i] * (1.0 - s.r[i]);
                dh_next[i] += drh[i] * s.r[i];
            }
            for g in 0..2 {
                for i in 0..hs {
                    let row = o.w_rec + (g * hs + i) * hs;
                    let d = da[g][i];
                    for j in 0..hs {
                        grad[row + j] += d * s.h_prev[j];
                        dh_next[j] += d * th[row + j];
                    }
                }
            }
            for (g, dg) in da.iter().enumerate() {
                for i in 0..hs {
                    let row = o.w_in + (g * hs + i) * is;
                    grad[row + s.parent] += dg[i];
                    grad[row + s.sibling] += dg[i];
                    grad[o.b + g * hs + i] += dg[i];
                }
            }
        }
        Ok((total_lp, total_h))
    }

    fn check_library(&self, lib: &TokenLibrary) -> Result<()> {
        if lib.len() != self.n_tokens {
            return Err(Error::Library(format!(
                "policy has {} outputs but the library has {} tokens",
                self.n_tokens,
                lib.len()
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 8 * self.theta.len());
        out.extend_from_slice(MAGIC);
        for d in [self.n_tokens, self.input_size(), self.hidden, self.theta.len()] {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &self.theta {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 40 || &bytes[..8] != MAGIC {
            return Err(bad("missing checkpoint header"));
        }
        let dim = |k: usize| {
            let mut b = [0u8; 8];
            b.copy_from_slice(&bytes[8 + 8 * k..16 + 8 * k]);
            u64::from_le_bytes(b) as usize
        };
        let (n_tokens, input, hidden, count) = (dim(0), dim(1), dim(2), dim(3));
        if input != 2 * (n_tokens + 1) {
            return Err(bad("input width does not match library size"));
        }
        if bytes.len() != 40 + 8 * count {
            return Err(bad("parameter block has the wrong length"));
        }
        let theta: Vec<f64> = bytes[40..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        Self::from_flat(hidden, n_tokens, theta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Softmax over `logits + adj`; masked entries get probability 0 and
/// log-probability `-inf`.
pub fn masked_softmax(logits: &[f64], adj: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let z: Vec<f64> = logits.iter().zip(adj).map(|(a, b)| a + b).collect();
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    let lp: Vec<f64> = z.iter().map(|v| v - lse).collect();
    let p = lp.iter().map(|v| v.exp()).collect();
    (p, lp)
}

pub fn step_entropy(probs: &[f64], log_probs: &[f64]) -> f64 {
    probs
        .iter()
        .zip(log_probs)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, l)| -p * l)
        .sum::<f64>()
        .max(0.0)
}

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::{ForceSequence, LengthMask, TokenMask};

    fn lib() -> TokenLibrary {
        TokenLibrary::from_symbols(&["add", "mul", "sin", "exp", "x1", "const"]).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let lib = lib();
        let a = PolicyParams::init(8, &lib, 3).unwrap();
        let b = PolicyParams::init(8, &lib, 3).unwrap();
        let c = PolicyParams::init(8, &lib, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.as_slice().iter().all(|v| v.abs() <= INIT_SCALE));
        let (logits, h) = a.step_logits(&a.initial_hidden(), Observation::default());
        assert_eq!(logits.len(), lib.len());
        assert_eq!(h.len(), 8);
        assert!(PolicyParams::init(0, &lib, 1).is_err());
    }

    #[test]
    fn zero_params_give_uniform_logits() {
        let p = PolicyParams::zeros(4, 6).unwrap();
        let (logits, _) = p.step_logits(&p.initial_hidden(), Observation::default());
        assert!(logits.iter().all(|v| *v == logits[0]));
    }

    #[test]
    fn output_row_affects_only_its_logit() {
        let lib = lib();
        let p = PolicyParams::init(8, &lib, 9).unwrap();
        let mut q = p.clone();
        let o = q.offsets();
        for i in 0..8 {
            q.theta[o.w_out + 2 * 8 + i] += 0.5;
        }
        let (a, _) = p.step_logits(&p.initial_hidden(), Observation::default());
        let (b, _) = q.step_logits(&q.initial_hidden(), Observation::default());
        for k in 0..lib.len() {
            assert_eq!(a[k] == b[k], k != 2, "token {k}");
        }
    }

    #[test]
    fn forced_choice_has_zero_log_prob() {
        let lib = lib();
        let p = PolicyParams::init(8, &lib, 1).unwrap();
        let target = lib.parse_traversal("x1").unwrap();
        let adj = LogitAdjusters::new().with(ForceSequence { target: target.clone() });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = p.sample_sequence(&lib, &adj, &mut rng, 30).unwrap();
        assert_eq!(s.traversal, target);
        assert_eq!(s.log_prob, 0.0);
        assert_eq!(s.entropy, 0.0);
    }

    #[test]
    fn uniform_log_prob() {
        let lib = lib();
        let p = PolicyParams::zeros(4, lib.len()).unwrap();
        let t = lib.parse_traversal("add x1 mul x1 x1").unwrap();
        let (lp, _) = p.evaluate_sequence(&t, &lib, &LogitAdjusters::new()).unwrap();
        assert!((lp + 5.0 * (lib.len() as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn sample_log_prob_matches_replay() {
        let lib = lib();
        let p = PolicyParams::init(8, &lib, 5).unwrap();
        let adj = LogitAdjusters::standard(&lib);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let s = p.sample_sequence(&lib, &adj, &mut rng, 30).unwrap();
            let (lp, h) = p.evaluate_sequence(&s.traversal, &lib, &adj).unwrap();
            assert!((lp - s.log_prob).abs() < 1e-12);
            assert!((h - s.entropy).abs() < 1e-12);
            let (lp2, g) = p.log_prob_and_grad(&s.traversal, &lib, &adj).unwrap();
            assert!((lp2 - s.log_prob).abs() < 1e-12);
            assert_eq!(g.len(), p.n_params());
        }
    }

    #[test]
    fn unreachable_traversal_is_an_error() {
        let lib = lib();
        let p = PolicyParams::init(8, &lib, 5).unwrap();
        let adj = LogitAdjusters::new().with(TokenMask {
            masked: vec![lib.id("sin").unwrap()],
        });
        let t = lib.parse_traversal("sin x1").unwrap();
        assert!(matches!(
            p.log_prob_and_grad(&t, &lib, &adj),
            Err(Error::Unreachable { step: 0, .. })
        ));
    }

    #[test]
    fn length_cap_without_mask_errors() {
        let lib = TokenLibrary::from_symbols(&["add", "x1"]).unwrap();
        let mut p = PolicyParams::zeros(2, 2).unwrap();
        // strongly favour `add`
        let o = p.offsets();
        p.theta[o.b_out] = 50.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            p.sample_sequence(&lib, &LogitAdjusters::new(), &mut rng, 10),
            Err(Error::LengthExceeded(10))
        );
        let adj = LogitAdjusters::new().with(LengthMask { min_len: 1, max_len: 10 });
        let s = p.sample_sequence(&lib, &adj, &mut rng, 10).unwrap();
        assert!(s.traversal.len() <= 10);
    }

    #[test]
    fn checkpoint_round_trip() {
        let lib = lib();
        let p = PolicyParams::init(5, &lib, 11).unwrap();
        let bytes = p.to_bytes();
        assert_eq!(&bytes[..8], b"SYMPOL01");
        assert_eq!(PolicyParams::from_bytes(&bytes).unwrap(), p);
        assert!(PolicyParams::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(PolicyParams::from_bytes(&bad).is_err());
    }
}
