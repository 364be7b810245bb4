//! Fitting the values of constant placeholders by quasi-Newton descent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::expr::{evaluate_kinds, Dataset, Evaluation, Kind, TokenLibrary, Traversal};
use crate::reward::nmse;

pub const DEFAULT_CONST_BUDGET: usize = 200;
pub const DEFAULT_CONST_STARTS: usize = 2;
/// Search is confined to `|c| <= CONST_BOUND`.
pub const CONST_BOUND: f64 = 1e6;
const FD_STEP: f64 = 1e-7;
const RANDOM_START_RANGE: f64 = 5.0;
const GRAD_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstFitResult {
    pub values: Vec<f64>,
    pub final_nmse: f64,
    pub n_evals: usize,
    pub converged: bool,
}

/// Multi-start BFGS with central-difference gradients.
///
/// The first start is all ones, the others are uniform in `[-5, 5]`. The
/// evaluation budget is shared evenly between starts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstFitter {
    pub budget: usize,
    pub starts: usize,
}

impl Default for ConstFitter {
    fn default() -> Self {
        ConstFitter {
            budget: DEFAULT_CONST_BUDGET,
            starts: DEFAULT_CONST_STARTS,
        }
    }
}

impl ConstFitter {
    /// Fits the placeholders of a complete traversal. With no placeholders
    /// this is a single evaluation.
    pub fn fit(&self, t: &Traversal, lib: &TokenLibrary, data: &Dataset, seed: u64) -> ConstFitResult {
        let kinds: Vec<Kind> = t.ids().iter().map(|id| lib.kind(*id)).collect();
        self.fit_kinds(&kinds, data, seed)
    }

    pub fn fit_kinds(&self, kinds: &[Kind], data: &Dataset, seed: u64) -> ConstFitResult {
        let k = kinds.iter().filter(|k| matches!(k, Kind::Const)).count();
        let mut evals = 0usize;
        let mut objective = |c: &[f64]| {
            evals += 1;
            let clipped: Vec<f64> = c.iter().map(|v| v.clamp(-CONST_BOUND, CONST_BOUND)).collect();
            match evaluate_kinds(kinds, &clipped, data.columns()) {
                Evaluation::Valid(v) => {
                    let e = nmse(&v, data.y());
                    if e.is_finite() {
                        e
                    } else {
                        f64::INFINITY
                    }
                }
                Evaluation::Invalid => f64::INFINITY,
            }
        };
        if k == 0 {
            let f = objective(&[]);
            return ConstFitResult {
                values: Vec::new(),
                final_nmse: f,
                n_evals: 1,
                converged: f.is_finite(),
            };
        }
        let starts = self.starts.max(1);
        let per_start = (self.budget / starts).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<(Vec<f64>, f64, bool)> = None;
        for s in 0..starts {
            let x0: Vec<f64> = if s == 0 {
                vec![1.0; k]
            } else {
                (0..k)
                    .map(|_| rng.gen_range(-RANDOM_START_RANGE..=RANDOM_START_RANGE))
                    .collect()
            };
            let (x, f, conv) = bfgs(&mut objective, x0, per_start);
            if best.as_ref().is_none_or(|b| f < b.1) {
                best = Some((x, f, conv));
            }
        }
        let (values, final_nmse, converged) = best.unwrap();
        ConstFitResult {
            values: values.iter().map(|v| v.clamp(-CONST_BOUND, CONST_BOUND)).collect(),
            final_nmse,
            n_evals: evals,
            converged: converged && final_nmse.is_finite(),
        }
    }
}

/// Minimizes `f` from `x0` within roughly `budget` evaluations. Returns the
/// best point, its value, and whether a stationarity test was met.
pub fn bfgs<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: Vec<f64>, budget: usize) -> (Vec<f64>, f64, bool) {
    let k = x0.len();
    let mut used = 0usize;
    let mut eval = |x: &[f64], used: &mut usize| {
        *used += 1;
        f(x)
    };
    let mut x = x0;
    let mut fx = eval(&x, &mut used);
    if !fx.is_finite() || k == 0 {
        return (x, fx, false);
    }
    let grad = |x: &[f64], used: &mut usize, eval: &mut dyn FnMut(&[f64], &mut usize) -> f64| {
        let mut g = vec![0.0; k];
        let mut xp = x.to_vec();
        for i in 0..k {
            let h = FD_STEP * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let fp = eval(&xp, used);
            xp[i] = x[i] - h;
            let fm = eval(&xp, used);
            xp[i] = x[i];
            g[i] = if fp.is_finite() && fm.is_finite() {
                (fp - fm) / (2.0 * h)
            } else {
                0.0
            };
        }
        g
    };
    let mut g = grad(&x, &mut used, &mut eval);
    let mut hinv = identity(k);
    while used + 2 * k < budget {
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < GRAD_TOL || fx < 1e-30 {
            return (x, fx, true);
        }
        let mut dir: Vec<f64> = (0..k).map(|i| -dot(&hinv[i], &g)).collect();
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            hinv = identity(k);
            dir = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let mut step = 1.0;
        let mut accepted = None;
        while used < budget {
            let xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| (a + step * d).clamp(-CONST_BOUND, CONST_BOUND)).collect();
            let fn_ = eval(&xn, &mut used);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fn_));
                break;
            }
            step *= 0.5;
            if step < 1e-16 {
                break;
            }
        }
        let Some((xn, fxn)) = accepted else {
            return (x, fx, gnorm < 1e-6);
        };
        if used + 2 * k > budget {
            return (xn, fxn, false);
        }
        let gn = grad(&xn, &mut used, &mut eval);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            update_inverse_hessian(&mut hinv, &s, &y, sy);
        }
        let improvement = fx - fxn;
        x = xn;
        fx = fxn;
        g = gn;
        if improvement <= 1e-16 * fx.abs().max(1e-300) && improvement >= 0.0 && s.iter().all(|v| v.abs() < 1e-14) {
            return (x, fx, true);
        }
    }
    (x, fx, false)
}

fn identity(k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn update_inverse_hessian(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let k = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..k).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..k {
        for j in 0..k {
            h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn linear_coefficient() {
        let lib = TokenLibrary::from_symbols(&["mul", "sin", "x1", "const"]).unwrap();
        let x = grid(20, -1.0, 1.0);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let d = Dataset::new(vec![x], y).unwrap();
        let t = lib.parse_traversal("mul const x1").unwrap();
        let r = ConstFitter::default().fit(&t, &lib, &d, 0);
        assert!((r.values[0] - 2.0).abs() < 1e-6, "{r:?}");
        assert!(r.final_nmse < 1e-12);
        assert!(r.n_evals <= DEFAULT_CONST_BUDGET);
    }

    #[test]
    fn sine_amplitude() {
        let lib = TokenLibrary::from_symbols(&["mul", "sin", "x1", "const"]).unwrap();
        let x = grid(20, -1.0, 1.0);
        let y: Vec<f64> = x.iter().map(|v| 3.14159 * v.sin()).collect();
        let d = Dataset::new(vec![x], y).unwrap();
        let t = lib.parse_traversal("mul const sin x1").unwrap();
        let r = ConstFitter::default().fit(&t, &lib, &d, 7);
        assert!((r.values[0] - 3.14159).abs() < 1e-4, "{r:?}");
        assert!(r.converged);
    }

    #[test]
    fn no_constants_is_one_evaluation() {
        let lib = TokenLibrary::koza(1);
        let x = grid(10, -1.0, 1.0);
        let d = Dataset::new(vec![x.clone()], x).unwrap();
        let t = lib.parse_traversal("x1").unwrap();
        let r = ConstFitter::default().fit(&t, &lib, &d, 0);
        assert_eq!(r.n_evals, 1);
        assert_eq!(r.final_nmse, 0.0);
        assert!(r.values.is_empty());
    }

    #[test]
    fn seeded_fit_is_deterministic() {
        let lib = TokenLibrary::from_symbols(&["add", "mul", "exp", "x1", "const"]).unwrap();
        let x = grid(15, -1.0, 1.0);
        let y: Vec<f64> = x.iter().map(|v| 0.3 * (1.7 * v).exp() + 2.0).collect();
        let d = Dataset::new(vec![x], y).unwrap();
        let t = lib.parse_traversal("add mul const exp mul const x1 const").unwrap();
        let a = ConstFitter::default().fit(&t, &lib, &d, 42);
        let b = ConstFitter::default().fit(&t, &lib, &d, 42);
        assert_eq!(a, b);
        assert!(a.n_evals <= DEFAULT_CONST_BUDGET + 1);
    }

    #[test]
    fn rosenbrock_converges() {
        let mut f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, fx, _) = bfgs(&mut f, vec![-1.2, 1.0], 2000);
        assert!(fx < 1e-10, "{x:?} {fx}");
    }
}
