//! Nguyen benchmark suite, dataset generation, recovery checking and
//! experiment aggregation.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{symbolically_equivalent, Dataset, Equivalence, Evaluation, ExpressionTree, TokenLibrary, Traversal};
use crate::gp::GpConfig;
use crate::policy::PolicyParams;
use crate::priors::{LogitAdjusters, DEFAULT_MAX_LEN, DEFAULT_MIN_LEN};
use crate::reward::nmse_of;
use crate::train::{RunResult, Searcher, TrainerConfig};

/// Training NMSE below which a new expression is checked for equivalence.
pub const RECOVERY_NMSE: f64 = 1e-10;

pub const KOZA_OPERATORS: [&str; 8] = ["add", "sub", "mul", "div", "sin", "cos", "exp", "log"];

const TRUTH_TOKENS: [&str; 17] = [
    "add", "sub", "mul", "div", "pow", "sin", "cos", "exp", "log", "sqrt", "0.5", "1", "2", "3", "4", "5", "6",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub name: String,
    /// Ground truth as space-separated pre-order symbols.
    pub truth: String,
    pub n_vars: usize,
    /// Sampling range per input variable.
    pub domain: Vec<(f64, f64)>,
    pub n_train: usize,
    pub n_test: usize,
    /// Default search library.
    pub library: Vec<String>,
}

impl BenchmarkSpec {
    /// Library the ground truth is written in (with `pow` and literals).
    pub fn truth_library(&self) -> TokenLibrary {
        let mut symbols: Vec<String> = TRUTH_TOKENS.iter().map(|s| s.to_string()).collect();
        symbols.extend((1..=self.n_vars).map(|i| format!("x{i}")));
        TokenLibrary::from_symbols(&symbols).expect("truth library is well formed")
    }

    pub fn truth_tree(&self) -> ExpressionTree {
        let lib = self.truth_library();
        let t = lib.parse_traversal(&self.truth).expect("truth parses");
        ExpressionTree::from_traversal(&t, &lib).expect("truth is complete")
    }

    pub fn search_library(&self) -> Result<TokenLibrary> {
        TokenLibrary::from_symbols(&self.library)
    }

    /// Noiseless train and test sets. Points where the truth is not finite
    /// are redrawn.
    pub fn make_dataset(&self, seed: u64) -> Result<(Dataset, Dataset)> {
        let tree = self.truth_tree();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Result<Dataset> {
            let mut columns = vec![Vec::with_capacity(n); self.n_vars];
            let mut y = Vec::with_capacity(n);
            let mut attempts = 0;
            while y.len() < n {
                attempts += 1;
                if attempts > 1000 * n {
                    return Err(Error::Dataset(format!("{}: cannot find valid points", self.name)));
                }
                let point: Vec<Vec<f64>> = self.domain.iter().map(|&(lo, hi)| vec![rng.gen_range(lo..hi)]).collect();
                if let Evaluation::Valid(v) = tree.evaluate(&point) {
                    for (c, p) in columns.iter_mut().zip(&point) {
                        c.push(p[0]);
                    }
                    y.push(v[0]);
                }
            }
            Dataset::new(columns, y)
        };
        let train = draw(self.n_train)?;
        let test = draw(self.n_test)?;
        Ok((train, test))
    }
}

fn koza_library(vars: usize) -> Vec<String> {
    let mut v: Vec<String> = KOZA_OPERATORS.iter().map(|s| s.to_string()).collect();
    v.extend((1..=vars).map(|i| format!("x{i}")));
    v
}

/// Nguyen-1 through Nguyen-12.
pub fn nguyen_spec(id: usize) -> Result<BenchmarkSpec> {
    let (truth, vars, lo, hi) = match id {
        1 => ("add add pow x1 3 pow x1 2 x1", 1, -1.0, 1.0),
        2 => ("add add add pow x1 4 pow x1 3 pow x1 2 x1", 1, -1.0, 1.0),
        3 => ("add add add add pow x1 5 pow x1 4 pow x1 3 pow x1 2 x1", 1, -1.0, 1.0),
        4 => ("add add add add add pow x1 6 pow x1 5 pow x1 4 pow x1 3 pow x1 2 x1", 1, -1.0, 1.0),
        5 => ("sub mul sin pow x1 2 cos x1 1", 1, -1.0, 1.0),
        6 => ("add sin x1 sin add x1 pow x1 2", 1, -1.0, 1.0),
        7 => ("add log add x1 1 log add pow x1 2 1", 1, 0.0, 2.0),
        8 => ("sqrt x1", 1, 0.0, 4.0),
        9 => ("add sin x1 sin pow x2 2", 2, -1.0, 1.0),
        10 => ("mul mul 2 sin x1 cos x2", 2, -1.0, 1.0),
        11 => ("pow x1 x2", 2, 0.0, 2.0),
        12 => ("sub add sub pow x1 4 pow x1 3 mul 0.5 pow x2 2 x2", 2, -1.0, 1.0),
        _ => return Err(Error::Config(format!("unknown benchmark nguyen-{id} (valid: 1..12)"))),
    };
    Ok(BenchmarkSpec {
        name: format!("nguyen-{id}"),
        truth: truth.to_string(),
        n_vars: vars,
        domain: vec![(lo, hi); vars],
        n_train: 20,
        n_test: 20,
        library: koza_library(vars),
    })
}

pub fn benchmark_names() -> Vec<String> {
    (1..=12).map(|i| format!("nguyen-{i}")).collect()
}

/// Looks up a benchmark by name, e.g. `nguyen-5`.
pub fn benchmark_by_name(name: &str) -> Result<BenchmarkSpec> {
    let lower = name.to_ascii_lowercase();
    if let Some(rest) = lower.strip_prefix("nguyen-") {
        if let Ok(id) = rest.parse() {
            return nguyen_spec(id);
        }
    }
    Err(Error::Config(format!(
        "unknown benchmark `{name}` (available: nguyen-1 .. nguyen-12)"
    )))
}

/// Search settings shared by every seed of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub trainer: TrainerConfig,
    /// Genetic-programming inner loop; `None` disables it.
    pub gp: Option<GpConfig>,
    pub constraints: Vec<String>,
    pub min_len: usize,
    pub max_len: usize,
    /// Replaces the benchmark's default token set.
    pub library: Option<Vec<String>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trainer: TrainerConfig::default(),
            gp: None,
            constraints: default_constraints(),
            min_len: DEFAULT_MIN_LEN,
            max_len: DEFAULT_MAX_LEN,
            library: None,
        }
    }
}

pub fn default_constraints() -> Vec<String> {
    ["length", "no_const_children", "inverse", "trig"].iter().map(|s| s.to_string()).collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.trainer.validate()?;
        if let Some(g) = &self.gp {
            g.validate()?;
        }
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        if !self.constraints.iter().any(|c| c == "length") {
            return Err(Error::Config(
                "constraints must include `length` so every sample terminates".into(),
            ));
        }
        Ok(())
    }

    pub fn trainer_label(&self) -> String {
        match &self.gp {
            Some(_) => format!("gp+{}", self.trainer.kind.name()),
            None => self.trainer.kind.name().to_string(),
        }
    }

    pub fn library_for(&self, spec: &BenchmarkSpec) -> Result<TokenLibrary> {
        match &self.library {
            Some(symbols) => TokenLibrary::from_symbols(symbols),
            None => spec.search_library(),
        }
    }

    pub fn adjusters(&self, lib: &TokenLibrary) -> Result<LogitAdjusters> {
        LogitAdjusters::from_names(&self.constraints, self.min_len, self.max_len, lib)
    }

    /// Draws `probes` sequences from a uniform policy under the configured
    /// constraints and fails with `Unsatisfiable` if any step has no
    /// admissible token.
    pub fn check_satisfiable(&self, lib: &TokenLibrary, probes: usize, seed: u64) -> Result<()> {
        let adjusters = self.adjusters(lib)?;
        let policy = PolicyParams::zeros(1, lib.len())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..probes {
            policy.sample_sequence(lib, &adjusters, &mut rng, self.max_len)?;
        }
        Ok(())
    }
}

/// One row of the per-seed results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub benchmark: String,
    pub trainer: String,
    pub seed: u64,
    pub recovered: bool,
    pub match_kind: String,
    /// Iteration of recovery; absent when censored.
    pub steps_to_solve: Option<usize>,
    pub censored: bool,
    pub invalid_fraction: f64,
    pub best_reward: f64,
    pub best_expr: String,
    pub test_nmse: f64,
    pub wall_time: f64,
    pub evals_used: u64,
    pub const_evals: u64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedOutcome {
    pub record: RunRecord,
    pub result: RunResult,
    /// Policy parameters at the end of the run.
    pub policy: PolicyParams,
}

/// Runs one seed, stopping early once the best expression is equivalent
/// to the ground truth.
pub fn run_seed(spec: &BenchmarkSpec, cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let lib = cfg.library_for(spec)?;
    let (train, test) = spec.make_dataset(seed)?;
    let truth = spec.truth_tree();
    search_seed(&spec.name, cfg, &lib, &train, &test, Some((&truth, &spec.domain)), seed)
}

/// Runs one seed on the given data. With a ground truth and its sampling
/// domain, stops early once an expression equivalent to it is found.
pub fn search_seed(
    name: &str,
    cfg: &ExperimentConfig,
    lib: &TokenLibrary,
    train: &Dataset,
    test: &Dataset,
    truth: Option<(&ExpressionTree, &[(f64, f64)])>,
    seed: u64,
) -> Result<SeedOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let adjusters = cfg.adjusters(lib)?;
    let mut searcher =
        Searcher::new(&cfg.trainer, cfg.gp.as_ref(), lib, train, &adjusters, seed)?.with_fit_threshold(RECOVERY_NMSE);
    let mut checked = 0;
    let mut solved: Option<(usize, Equivalence, Traversal)> = None;
    while searcher.can_step() {
        searcher.step()?;
        let Some((truth, domain)) = truth else { continue };
        let fits = searcher.near_perfect();
        for t in &fits[checked..] {
            let Ok(tree) = ExpressionTree::from_traversal(t, lib) else { continue };
            let eq = symbolically_equivalent(&tree, truth, domain);
            if eq.is_equivalent() {
                solved = Some((searcher.iteration(), eq, t.clone()));
                break;
            }
        }
        checked = fits.len();
        if let Some((_, _, t)) = &solved {
            searcher.prefer(t);
            break;
        }
    }
    let (policy, result) = searcher.into_parts();
    let (best_reward, best_expr, test_nmse) = match &result.best {
        Some(b) => (b.reward, b.infix.clone(), nmse_of(&b.traversal, lib, &b.constants, test)),
        None => (0.0, String::new(), f64::INFINITY),
    };
    let record = RunRecord {
        benchmark: name.to_string(),
        trainer: cfg.trainer_label(),
        seed,
        recovered: solved.is_some(),
        match_kind: match solved {
            Some((_, Equivalence::Canonical, _)) => "canonical",
            Some((_, Equivalence::Numeric, _)) => "numeric",
            _ => "none",
        }
        .to_string(),
        steps_to_solve: solved.as_ref().map(|(i, _, _)| *i),
        censored: solved.is_none(),
        invalid_fraction: result.invalid_fraction,
        best_reward,
        best_expr,
        test_nmse,
        wall_time: start.elapsed().as_secs_f64(),
        evals_used: result.evals_used,
        const_evals: result.const_evals,
        iterations: result.iterations,
    };
    Ok(SeedOutcome { record, result, policy })
}

/// Runs every seed (in parallel when `jobs > 1`) and returns the records in
/// seed order.
pub fn run_experiment(
    spec: &BenchmarkSpec,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<SeedOutcome>> {
    cfg.validate()?;
    if jobs <= 1 {
        return seeds.iter().map(|&s| run_seed(spec, cfg, s)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| seeds.par_iter().map(|&s| run_seed(spec, cfg, s)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub recovered: usize,
    pub recovery_rate: f64,
    /// Bernoulli standard error of the recovery rate.
    pub recovery_se: f64,
    /// Mean iterations over recovered runs only.
    pub mean_steps: Option<f64>,
    pub censored: usize,
    pub mean_invalid: f64,
    pub invalid_se: f64,
}

pub fn summarize(records: &[RunRecord]) -> Summary {
    let n = records.len();
    let k = records.iter().filter(|r| r.recovered).count();
    let p = if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let se = if n == 0 { 0.0 } else { (p * (1.0 - p) / n as f64).sqrt() };
    let steps: Vec<f64> = records.iter().filter_map(|r| r.steps_to_solve).map(|s| s as f64).collect();
    let inv: Vec<f64> = records.iter().map(|r| r.invalid_fraction).collect();
    let mean_inv = if n == 0 { 0.0 } else { inv.iter().sum::<f64>() / n as f64 };
    let inv_se = if n < 2 {
        0.0
    } else {
        let var = inv.iter().map(|v| (v - mean_inv).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Summary {
        runs: n,
        recovered: k,
        recovery_rate: p,
        recovery_se: se,
        mean_steps: if steps.is_empty() {
            None
        } else {
            Some(steps.iter().sum::<f64>() / steps.len() as f64)
        },
        censored: n - k,
        mean_invalid: mean_inv,
        invalid_se: inv_se,
    }
}

/// Groups records by `(benchmark, trainer)` in first-seen order.
pub fn group_records(records: &[RunRecord]) -> Vec<(String, String, Summary)> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in records {
        let k = (r.benchmark.clone(), r.trainer.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(b, t)| {
            let rows: Vec<RunRecord> = records
                .iter()
                .filter(|r| r.benchmark == b && r.trainer == t)
                .cloned()
                .collect();
            let s = summarize(&rows);
            (b, t, s)
        })
        .collect()
}

/// Aligned recovery table, one row per benchmark and trainer.
pub fn format_table(rows: &[(String, String, Summary)]) -> String {
    let header = ["benchmark", "trainer", "runs", "recovery", "+/- se", "mean steps", "invalid"];
    let body: Vec<[String; 7]> = rows
        .iter()
        .map(|(b, t, s)| {
            [
                b.clone(),
                t.clone(),
                s.runs.to_string(),
                format!("{:.0}%", 100.0 * s.recovery_rate),
                format!("{:.1}%", 100.0 * s.recovery_se),
                s.mean_steps.map_or("-".to_string(), |m| format!("{m:.1}")),
                format!("{:.1}%", 100.0 * s.mean_invalid),
            ]
        })
        .collect();
    let mut width = header.map(str::len);
    for row in &body {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(width)
            .enumerate()
            .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (width.len() - 1)));
    out.push('\n');
    for row in &body {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}
