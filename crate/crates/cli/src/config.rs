//! Run configuration: JSON file, dotted-path overrides, validation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use symopt_core::benchmark::{benchmark_by_name, default_constraints, BenchmarkSpec, ExperimentConfig};
use symopt_core::gp::GpConfig;
use symopt_core::priors::{DEFAULT_MAX_LEN, DEFAULT_MIN_LEN};
use symopt_core::train::TrainerConfig;
use symopt_core::TokenLibrary;

use crate::error::{CliError, CliResult};

/// Sequences drawn from a uniform policy to test that the constraints can
/// always be met.
const SATISFIABILITY_PROBES: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Registered benchmark name, e.g. `nguyen-5`.
    pub benchmark: Option<String>,
    /// CSV file with feature columns followed by the target column.
    pub dataset: Option<PathBuf>,
    pub trainer: TrainerConfig,
    pub gp: Option<GpConfig>,
    pub constraints: Vec<String>,
    pub min_len: usize,
    pub max_len: usize,
    pub library: Option<Vec<String>>,
    /// Number of seeds to run.
    pub seeds: u64,
    pub first_seed: u64,
    /// Fraction of a CSV dataset held out for testing.
    pub holdout: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            benchmark: None,
            dataset: None,
            trainer: TrainerConfig::default(),
            gp: None,
            constraints: default_constraints(),
            min_len: DEFAULT_MIN_LEN,
            max_len: DEFAULT_MAX_LEN,
            library: None,
            seeds: 1,
            first_seed: 0,
            holdout: 0.2,
            output_dir: None,
        }
    }
}

/// What a run searches over.
pub enum Problem {
    Benchmark(BenchmarkSpec),
    Dataset(PathBuf),
}

impl RunConfig {
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            trainer: self.trainer.clone(),
            gp: self.gp.clone(),
            constraints: self.constraints.clone(),
            min_len: self.min_len,
            max_len: self.max_len,
            library: self.library.clone(),
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (self.first_seed..self.first_seed + self.seeds).collect()
    }

    /// Checks everything that can be checked without data.
    pub fn validate(&self) -> CliResult<()> {
        self.experiment().validate()?;
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(CliError::Invalid(format!(
                "config field `holdout` must lie in (0, 1), got {}",
                self.holdout
            )));
        }
        Ok(())
    }

    /// Benchmark or dataset named by the config; exactly one is required.
    pub fn problem(&self) -> CliResult<Problem> {
        match (&self.benchmark, &self.dataset) {
            (Some(name), None) => Ok(Problem::Benchmark(benchmark_by_name(name)?)),
            (None, Some(path)) => Ok(Problem::Dataset(path.clone())),
            (None, None) => Err(CliError::Invalid(
                "config field `benchmark` is required (or set `dataset` to a CSV file)".into(),
            )),
            (Some(_), Some(_)) => Err(CliError::Invalid(
                "config fields `benchmark` and `dataset` are mutually exclusive".into(),
            )),
        }
    }

    /// Fails with exit code 3 if the constraints can dead-end a sequence.
    pub fn check_satisfiable(&self, lib: &TokenLibrary) -> CliResult<()> {
        self.experiment()
            .check_satisfiable(lib, SATISFIABILITY_PROBES, 0)
            .map_err(CliError::from)
    }
}

/// Reads a config file, reporting JSON and schema errors with their line
/// and column.
pub fn read_config_value(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str::<RunConfig>(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    Ok(value)
}

/// Sets `path` (dot separated) in `root` to `raw`, parsed as JSON when
/// possible and as a string otherwise.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> CliResult<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Invalid(format!("malformed override key `{path}`")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        if !node.is_object() {
            *node = Value::Object(Map::new());
        }
        let map = node.as_object_mut().expect("object");
        let child = map.entry(key.to_string()).or_insert(Value::Null);
        if !child.is_object() {
            *child = Value::Object(Map::new());
        }
        node = child;
    }
    if !node.is_object() {
        *node = Value::Object(Map::new());
    }
    node.as_object_mut()
        .expect("object")
        .insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> CliResult<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(CliError::Invalid(format!("override `{s}` must have the form key=value"))),
    }
}

/// Builds the final config from an optional base, then overrides in order.
pub fn resolve(base: Option<Value>, overrides: &[(String, String)]) -> CliResult<RunConfig> {
    let mut value = base.unwrap_or_else(|| Value::Object(Map::new()));
    for (k, v) in overrides {
        apply_override(&mut value, k, v)?;
    }
    serde_json::from_value(value).map_err(|e| {
        let keys: Vec<&str> = overrides.iter().map(|(k, _)| k.as_str()).collect();
        if keys.is_empty() {
            CliError::Invalid(format!("invalid config: {e}"))
        } else {
            CliError::Invalid(format!("invalid config after overrides ({}): {e}", keys.join(", ")))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_nested_fields() {
        let mut v = serde_json::json!({"gp": null});
        apply_override(&mut v, "trainer.epsilon", "0.1").unwrap();
        apply_override(&mut v, "gp.generations", "3").unwrap();
        apply_override(&mut v, "benchmark", "nguyen-2").unwrap();
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert_eq!(cfg.trainer.epsilon, 0.1);
        assert_eq!(cfg.gp.unwrap().generations, 3);
        assert_eq!(cfg.benchmark.as_deref(), Some("nguyen-2"));
    }

    #[test]
    fn unknown_override_field_is_named() {
        let err = resolve(None, &[("trainer.epsilno".into(), "0.1".into())]).unwrap_err();
        assert!(err.to_string().contains("epsilno"));
    }

    #[test]
    fn assignment_parsing() {
        assert_eq!(parse_assignment("a.b = 3").unwrap(), ("a.b".into(), "3".into()));
        assert!(parse_assignment("novalue").is_err());
        assert!(parse_assignment("=3").is_err());
    }
}
