use std::path::{Path, PathBuf};

use dryfric_core::kolmogorov::DEFAULT_MEMORY_BUDGET;
use dryfric_core::Params;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: Params,
    #[serde(default = "default_n_excursions")]
    pub n_excursions: usize,
    /// Velocity refinements; `solve` and `kappa` sweep them, the other
    /// commands use the first.
    #[serde(default = "default_p")]
    pub p: Vec<u32>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub omega_grid: OmegaGrid,
    /// Laplace variables for `durations`; defaults to `Lambda 2^m`, `m = 0..=10`.
    #[serde(default)]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default = "default_nbins")]
    pub nbins: usize,
    #[serde(default = "default_memory_budget")]
    pub memory_budget: u64,
    /// Also run the Monte Carlo route in `durations` and `psd`.
    #[serde(default)]
    pub mc: bool,
    #[serde(default = "default_path_length")]
    pub path_length: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default = "default_welch_segment")]
    pub welch_segment: usize,
    #[serde(default)]
    pub event_cap: Option<u64>,
    #[serde(default)]
    pub extrapolate: Option<ExtrapolateConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtrapolateConfig {
    /// CSV with columns `k,l,value` and optionally `provenance`.
    pub input: PathBuf,
    /// `(k, l)` cells to fill.
    pub targets: Vec<(i32, i32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaGrid {
    List(Vec<f64>),
    Uniform { min: f64, max: f64, count: usize },
}

impl Default for OmegaGrid {
    fn default() -> Self {
        OmegaGrid::Uniform { min: -8.0, max: 8.0, count: 64 }
    }
}

impl OmegaGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OmegaGrid::List(v) => v.clone(),
            OmegaGrid::Uniform { min, max, count } => match count {
                0 => Vec::new(),
                1 => vec![*min],
                n => (0..*n).map(|k| min + (max - min) * k as f64 / (*n - 1) as f64).collect(),
            },
        }
    }
}

fn default_n_excursions() -> usize {
    100_000
}

fn default_p() -> Vec<u32> {
    vec![64]
}

fn default_lambda() -> f64 {
    dryfric_core::kolmogorov::DEFAULT_LAMBDA
}

fn default_nbins() -> usize {
    50
}

fn default_memory_budget() -> u64 {
    DEFAULT_MEMORY_BUDGET
}

fn default_path_length() -> f64 {
    1e4
}

fn default_sample_dt() -> f64 {
    0.05
}

fn default_welch_segment() -> usize {
    4096
}

/// Sets `a.b.c = value` in a JSON object, creating intermediate objects.
fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key '{key}'")));
    }
    let mut cur = root;
    for part in &parts[..parts.len() - 1] {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override '{key}' descends into a non-object")))?;
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    cur.as_object_mut()
        .ok_or_else(|| CliError::Config(format!("override '{key}' descends into a non-object")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// `key=value`, where the value is read as JSON and falls back to a string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{spec}' is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_path(root, key.trim(), value)
}

pub struct Resolved {
    pub config: RunConfig,
    pub hash: String,
}

impl Resolved {
    pub fn output_dir(&self) -> PathBuf {
        self.config.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

pub fn load(
    path: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
    out: Option<&Path>,
    threads: Option<usize>,
) -> Result<Resolved, CliError> {
    let mut root = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    if let Some(s) = seed {
        set_path(&mut root, "params.seed", Value::from(s))?;
    }
    if let Some(o) = out {
        set_path(&mut root, "output_dir", Value::from(o.to_string_lossy().into_owned()))?;
    }
    if let Some(t) = threads {
        set_path(&mut root, "threads", Value::from(t))?;
    }
    let config: RunConfig = serde_json::from_value(root).map_err(|e| CliError::Config(e.to_string()))?;
    validate(&config)?;
    let hash = config_hash(&config);
    Ok(Resolved { config, hash })
}

fn validate(c: &RunConfig) -> Result<(), CliError> {
    c.params.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let bad = |m: String| Err(CliError::Config(m));
    if c.p.is_empty() || c.p.contains(&0) {
        return bad("p must be a non-empty list of positive integers".into());
    }
    if !(c.lambda > 0.0) {
        return bad(format!("lambda must be positive, got {}", c.lambda));
    }
    if c.nbins < 2 {
        return bad("nbins must be at least 2".into());
    }
    if c.n_excursions == 0 {
        return bad("n_excursions must be positive".into());
    }
    if !(c.path_length > 0.0) || !(c.sample_dt > 0.0) || c.sample_dt >= c.path_length {
        return bad("need 0 < sample_dt < path_length".into());
    }
    if c.welch_segment < 4 {
        return bad("welch_segment must be at least 4".into());
    }
    if c.omega_grid.values().iter().any(|w| !w.is_finite()) {
        return bad("omega grid must be finite".into());
    }
    if let Some(g) = &c.lambda_grid {
        if g.len() < 3 || g[0] <= 0.0 || g.windows(2).any(|w| w[1] <= w[0]) {
            return bad("lambda_grid must hold at least 3 increasing positive values".into());
        }
    }
    if c.threads == Some(0) {
        return bad("threads must be positive".into());
    }
    Ok(())
}

/// SHA-256 of the resolved configuration, ignoring settings that cannot
/// change the numbers (output location, thread count).
pub fn config_hash(c: &RunConfig) -> String {
    let mut c = c.clone();
    c.output_dir = None;
    c.threads = None;
    let bytes = serde_json::to_vec(&c).expect("configuration serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Value {
        serde_json::json!({ "params": { "mu_s": 1.0, "mu_d": 0.25, "delta": 0.5 } })
    }

    #[test]
    fn overrides_reach_nested_fields_and_parse_json() {
        let mut v = base();
        apply_override(&mut v, "params.delta=0.25").unwrap();
        apply_override(&mut v, "p=[4,8]").unwrap();
        apply_override(&mut v, "extrapolate.input=data.csv").unwrap();
        assert_eq!(v["params"]["delta"], 0.25);
        assert_eq!(v["p"], serde_json::json!([4, 8]));
        assert_eq!(v["extrapolate"]["input"], "data.csv");
        assert!(apply_override(&mut v, "novalue").is_err());
        assert!(apply_override(&mut v, "params.delta.x=1").is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v = base();
        apply_override(&mut v, "bogus=1").unwrap();
        assert!(serde_json::from_value::<RunConfig>(v).is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let mut a: RunConfig = serde_json::from_value(base()).unwrap();
        let h = config_hash(&a);
        a.output_dir = Some("elsewhere".into());
        a.threads = Some(3);
        assert_eq!(config_hash(&a), h);
        a.params.seed = 9;
        assert_ne!(config_hash(&a), h);
        assert_eq!(h.len(), 64);
    }

    #[test]
    fn omega_grid_forms() {
        assert_eq!(OmegaGrid::default().values().len(), 64);
        let g: OmegaGrid = serde_json::from_str("[0.5, 1.0]").unwrap();
        assert_eq!(g.values(), vec![0.5, 1.0]);
        let g: OmegaGrid = serde_json::from_str(r#"{"min": 0, "max": 1, "count": 3}"#).unwrap();
        assert_eq!(g.values(), vec![0.0, 0.5, 1.0]);
    }
}
