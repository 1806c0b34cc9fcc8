//! Run configuration: a single JSON document selecting the model, the grid,
//! the verification suites to run, tolerance overrides, and output options.
//!
//! Every field that drives the numerics is content-addressed — no paths,
//! timestamps, or host data — so a given config always produces the same
//! report bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use pdmverify_core::coordmap::Branch;

/// Errors that make the run impossible before any suite executes. These map
/// to exit code 2.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("config is not valid JSON: {message}")]
    Json { message: String },
    #[error("unknown suite name {name:?} (expected one of: {expected})")]
    UnknownSuite { name: String, expected: String },
    #[error("no suites requested (config `suites` is empty and no --suite flags given)")]
    NoSuites,
    #[error("tolerance for {suite} must be a positive finite number, got {value}")]
    BadTolerance { suite: String, value: f64 },
    #[error("malformed --tol argument {arg:?} (expected suite=value)")]
    BadTolArg { arg: String },
    #[error("unknown output format {name:?} (expected json, csv, or table)")]
    UnknownFormat { name: String },
    #[error("model is invalid on this grid: {message}")]
    Model { message: String },
}

/// The full parsed config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    #[serde(default)]
    pub suites: Vec<String>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub evolution: EvolutionSection,
    #[serde(default)]
    pub backlund: BacklundSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Scalar model data. The expression strings use the grammar of the
/// expression language in the core crate; `f` is optional and overrides the
/// closed form built from `u` and `big_g` (required when `big_g` vanishes
/// somewhere on the grid).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "expr_one")]
    pub u: String,
    #[serde(default = "expr_zero")]
    pub a: String,
    #[serde(default = "expr_one")]
    pub big_g: String,
    #[serde(default = "expr_zero")]
    pub small_g: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "one")]
    pub lambda1: f64,
    #[serde(default)]
    pub lambda2: f64,
    #[serde(default)]
    pub branch: BranchChoice,
}

fn expr_one() -> String {
    "1".to_string()
}

fn expr_zero() -> String {
    "0".to_string()
}

fn one() -> f64 {
    1.0
}

/// Which sign of the closed-form map factor to use.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum BranchChoice {
    #[default]
    Plus,
    Minus,
}

impl BranchChoice {
    pub fn to_branch(self) -> Branch {
        match self {
            BranchChoice::Plus => Branch::Plus,
            BranchChoice::Minus => Branch::Minus,
        }
    }
}

/// Uniform grid parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

/// Crank–Nicolson parameters for the conservation suite and export.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionSection {
    pub dt: f64,
    pub steps: usize,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        EvolutionSection { dt: 1e-3, steps: 1000 }
    }
}

/// Stage multipliers for the three-fold chain of the transformation suite.
/// All three must be positive so the stage coordinates stay monotone.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacklundSection {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for BacklundSection {
    fn default() -> Self {
        BacklundSection { lambda1: 1.0, lambda2: 1.0, lambda3: 1.0 }
    }
}

/// Where and how the verify report is written.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub format: Format,
    pub path: Option<String>,
}

/// Report rendering formats.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Table,
}

impl Format {
    pub fn parse(name: &str) -> Result<Format, ConfigError> {
        match name {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "table" => Ok(Format::Table),
            other => Err(ConfigError::UnknownFormat { name: other.to_string() }),
        }
    }
}

/// The verification suites, declared in name order so sorting enum values
/// sorts their report lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    BacklundClosure,
    Conservation,
    Coordmap,
    Decomposition,
    Factorization,
    Hermiticity,
    IntertwineMinus,
    IntertwinePlus,
    Orthogonality,
    Similarity,
    Spectrum,
    TauCheck,
}

impl Suite {
    pub const ALL: [Suite; 12] = [
        Suite::BacklundClosure,
        Suite::Conservation,
        Suite::Coordmap,
        Suite::Decomposition,
        Suite::Factorization,
        Suite::Hermiticity,
        Suite::IntertwineMinus,
        Suite::IntertwinePlus,
        Suite::Orthogonality,
        Suite::Similarity,
        Suite::Spectrum,
        Suite::TauCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::BacklundClosure => "backlund_closure",
            Suite::Conservation => "conservation",
            Suite::Coordmap => "coordmap",
            Suite::Decomposition => "decomposition",
            Suite::Factorization => "factorization",
            Suite::Hermiticity => "hermiticity",
            Suite::IntertwineMinus => "intertwine_minus",
            Suite::IntertwinePlus => "intertwine_plus",
            Suite::Orthogonality => "orthogonality",
            Suite::Similarity => "similarity",
            Suite::Spectrum => "spectrum",
            Suite::TauCheck => "tau_check",
        }
    }

    pub fn parse(name: &str) -> Result<Suite, ConfigError> {
        Suite::ALL
            .iter()
            .copied()
            .find(|s| s.name() == name)
            .ok_or_else(|| ConfigError::UnknownSuite {
                name: name.to_string(),
                expected: Suite::ALL
                    .iter()
                    .map(|s| s.name())
                    .collect::<Vec<_>>()
                    .join(", "),
            })
    }

    /// Headline tolerance used when neither the config nor the command line
    /// overrides it.
    pub fn default_tolerance(self) -> f64 {
        match self {
            Suite::BacklundClosure => 1e-5,
            Suite::Conservation => 1e-6,
            Suite::Coordmap => 1e-5,
            Suite::Decomposition => 1e-3,
            Suite::Factorization => 1e-3,
            Suite::Hermiticity => 1e-8,
            Suite::IntertwineMinus => 1e-4,
            Suite::IntertwinePlus => 1e-4,
            Suite::Orthogonality => 1e-3,
            Suite::Similarity => 1e-3,
            Suite::Spectrum => 1e-6,
            Suite::TauCheck => 1e-3,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Read and parse the config file.
pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Json { message: e.to_string() })
}

/// Final suite selection: command-line `--suite` flags replace the config
/// list when present. The result is sorted and deduplicated so reports are
/// ordered by suite name.
pub fn resolve_suites(
    config: &RunConfig,
    cli_suites: &[String],
) -> Result<Vec<Suite>, ConfigError> {
    let names: &[String] = if cli_suites.is_empty() {
        &config.suites
    } else {
        cli_suites
    };
    let mut suites = names
        .iter()
        .map(|n| Suite::parse(n))
        .collect::<Result<Vec<_>, _>>()?;
    suites.sort();
    suites.dedup();
    if suites.is_empty() {
        return Err(ConfigError::NoSuites);
    }
    Ok(suites)
}

/// Final per-suite tolerances: defaults, then config overrides, then
/// command-line `--tol suite=value` overrides.
pub fn resolve_tolerances(
    config: &RunConfig,
    cli_tols: &[String],
) -> Result<BTreeMap<Suite, f64>, ConfigError> {
    let mut out: BTreeMap<Suite, f64> = Suite::ALL
        .iter()
        .map(|&s| (s, s.default_tolerance()))
        .collect();
    for (name, &value) in &config.tolerances {
        let suite = Suite::parse(name)?;
        check_tolerance(suite, value)?;
        out.insert(suite, value);
    }
    for arg in cli_tols {
        let (name, value) = arg
            .split_once('=')
            .ok_or_else(|| ConfigError::BadTolArg { arg: arg.clone() })?;
        let suite = Suite::parse(name.trim())?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| ConfigError::BadTolArg { arg: arg.clone() })?;
        check_tolerance(suite, value)?;
        out.insert(suite, value);
    }
    Ok(out)
}

fn check_tolerance(suite: Suite, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::BadTolerance { suite: suite.name().to_string(), value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(suites: &str) -> RunConfig {
        let text = format!(
            r#"{{"model": {{}}, "grid": {{"x_min": -1.0, "x_max": 1.0, "n": 11}},
                "suites": {suites}}}"#
        );
        serde_json::from_str(&text).unwrap()
    }

    #[test]
    fn suite_names_round_trip_and_sort() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse(s.name()).unwrap(), s);
        }
        let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted, "declaration order must match name order");
    }

    #[test]
    fn unknown_suite_is_a_config_error() {
        let cfg = minimal(r#"["spectral"]"#);
        assert!(matches!(
            resolve_suites(&cfg, &[]),
            Err(ConfigError::UnknownSuite { .. })
        ));
    }

    #[test]
    fn cli_suites_replace_config_suites() {
        let cfg = minimal(r#"["spectrum", "hermiticity"]"#);
        let picked = resolve_suites(&cfg, &["conservation".to_string()]).unwrap();
        assert_eq!(picked, vec![Suite::Conservation]);
    }

    #[test]
    fn suites_are_sorted_and_deduplicated() {
        let cfg = minimal(r#"["spectrum", "hermiticity", "spectrum"]"#);
        let picked = resolve_suites(&cfg, &[]).unwrap();
        assert_eq!(picked, vec![Suite::Hermiticity, Suite::Spectrum]);
    }

    #[test]
    fn empty_selection_is_rejected() {
        let cfg = minimal("[]");
        assert!(matches!(resolve_suites(&cfg, &[]), Err(ConfigError::NoSuites)));
    }

    #[test]
    fn tolerance_layering_defaults_config_cli() {
        let mut cfg = minimal(r#"["spectrum"]"#);
        cfg.tolerances.insert("spectrum".into(), 1e-4);
        let tols =
            resolve_tolerances(&cfg, &["hermiticity=1e-2".to_string()]).unwrap();
        assert_eq!(tols[&Suite::Spectrum], 1e-4);
        assert_eq!(tols[&Suite::Hermiticity], 1e-2);
        assert_eq!(
            tols[&Suite::Conservation],
            Suite::Conservation.default_tolerance()
        );
    }

    #[test]
    fn bad_tolerances_are_rejected() {
        let cfg = minimal(r#"["spectrum"]"#);
        assert!(resolve_tolerances(&cfg, &["spectrum=-1".to_string()]).is_err());
        assert!(resolve_tolerances(&cfg, &["spectrum".to_string()]).is_err());
        assert!(resolve_tolerances(&cfg, &["nope=1e-3".to_string()]).is_err());
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        let text = r#"{"model": {}, "grid": {"x_min": 0, "x_max": 1, "n": 9},
                       "suits": ["spectrum"]}"#;
        assert!(serde_json::from_str::<RunConfig>(text).is_err());
    }
}
