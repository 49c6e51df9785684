//! TOML experiment configs, one experiment per file.
//!
//! ```toml
//! name = "concrete-shape"
//! seed = 42
//! n_new_features = 5
//! methods = ["ols", "dp", "dsft", "dsft-nl"]
//! correction = "holm"       # none | holm | bonferroni
//! intercept = true
//!
//! [source]
//! kind = "csv"              # or "generator"
//! path = "data.csv"         # csv: relative paths resolve against the config file
//! label_column = "y"
//! # generator fields:
//! # scenario = "baseline"   # baseline | shifted | correlated | distribution-shift | non-additive
//! # c = 0.5                 # correlated only
//! # mu_source = 1.0         # distribution-shift only
//! # mu_target = 2.0
//! # sigma = 1.0
//! # theta = [2.0, 2.0, -2.0]
//!
//! [protocol]
//! kind = "small"            # small | large
//! n_source = 114
//! n_target = 38
//! n_test = 103
//! runs = 21
//! # test_fraction = 0.10    # large only
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::simgen::{GeneratorKind, GeneratorSpec};

use super::{Correction, DataSource, ExperimentSpec, Method, Protocol};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    seed: Option<u64>,
    n_new_features: Option<usize>,
    methods: Vec<String>,
    correction: Option<String>,
    intercept: Option<bool>,
    source: RawSource,
    protocol: RawProtocol,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    kind: String,
    path: Option<PathBuf>,
    label_column: Option<String>,
    scenario: Option<String>,
    c: Option<f64>,
    mu_source: Option<f64>,
    mu_target: Option<f64>,
    sigma: Option<f64>,
    theta: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    kind: String,
    n_source: Option<usize>,
    n_target: Option<usize>,
    n_test: Option<usize>,
    runs: usize,
    test_fraction: Option<f64>,
}

fn missing(field: &str) -> Error {
    Error::Config(format!("missing field `{field}`"))
}

fn parse_generator(raw: &RawSource) -> Result<GeneratorSpec> {
    let scenario = raw.scenario.as_deref().ok_or_else(|| missing("source.scenario"))?;
    let kind = match scenario {
        "baseline" => GeneratorKind::BaselineLinear,
        "shifted" => GeneratorKind::ShiftedNewFeature,
        "correlated" => GeneratorKind::CorrelatedInputs {
            c: raw.c.ok_or_else(|| missing("source.c"))?,
        },
        "distribution-shift" => GeneratorKind::DistributionShift {
            mu_source: raw.mu_source.ok_or_else(|| missing("source.mu_source"))?,
            mu_target: raw.mu_target.ok_or_else(|| missing("source.mu_target"))?,
        },
        "non-additive" => GeneratorKind::NonAdditive,
        other => {
            return Err(Error::Config(format!(
                "unknown scenario `{other}` (expected baseline, shifted, correlated, distribution-shift or non-additive)"
            )))
        }
    };
    // Sizes come from the protocol; placeholders here.
    let mut spec = GeneratorSpec::new(kind, 1, 1, 1, 0);
    if let Some(sigma) = raw.sigma {
        spec.sigma = sigma;
    }
    if let Some(theta) = &raw.theta {
        spec.theta = nalgebra::DVector::from_column_slice(theta);
    }
    Ok(spec)
}

/// Parse a config from TOML text. Relative CSV paths resolve against
/// `base_dir` when given.
pub fn parse_experiment(text: &str, base_dir: Option<&Path>) -> Result<ExperimentSpec> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

    let methods = raw
        .methods
        .iter()
        .map(|m| Method::parse(m))
        .collect::<Result<Vec<_>>>()?;

    let correction = match raw.correction.as_deref() {
        None | Some("holm") => Correction::Holm,
        Some("none") => Correction::None,
        Some("bonferroni") => Correction::Bonferroni,
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown correction `{other}` (expected none, holm or bonferroni)"
            )))
        }
    };

    let protocol = match raw.protocol.kind.as_str() {
        "small" => Protocol::SmallData {
            n_source: raw.protocol.n_source.ok_or_else(|| missing("protocol.n_source"))?,
            n_target: raw.protocol.n_target.ok_or_else(|| missing("protocol.n_target"))?,
            n_test: raw.protocol.n_test.ok_or_else(|| missing("protocol.n_test"))?,
            runs: raw.protocol.runs,
        },
        "large" => Protocol::LargeData {
            test_fraction: raw.protocol.test_fraction.unwrap_or(0.10),
            n_target: raw.protocol.n_target.ok_or_else(|| missing("protocol.n_target"))?,
            runs: raw.protocol.runs,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown protocol kind `{other}` (expected small or large)"
            )))
        }
    };

    let source_of_data = match raw.source.kind.as_str() {
        "csv" => {
            let path = raw.source.path.clone().ok_or_else(|| missing("source.path"))?;
            let path = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path,
            };
            DataSource::Csv {
                path,
                label_column: raw
                    .source
                    .label_column
                    .clone()
                    .ok_or_else(|| missing("source.label_column"))?,
            }
        }
        "generator" => DataSource::Generator(parse_generator(&raw.source)?),
        other => {
            return Err(Error::Config(format!(
                "unknown source kind `{other}` (expected csv or generator)"
            )))
        }
    };

    let is_generator = matches!(source_of_data, DataSource::Generator(_));
    let spec = ExperimentSpec {
        name: raw.name.unwrap_or_else(|| "experiment".to_string()),
        n_new_features: raw.n_new_features.unwrap_or(if is_generator { 1 } else { 0 }),
        source_of_data,
        protocol,
        methods,
        seed: raw.seed.unwrap_or(0),
        correction,
        // Generators already emit an intercept column.
        intercept: raw.intercept.unwrap_or(!is_generator),
    };
    spec.validate()?;
    Ok(spec)
}

/// Load an experiment config file; relative CSV paths resolve against the
/// config's directory.
pub fn load_experiment(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)?;
    let mut spec = parse_experiment(&text, path.parent())?;
    if spec.name == "experiment" {
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            spec.name = stem.to_string();
        }
    }
    Ok(spec)
}
