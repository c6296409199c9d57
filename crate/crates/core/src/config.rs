//! Experiment configuration read from JSON. Unknown keys are rejected and
//! every error names the offending location (e.g. `specs[0].c`).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::attrib::Method;
use crate::datagen::GeneratorSpec;
use crate::error::{Error, Result};
use crate::evalmetrics::BenchmarkConfig;
use crate::scalar::Scalar;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Md,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(serialize = "T: Scalar", deserialize = "T: Scalar")
)]
pub struct ExperimentConfig<T> {
    #[serde(default)]
    pub specs: Vec<GeneratorSpec<T>>,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Number of seeds; the run uses `base_seed, base_seed + 1, ..`.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub benchmark: BenchmarkConfig<T>,
    /// Point explained by the `attribute` command; defaults to the first sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_n() -> usize {
    100_000
}
fn default_seeds() -> usize {
    20
}
fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn all_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json, OutputFormat::Md]
}

impl<T: Scalar> Default for ExperimentConfig<T> {
    fn default() -> Self {
        Self {
            specs: vec![GeneratorSpec::reference_a(T::lit(0.8))],
            n: default_n(),
            seeds: default_seeds(),
            base_seed: 0,
            methods: all_methods(),
            benchmark: BenchmarkConfig::default(),
            point: None,
            output_dir: None,
            formats: all_formats(),
        }
    }
}

impl<T: Scalar> ExperimentConfig<T> {
    /// Parses and validates.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let location = if inner.line() > 0 {
                format!(" (line {}, column {})", inner.line(), inner.column())
            } else {
                String::new()
            };
            Error::config(path, format!("{inner}{location}"))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.specs.is_empty() {
            return Err(Error::config("specs", "at least one generator spec is required"));
        }
        for (i, spec) in self.specs.iter().enumerate() {
            spec.validate()
                .map_err(|e| Error::config(format!("specs[{i}]"), e.to_string()))?;
        }
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if self.seeds == 0 {
            return Err(Error::config("seeds", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        if self.formats.is_empty() {
            return Err(Error::config("formats", "at least one output format is required"));
        }
        self.benchmark.validate().map_err(|e| match e {
            Error::Config { path, message } => Error::config(format!("benchmark.{path}"), message),
            other => other,
        })?;
        if let Some(p) = &self.point {
            if let Some(spec) = self.specs.first() {
                if p.len() != spec.dim() {
                    return Err(Error::config(
                        "point",
                        format!("has {} entries, expected {}", p.len(), spec.dim()),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|k| self.base_seed + k).collect()
    }

    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }
}
