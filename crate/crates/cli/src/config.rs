//! Experiment configuration (one JSON document per experiment).
//!
//! Relative paths are resolved against the directory containing the config
//! file.

use std::path::{Path, PathBuf};

use bfem::assembly::Polynomial;
use bfem::bayes::PriorSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemConfig,
    pub prior: PriorSpec,
    #[serde(default)]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default = "default_cap")]
    pub dense_cap: usize,
}

fn default_cap() -> usize {
    bfem::DEFAULT_DENSE_CAP
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Interval (0, 1) with `n` fine and `m` coarse elements.
    Bar {
        n: usize,
        m: usize,
        #[serde(default = "bfem::problems::bar_coefficient")]
        coefficient: Polynomial,
        #[serde(default = "unit")]
        load: f64,
        #[serde(default)]
        left_value: f64,
        #[serde(default)]
        right_value: f64,
    },
    /// Plane-stress plate on a triangle mesh (the bundled perforated plate
    /// unless `mesh` names a file).
    Plate {
        #[serde(default)]
        mesh: Option<PathBuf>,
        #[serde(default = "one_level")]
        levels: usize,
        #[serde(default = "plate_e")]
        youngs_modulus: f64,
        #[serde(default = "plate_nu")]
        poisson_ratio: f64,
        #[serde(default = "unit")]
        thickness: f64,
        #[serde(default = "plate_load")]
        load: [f64; 2],
        #[serde(default = "plate_dirichlet")]
        dirichlet: Vec<String>,
    },
}

fn unit() -> f64 {
    1.0
}

fn one_level() -> usize {
    1
}

fn plate_e() -> f64 {
    3.0
}

fn plate_nu() -> f64 {
    0.2
}

fn plate_load() -> [f64; 2] {
    [1.0, 0.0]
}

fn plate_dirichlet() -> Vec<String> {
    vec!["left".to_string()]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    #[default]
    ViaF,
    ViaU,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub method: SamplingMethod,
    /// Number of samples written next to the fields.
    #[serde(default = "default_export")]
    pub export: usize,
    #[serde(default)]
    pub diagonal_approximation: bool,
}

fn default_export() -> usize {
    30
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    /// Eigen-rescaled standard deviations (needs a dense posterior).
    #[serde(default = "yes")]
    pub rescaled: bool,
    /// Full ensemble as `samples.csv`.
    #[serde(default)]
    pub samples: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_dir(), rescaled: true, samples: false }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("output")
}

fn yes() -> bool {
    true
}

/// A parsed config together with the directory its paths are relative to.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.outputs.directory)
    }
}

fn field_error(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() {
            return Err(field_error("name", "must not be empty"));
        }
        match &self.problem {
            ProblemConfig::Bar { n, m, coefficient, .. } => {
                if *m == 0 {
                    return Err(field_error("problem.m", "must be positive"));
                }
                if *n == 0 || n % m != 0 {
                    return Err(field_error("problem.n", format!("{n} is not a positive multiple of m = {m}")));
                }
                if coefficient.0.is_empty() {
                    return Err(field_error("problem.coefficient", "needs at least one coefficient"));
                }
            }
            ProblemConfig::Plate { levels, .. } => {
                if *levels == 0 {
                    return Err(field_error("problem.levels", "must be at least 1"));
                }
            }
        }
        self.prior.validate().map_err(|e| field_error("prior", e))?;
        if let Some(ens) = &self.ensemble {
            if ens.samples == 0 {
                return Err(field_error("ensemble.samples", "must be positive"));
            }
            if ens.export > ens.samples {
                return Err(field_error("ensemble.export", "exceeds the ensemble size"));
            }
        }
        if self.dense_cap == 0 {
            return Err(field_error("dense_cap", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_bar_config_uses_defaults() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"name": "b", "problem": {"kind": "bar", "n": 64, "m": 4}, "prior": {"kind": "greens"}}"#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.dense_cap, 4096);
        assert!(c.ensemble.is_none());
        match c.problem {
            ProblemConfig::Bar { coefficient, load, .. } => {
                assert_eq!(coefficient.0, vec![0.1, -0.099]);
                assert_eq!(load, 1.0);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn validation_names_the_field() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"name": "b", "problem": {"kind": "bar", "n": 64, "m": 5}, "prior": {"kind": "greens"}}"#,
        )
        .unwrap();
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("problem.n"), "{err}");
        let unknown = serde_json::from_str::<ExperimentConfig>(
            r#"{"name": "b", "problem": {"kind": "bar", "n": 4, "m": 4, "x": 1}, "prior": {"kind": "greens"}}"#,
        );
        assert!(unknown.is_err());
    }
}
