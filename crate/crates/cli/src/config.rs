//! Experiment configuration files.

use std::path::{Path, PathBuf};

use reptest::closeness::ClosenessConfig;
use reptest::independence::IndependenceConfig;
use reptest::uniformity::UniformityConfig;
use reptest::walks::DistanceMetric;
use serde::{Deserialize, Serialize};

use crate::calibrate::{CalibrationSpec, Constants};
use crate::error::{CliError, CliResult};
use crate::instances::{Instance1d, Instance2d, PairInstance};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub experiment: ExperimentSpec,
    /// Bounds checked by `--check`.
    #[serde(default)]
    pub expect: Option<Expectations>,
}

fn default_trials() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum ExperimentSpec {
    ClosenessAcceptance {
        tester: ClosenessConfig,
        instance: PairInstance,
    },
    IndependenceAcceptance {
        tester: IndependenceConfig,
        instance: Instance2d,
    },
    UniformityAcceptance {
        tester: UniformityConfig,
        instance: Instance1d,
    },
    Replicability {
        tester: TesterSpec,
        /// Stratifies a hard instance by `ξ`; `trials` pairs per grid point.
        #[serde(default)]
        xi_grid: Option<Vec<f64>>,
    },
    VarianceAudit {
        target: VarianceTarget,
    },
    Mixing(MixingSpec),
    Concentration {
        tester: UniformityConfig,
        m: f64,
        xi_grid: Vec<f64>,
        #[serde(default = "default_draws")]
        draws_per_xi: usize,
        #[serde(default = "default_acceptance_trials")]
        acceptance_trials: usize,
    },
    Calibration(CalibrationSpec),
}

fn default_draws() -> usize {
    20
}

fn default_acceptance_trials() -> usize {
    200
}

/// A tester paired with the instance (or meta-distribution) it runs on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family", deny_unknown_fields)]
pub enum TesterSpec {
    Closeness {
        config: ClosenessConfig,
        instance: PairInstance,
    },
    Uniformity {
        config: UniformityConfig,
        instance: Instance1d,
    },
    Independence {
        config: IndependenceConfig,
        instance: Instance2d,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family", deny_unknown_fields)]
pub enum VarianceTarget {
    /// `Z` of the closeness statistic on `p = q`.
    Closeness {
        config: ClosenessConfig,
        instance: Instance1d,
    },
    /// `Z_a` and `N_a` on fresh sample sets per trial.
    Independence {
        config: IndependenceConfig,
        instance: Instance2d,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MixingSpec {
    pub walk: WalkSpec,
    pub deltas: Vec<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub metric: DistanceMetric,
    #[serde(default)]
    pub initials: InitialSet,
}

fn default_horizon() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "walk", deny_unknown_fields)]
pub enum WalkSpec {
    Coordinate {
        m: u64,
        n: u64,
        xi: f64,
        #[serde(default)]
        truncation: Option<usize>,
    },
    Pair {
        n: usize,
        m: usize,
        epsilon: f64,
        xi: f64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialSet {
    /// The Poisson laws of the walk's branches (coordinate walk only).
    Poisson,
    PointMasses,
    #[default]
    All,
}

/// Aggregate bounds for `--check`. Every present bound must hold in every group.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub min_accept_rate: Option<f64>,
    pub max_accept_rate: Option<f64>,
    pub max_disagreement: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Validation(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.trials == 0 {
            return Err(CliError::Validation("trials must be at least 1".into()));
        }
        match &self.experiment {
            ExperimentSpec::ClosenessAcceptance { tester, instance } => {
                tester.validate()?;
                instance.validate()?;
            }
            ExperimentSpec::IndependenceAcceptance { tester, instance } => {
                tester.validate()?;
                instance.validate()?;
            }
            ExperimentSpec::UniformityAcceptance { tester, instance } => {
                tester.validate()?;
                instance.validate()?;
            }
            ExperimentSpec::Replicability { tester, xi_grid } => {
                tester.validate()?;
                if xi_grid.as_ref().is_some_and(|g| g.is_empty()) {
                    return Err(CliError::Validation("xi_grid must not be empty".into()));
                }
            }
            ExperimentSpec::VarianceAudit { target } => match target {
                VarianceTarget::Closeness { config, instance } => {
                    config.validate()?;
                    instance.validate()?;
                }
                VarianceTarget::Independence { config, instance } => {
                    config.validate()?;
                    instance.validate()?;
                }
            },
            ExperimentSpec::Mixing(spec) => {
                if spec.deltas.is_empty() || spec.deltas.iter().any(|d| !(*d > 0.0 && *d < 2.0)) {
                    return Err(CliError::Validation("mixing deltas must be non-empty and in (0, 2)".into()));
                }
                if spec.horizon == 0 {
                    return Err(CliError::Validation("mixing horizon must be at least 1".into()));
                }
            }
            ExperimentSpec::Concentration {
                tester,
                m,
                xi_grid,
                draws_per_xi,
                acceptance_trials,
            } => {
                tester.validate()?;
                if !(*m > 0.0) || xi_grid.is_empty() || *draws_per_xi == 0 || *acceptance_trials == 0 {
                    return Err(CliError::Validation(
                        "concentration needs m > 0, a non-empty xi_grid and positive draw counts".into(),
                    ));
                }
            }
            ExperimentSpec::Calibration(spec) => spec.validate()?,
        }
        Ok(())
    }

    /// Overwrites tester constants with the values from a constants file.
    pub fn apply_constants(&mut self, c: &Constants) {
        fn clo(cfg: &mut ClosenessConfig, c: &Constants) {
            if let Some(k) = c.closeness {
                cfg.c1 = k.c1;
                cfg.c2 = k.c2;
            }
        }
        fn uni(cfg: &mut UniformityConfig, c: &Constants) {
            if let Some(k) = c.uniformity {
                cfg.c1_u = k.c1_u;
                cfg.c2_u = k.c2_u;
            }
        }
        fn ind(cfg: &mut IndependenceConfig, c: &Constants) {
            if let Some(k) = c.independence {
                cfg.c_n = k.c_n;
                cfg.c_i1 = k.c_i1;
                cfg.c_i2 = k.c_i2;
            }
        }
        match &mut self.experiment {
            ExperimentSpec::ClosenessAcceptance { tester, .. } => clo(tester, c),
            ExperimentSpec::IndependenceAcceptance { tester, .. } => ind(tester, c),
            ExperimentSpec::UniformityAcceptance { tester, .. } => uni(tester, c),
            ExperimentSpec::Replicability { tester, .. } => match tester {
                TesterSpec::Closeness { config, .. } => clo(config, c),
                TesterSpec::Uniformity { config, .. } => uni(config, c),
                TesterSpec::Independence { config, .. } => ind(config, c),
            },
            ExperimentSpec::VarianceAudit { target } => match target {
                VarianceTarget::Closeness { config, .. } => clo(config, c),
                VarianceTarget::Independence { config, .. } => ind(config, c),
            },
            ExperimentSpec::Concentration { tester, .. } => uni(tester, c),
            ExperimentSpec::Mixing(_) | ExperimentSpec::Calibration(_) => {}
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.experiment {
            ExperimentSpec::ClosenessAcceptance { .. } => "closeness-acceptance",
            ExperimentSpec::IndependenceAcceptance { .. } => "independence-acceptance",
            ExperimentSpec::UniformityAcceptance { .. } => "uniformity-acceptance",
            ExperimentSpec::Replicability { .. } => "replicability",
            ExperimentSpec::VarianceAudit { .. } => "variance-audit",
            ExperimentSpec::Mixing(_) => "mixing",
            ExperimentSpec::Concentration { .. } => "concentration",
            ExperimentSpec::Calibration(_) => "calibration",
        }
    }
}

impl TesterSpec {
    fn validate(&self) -> CliResult<()> {
        match self {
            TesterSpec::Closeness { config, instance } => {
                config.validate()?;
                instance.validate()
            }
            TesterSpec::Uniformity { config, instance } => {
                config.validate()?;
                instance.validate()
            }
            TesterSpec::Independence { config, instance } => {
                config.validate()?;
                instance.validate()
            }
        }
    }
}
