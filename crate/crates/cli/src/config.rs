//! Experiment configuration: JSON schema, validation, and construction of
//! models, backends, and engine settings.

use sbc_core::data::{read_grouped_csv, read_pelt_csv, Dataset};
use sbc_core::model::conjugate::ConjugateNormalModel;
use sbc_core::model::hierarchical::{HierarchicalModel, Parameterization};
use sbc_core::model::lotka_volterra::LotkaVolterraModel;
use sbc_core::model::Model;
use sbc_core::sampler::SamplerConfig;
use sbc_core::sbc::backend::{ExactConjugateBackend, InferenceBackend, McmcBackend};
use sbc_core::sbc::{LoglikConditioning, SbcConfig, TestQuantity, JOINT_LOG_LIK_KEY};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// A configuration problem; the CLI maps these to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Prior,
    Posterior,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    ConjugateNormal {
        #[serde(default)]
        prior_mean: f64,
        #[serde(default = "one")]
        prior_sd: f64,
        #[serde(default = "one")]
        obs_sd: f64,
        #[serde(default = "five")]
        obs_count: usize,
    },
    HierarchicalCentered {
        #[serde(default = "fifty")]
        groups: usize,
        #[serde(default = "five")]
        per_group: usize,
    },
    HierarchicalNoncentered {
        #[serde(default = "fifty")]
        groups: usize,
        #[serde(default = "five")]
        per_group: usize,
    },
    LotkaVolterra {
        #[serde(default = "default_step")]
        step: f64,
        #[serde(default = "default_years")]
        years: usize,
    },
}

fn one() -> f64 {
    1.0
}
fn five() -> usize {
    5
}
fn fifty() -> usize {
    50
}
fn default_step() -> f64 {
    0.01
}
fn default_years() -> usize {
    21
}
fn default_coverage() -> f64 {
    0.95
}
fn default_ranks_s() -> usize {
    100
}
fn default_fraction() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

impl ModelConfig {
    pub fn build(&self) -> Box<dyn Model> {
        match self {
            ModelConfig::ConjugateNormal { prior_mean, prior_sd, obs_sd, obs_count } => {
                Box::new(ConjugateNormalModel::new(*prior_mean, *prior_sd, *obs_sd, *obs_count))
            }
            ModelConfig::HierarchicalCentered { groups, per_group } => {
                Box::new(HierarchicalModel::new(Parameterization::Centered, *groups, *per_group))
            }
            ModelConfig::HierarchicalNoncentered { groups, per_group } => Box::new(
                HierarchicalModel::new(Parameterization::NonCentered, *groups, *per_group),
            ),
            ModelConfig::LotkaVolterra { step, years } => Box::new(LotkaVolterraModel::new(
                (0..*years).map(|t| t as f64).collect(),
                *step,
            )),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            ModelConfig::ConjugateNormal { .. } => "conjugate-normal",
            ModelConfig::HierarchicalCentered { .. } => "hierarchical-centered",
            ModelConfig::HierarchicalNoncentered { .. } => "hierarchical-noncentered",
            ModelConfig::LotkaVolterra { .. } => "lotka-volterra",
        }
    }

    fn empty_dataset(&self) -> Dataset {
        match self {
            ModelConfig::ConjugateNormal { .. } => Dataset::empty_scalar(),
            ModelConfig::HierarchicalCentered { groups, .. }
            | ModelConfig::HierarchicalNoncentered { groups, .. } => {
                Dataset::Grouped { group_count: *groups, rows: Vec::new() }
            }
            ModelConfig::LotkaVolterra { .. } => Dataset::TimeSeries { rows: Vec::new() },
        }
    }

    fn load_dataset(&self, path: &Path) -> Result<Dataset, ConfigError> {
        let data = match self {
            ModelConfig::LotkaVolterra { .. } => read_pelt_csv(path),
            _ => read_grouped_csv(path),
        }
        .map_err(|e| ConfigError(format!("data.path: {e}")))?;
        if let ModelConfig::ConjugateNormal { .. } = self {
            // the scalar model reads the grouped format with a single group
            if let Dataset::Grouped { rows, .. } = &data {
                return Ok(Dataset::Scalar { values: rows.iter().map(|r| r.value).collect() });
            }
        }
        Ok(data)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Explicit empty-data flag: posterior mode degenerates to prior mode.
    #[serde(default)]
    pub empty: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Exact conjugate sampler (conjugate-normal model only). A nonzero
    /// `shift_sds` deliberately biases the reported posterior location, as a
    /// power-testing fixture.
    Exact {
        #[serde(default)]
        shift_sds: f64,
    },
    Hmc {
        #[serde(default)]
        sampler: SamplerConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base_sampler: Option<SamplerConfig>,
    },
    Rwm {
        #[serde(default)]
        sampler: SamplerConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base_sampler: Option<SamplerConfig>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    pub backend: BackendConfig,
    pub iterations: usize,
    #[serde(default = "default_ranks_s")]
    pub ranks_s: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posterior_draws_per_iteration: Option<usize>,
    /// Parameter names to test; `joint_log_lik` is always appended. Defaults
    /// to the model's shared parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_quantities: Option<Vec<String>>,
    #[serde(default = "default_fraction")]
    pub base_data_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loglik_conditioning: Option<LoglikConditioning>,
    #[serde(default = "default_coverage")]
    pub coverage: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_true")]
    pub plots: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| ConfigError(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.iterations == 0 {
            return Err(ConfigError("iterations: must be at least 1".into()));
        }
        if self.ranks_s < 10 {
            return Err(ConfigError("ranks_s: must be at least 10".into()));
        }
        if !(self.base_data_fraction > 0.0 && self.base_data_fraction <= 1.0) {
            return Err(ConfigError("base_data_fraction: must be in (0, 1]".into()));
        }
        if !(self.coverage > 0.5 && self.coverage < 1.0) {
            return Err(ConfigError("coverage: must be in (0.5, 1)".into()));
        }
        if self.mode == Mode::Posterior {
            match &self.data {
                Some(d) if d.path.is_some() || d.empty => {}
                _ => {
                    return Err(ConfigError(
                        "data.path: posterior mode requires a data path or `data.empty = true`"
                            .into(),
                    ))
                }
            }
        }
        if matches!(self.backend, BackendConfig::Exact { .. })
            && !matches!(self.model, ModelConfig::ConjugateNormal { .. })
        {
            return Err(ConfigError(
                "backend.kind: the exact backend requires the conjugate-normal model".into(),
            ));
        }
        if let Some(quantities) = &self.test_quantities {
            if quantities.is_empty() {
                return Err(ConfigError("test_quantities: must not be empty".into()));
            }
        }
        Ok(())
    }

    /// Observed dataset for posterior mode; `None` in prior mode.
    pub fn load_data(&self) -> Result<Option<Dataset>, ConfigError> {
        if self.mode == Mode::Prior {
            return Ok(None);
        }
        let data = self.data.as_ref().expect("validated");
        match &data.path {
            Some(p) => Ok(Some(self.model.load_dataset(Path::new(p))?)),
            None => Ok(Some(self.model.empty_dataset())),
        }
    }

    pub fn build_backend(&self, model: &dyn Model) -> Result<Box<dyn InferenceBackend>, ConfigError> {
        match &self.backend {
            BackendConfig::Exact { shift_sds } => {
                let conjugate = match &self.model {
                    ModelConfig::ConjugateNormal { prior_mean, prior_sd, obs_sd, obs_count } => {
                        ConjugateNormalModel::new(*prior_mean, *prior_sd, *obs_sd, *obs_count)
                    }
                    _ => unreachable!("validated"),
                };
                Ok(Box::new(ExactConjugateBackend::with_shift(&conjugate, *shift_sds)))
            }
            BackendConfig::Hmc { sampler, base_sampler } => Ok(Box::new(McmcBackend {
                kind: sbc_core::sampler::SamplerKind::Hmc,
                config: sampler.clone(),
                base_config: base_sampler.clone(),
            })),
            BackendConfig::Rwm { sampler, base_sampler } => {
                let _ = model;
                Ok(Box::new(McmcBackend {
                    kind: sbc_core::sampler::SamplerKind::Rwm,
                    config: sampler.clone(),
                    base_config: base_sampler.clone(),
                }))
            }
        }
    }

    pub fn sbc_config(&self, model: &dyn Model) -> Result<SbcConfig, ConfigError> {
        let mut quantities: Vec<TestQuantity> = match &self.test_quantities {
            Some(names) => {
                let mut list = Vec::new();
                for name in names {
                    if name == JOINT_LOG_LIK_KEY {
                        continue;
                    }
                    if !model.param_names().iter().any(|n| n == name) {
                        return Err(ConfigError(format!(
                            "test_quantities: `{name}` is not a parameter of {}",
                            model.name()
                        )));
                    }
                    list.push(TestQuantity::Parameter(name.clone()));
                }
                list
            }
            None => {
                model.default_quantities().into_iter().map(TestQuantity::Parameter).collect()
            }
        };
        quantities.push(TestQuantity::JointLogLik);
        let (sampler, base_sampler) = match &self.backend {
            BackendConfig::Exact { .. } => (SamplerConfig::default(), None),
            BackendConfig::Hmc { sampler, base_sampler }
            | BackendConfig::Rwm { sampler, base_sampler } => {
                (sampler.clone(), base_sampler.clone())
            }
        };
        let raw_draws = self
            .posterior_draws_per_iteration
            .unwrap_or_else(|| match &self.backend {
                BackendConfig::Exact { .. } => self.ranks_s,
                _ => sampler.chains * sampler.keep_draws,
            })
            .max(self.ranks_s);
        Ok(SbcConfig {
            iterations: self.iterations,
            posterior_draws_per_iteration: raw_draws,
            ranks_s: self.ranks_s,
            test_quantities: quantities,
            base_data_fraction: self.base_data_fraction,
            loglik_conditioning: self
                .loglik_conditioning
                .unwrap_or(LoglikConditioning::Augmented),
            sampler,
            base_sampler,
            seed: self.seed,
        })
    }

    /// Canonical JSON of the effective configuration (after CLI overrides),
    /// hashed into the manifest for resume validation.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
