//! Pluggable inference backends: the MCMC samplers, and an exact conjugate
//! sampler used as a calibration oracle (optionally with a deliberate bias
//! for power testing).

use crate::data::Dataset;
use crate::error::EngineError;
use crate::model::conjugate::{conjugate_posterior, ConjugateNormalModel};
use crate::model::{to_constrained, Model};
use crate::rng::{roles, SeedTree};
use crate::sampler::{sample_chains, SamplerConfig, SamplerKind};

/// Pooled posterior draws (constrained coordinates) plus fit diagnostics.
/// Exact backends have no Markov-chain diagnostics and report `None`.
#[derive(Debug, Clone)]
pub struct PosteriorFit {
    pub draws: Vec<Vec<f64>>,
    pub rhat_max: Option<f64>,
    pub ess_min: Option<f64>,
    pub divergences: u64,
}

/// An inference algorithm under validation. `fit` must be a pure function of
/// its arguments; all randomness comes from the seed tree.
pub trait InferenceBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Sample the posterior given `data`. `raw_draws` is the pooled draw
    /// budget for backends that produce i.i.d. draws; MCMC backends derive
    /// their budget from their chain configuration instead.
    fn fit(
        &self,
        model: &dyn Model,
        data: &Dataset,
        raw_draws: usize,
        tree: &SeedTree,
    ) -> Result<PosteriorFit, EngineError>;

    /// `n` approximately independent draws from the base posterior
    /// π(θ | y_obs), one per campaign iteration. The default runs one fit
    /// under the `BASE` role and thins; exact backends instead draw each θ'_i
    /// from the iteration's own `THETA` substream, so a posterior-mode
    /// campaign with empty observed data consumes randomness identically to a
    /// prior-mode campaign.
    fn base_draws(
        &self,
        model: &dyn Model,
        data: &Dataset,
        n: usize,
        campaign_root: &SeedTree,
    ) -> Result<(Vec<Vec<f64>>, PosteriorFit), EngineError> {
        let fit = self.fit(model, data, n, &campaign_root.child(roles::BASE))?;
        let thinned = crate::sampler::diagnostics::thin(&fit.draws, n)?;
        Ok((thinned, fit))
    }
}

/// MCMC backend over the embedded samplers.
#[derive(Debug, Clone)]
pub struct McmcBackend {
    pub kind: SamplerKind,
    pub config: SamplerConfig,
    /// Separate budget for the base-posterior fit (defaults to `config`).
    pub base_config: Option<SamplerConfig>,
}

impl McmcBackend {
    pub fn hmc(config: SamplerConfig) -> Self {
        McmcBackend { kind: SamplerKind::Hmc, config, base_config: None }
    }

    pub fn rwm(config: SamplerConfig) -> Self {
        McmcBackend { kind: SamplerKind::Rwm, config, base_config: None }
    }

    fn fit_with(
        &self,
        config: &SamplerConfig,
        model: &dyn Model,
        data: &Dataset,
        tree: &SeedTree,
    ) -> Result<PosteriorFit, EngineError> {
        let target = crate::sampler::PosteriorTarget::new(model, data);
        let chains = sample_chains(self.kind, &target, config, tree)?;
        let rhat_max = chains.rhat_max()?;
        let ess_min = chains.ess_min()?;
        let divergences = chains.total_divergences() as u64;
        let constraints = model.constraints();
        let draws = chains
            .pooled_draws()
            .into_iter()
            .map(|u| to_constrained(constraints, &u).0)
            .collect();
        Ok(PosteriorFit {
            draws,
            rhat_max: Some(rhat_max),
            ess_min: Some(ess_min),
            divergences,
        })
    }
}

impl InferenceBackend for McmcBackend {
    fn name(&self) -> &str {
        match self.kind {
            SamplerKind::Hmc => "hmc",
            SamplerKind::Rwm => "rwm",
        }
    }

    fn fit(
        &self,
        model: &dyn Model,
        data: &Dataset,
        _raw_draws: usize,
        tree: &SeedTree,
    ) -> Result<PosteriorFit, EngineError> {
        self.fit_with(&self.config, model, data, tree)
    }

    fn base_draws(
        &self,
        model: &dyn Model,
        data: &Dataset,
        n: usize,
        campaign_root: &SeedTree,
    ) -> Result<(Vec<Vec<f64>>, PosteriorFit), EngineError> {
        let config = self.base_config.as_ref().unwrap_or(&self.config);
        let fit = self.fit_with(config, model, data, &campaign_root.child(roles::BASE))?;
        let thinned = crate::sampler::diagnostics::thin(&fit.draws, n)?;
        Ok((thinned, fit))
    }
}

/// Exact i.i.d. sampler for the conjugate normal model. `shift_sds` moves the
/// reported posterior location by that many posterior standard deviations; a
/// nonzero value is a deliberately miscalibrated backend for power testing.
#[derive(Debug, Clone)]
pub struct ExactConjugateBackend {
    prior_mean: f64,
    prior_sd: f64,
    obs_sd: f64,
    pub shift_sds: f64,
}

impl ExactConjugateBackend {
    pub fn for_model(model: &ConjugateNormalModel) -> Self {
        ExactConjugateBackend {
            prior_mean: model.prior_mean,
            prior_sd: model.prior_sd,
            obs_sd: model.obs_sd,
            shift_sds: 0.0,
        }
    }

    pub fn with_shift(model: &ConjugateNormalModel, shift_sds: f64) -> Self {
        ExactConjugateBackend { shift_sds, ..Self::for_model(model) }
    }

    fn posterior(&self, data: &Dataset) -> Result<(f64, f64), EngineError> {
        match data {
            Dataset::Scalar { .. } => {
                let (m, s) = conjugate_posterior(self.prior_mean, self.prior_sd, self.obs_sd, data);
                Ok((m + self.shift_sds * s, s))
            }
            _ => Err(EngineError::Model(crate::error::ModelError::ShapeMismatch {
                model: "conjugate-normal".into(),
                detail: "exact backend requires a scalar dataset".into(),
            })),
        }
    }
}

impl InferenceBackend for ExactConjugateBackend {
    fn name(&self) -> &str {
        if self.shift_sds == 0.0 {
            "exact"
        } else {
            "exact-shifted"
        }
    }

    fn fit(
        &self,
        _model: &dyn Model,
        data: &Dataset,
        raw_draws: usize,
        tree: &SeedTree,
    ) -> Result<PosteriorFit, EngineError> {
        let (m, s) = self.posterior(data)?;
        let mut rng = tree.rng();
        let draws = (0..raw_draws).map(|_| vec![rng.normal(m, s)]).collect();
        Ok(PosteriorFit { draws, rhat_max: None, ess_min: None, divergences: 0 })
    }

    fn base_draws(
        &self,
        _model: &dyn Model,
        data: &Dataset,
        n: usize,
        campaign_root: &SeedTree,
    ) -> Result<(Vec<Vec<f64>>, PosteriorFit), EngineError> {
        let (m, s) = self.posterior(data)?;
        let draws: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut rng = campaign_root.child(i as u64).child(roles::THETA).rng();
                vec![rng.normal(m, s)]
            })
            .collect();
        let fit =
            PosteriorFit { draws: draws.clone(), rhat_max: None, ess_min: None, divergences: 0 };
        Ok((draws, fit))
    }
}
