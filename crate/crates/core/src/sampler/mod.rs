//! Gradient-based MCMC with adaptation, a random-walk baseline, and
//! convergence diagnostics.
//!
//! The sampler targets the unconstrained log density
//! `log_prior + log_likelihood + log_jacobian`. Static-trajectory HMC with a
//! dual-averaging step size, diagonal mass adaptation, and uniformly jittered
//! path lengths is the default backend; a Gaussian random-walk Metropolis
//! chain is available as a gradient-free baseline.

pub mod diagnostics;
pub mod grad;
pub mod hmc;
pub mod rwm;

use crate::data::Dataset;
use crate::error::SamplerError;
use crate::model::{unconstrained_log_target, Model};
use crate::rng::SeedTree;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// What a chain needs from its target distribution. Implementations must be
/// safe to evaluate concurrently.
pub trait Target: Sync {
    fn dim(&self) -> usize;

    /// Unconstrained log density (negative infinity outside the support or on
    /// numerical failure; never NaN for finite input).
    fn log_density(&self, position: &[f64]) -> f64;

    /// Gradient of `log_density`. The default falls back to central finite
    /// differences; a non-finite probe surfaces as an error, which samplers
    /// treat as a divergent proposal.
    fn grad(&self, position: &[f64]) -> Result<Vec<f64>, SamplerError> {
        grad::finite_diff_grad(|x| self.log_density(x), position)
    }
}

/// Posterior target for a model/data pair, using the model's analytic
/// gradient when it has one.
pub struct PosteriorTarget<'a> {
    pub model: &'a dyn Model,
    pub data: &'a Dataset,
}

impl<'a> PosteriorTarget<'a> {
    pub fn new(model: &'a dyn Model, data: &'a Dataset) -> Self {
        PosteriorTarget { model, data }
    }
}

impl Target for PosteriorTarget<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn log_density(&self, position: &[f64]) -> f64 {
        unconstrained_log_target(self.model, position, self.data)
    }

    fn grad(&self, position: &[f64]) -> Result<Vec<f64>, SamplerError> {
        match self.model.grad_unconstrained(position, self.data) {
            Some(g) => Ok(g),
            None => grad::finite_diff_grad(|x| self.log_density(x), position),
        }
    }
}

/// Sampler settings. `target_accept` mirrors the usual adapt-delta control;
/// the divergence threshold separates float noise from exploding trajectories
/// on the Hamiltonian-error scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup_draws: usize,
    pub keep_draws: usize,
    pub target_accept: f64,
    pub max_leapfrog_steps: usize,
    /// Relative half-width of the uniform path-length jitter, in [0, 1].
    pub path_length_jitter: f64,
    /// Base integration time; the base step count is `path_time / step_size`.
    pub path_time: f64,
    /// Hamiltonian error (nats) beyond which a transition counts as divergent.
    pub divergence_threshold: f64,
    /// Skip all adaptation and use this step size with a unit metric.
    pub fixed_step_size: Option<f64>,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            warmup_draws: 1000,
            keep_draws: 1000,
            target_accept: 0.99,
            max_leapfrog_steps: 256,
            path_length_jitter: 0.3,
            path_time: 1.5,
            divergence_threshold: 50.0,
            fixed_step_size: None,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.chains == 0 || self.warmup_draws == 0 || self.keep_draws == 0 {
            return Err(SamplerError::DegenerateDraws(
                "chains, warmup_draws and keep_draws must be positive".into(),
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(SamplerError::DegenerateDraws(format!(
                "target_accept must be in (0, 1), got {}",
                self.target_accept
            )));
        }
        if self.max_leapfrog_steps == 0
            || !(0.0..=1.0).contains(&self.path_length_jitter)
            || !(self.path_time > 0.0)
        {
            return Err(SamplerError::DegenerateDraws("invalid trajectory settings".into()));
        }
        Ok(())
    }
}

/// Posterior draws from one chain, in unconstrained coordinates, with
/// per-chain adaptation results and divergence counts.
#[derive(Debug, Clone)]
pub struct Chain {
    /// `keep_draws x dim`, all finite.
    pub draws: Vec<Vec<f64>>,
    /// Realized acceptance probability of each kept transition.
    pub accept_rates: Vec<f64>,
    /// Divergent transitions among the kept draws.
    pub divergence_count: usize,
    pub warmup_divergences: usize,
    /// Proposals rejected because the target evaluated to negative infinity.
    pub nonfinite_proposals: usize,
    pub step_size: f64,
    /// Diagonal of the inverse metric (posterior variance scale).
    pub mass_diag: Vec<f64>,
}

impl Chain {
    pub fn mean_accept(&self) -> f64 {
        if self.accept_rates.is_empty() {
            return 0.0;
        }
        self.accept_rates.iter().sum::<f64>() / self.accept_rates.len() as f64
    }
}

/// All chains from one sampler run.
#[derive(Debug, Clone)]
pub struct MultiChain {
    pub chains: Vec<Chain>,
}

impl MultiChain {
    pub fn dim(&self) -> usize {
        self.chains[0].draws[0].len()
    }

    /// One coordinate as per-chain draw lists.
    pub fn coord_per_chain(&self, k: usize) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.draws.iter().map(|d| d[k]).collect()).collect()
    }

    /// Draws pooled in chain order.
    pub fn pooled_draws(&self) -> Vec<Vec<f64>> {
        self.chains.iter().flat_map(|c| c.draws.iter().cloned()).collect()
    }

    pub fn total_divergences(&self) -> usize {
        self.chains.iter().map(|c| c.divergence_count).sum()
    }

    pub fn mean_accept(&self) -> f64 {
        self.chains.iter().map(|c| c.mean_accept()).sum::<f64>() / self.chains.len() as f64
    }

    /// Largest split rank-normalized R-hat across coordinates.
    pub fn rhat_max(&self) -> Result<f64, SamplerError> {
        (0..self.dim())
            .map(|k| diagnostics::split_rhat(&self.coord_per_chain(k)))
            .try_fold(f64::NEG_INFINITY, |acc, r| r.map(|v| acc.max(v)))
    }

    /// Smallest rank-normalized bulk effective sample size across coordinates.
    pub fn ess_min(&self) -> Result<f64, SamplerError> {
        (0..self.dim())
            .map(|k| diagnostics::ess_bulk(&self.coord_per_chain(k)))
            .try_fold(f64::INFINITY, |acc, r| r.map(|v| acc.min(v)))
    }

    /// Dump format: `chain,draw,<param names...>,accept,divergent`.
    pub fn to_csv_string(&self, names: &[String]) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("chain,draw");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push_str(",accept,divergent\n");
        for (c, chain) in self.chains.iter().enumerate() {
            for (i, draw) in chain.draws.iter().enumerate() {
                let _ = write!(out, "{c},{i}");
                for v in draw {
                    let _ = write!(out, ",{v}");
                }
                let _ = writeln!(out, ",{},0", chain.accept_rates[i]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerKind {
    Hmc,
    Rwm,
}

/// Run all configured chains, one independent stream per chain, chains in
/// parallel. Results are a pure function of `(target, config, tree)`
/// regardless of thread scheduling.
pub fn sample_chains(
    kind: SamplerKind,
    target: &dyn Target,
    config: &SamplerConfig,
    tree: &SeedTree,
) -> Result<MultiChain, SamplerError> {
    config.validate()?;
    let chains: Result<Vec<Chain>, SamplerError> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = tree.child(c as u64).rng();
            match kind {
                SamplerKind::Hmc => hmc::hmc_chain(target, config, &mut rng),
                SamplerKind::Rwm => rwm::rwm_chain(target, config, &mut rng),
            }
        })
        .collect();
    Ok(MultiChain { chains: chains? })
}

/// `sample_chains` with streams derived from `config.seed`.
pub fn sample_chains_seeded(
    kind: SamplerKind,
    target: &dyn Target,
    config: &SamplerConfig,
) -> Result<MultiChain, SamplerError> {
    sample_chains(kind, target, config, &SeedTree::new(config.seed))
}
