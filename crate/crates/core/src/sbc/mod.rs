//! Calibration-checking campaigns.
//!
//! A campaign repeatedly (1) takes a generating parameter draw θ', (2)
//! simulates data from it, (3) refits the model with the backend under
//! validation, and (4) records the rank of each test quantity's value at θ'
//! among the thinned posterior draws. In prior mode θ' comes from the prior;
//! in posterior mode θ' comes from the posterior given observed data, and
//! refits condition on the augmented dataset (observed + simulated).

pub mod backend;

use crate::data::Dataset;
use crate::error::EngineError;
use crate::model::{Model, ParamVec};
use crate::rng::{roles, RandomStream, SeedTree};
use crate::sampler::diagnostics::thin;
use crate::sampler::SamplerConfig;
use backend::InferenceBackend;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

/// A scalar function of parameters (and optionally data) whose PIT uniformity
/// is tested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestQuantity {
    Parameter(String),
    JointLogLik,
}

pub const JOINT_LOG_LIK_KEY: &str = "joint_log_lik";

impl TestQuantity {
    pub fn key(&self) -> &str {
        match self {
            TestQuantity::Parameter(name) => name,
            TestQuantity::JointLogLik => JOINT_LOG_LIK_KEY,
        }
    }
}

/// Which dataset the joint-log-likelihood quantity conditions on in posterior
/// mode: the full augmented set (matching the refit's conditioning set) or
/// the fresh simulated data alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoglikConditioning {
    Augmented,
    SimulatedOnly,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SbcConfig {
    /// Number of SBC iterations N.
    pub iterations: usize,
    /// Pooled raw-draw budget per refit for i.i.d. backends; MCMC backends
    /// produce `chains * keep_draws` regardless.
    pub posterior_draws_per_iteration: usize,
    /// Post-thinning draw count S; ranks live in [0, S].
    pub ranks_s: usize,
    pub test_quantities: Vec<TestQuantity>,
    /// Leading fraction of the observed data used for the base posterior
    /// (posterior mode only), so the augmented refit size can be kept close
    /// to the original data size.
    pub base_data_fraction: f64,
    pub loglik_conditioning: LoglikConditioning,
    pub sampler: SamplerConfig,
    /// Separate sampler budget for the base-posterior fit.
    pub base_sampler: Option<SamplerConfig>,
    pub seed: u64,
}

impl SbcConfig {
    /// Defaults for a model: every default quantity plus the joint
    /// log likelihood, S = 100.
    pub fn for_model(model: &dyn Model, iterations: usize, seed: u64) -> Self {
        let mut test_quantities: Vec<TestQuantity> =
            model.default_quantities().into_iter().map(TestQuantity::Parameter).collect();
        test_quantities.push(TestQuantity::JointLogLik);
        SbcConfig {
            iterations,
            posterior_draws_per_iteration: 100,
            ranks_s: 100,
            test_quantities,
            base_data_fraction: 1.0,
            loglik_conditioning: LoglikConditioning::Augmented,
            sampler: SamplerConfig::default(),
            base_sampler: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.iterations == 0 {
            return Err(EngineError::NoIterations);
        }
        assert!(self.ranks_s >= 10, "ranks_s must be at least 10");
        assert!(
            self.base_data_fraction > 0.0 && self.base_data_fraction <= 1.0,
            "base_data_fraction must be in (0, 1]"
        );
        assert!(!self.test_quantities.is_empty(), "configure at least one test quantity");
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterationStatus {
    Ok,
    DiagnosticsFlagged,
    Failed,
}

/// One SBC iteration's ranks and sampler diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationResult {
    pub iter: usize,
    pub status: IterationStatus,
    /// Quantity key -> rank in [0, S]. Empty for failed iterations.
    pub ranks: BTreeMap<String, u32>,
    pub rhat_max: Option<f64>,
    pub ess_min: Option<f64>,
    pub divergences: u64,
    pub theta_prime: BTreeMap<String, f64>,
    pub seed_path: String,
    pub elapsed_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

/// All iterations of a campaign, ready for uniformity testing.
#[derive(Debug, Clone)]
pub struct RankEnsemble {
    pub s: usize,
    /// Quantity keys in configured order.
    pub quantities: Vec<String>,
    /// Sorted by iteration index; failed iterations are retained and marked.
    pub iterations: Vec<IterationResult>,
}

impl RankEnsemble {
    pub fn from_iterations(
        s: usize,
        quantities: Vec<String>,
        mut iterations: Vec<IterationResult>,
    ) -> Self {
        iterations.sort_by_key(|r| r.iter);
        RankEnsemble { s, quantities, iterations }
    }

    /// Ranks of one quantity across non-failed iterations, optionally
    /// excluding diagnostics-flagged ones.
    pub fn ranks_for(&self, quantity: &str, include_flagged: bool) -> Vec<u32> {
        self.iterations
            .iter()
            .filter(|r| match r.status {
                IterationStatus::Ok => true,
                IterationStatus::DiagnosticsFlagged => include_flagged,
                IterationStatus::Failed => false,
            })
            .filter_map(|r| r.ranks.get(quantity).copied())
            .collect()
    }

    pub fn status_counts(&self) -> (usize, usize, usize) {
        let mut ok = 0;
        let mut flagged = 0;
        let mut failed = 0;
        for r in &self.iterations {
            match r.status {
                IterationStatus::Ok => ok += 1,
                IterationStatus::DiagnosticsFlagged => flagged += 1,
                IterationStatus::Failed => failed += 1,
            }
        }
        (ok, flagged, failed)
    }

    /// `iter,quantity,rank,S,status` rows in iteration order; failed
    /// iterations carry no rank rows.
    pub fn to_ranks_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("iter,quantity,rank,S,status\n");
        for r in &self.iterations {
            if r.status == IterationStatus::Failed {
                continue;
            }
            let status = match r.status {
                IterationStatus::Ok => "ok",
                IterationStatus::DiagnosticsFlagged => "diagnostics-flagged",
                IterationStatus::Failed => unreachable!(),
            };
            for q in &self.quantities {
                if let Some(rank) = r.ranks.get(q) {
                    let _ = writeln!(out, "{},{},{},{},{}", r.iter, q, rank, self.s, status);
                }
            }
        }
        out
    }
}

/// Rank of `value` among `draws`: the count of draws strictly below, plus a
/// uniform draw over the tied positions. In [0, len(draws)].
pub fn rank_of(value: f64, draws: &[f64], rng: &mut RandomStream) -> Result<u32, EngineError> {
    if !value.is_finite() {
        return Err(EngineError::NonFiniteQuantity(format!("rank target {value}")));
    }
    let mut below = 0u32;
    let mut ties = 0u64;
    for &d in draws {
        if d < value {
            below += 1;
        } else if d == value {
            ties += 1;
        }
    }
    let jitter = if ties > 0 { rng.uniform_int(ties + 1) as u32 } else { 0 };
    Ok(below + jitter)
}

/// Per-quantity evaluation: the value at the generating draw and at each
/// posterior draw.
pub struct QuantityEval {
    pub key: String,
    pub true_value: f64,
    pub draw_values: Vec<f64>,
}

/// Evaluate every configured test quantity. Parameter quantities pass values
/// through; the joint-log-likelihood quantity evaluates
/// `log p(conditioning_data | theta)` at θ' and at every draw.
pub fn evaluate_test_quantities(
    model: &dyn Model,
    quantities: &[TestQuantity],
    theta: &ParamVec,
    draws: &[ParamVec],
    conditioning_data: &Dataset,
) -> Result<Vec<QuantityEval>, EngineError> {
    assert!(!draws.is_empty(), "need at least one posterior draw");
    let mut out = Vec::with_capacity(quantities.len());
    for q in quantities {
        let eval = match q {
            TestQuantity::Parameter(name) => {
                let true_value = theta.get(name).ok_or_else(|| {
                    EngineError::NonFiniteQuantity(format!("unknown parameter `{name}`"))
                })?;
                let draw_values = draws
                    .iter()
                    .map(|d| {
                        d.get(name).ok_or_else(|| {
                            EngineError::NonFiniteQuantity(format!("unknown parameter `{name}`"))
                        })
                    })
                    .collect::<Result<Vec<f64>, _>>()?;
                QuantityEval { key: name.clone(), true_value, draw_values }
            }
            TestQuantity::JointLogLik => {
                let true_value = model.log_likelihood(theta, conditioning_data)?;
                let draw_values = draws
                    .iter()
                    .map(|d| model.log_likelihood(d, conditioning_data))
                    .collect::<Result<Vec<f64>, _>>()?;
                QuantityEval { key: JOINT_LOG_LIK_KEY.to_string(), true_value, draw_values }
            }
        };
        out.push(eval);
    }
    Ok(out)
}

enum ThetaSource<'a> {
    Prior,
    BaseDraws(&'a [ParamVec]),
}

/// Execution controls orthogonal to the statistical configuration: worker
/// count, resume bookkeeping, and an optional per-iteration sink.
pub struct RunControls<'a> {
    /// 0 means the global thread pool.
    pub workers: usize,
    /// Iterations already computed in a previous run (matching config).
    pub precomputed: Vec<IterationResult>,
    /// Stop after computing this many new iterations (resume smoke control).
    pub limit: Option<usize>,
    /// Called for every newly computed iteration, from worker threads.
    pub observer: Option<&'a (dyn Fn(&IterationResult) + Sync)>,
}

impl Default for RunControls<'_> {
    fn default() -> Self {
        RunControls { workers: 0, precomputed: Vec::new(), limit: None, observer: None }
    }
}

pub struct Campaign<'a> {
    pub model: &'a dyn Model,
    pub backend: &'a dyn InferenceBackend,
    pub config: &'a SbcConfig,
}

impl<'a> Campaign<'a> {
    pub fn new(
        model: &'a dyn Model,
        backend: &'a dyn InferenceBackend,
        config: &'a SbcConfig,
    ) -> Self {
        Campaign { model, backend, config }
    }

    fn root(&self) -> SeedTree {
        SeedTree::new(self.config.seed)
    }

    /// Fit the base posterior on the observed data (after applying
    /// `base_data_fraction`), verify it is trustworthy, and thin to exactly
    /// N = `iterations` generating draws.
    pub fn base_posterior(&self, y_obs: &Dataset) -> Result<Vec<ParamVec>, EngineError> {
        self.config.validate()?;
        let n = self.config.iterations;
        let y_base = y_obs.leading_fraction(self.config.base_data_fraction);
        let (draws, fit) = self.backend.base_draws(self.model, &y_base, n, &self.root())?;
        if let Some(rhat) = fit.rhat_max {
            if rhat > 1.01 {
                return Err(EngineError::BasePosteriorUnreliable {
                    reason: format!("split R-hat {rhat:.4} exceeds 1.01"),
                    need: n,
                });
            }
        }
        if let Some(ess) = fit.ess_min {
            if ess < n as f64 {
                return Err(EngineError::BasePosteriorUnreliable {
                    reason: format!("effective sample size {ess:.1} is below N = {n}"),
                    need: n,
                });
            }
        }
        draws
            .into_iter()
            .map(|c| self.model.param_vec_from_constrained(c).map_err(EngineError::from))
            .collect()
    }

    /// Prior-mode campaign: θ' ~ prior.
    pub fn run_prior(&self, controls: &RunControls) -> Result<RankEnsemble, EngineError> {
        self.config.validate()?;
        self.run(ThetaSource::Prior, None, controls)
    }

    /// Posterior-mode campaign: θ' from the base posterior, refits on the
    /// augmented dataset.
    pub fn run_posterior(
        &self,
        y_obs: &Dataset,
        controls: &RunControls,
    ) -> Result<RankEnsemble, EngineError> {
        self.config.validate()?;
        let base = self.base_posterior(y_obs)?;
        let y_base = y_obs.leading_fraction(self.config.base_data_fraction);
        self.run(ThetaSource::BaseDraws(&base), Some(&y_base), controls)
    }

    fn run(
        &self,
        source: ThetaSource,
        y_obs_base: Option<&Dataset>,
        controls: &RunControls,
    ) -> Result<RankEnsemble, EngineError> {
        let n = self.config.iterations;
        let done: std::collections::BTreeSet<usize> =
            controls.precomputed.iter().map(|r| r.iter).filter(|&i| i < n).collect();
        let mut pending: Vec<usize> = (0..n).filter(|i| !done.contains(i)).collect();
        if let Some(limit) = controls.limit {
            pending.truncate(limit);
        }

        let run_one = |&i: &usize| -> IterationResult {
            let result = self.run_iteration(i, &source, y_obs_base);
            if let Some(observer) = controls.observer {
                observer(&result);
            }
            result
        };
        let computed: Vec<IterationResult> = if controls.workers > 0 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(controls.workers)
                .build()
                .expect("worker pool");
            pool.install(|| pending.par_iter().map(run_one).collect())
        } else {
            pending.par_iter().map(run_one).collect()
        };

        let mut iterations: Vec<IterationResult> = controls
            .precomputed
            .iter()
            .filter(|r| r.iter < n)
            .cloned()
            .chain(computed)
            .collect();
        iterations.sort_by_key(|r| r.iter);
        iterations.dedup_by_key(|r| r.iter);

        let complete = iterations.len() == n;
        if complete && iterations.iter().all(|r| r.status == IterationStatus::Failed) {
            let cause = iterations[0].cause.clone().unwrap_or_else(|| "unknown".into());
            return Err(EngineError::AllIterationsFailed(cause));
        }
        let quantities = self.config.test_quantities.iter().map(|q| q.key().to_string()).collect();
        Ok(RankEnsemble::from_iterations(self.config.ranks_s, quantities, iterations))
    }

    fn run_iteration(
        &self,
        i: usize,
        source: &ThetaSource,
        y_obs_base: Option<&Dataset>,
    ) -> IterationResult {
        let start = Instant::now();
        let tree = self.root().child(i as u64);
        let seed_path = tree.path_string();

        let theta = match source {
            ThetaSource::Prior => {
                self.model.prior_sample(&mut tree.child(roles::THETA).rng())
            }
            ThetaSource::BaseDraws(draws) => draws[i].clone(),
        };
        let theta_prime: BTreeMap<String, f64> = theta
            .names()
            .iter()
            .cloned()
            .zip(theta.constrained().iter().copied())
            .collect();
        let fail = |cause: String, start: Instant, theta_prime: &BTreeMap<String, f64>| {
            IterationResult {
                iter: i,
                status: IterationStatus::Failed,
                ranks: BTreeMap::new(),
                rhat_max: None,
                ess_min: None,
                divergences: 0,
                theta_prime: theta_prime.clone(),
                seed_path: seed_path.clone(),
                elapsed_ms: start.elapsed().as_millis() as u64,
                cause: Some(cause),
            }
        };

        let y_sim = match self.model.simulate(&theta, &mut tree.child(roles::SIMULATE).rng()) {
            Ok(y) => y,
            Err(e) => return fail(format!("simulation failed: {e}"), start, &theta_prime),
        };
        let conditioning = match y_obs_base {
            None => y_sim.clone(),
            Some(y0) => y0.concat(&y_sim),
        };
        let fit = match self.backend.fit(
            self.model,
            &conditioning,
            self.config.posterior_draws_per_iteration,
            &tree.child(roles::FIT),
        ) {
            Ok(f) => f,
            Err(e) => return fail(format!("refit failed: {e}"), start, &theta_prime),
        };
        let thinned = match thin(&fit.draws, self.config.ranks_s) {
            Ok(t) => t,
            Err(e) => return fail(format!("thinning failed: {e}"), start, &theta_prime),
        };
        let draws: Vec<ParamVec> = match thinned
            .into_iter()
            .map(|c| self.model.param_vec_from_constrained(c))
            .collect::<Result<_, _>>()
        {
            Ok(d) => d,
            Err(e) => return fail(format!("invalid posterior draw: {e}"), start, &theta_prime),
        };

        let loglik_data = match (y_obs_base, self.config.loglik_conditioning) {
            (None, _) => &y_sim,
            (Some(_), LoglikConditioning::Augmented) => &conditioning,
            (Some(_), LoglikConditioning::SimulatedOnly) => &y_sim,
        };
        let evals = match evaluate_test_quantities(
            self.model,
            &self.config.test_quantities,
            &theta,
            &draws,
            loglik_data,
        ) {
            Ok(e) => e,
            Err(e) => return fail(format!("test quantity failed: {e}"), start, &theta_prime),
        };

        let mut rank_rng = tree.child(roles::RANK).rng();
        let mut ranks = BTreeMap::new();
        for eval in &evals {
            match rank_of(eval.true_value, &eval.draw_values, &mut rank_rng) {
                Ok(r) => {
                    ranks.insert(eval.key.clone(), r);
                }
                Err(e) => return fail(format!("rank failed: {e}"), start, &theta_prime),
            }
        }

        let flagged = fit.rhat_max.is_some_and(|r| r > 1.01)
            || fit.ess_min.is_some_and(|e| e < self.config.ranks_s as f64);
        IterationResult {
            iter: i,
            status: if flagged { IterationStatus::DiagnosticsFlagged } else { IterationStatus::Ok },
            ranks,
            rhat_max: fit.rhat_max,
            ess_min: fit.ess_min,
            divergences: fit.divergences,
            theta_prime,
            seed_path,
            elapsed_ms: start.elapsed().as_millis() as u64,
            cause: None,
        }
    }
}

/// Run a full prior-mode campaign with default controls.
pub fn prior_sbc(
    model: &dyn Model,
    backend: &dyn InferenceBackend,
    config: &SbcConfig,
) -> Result<RankEnsemble, EngineError> {
    Campaign::new(model, backend, config).run_prior(&RunControls::default())
}

/// Run a full posterior-mode campaign with default controls.
pub fn posterior_sbc(
    model: &dyn Model,
    backend: &dyn InferenceBackend,
    config: &SbcConfig,
    y_obs: &Dataset,
) -> Result<RankEnsemble, EngineError> {
    Campaign::new(model, backend, config).run_posterior(y_obs, &RunControls::default())
}
