//! The generative-model contract: prior sampling, simulation, log densities,
//! and parameter transforms between constrained and unconstrained coordinates.

pub mod conjugate;
pub mod hierarchical;
pub mod lotka_volterra;

use crate::data::Dataset;
use crate::error::ModelError;
use crate::rng::RandomStream;
use std::sync::Arc;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Log density of N(mean, sd^2) at x, all constants included.
pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * LN_2PI - sd.ln() - 0.5 * z * z
}

/// Log density of the half-normal with scale `sd` at x >= 0.
pub fn half_normal_logpdf(x: f64, sd: f64) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    std::f64::consts::LN_2 + normal_logpdf(x, 0.0, sd)
}

/// Support constraint of one parameter, determining its unconstrained map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// Unbounded; identity transform.
    Free,
    /// Strictly positive; log transform.
    Positive,
}

/// Map constrained values to the unconstrained scale. Errors if a value is
/// outside its support or not finite.
pub fn to_unconstrained(
    constraints: &[Constraint],
    names: &[String],
    constrained: &[f64],
) -> Result<Vec<f64>, ModelError> {
    assert_eq!(constraints.len(), constrained.len());
    let mut out = Vec::with_capacity(constrained.len());
    for ((&c, &v), name) in constraints.iter().zip(constrained).zip(names) {
        if !v.is_finite() {
            return Err(ModelError::NonFiniteParameter { name: name.clone(), value: v });
        }
        out.push(match c {
            Constraint::Free => v,
            Constraint::Positive => {
                if v <= 0.0 {
                    return Err(ModelError::OutOfSupport { name: name.clone(), value: v });
                }
                v.ln()
            }
        });
    }
    Ok(out)
}

/// Map unconstrained values to the constrained scale, returning the log
/// absolute determinant of the map. The unconstrained target density is
/// `log_prior + log_likelihood + log_jacobian`.
pub fn to_constrained(constraints: &[Constraint], unconstrained: &[f64]) -> (Vec<f64>, f64) {
    assert_eq!(constraints.len(), unconstrained.len());
    let mut out = Vec::with_capacity(unconstrained.len());
    let mut log_jac = 0.0;
    for (&c, &u) in constraints.iter().zip(unconstrained) {
        out.push(match c {
            Constraint::Free => u,
            Constraint::Positive => {
                log_jac += u;
                u.exp()
            }
        });
    }
    (out, log_jac)
}

/// A named parameter vector with matched constrained and unconstrained views.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVec {
    names: Arc<Vec<String>>,
    constrained: Vec<f64>,
    unconstrained: Vec<f64>,
}

impl ParamVec {
    pub fn from_constrained(
        names: Arc<Vec<String>>,
        constraints: &[Constraint],
        constrained: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let unconstrained = to_unconstrained(constraints, &names, &constrained)?;
        Ok(ParamVec { names, constrained, unconstrained })
    }

    pub fn from_unconstrained(
        names: Arc<Vec<String>>,
        constraints: &[Constraint],
        unconstrained: Vec<f64>,
    ) -> Self {
        let (constrained, _) = to_constrained(constraints, &unconstrained);
        ParamVec { names, constrained, unconstrained }
    }

    pub fn len(&self) -> usize {
        self.constrained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constrained.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn constrained(&self) -> &[f64] {
        &self.constrained
    }

    pub fn unconstrained(&self) -> &[f64] {
        &self.unconstrained
    }

    /// Constrained value of the parameter called `name`.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.constrained[i])
    }
}

/// Description of the observation shape a model produces and accepts.
#[derive(Debug, Clone, PartialEq)]
pub enum DataShape {
    Scalar { count: usize },
    Grouped { group_count: usize, per_group: usize },
    TimeSeries { times: Vec<f64> },
}

/// The generative-model contract shared by every built-in model.
///
/// Implementations are pure given their inputs; all randomness flows through
/// the explicit [`RandomStream`] arguments.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    fn param_names(&self) -> &Arc<Vec<String>>;

    fn constraints(&self) -> &[Constraint];

    fn dim(&self) -> usize {
        self.constraints().len()
    }

    fn data_shape(&self) -> DataShape;

    /// Draw a parameter vector from the prior.
    fn prior_sample(&self, rng: &mut RandomStream) -> ParamVec;

    /// Generate a dataset from the observation model at `params`.
    fn simulate(&self, params: &ParamVec, rng: &mut RandomStream) -> Result<Dataset, ModelError>;

    /// Log prior density in constrained coordinates, up to a model constant.
    /// Out-of-support parameters yield negative infinity.
    fn log_prior(&self, params: &ParamVec) -> f64;

    /// Exact joint log likelihood, all constants included. Integration
    /// failures in ODE-driven models yield negative infinity rather than an
    /// error so samplers can reject the proposal.
    fn log_likelihood(&self, params: &ParamVec, data: &Dataset) -> Result<f64, ModelError>;

    /// Gradient of the unconstrained log target
    /// (`log_prior + log_likelihood + log_jacobian`) when available
    /// analytically. Models without one fall back to finite differences in
    /// the sampler.
    fn grad_unconstrained(&self, _unconstrained: &[f64], _data: &Dataset) -> Option<Vec<f64>> {
        None
    }

    /// Parameters whose calibration is reported by default (shared or global
    /// parameters, not per-group latent variables).
    fn default_quantities(&self) -> Vec<String>;

    fn param_vec_from_unconstrained(&self, unconstrained: Vec<f64>) -> ParamVec {
        ParamVec::from_unconstrained(self.param_names().clone(), self.constraints(), unconstrained)
    }

    fn param_vec_from_constrained(&self, constrained: Vec<f64>) -> Result<ParamVec, ModelError> {
        ParamVec::from_constrained(self.param_names().clone(), self.constraints(), constrained)
    }
}

/// Unconstrained log target for MCMC: prior + likelihood + Jacobian. Datasets
/// with invalid shape surface as an error from `log_likelihood`; that is a
/// caller bug, so it panics here.
pub fn unconstrained_log_target(model: &dyn Model, unconstrained: &[f64], data: &Dataset) -> f64 {
    let (constrained, log_jac) = to_constrained(model.constraints(), unconstrained);
    let params = ParamVec {
        names: model.param_names().clone(),
        constrained,
        unconstrained: unconstrained.to_vec(),
    };
    let lp = model.log_prior(&params);
    if lp == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let ll = model
        .log_likelihood(&params, data)
        .expect("dataset shape must match the model");
    lp + ll + log_jac
}
