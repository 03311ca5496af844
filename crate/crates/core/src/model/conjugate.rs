//! Conjugate normal location model: N(theta, obs_sd^2) likelihood with a
//! N(prior_mean, prior_sd^2) prior on theta and known observation noise.
//!
//! The posterior is available in closed form, which makes this model the
//! exact-inference oracle for the calibration machinery.

use super::{normal_logpdf, Constraint, DataShape, Model, ParamVec};
use crate::data::Dataset;
use crate::error::ModelError;
use crate::rng::RandomStream;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct ConjugateNormalModel {
    pub prior_mean: f64,
    pub prior_sd: f64,
    pub obs_sd: f64,
    /// Number of observations produced by `simulate`.
    pub obs_count: usize,
    names: Arc<Vec<String>>,
    constraints: Vec<Constraint>,
}

impl ConjugateNormalModel {
    pub fn new(prior_mean: f64, prior_sd: f64, obs_sd: f64, obs_count: usize) -> Self {
        assert!(prior_sd > 0.0 && obs_sd > 0.0);
        ConjugateNormalModel {
            prior_mean,
            prior_sd,
            obs_sd,
            obs_count,
            names: Arc::new(vec!["theta".to_string()]),
            constraints: vec![Constraint::Free],
        }
    }

    /// Standard choice used throughout the test suite: N(0,1) prior, unit
    /// observation noise, five observations per simulated dataset.
    pub fn standard() -> Self {
        ConjugateNormalModel::new(0.0, 1.0, 1.0, 5)
    }

    /// Exact posterior for this model given `data`. Empty data returns the
    /// prior.
    pub fn posterior(&self, data: &Dataset) -> (f64, f64) {
        conjugate_posterior(self.prior_mean, self.prior_sd, self.obs_sd, data)
    }
}

/// Closed-form normal posterior `(mean, sd)` for a normal location model with
/// known observation noise. Empty data returns `(prior_mean, prior_sd)`.
pub fn conjugate_posterior(
    prior_mean: f64,
    prior_sd: f64,
    obs_sd: f64,
    data: &Dataset,
) -> (f64, f64) {
    assert!(prior_sd > 0.0 && obs_sd > 0.0);
    let values = scalar_values(data);
    let n = values.len() as f64;
    if values.is_empty() {
        return (prior_mean, prior_sd);
    }
    let sum: f64 = values.iter().sum();
    let prior_prec = 1.0 / (prior_sd * prior_sd);
    let obs_prec = 1.0 / (obs_sd * obs_sd);
    let post_prec = prior_prec + n * obs_prec;
    let post_mean = (prior_mean * prior_prec + sum * obs_prec) / post_prec;
    (post_mean, post_prec.sqrt().recip())
}

fn scalar_values(data: &Dataset) -> &[f64] {
    match data {
        Dataset::Scalar { values } => values,
        _ => panic!("conjugate model expects a scalar dataset"),
    }
}

impl Model for ConjugateNormalModel {
    fn name(&self) -> &str {
        "conjugate-normal"
    }

    fn param_names(&self) -> &Arc<Vec<String>> {
        &self.names
    }

    fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    fn data_shape(&self) -> DataShape {
        DataShape::Scalar { count: self.obs_count }
    }

    fn prior_sample(&self, rng: &mut RandomStream) -> ParamVec {
        let theta = rng.normal(self.prior_mean, self.prior_sd);
        self.param_vec_from_constrained(vec![theta]).expect("normal draw is finite")
    }

    fn simulate(&self, params: &ParamVec, rng: &mut RandomStream) -> Result<Dataset, ModelError> {
        let theta = params.constrained()[0];
        if !theta.is_finite() {
            return Err(ModelError::NonFiniteParameter { name: "theta".into(), value: theta });
        }
        let values = (0..self.obs_count).map(|_| rng.normal(theta, self.obs_sd)).collect();
        Ok(Dataset::Scalar { values })
    }

    fn log_prior(&self, params: &ParamVec) -> f64 {
        normal_logpdf(params.constrained()[0], self.prior_mean, self.prior_sd)
    }

    fn log_likelihood(&self, params: &ParamVec, data: &Dataset) -> Result<f64, ModelError> {
        let theta = params.constrained()[0];
        match data {
            Dataset::Scalar { values } => {
                Ok(values.iter().map(|&y| normal_logpdf(y, theta, self.obs_sd)).sum())
            }
            _ => Err(ModelError::ShapeMismatch {
                model: self.name().into(),
                detail: "expected a scalar dataset".into(),
            }),
        }
    }

    fn grad_unconstrained(&self, unconstrained: &[f64], data: &Dataset) -> Option<Vec<f64>> {
        let theta = unconstrained[0];
        let mut g = (self.prior_mean - theta) / (self.prior_sd * self.prior_sd);
        let obs_var = self.obs_sd * self.obs_sd;
        for &y in scalar_values(data) {
            g += (y - theta) / obs_var;
        }
        Some(vec![g])
    }

    fn default_quantities(&self) -> Vec<String> {
        vec!["theta".to_string()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_observation_update() {
        let d = Dataset::Scalar { values: vec![2.0] };
        let (m, s) = conjugate_posterior(0.0, 1.0, 1.0, &d);
        assert_abs_diff_eq!(m, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn empty_data_returns_prior() {
        let (m, s) = conjugate_posterior(0.3, 1.7, 1.0, &Dataset::empty_scalar());
        assert_eq!((m, s), (0.3, 1.7));
    }

    #[test]
    fn standard_normal_density_at_zero() {
        let model = ConjugateNormalModel::new(0.0, 1.0, 1.0, 1);
        let p = model.param_vec_from_constrained(vec![0.0]).unwrap();
        let d = Dataset::Scalar { values: vec![0.0] };
        let ll = model.log_likelihood(&p, &d).unwrap();
        assert_abs_diff_eq!(ll, -0.9189385332046727, epsilon = 1e-12);
    }

    #[test]
    fn likelihood_is_additive_over_independent_blocks() {
        let model = ConjugateNormalModel::standard();
        let p = model.param_vec_from_constrained(vec![0.4]).unwrap();
        let a = Dataset::Scalar { values: vec![0.3, -1.2] };
        let b = Dataset::Scalar { values: vec![2.1] };
        let joint = model.log_likelihood(&p, &a.concat(&b)).unwrap();
        let split = model.log_likelihood(&p, &a).unwrap() + model.log_likelihood(&p, &b).unwrap();
        assert_abs_diff_eq!(joint, split, epsilon = 1e-10);
    }

    #[test]
    fn prior_sample_is_deterministic_per_stream() {
        let model = ConjugateNormalModel::standard();
        let a = model.prior_sample(&mut SeedTree::new(11).rng());
        let b = model.prior_sample(&mut SeedTree::new(11).rng());
        assert_eq!(a.constrained(), b.constrained());
    }
}
