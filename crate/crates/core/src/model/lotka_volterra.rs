//! Lotka-Volterra predator-prey model with log-normal observation noise.
//!
//! Latent populations follow
//!
//! ```text
//! dH/dt =  alpha * H - beta * H * L
//! dL/dt = -gamma * L + delta * H * L
//! ```
//!
//! and observed pelt counts are log-normal around the latent trajectory:
//! `log(H_hat_t) ~ N(log H_t, sigma_h)`, `log(L_hat_t) ~ N(log L_t, sigma_l)`.
//!
//! Priors: `alpha, gamma ~ N(1, 0.5)` and `beta, delta ~ N(0.05, 0.05)`, both
//! truncated to the positive half-line and renormalized; `log sigma_h`,
//! `log sigma_l ~ N(-1, 1)`. Initial populations get log-normal(log 30, 1)
//! priors covering pelt-count magnitudes. An integration failure during
//! likelihood evaluation maps to negative infinity so samplers reject the
//! proposal instead of aborting.

use super::{normal_logpdf, Constraint, DataShape, Model, ParamVec};
use crate::data::Dataset;
use crate::error::ModelError;
use crate::ode::{rk4_solve_guarded, Trajectory};
use crate::rng::RandomStream;
use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::Arc;

/// Rates, noise scales, and initial populations; all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LvParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub sigma_h: f64,
    pub sigma_l: f64,
    pub h0: f64,
    pub l0: f64,
}

impl LvParams {
    pub fn from_slice(c: &[f64]) -> Self {
        LvParams {
            alpha: c[0],
            beta: c[1],
            gamma: c[2],
            delta: c[3],
            sigma_h: c[4],
            sigma_l: c[5],
            h0: c[6],
            l0: c[7],
        }
    }

    pub fn all_positive(&self) -> bool {
        [
            self.alpha, self.beta, self.gamma, self.delta, self.sigma_h, self.sigma_l, self.h0,
            self.l0,
        ]
        .iter()
        .all(|&v| v > 0.0 && v.is_finite())
    }
}

/// Right-hand side of the predator-prey system at `(h, l)`.
pub fn lv_rhs(state: (f64, f64), params: &LvParams) -> Result<(f64, f64), ModelError> {
    let (h, l) = state;
    if !h.is_finite() || !l.is_finite() {
        return Err(ModelError::NonFiniteInput(format!("state ({h}, {l})")));
    }
    Ok(lv_rhs_raw(h, l, params))
}

#[inline]
fn lv_rhs_raw(h: f64, l: f64, p: &LvParams) -> (f64, f64) {
    (p.alpha * h - p.beta * h * l, -p.gamma * l + p.delta * h * l)
}

/// Conserved quantity of the exact flow,
/// `V = delta*H - gamma*ln H + beta*L - alpha*ln L`.
/// Drift in V along a numerical trajectory measures integration error.
pub fn lv_invariant(state: (f64, f64), params: &LvParams) -> f64 {
    let (h, l) = state;
    params.delta * h - params.gamma * h.ln() + params.beta * l - params.alpha * l.ln()
}

/// Integrate the latent populations across `t_grid` with step `h_step`.
pub fn lv_solve(
    params: &LvParams,
    t_grid: &[f64],
    h_step: f64,
) -> Result<Trajectory<2>, ModelError> {
    let p = *params;
    let traj = rk4_solve_guarded(
        move |_, y: &[f64; 2]| {
            let (dh, dl) = lv_rhs_raw(y[0], y[1], &p);
            [dh, dl]
        },
        [params.h0, params.l0],
        t_grid,
        h_step,
        |y| y[0] > 0.0 && y[1] > 0.0,
    )?;
    Ok(traj)
}

#[derive(Debug, Clone)]
pub struct LotkaVolterraModel {
    /// Observation years relative to the series start.
    pub t_grid: Vec<f64>,
    /// RK4 step in years.
    pub h_step: f64,
    names: Arc<Vec<String>>,
    constraints: Vec<Constraint>,
}

impl LotkaVolterraModel {
    pub fn new(t_grid: Vec<f64>, h_step: f64) -> Self {
        assert!(h_step > 0.0);
        assert!(!t_grid.is_empty());
        let names = vec![
            "alpha".to_string(),
            "beta".to_string(),
            "gamma".to_string(),
            "delta".to_string(),
            "sigma_h".to_string(),
            "sigma_l".to_string(),
            "h0".to_string(),
            "l0".to_string(),
        ];
        LotkaVolterraModel {
            t_grid,
            h_step,
            names: Arc::new(names),
            constraints: vec![Constraint::Positive; 8],
        }
    }

    /// 21 integer years (1900-1920 in relative time), step 0.01.
    pub fn default_grid() -> Self {
        LotkaVolterraModel::new((0..=20).map(|t| t as f64).collect(), 0.01)
    }

    pub fn params_of(&self, params: &ParamVec) -> LvParams {
        LvParams::from_slice(params.constrained())
    }

    /// Solve the latent trajectory across the dataset's (deduplicated) times.
    fn states_at(&self, lv: &LvParams, times: &[f64]) -> Result<StateLookup, ModelError> {
        let mut grid: Vec<f64> = times.to_vec();
        grid.sort_by(|a, b| a.partial_cmp(b).expect("times are finite"));
        grid.dedup();
        let traj = lv_solve(lv, &grid, self.h_step)?;
        Ok(StateLookup {
            keys: grid.iter().map(|t| t.to_bits()).collect(),
            states: traj.states,
        })
    }

    fn observation_log_density(
        &self,
        lv: &LvParams,
        rows: &[crate::data::TimeObs],
        states: &StateLookup,
    ) -> Result<f64, ModelError> {
        let mut ll = 0.0;
        for r in rows {
            if r.hare <= 0.0 || r.lynx <= 0.0 {
                return Err(ModelError::ShapeMismatch {
                    model: self.name().into(),
                    detail: "pelt counts must be positive".into(),
                });
            }
            let s = states.get(r.time);
            // log-normal density of the recorded count around the latent state
            ll += normal_logpdf(r.hare.ln(), s[0].ln(), lv.sigma_h) - r.hare.ln();
            ll += normal_logpdf(r.lynx.ln(), s[1].ln(), lv.sigma_l) - r.lynx.ln();
        }
        Ok(ll)
    }

    /// Full unconstrained target (prior + likelihood + Jacobian) with the
    /// trajectory solve exposed so probes that leave the dynamics untouched
    /// can reuse it.
    fn target_with_states(
        &self,
        unconstrained: &[f64],
        rows: &[crate::data::TimeObs],
        times: &[f64],
        reuse: Option<&StateLookup>,
    ) -> Option<(f64, Option<StateLookup>)> {
        let (constrained, log_jac) = super::to_constrained(&self.constraints, unconstrained);
        let lv = LvParams::from_slice(&constrained);
        if !lv.all_positive() {
            return None;
        }
        let prior = {
            let params = ParamVec::from_unconstrained(
                self.names.clone(),
                &self.constraints,
                unconstrained.to_vec(),
            );
            self.log_prior(&params)
        };
        if !prior.is_finite() {
            return None;
        }
        match reuse {
            Some(states) => {
                let ll = self.observation_log_density(&lv, rows, states).ok()?;
                ll.is_finite().then_some((prior + ll + log_jac, None))
            }
            None => {
                let states = self.states_at(&lv, times).ok()?;
                let ll = self.observation_log_density(&lv, rows, &states).ok()?;
                ll.is_finite().then_some((prior + ll + log_jac, Some(states)))
            }
        }
    }

    /// Central differences with step `1e-6 * max(1, |x_k|)` on the
    /// unconstrained target. The trajectory solve is shared across the probes
    /// of the two observation-noise coordinates, which do not move the
    /// dynamics. A non-finite probe yields a NaN gradient, which the sampler
    /// rejects as a divergence.
    fn central_difference_grad(&self, unconstrained: &[f64], data: &Dataset) -> Option<Vec<f64>> {
        let rows = time_rows(data).ok()?;
        if rows.is_empty() {
            return None;
        }
        let times: Vec<f64> = rows.iter().map(|r| r.time).collect();
        let base_states = match self.states_at(&LvParams::from_slice(
            &super::to_constrained(&self.constraints, unconstrained).0,
        ), &times)
        {
            Ok(s) => Some(s),
            Err(_) => None,
        };
        let mut probe = unconstrained.to_vec();
        let mut grad = Vec::with_capacity(unconstrained.len());
        for k in 0..unconstrained.len() {
            let noise_coord = k == 4 || k == 5;
            let reuse = if noise_coord { base_states.as_ref() } else { None };
            if noise_coord && reuse.is_none() {
                return Some(vec![f64::NAN; unconstrained.len()]);
            }
            let h = 1e-6 * unconstrained[k].abs().max(1.0);
            probe[k] = unconstrained[k] + h;
            let up = self.target_with_states(&probe, rows, &times, reuse);
            probe[k] = unconstrained[k] - h;
            let down = self.target_with_states(&probe, rows, &times, reuse);
            probe[k] = unconstrained[k];
            match (up, down) {
                (Some((u, _)), Some((d, _))) => grad.push((u - d) / (2.0 * h)),
                _ => return Some(vec![f64::NAN; unconstrained.len()]),
            }
        }
        Some(grad)
    }
}

/// Trajectory states keyed by the bit pattern of their times.
struct StateLookup {
    keys: Vec<u64>,
    states: Vec<[f64; 2]>,
}

impl StateLookup {
    fn get(&self, time: f64) -> [f64; 2] {
        let idx = self
            .keys
            .binary_search(&time.to_bits())
            .expect("every observation time is on the solve grid");
        self.states[idx]
    }
}

fn time_rows(data: &Dataset) -> Result<&[crate::data::TimeObs], ModelError> {
    match data {
        Dataset::TimeSeries { rows } => Ok(rows),
        _ => Err(ModelError::ShapeMismatch {
            model: "lotka-volterra".into(),
            detail: "expected a pelt time series".into(),
        }),
    }
}

impl Model for LotkaVolterraModel {
    fn name(&self) -> &str {
        "lotka-volterra"
    }

    fn param_names(&self) -> &Arc<Vec<String>> {
        &self.names
    }

    fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    fn data_shape(&self) -> DataShape {
        DataShape::TimeSeries { times: self.t_grid.clone() }
    }

    fn prior_sample(&self, rng: &mut RandomStream) -> ParamVec {
        let alpha = rng.positive_normal(1.0, 0.5);
        let beta = rng.positive_normal(0.05, 0.05);
        let gamma = rng.positive_normal(1.0, 0.5);
        let delta = rng.positive_normal(0.05, 0.05);
        let sigma_h = rng.log_normal(-1.0, 1.0);
        let sigma_l = rng.log_normal(-1.0, 1.0);
        let h0 = rng.log_normal(30.0f64.ln(), 1.0);
        let l0 = rng.log_normal(30.0f64.ln(), 1.0);
        self.param_vec_from_constrained(vec![alpha, beta, gamma, delta, sigma_h, sigma_l, h0, l0])
            .expect("prior draw satisfies constraints")
    }

    fn simulate(&self, params: &ParamVec, rng: &mut RandomStream) -> Result<Dataset, ModelError> {
        let lv = self.params_of(params);
        if !lv.all_positive() {
            return Err(ModelError::NonFiniteInput("parameters must be positive".into()));
        }
        let traj = lv_solve(&lv, &self.t_grid, self.h_step)?;
        let rows = traj
            .times
            .iter()
            .zip(&traj.states)
            .map(|(&time, s)| crate::data::TimeObs {
                time,
                hare: (s[0].ln() + lv.sigma_h * rng.standard_normal()).exp(),
                lynx: (s[1].ln() + lv.sigma_l * rng.standard_normal()).exp(),
            })
            .collect();
        Ok(Dataset::TimeSeries { rows })
    }

    fn log_prior(&self, params: &ParamVec) -> f64 {
        let lv = self.params_of(params);
        if !lv.all_positive() {
            return f64::NEG_INFINITY;
        }
        let std = Normal::standard();
        // positive-truncated normals, renormalized by the truncation mass
        let trunc = |x: f64, mean: f64, sd: f64| {
            normal_logpdf(x, mean, sd) - std.cdf(mean / sd).ln()
        };
        // log-normal on the noise scales and initial populations
        let lognorm = |x: f64, m: f64, s: f64| normal_logpdf(x.ln(), m, s) - x.ln();
        trunc(lv.alpha, 1.0, 0.5)
            + trunc(lv.beta, 0.05, 0.05)
            + trunc(lv.gamma, 1.0, 0.5)
            + trunc(lv.delta, 0.05, 0.05)
            + lognorm(lv.sigma_h, -1.0, 1.0)
            + lognorm(lv.sigma_l, -1.0, 1.0)
            + lognorm(lv.h0, 30.0f64.ln(), 1.0)
            + lognorm(lv.l0, 30.0f64.ln(), 1.0)
    }

    fn log_likelihood(&self, params: &ParamVec, data: &Dataset) -> Result<f64, ModelError> {
        let rows = time_rows(data)?;
        let lv = self.params_of(params);
        if !lv.all_positive() {
            return Ok(f64::NEG_INFINITY);
        }
        if rows.is_empty() {
            return Ok(0.0);
        }
        let times: Vec<f64> = rows.iter().map(|r| r.time).collect();
        let states = match self.states_at(&lv, &times) {
            Ok(s) => s,
            // failed integration rejects the proposal rather than aborting
            Err(ModelError::Ode(_)) => return Ok(f64::NEG_INFINITY),
            Err(e) => return Err(e),
        };
        self.observation_log_density(&lv, rows, &states)
    }

    fn grad_unconstrained(&self, unconstrained: &[f64], data: &Dataset) -> Option<Vec<f64>> {
        self.central_difference_grad(unconstrained, data)
    }

    fn default_quantities(&self) -> Vec<String> {
        self.names.iter().cloned().collect()
    }
}
