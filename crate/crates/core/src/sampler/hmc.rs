//! Static-trajectory Hamiltonian Monte Carlo.
//!
//! Warmup adapts the step size by dual averaging toward `target_accept` and
//! estimates a diagonal mass matrix from warmup draws in the second half of
//! warmup; a short final window re-adapts the step size under the new metric.
//! Each post-warmup transition integrates a path-length uniformly jittered
//! around `path_time / step_size` leapfrog steps. A transition whose
//! Hamiltonian error exceeds the divergence threshold at any step is counted
//! as divergent and rejected.

use super::{Chain, SamplerConfig, Target};
use crate::error::SamplerError;
use crate::rng::RandomStream;

/// Hoffman-Gelman dual averaging of the log step size.
struct DualAveraging {
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    t: u64,
    target: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps0: f64, target: f64) -> Self {
        DualAveraging {
            mu: (10.0 * eps0).ln(),
            log_eps: eps0.ln(),
            log_eps_bar: 0.0,
            h_bar: 0.0,
            t: 0,
            target,
        }
    }

    fn update(&mut self, accept_prob: f64) {
        self.t += 1;
        let t = self.t as f64;
        let frac = 1.0 / (t + Self::T0);
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_prob);
        self.log_eps = self.mu - t.sqrt() / Self::GAMMA * self.h_bar;
        let w = t.powf(-Self::KAPPA);
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar;
    }

    fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    fn adapted(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// `steps` leapfrog steps for the Hamiltonian with inverse metric diagonal
/// `inv_mass`. Returns the endpoint, or `None` when the state leaves the
/// finite region (a divergence signal, not an error).
pub fn leapfrog(
    grad: &mut impl FnMut(&[f64]) -> Result<Vec<f64>, SamplerError>,
    position: &[f64],
    momentum: &[f64],
    eps: f64,
    steps: usize,
    inv_mass: &[f64],
) -> Option<(Vec<f64>, Vec<f64>)> {
    assert!(eps > 0.0 && steps >= 1);
    let mut q = position.to_vec();
    let g0 = grad(&q).ok()?;
    let mut p_half: Vec<f64> =
        momentum.iter().zip(&g0).map(|(p, g)| p + 0.5 * eps * g).collect();
    for step in 0..steps {
        for ((qk, pk), m) in q.iter_mut().zip(&p_half).zip(inv_mass) {
            *qk += eps * m * pk;
        }
        if !q.iter().all(|v| v.is_finite()) {
            return None;
        }
        let g = grad(&q).ok()?;
        let half = if step + 1 == steps { 0.5 * eps } else { eps };
        for (pk, gk) in p_half.iter_mut().zip(&g) {
            *pk += half * gk;
        }
        if !p_half.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    Some((q, p_half))
}

fn kinetic(p: &[f64], inv_mass: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_mass).map(|(pk, m)| pk * pk * m).sum::<f64>()
}

fn sample_momentum(rng: &mut RandomStream, inv_mass: &[f64]) -> Vec<f64> {
    inv_mass.iter().map(|m| rng.standard_normal() / m.sqrt()).collect()
}

/// One-step doubling search for a step size with acceptance near 1/2.
fn find_reasonable_eps(
    target: &dyn Target,
    q: &[f64],
    logp: f64,
    inv_mass: &[f64],
    rng: &mut RandomStream,
) -> f64 {
    let mut eps = 1.0f64;
    let p = sample_momentum(rng, inv_mass);
    let h0 = -logp + kinetic(&p, inv_mass);
    let log_ratio_at = |eps: f64| {
        let mut grad = |x: &[f64]| target.grad(x);
        match leapfrog(&mut grad, q, &p, eps, 1, inv_mass) {
            Some((q1, p1)) => {
                let lp1 = target.log_density(&q1);
                if lp1.is_finite() {
                    h0 - (-lp1 + kinetic(&p1, inv_mass))
                } else {
                    f64::NEG_INFINITY
                }
            }
            None => f64::NEG_INFINITY,
        }
    };
    let mut log_ratio = log_ratio_at(eps);
    let dir: f64 = if log_ratio > (0.5f64).ln() { 1.0 } else { -1.0 };
    while dir * log_ratio > -dir * std::f64::consts::LN_2 {
        eps *= (2.0f64).powf(dir);
        if !(1e-10..=1e7).contains(&eps) {
            break;
        }
        log_ratio = log_ratio_at(eps);
    }
    eps
}

struct TransitionOutcome {
    accept_prob: f64,
    divergent: bool,
    nonfinite: bool,
}

/// One static-HMC transition; mutates `q`/`logp` on acceptance.
#[allow(clippy::too_many_arguments)]
fn transition(
    target: &dyn Target,
    q: &mut Vec<f64>,
    logp: &mut f64,
    eps: f64,
    steps: usize,
    inv_mass: &[f64],
    threshold: f64,
    rng: &mut RandomStream,
) -> TransitionOutcome {
    let p0 = sample_momentum(rng, inv_mass);
    let h0 = -*logp + kinetic(&p0, inv_mass);

    let mut q_new = q.clone();
    let mut lp_new = *logp;
    let mut diverged = false;
    let mut nonfinite = false;

    // merged leapfrog with a Hamiltonian-error check at every full step
    match target.grad(&q_new) {
        Ok(g0) => {
            let mut p_half: Vec<f64> =
                p0.iter().zip(&g0).map(|(p, g)| p + 0.5 * eps * g).collect();
            let mut h_end = h0;
            for _ in 0..steps {
                for ((qk, pk), m) in q_new.iter_mut().zip(&p_half).zip(inv_mass) {
                    *qk += eps * m * pk;
                }
                if !q_new.iter().all(|v| v.is_finite()) {
                    diverged = true;
                    break;
                }
                let g = match target.grad(&q_new) {
                    Ok(g) => g,
                    Err(_) => {
                        diverged = true;
                        break;
                    }
                };
                lp_new = target.log_density(&q_new);
                if !lp_new.is_finite() {
                    diverged = true;
                    nonfinite = true;
                    break;
                }
                // momentum at the completed step, for the energy check
                let p_full: Vec<f64> =
                    p_half.iter().zip(&g).map(|(p, gk)| p + 0.5 * eps * gk).collect();
                let h = -lp_new + kinetic(&p_full, inv_mass);
                if !h.is_finite() || h - h0 > threshold {
                    diverged = true;
                    break;
                }
                h_end = h;
                for (pk, gk) in p_half.iter_mut().zip(&g) {
                    *pk += eps * gk;
                }
            }
            if !diverged {
                let accept_prob = (h0 - h_end).exp().min(1.0);
                if rng.uniform() < accept_prob {
                    *q = q_new;
                    *logp = lp_new;
                }
                return TransitionOutcome { accept_prob, divergent: false, nonfinite };
            }
        }
        Err(_) => {
            diverged = true;
        }
    }
    // divergent trajectories are rejected outright but still consume the
    // accept variate so transitions stay aligned across configurations
    let _ = rng.uniform();
    TransitionOutcome { accept_prob: 0.0, divergent: diverged, nonfinite }
}

fn jittered_steps(base: usize, jitter: f64, max_steps: usize, rng: &mut RandomStream) -> usize {
    let lo = ((base as f64) * (1.0 - jitter)).round().max(1.0) as usize;
    let hi = (((base as f64) * (1.0 + jitter)).round() as usize).min(max_steps).max(lo);
    lo + rng.uniform_int((hi - lo + 1) as u64) as usize
}

fn base_steps(config: &SamplerConfig, eps: f64) -> usize {
    ((config.path_time / eps).round() as usize).clamp(1, config.max_leapfrog_steps)
}

/// Streaming mean/variance accumulator for mass estimation.
struct RunningVariance {
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningVariance {
    fn new(dim: usize) -> Self {
        RunningVariance { n: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    /// Sample variances with a small uniform regularization.
    fn regularized(&self) -> Option<Vec<f64>> {
        if self.n < 2 {
            return None;
        }
        let var: Vec<f64> = self.m2.iter().map(|s| s / (self.n as f64 - 1.0)).collect();
        let mean_var = var.iter().sum::<f64>() / var.len() as f64;
        if !(mean_var > 0.0) {
            return None;
        }
        Some(var.iter().map(|v| v + 1e-3 * mean_var).collect())
    }
}

pub fn hmc_chain(
    target: &dyn Target,
    config: &SamplerConfig,
    rng: &mut RandomStream,
) -> Result<Chain, SamplerError> {
    config.validate()?;
    let dim = target.dim();

    // random initialization in unconstrained space, retried until finite
    let mut q = vec![0.0; dim];
    let mut logp = f64::NEG_INFINITY;
    let mut initialized = false;
    for _ in 0..100 {
        for v in q.iter_mut() {
            *v = rng.uniform_range(-2.0, 2.0);
        }
        logp = target.log_density(&q);
        if logp.is_finite() {
            initialized = true;
            break;
        }
    }
    if !initialized {
        return Err(SamplerError::InitializationFailed { attempts: 100 });
    }

    let mut inv_mass = vec![1.0; dim];
    let warmup = config.warmup_draws;
    let mut warmup_divergences = 0usize;
    let mut nonfinite_proposals = 0usize;

    let eps_final = if let Some(eps) = config.fixed_step_size {
        // manual mode: no step-size or metric adaptation
        for _ in 0..warmup {
            let steps = jittered_steps(
                base_steps(config, eps),
                config.path_length_jitter,
                config.max_leapfrog_steps,
                rng,
            );
            let out = transition(
                target,
                &mut q,
                &mut logp,
                eps,
                steps,
                &inv_mass,
                config.divergence_threshold,
                rng,
            );
            warmup_divergences += out.divergent as usize;
            nonfinite_proposals += out.nonfinite as usize;
        }
        eps
    } else {
        // mass window covers the second half of warmup; the tail re-adapts
        // the step size under the final metric
        let mass_start = warmup / 2;
        let mass_end = if warmup >= 20 { (warmup * 9) / 10 } else { warmup };
        let mut da = DualAveraging::new(
            find_reasonable_eps(target, &q, logp, &inv_mass, rng),
            config.target_accept,
        );
        let mut acc = RunningVariance::new(dim);
        for t in 0..warmup {
            let eps = da.current().clamp(1e-12, 1e6);
            let steps = jittered_steps(
                base_steps(config, eps),
                config.path_length_jitter,
                config.max_leapfrog_steps,
                rng,
            );
            let out = transition(
                target,
                &mut q,
                &mut logp,
                eps,
                steps,
                &inv_mass,
                config.divergence_threshold,
                rng,
            );
            warmup_divergences += out.divergent as usize;
            nonfinite_proposals += out.nonfinite as usize;
            da.update(out.accept_prob);
            if t >= mass_start && t < mass_end {
                acc.push(&q);
            }
            if t + 1 == mass_end && mass_end < warmup {
                if let Some(mass) = acc.regularized() {
                    inv_mass = mass;
                }
                da = DualAveraging::new(
                    find_reasonable_eps(target, &q, logp, &inv_mass, rng),
                    config.target_accept,
                );
            }
        }
        if warmup_divergences == warmup {
            return Err(SamplerError::AllDivergent);
        }
        da.adapted().clamp(1e-12, 1e6)
    };

    let base = base_steps(config, eps_final);
    let mut draws = Vec::with_capacity(config.keep_draws);
    let mut accept_rates = Vec::with_capacity(config.keep_draws);
    let mut divergence_count = 0usize;
    for _ in 0..config.keep_draws {
        let steps = jittered_steps(base, config.path_length_jitter, config.max_leapfrog_steps, rng);
        let out = transition(
            target,
            &mut q,
            &mut logp,
            eps_final,
            steps,
            &inv_mass,
            config.divergence_threshold,
            rng,
        );
        divergence_count += out.divergent as usize;
        nonfinite_proposals += out.nonfinite as usize;
        accept_rates.push(out.accept_prob);
        draws.push(q.clone());
    }

    Ok(Chain {
        draws,
        accept_rates,
        divergence_count,
        warmup_divergences,
        nonfinite_proposals,
        step_size: eps_final,
        mass_diag: inv_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    struct StdNormal {
        dim: usize,
    }

    impl Target for StdNormal {
        fn dim(&self) -> usize {
            self.dim
        }
        fn log_density(&self, x: &[f64]) -> f64 {
            -0.5 * x.iter().map(|v| v * v).sum::<f64>()
        }
        fn grad(&self, x: &[f64]) -> Result<Vec<f64>, SamplerError> {
            Ok(x.iter().map(|v| -v).collect())
        }
    }

    #[test]
    fn leapfrog_identity_in_the_zero_step_limit() {
        let t = StdNormal { dim: 3 };
        let q = vec![0.3, -1.0, 2.0];
        let p = vec![1.0, 0.5, -0.25];
        let mut grad = |x: &[f64]| t.grad(x);
        let (q1, p1) = leapfrog(&mut grad, &q, &p, 1e-12, 1, &[1.0, 1.0, 1.0]).unwrap();
        for (a, b) in q1.iter().zip(&q) {
            assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in p1.iter().zip(&p) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn leapfrog_is_reversible() {
        let t = StdNormal { dim: 2 };
        let q = vec![0.7, -0.2];
        let p = vec![-0.4, 1.1];
        let inv_mass = [1.0, 2.5];
        let mut grad = |x: &[f64]| t.grad(x);
        let (q1, p1) = leapfrog(&mut grad, &q, &p, 0.05, 20, &inv_mass).unwrap();
        let neg: Vec<f64> = p1.iter().map(|v| -v).collect();
        let (q2, p2) = leapfrog(&mut grad, &q1, &neg, 0.05, 20, &inv_mass).unwrap();
        for (a, b) in q2.iter().zip(&q) {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in p2.iter().zip(&p) {
            assert!((a + b).abs() < 1e-10);
        }
    }

    #[test]
    fn leapfrog_tracks_harmonic_oscillator_flow() {
        let t = StdNormal { dim: 1 };
        let mut grad = |x: &[f64]| t.grad(x);
        let (q1, _) = leapfrog(&mut grad, &[1.0], &[0.0], 0.01, 314, &[1.0]).unwrap();
        assert!((q1[0] - (3.14f64).cos()).abs() < 1e-2, "got {}", q1[0]);
    }

    #[test]
    fn initialization_fails_on_nan_target() {
        struct Nan;
        impl Target for Nan {
            fn dim(&self) -> usize {
                1
            }
            fn log_density(&self, _: &[f64]) -> f64 {
                f64::NAN
            }
        }
        let mut rng = SeedTree::new(0).rng();
        let err = hmc_chain(&Nan, &SamplerConfig::default(), &mut rng).unwrap_err();
        assert!(matches!(err, SamplerError::InitializationFailed { .. }));
    }
}
