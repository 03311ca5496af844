//! Gaussian random-walk Metropolis baseline.
//!
//! Proposals are isotropic normal steps; warmup adapts the global proposal
//! scale by Robbins-Monro toward 0.234 acceptance. The proposal is symmetric,
//! so the acceptance ratio is the target density ratio alone.

use super::{Chain, SamplerConfig, Target};
use crate::error::SamplerError;
use crate::rng::RandomStream;

pub const RWM_TARGET_ACCEPT: f64 = 0.234;

/// Log acceptance probability of a symmetric-proposal move.
pub fn metropolis_log_accept(logp_current: f64, logp_proposed: f64) -> f64 {
    (logp_proposed - logp_current).min(0.0)
}

pub fn rwm_chain(
    target: &dyn Target,
    config: &SamplerConfig,
    rng: &mut RandomStream,
) -> Result<Chain, SamplerError> {
    config.validate()?;
    let dim = target.dim();

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

    let mut nonfinite_proposals = 0usize;
    let mut log_scale = (2.38 / (dim as f64).sqrt()).ln();
    let propose = |q: &mut Vec<f64>,
                       logp: &mut f64,
                       scale: f64,
                       nonfinite: &mut usize,
                       rng: &mut RandomStream| {
        let prop: Vec<f64> = q.iter().map(|v| v + scale * rng.standard_normal()).collect();
        let lp = target.log_density(&prop);
        if !lp.is_finite() {
            *nonfinite += 1;
            let _ = rng.uniform();
            return 0.0;
        }
        let accept_prob = metropolis_log_accept(*logp, lp).exp();
        if rng.uniform() < accept_prob {
            *q = prop;
            *logp = lp;
        }
        accept_prob
    };

    if config.fixed_step_size.is_none() {
        for t in 1..=config.warmup_draws {
            let scale = log_scale.exp();
            let accept_prob = propose(&mut q, &mut logp, scale, &mut nonfinite_proposals, rng);
            log_scale += (t as f64).powf(-0.6) * (accept_prob - RWM_TARGET_ACCEPT);
        }
    } else if let Some(s) = config.fixed_step_size {
        log_scale = s.ln();
        for _ in 0..config.warmup_draws {
            propose(&mut q, &mut logp, s, &mut nonfinite_proposals, rng);
        }
    }

    let scale = log_scale.exp();
    let mut draws = Vec::with_capacity(config.keep_draws);
    let mut accept_rates = Vec::with_capacity(config.keep_draws);
    for _ in 0..config.keep_draws {
        let accept_prob = propose(&mut q, &mut logp, scale, &mut nonfinite_proposals, rng);
        accept_rates.push(accept_prob);
        draws.push(q.clone());
    }

    Ok(Chain {
        draws,
        accept_rates,
        divergence_count: 0,
        warmup_divergences: 0,
        nonfinite_proposals,
        step_size: scale,
        mass_diag: vec![1.0; dim],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_acceptance_uses_density_ratio_only() {
        // two-point analog: moving to a state with half the density accepts
        // with probability exactly 1/2; uphill moves always accept
        let p0 = (0.5f64).ln();
        let p1 = (0.25f64).ln();
        assert!((metropolis_log_accept(p0, p1).exp() - 0.5).abs() < 1e-12);
        assert_eq!(metropolis_log_accept(p1, p0).exp(), 1.0);
    }
}
