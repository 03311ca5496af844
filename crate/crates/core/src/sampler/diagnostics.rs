//! MCMC convergence diagnostics: split rank-normalized R-hat, rank-normalized
//! bulk effective sample size with Geyer's initial-monotone truncation, and
//! strided thinning.

use crate::error::SamplerError;
use statrs::distribution::{ContinuousCDF, Normal};

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Split every chain in half (the middle draw is dropped when odd), trimming
/// all chains to the shortest length first.
pub fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let half = n / 2;
    let mut out = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        out.push(c[..half].to_vec());
        out.push(c[n - half..n].to_vec());
    }
    out
}

/// Rank-normalize all chains jointly: pooled fractional ranks (average rank
/// for ties) mapped through the normal quantile function.
pub fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = chains.iter().map(|c| c.len()).sum();
    let mut order: Vec<(usize, usize)> = Vec::with_capacity(total);
    for (ci, c) in chains.iter().enumerate() {
        for i in 0..c.len() {
            order.push((ci, i));
        }
    }
    order.sort_by(|a, b| {
        chains[a.0][a.1].partial_cmp(&chains[b.0][b.1]).expect("draws must not be NaN")
    });
    let mut rank = vec![0.0f64; total];
    let flat_index: std::collections::HashMap<(usize, usize), usize> =
        order.iter().enumerate().map(|(pos, &key)| (key, pos)).collect();
    // average ranks over tie runs
    let mut start = 0;
    while start < total {
        let mut end = start + 1;
        let v = chains[order[start].0][order[start].1];
        while end < total && chains[order[end].0][order[end].1] == v {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0; // mean of ranks start+1..=end
        for pos in start..end {
            rank[pos] = avg;
        }
        start = end;
    }
    let std_normal = Normal::standard();
    let n = total as f64;
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    for (ci, c) in chains.iter().enumerate() {
        for i in 0..c.len() {
            let pos = flat_index[&(ci, i)];
            out[ci][i] = std_normal.inverse_cdf((rank[pos] - 0.375) / (n + 0.25));
        }
    }
    out
}

fn check_draws(chains: &[Vec<f64>], min_len: usize) -> Result<(), SamplerError> {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if chains.is_empty() || n < min_len {
        return Err(SamplerError::TooFewDraws { need: min_len, got: n });
    }
    let first = chains[0][0];
    if chains.iter().all(|c| c.iter().all(|&v| v == first)) {
        return Err(SamplerError::DegenerateDraws("all draws are identical".into()));
    }
    if chains.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return Err(SamplerError::DegenerateDraws("non-finite draw".into()));
    }
    Ok(())
}

fn classic_rhat(chains: &[Vec<f64>]) -> Result<f64, SamplerError> {
    let m = chains.len();
    let n = chains.iter().map(|c| c.len()).min().unwrap();
    if m < 2 || n < 2 {
        return Err(SamplerError::TooFewDraws { need: 2, got: n.min(m) });
    }
    let trimmed: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = trimmed.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = trimmed.iter().map(|c| sample_variance(c)).collect();
    let w = mean(&vars);
    if !(w > 0.0) {
        return Err(SamplerError::DegenerateDraws("zero within-chain variance".into()));
    }
    let n = n as f64;
    let var_plus = (n - 1.0) / n * w + sample_variance(&means);
    Ok((var_plus / w).sqrt())
}

/// Split rank-normalized R-hat of one scalar quantity.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64, SamplerError> {
    check_draws(chains, 4)?;
    let split = split_chains(chains);
    let z = rank_normalize(&split);
    classic_rhat(&z)
}

fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let centered: Vec<f64> = x.iter().map(|v| v - m).collect();
    let mut acov = Vec::with_capacity(n);
    for t in 0..n {
        let mut s = 0.0;
        for i in 0..n - t {
            s += centered[i] * centered[i + t];
        }
        acov.push(s / n as f64);
    }
    acov
}

/// Rank-normalized bulk effective sample size: Geyer's initial positive and
/// monotone sequences on the combined autocorrelation across split chains.
pub fn ess_bulk(chains: &[Vec<f64>]) -> Result<f64, SamplerError> {
    check_draws(chains, 4)?;
    let split = split_chains(chains);
    let z = rank_normalize(&split);
    ess_of(&z)
}

fn ess_of(chains: &[Vec<f64>]) -> Result<f64, SamplerError> {
    let m = chains.len();
    let n = chains.iter().map(|c| c.len()).min().unwrap();
    if n < 4 {
        return Err(SamplerError::TooFewDraws { need: 4, got: n });
    }
    let trimmed: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let acov: Vec<Vec<f64>> = trimmed.iter().map(|c| autocovariance(c)).collect();
    let chain_means: Vec<f64> = trimmed.iter().map(|c| mean(c)).collect();
    let chain_vars: Vec<f64> = acov.iter().map(|a| a[0] * n as f64 / (n as f64 - 1.0)).collect();
    let mean_var = mean(&chain_vars);
    let mut var_plus = mean_var * (n as f64 - 1.0) / n as f64;
    if m > 1 {
        var_plus += sample_variance(&chain_means);
    }
    if !(var_plus > 0.0) {
        return Err(SamplerError::DegenerateDraws("zero pooled variance".into()));
    }

    let mean_acov = |t: usize| acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;

    let mut rho = vec![0.0f64; n];
    rho[0] = 1.0;
    let mut rho_even = 1.0;
    let mut rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
    rho[1] = rho_odd;
    // initial positive sequence
    let mut s = 1usize;
    while s < n.saturating_sub(4) && rho_even + rho_odd > 0.0 {
        rho_even = 1.0 - (mean_var - mean_acov(s + 1)) / var_plus;
        rho_odd = 1.0 - (mean_var - mean_acov(s + 2)) / var_plus;
        if rho_even + rho_odd >= 0.0 {
            rho[s + 1] = rho_even;
            rho[s + 2] = rho_odd;
        }
        s += 2;
    }
    let max_s = s;
    if rho_even > 0.0 {
        rho[max_s + 1] = rho_even;
    }
    // initial monotone sequence: pair sums must not increase
    let mut t = 1usize;
    while t + 2 <= max_s.saturating_sub(1) {
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t] {
            let avg = (rho[t - 1] + rho[t]) / 2.0;
            rho[t + 1] = avg;
            rho[t + 2] = avg;
        }
        t += 2;
    }

    let num_total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho[..max_s].iter().sum::<f64>() + rho[max_s + 1];
    let ess = num_total / tau;
    Ok(ess.min(num_total * num_total.log10()))
}

/// Evenly strided subset of exactly `target` draws: stride
/// `floor(total / target)`, keeping the last element of each stride block.
pub fn thin<T: Clone>(draws: &[T], target: usize) -> Result<Vec<T>, SamplerError> {
    if target == 0 || target > draws.len() {
        return Err(SamplerError::ThinTargetTooLarge { target, available: draws.len() });
    }
    let stride = draws.len() / target;
    Ok((1..=target).map(|k| draws[k * stride - 1].clone()).collect())
}

/// Monte Carlo standard error of the pooled mean, using the bulk ESS.
pub fn mcse_mean(chains: &[Vec<f64>]) -> Result<f64, SamplerError> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let sd = sample_variance(&pooled).sqrt();
    let ess = ess_bulk(chains)?;
    Ok(sd / ess.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn iid_chains(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = SeedTree::new(seed).rng();
        (0..m).map(|_| (0..n).map(|_| rng.standard_normal()).collect()).collect()
    }

    #[test]
    fn iid_chains_have_rhat_near_one() {
        let rhat = split_rhat(&iid_chains(4, 1000, 1)).unwrap();
        assert!(rhat < 1.01, "rhat {rhat}");
    }

    #[test]
    fn separated_chains_have_large_rhat() {
        // canonical value for two chains at means 0 and 2 is 1.49 +- 0.02
        let mut chains = iid_chains(2, 1000, 2);
        for v in chains[1].iter_mut() {
            *v += 2.0;
        }
        let rhat = split_rhat(&chains).unwrap();
        assert!(rhat > 1.4, "rhat {rhat}");

        // four chains with consecutive means separated by 2 push it past 1.5
        let mut chains = iid_chains(4, 1000, 2);
        for (k, c) in chains.iter_mut().enumerate() {
            for v in c.iter_mut() {
                *v += 2.0 * k as f64;
            }
        }
        let rhat = split_rhat(&chains).unwrap();
        assert!(rhat > 1.5, "rhat {rhat}");
    }

    #[test]
    fn constant_chains_error() {
        let chains = vec![vec![1.0; 100], vec![1.0; 100]];
        assert!(split_rhat(&chains).is_err());
        assert!(ess_bulk(&chains).is_err());
    }

    #[test]
    fn rhat_invariant_under_monotone_transform() {
        let chains = iid_chains(4, 500, 3);
        let mapped: Vec<Vec<f64>> =
            chains.iter().map(|c| c.iter().map(|v| (0.3 * v).exp() + 2.0).collect()).collect();
        let a = split_rhat(&chains).unwrap();
        let b = split_rhat(&mapped).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn iid_ess_is_close_to_total_draws() {
        let chains = iid_chains(4, 1000, 4);
        let ess = ess_bulk(&chains).unwrap();
        assert!((ess - 4000.0).abs() < 0.2 * 4000.0, "ess {ess}");
    }

    #[test]
    fn ar1_ess_matches_closed_form_within_factor() {
        let phi: f64 = 0.9;
        let mut rng = SeedTree::new(5).rng();
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = rng.standard_normal() / (1.0 - phi * phi).sqrt();
                (0..1000)
                    .map(|_| {
                        x = phi * x + rng.standard_normal();
                        x
                    })
                    .collect()
            })
            .collect();
        let ess = ess_bulk(&chains).unwrap();
        let expect = 4000.0 * (1.0 - phi) / (1.0 + phi);
        assert!(
            ess > expect / 1.5 && ess < expect * 1.5,
            "ess {ess}, closed form {expect}"
        );
    }

    #[test]
    fn two_draws_is_insufficient() {
        let chains = vec![vec![0.1, 0.9]];
        assert!(ess_bulk(&chains).is_err());
    }

    #[test]
    fn thin_stride_arithmetic() {
        let draws: Vec<usize> = (0..2000).collect();
        let thinned = thin(&draws, 100).unwrap();
        assert_eq!(thinned.len(), 100);
        assert_eq!(thinned[0], 19);
        assert_eq!(thinned[1], 39);
        assert_eq!(thinned[99], 1999);
    }

    #[test]
    fn thin_to_full_length_is_identity() {
        let draws: Vec<usize> = (0..50).collect();
        assert_eq!(thin(&draws, 50).unwrap(), draws);
    }

    #[test]
    fn thin_rejects_oversized_target() {
        let draws = [1.0, 2.0];
        assert!(thin(&draws, 3).is_err());
    }

    #[test]
    fn thinned_iid_draws_keep_full_ess() {
        let chains = iid_chains(1, 8000, 6);
        let thinned = thin(&chains[0], 400).unwrap();
        // split into pseudo-chains for the estimator
        let halves = vec![thinned[..200].to_vec(), thinned[200..].to_vec()];
        let ess = ess_bulk(&halves).unwrap();
        assert!((ess - 400.0).abs() < 0.2 * 400.0, "ess {ess}");
    }
}
