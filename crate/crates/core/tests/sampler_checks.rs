//! Sampler correctness against analytic and Monte Carlo oracles: finite
//! differences vs hand-coded gradients, posterior moments on Gaussian
//! targets with MCSE bounds, step-size adaptation windows, divergence
//! behaviour on a funnel target, and integrator properties.

use sbc_core::data::Dataset;
use sbc_core::error::SamplerError;
use sbc_core::model::conjugate::ConjugateNormalModel;
use sbc_core::model::hierarchical::{HierarchicalModel, Parameterization};
use sbc_core::model::Model;
use sbc_core::rng::SeedTree;
use sbc_core::sampler::diagnostics::{ess_bulk, mcse_mean};
use sbc_core::sampler::grad::finite_diff_grad;
use sbc_core::sampler::hmc::leapfrog;
use sbc_core::sampler::{
    sample_chains, PosteriorTarget, SamplerConfig, SamplerKind, Target,
};

struct StdNormalTarget {
    dim: usize,
}

impl Target for StdNormalTarget {
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

/// Funnel: v ~ N(0, 3), x_k | v ~ N(0, exp(v/2)^2).
struct FunnelTarget {
    latent: usize,
}

impl Target for FunnelTarget {
    fn dim(&self) -> usize {
        self.latent + 1
    }
    fn log_density(&self, q: &[f64]) -> f64 {
        let v = q[0];
        let mut lp = -0.5 * (v / 3.0) * (v / 3.0);
        for &x in &q[1..] {
            lp += -0.5 * v - 0.5 * x * x * (-v).exp();
        }
        lp
    }
    fn grad(&self, q: &[f64]) -> Result<Vec<f64>, SamplerError> {
        let v = q[0];
        let inv_var = (-v).exp();
        let mut g = vec![0.0; q.len()];
        g[0] = -v / 9.0 - 0.5 * self.latent as f64
            + 0.5 * q[1..].iter().map(|x| x * x).sum::<f64>() * inv_var;
        for (k, &x) in q[1..].iter().enumerate() {
            g[k + 1] = -x * inv_var;
        }
        Ok(g)
    }
}

#[test]
fn finite_differences_match_analytic_hierarchical_gradient() {
    let model = HierarchicalModel::new(Parameterization::Centered, 8, 5);
    let noncentered = HierarchicalModel::new(Parameterization::NonCentered, 8, 5);
    let mut rng = SeedTree::new(40).rng();
    let prior_draw = model.prior_sample(&mut rng);
    let data = model.simulate(&prior_draw, &mut rng).unwrap();
    for m in [&model, &noncentered] {
        let target = PosteriorTarget::new(m, &data);
        for _ in 0..100 {
            let mut z = vec![0.0; m.dim()];
            z[0] = rng.normal(0.0, 1.0);
            z[1] = rng.normal(0.0, 0.5);
            z[2] = rng.normal(0.0, 0.5);
            for v in z.iter_mut().skip(3) {
                *v = rng.normal(0.0, 1.0);
            }
            let analytic = m.grad_unconstrained(&z, &data).unwrap();
            let fd = finite_diff_grad(|x| target.log_density(x), &z).unwrap();
            for (a, f) in analytic.iter().zip(&fd) {
                let rel = (a - f).abs() / a.abs().max(1.0);
                assert!(rel < 1e-4, "gradient mismatch: analytic {a}, fd {f}");
            }
        }
    }
}

fn pooled_mean_and_var(chains: &[Vec<f64>]) -> (f64, f64) {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
    let var =
        pooled.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (pooled.len() as f64 - 1.0);
    (mean, var)
}

#[test]
fn hmc_recovers_standard_normal_moments() {
    let target = StdNormalTarget { dim: 1 };
    let config = SamplerConfig { seed: 5, ..SamplerConfig::default() };
    let chains = sample_chains_all(&target, &config, SamplerKind::Hmc);
    let coord = coordinate(&chains, 0);
    let (mean, var) = pooled_mean_and_var(&coord);
    let mcse = mcse_mean(&coord).unwrap();
    assert!(mean.abs() < 3.0 * mcse, "mean {mean}, mcse {mcse}");
    assert!((0.85..=1.15).contains(&var), "variance {var}");
}

#[test]
fn rwm_recovers_standard_normal_moments() {
    let target = StdNormalTarget { dim: 1 };
    let config = SamplerConfig { seed: 6, ..SamplerConfig::default() };
    let chains = sample_chains_all(&target, &config, SamplerKind::Rwm);
    let coord = coordinate(&chains, 0);
    let (mean, var) = pooled_mean_and_var(&coord);
    let mcse = mcse_mean(&coord).unwrap();
    assert!(mean.abs() < 3.0 * mcse, "mean {mean}, mcse {mcse}");
    assert!((0.8..=1.2).contains(&var), "variance {var}");
}

fn sample_chains_all(
    target: &dyn Target,
    config: &SamplerConfig,
    kind: SamplerKind,
) -> sbc_core::sampler::MultiChain {
    sample_chains(kind, target, config, &SeedTree::new(config.seed)).unwrap()
}

fn coordinate(chains: &sbc_core::sampler::MultiChain, k: usize) -> Vec<Vec<f64>> {
    chains.coord_per_chain(k)
}

#[test]
fn realized_acceptance_tracks_the_target() {
    let target = StdNormalTarget { dim: 4 };
    for target_accept in [0.8, 0.99] {
        let config = SamplerConfig { target_accept, seed: 7, ..SamplerConfig::default() };
        let chains = sample_chains_all(&target, &config, SamplerKind::Hmc);
        let realized = chains.mean_accept();
        assert!(
            realized >= target_accept - 0.1 && realized <= (target_accept + 0.1).min(1.0),
            "target {target_accept}, realized {realized}"
        );
    }
}

#[test]
fn hmc_and_rwm_agree_on_the_conjugate_posterior_mean() {
    let model = ConjugateNormalModel::standard();
    let data = Dataset::Scalar { values: vec![0.3, -1.2, 2.1] };
    let target = PosteriorTarget::new(&model, &data);
    let config = SamplerConfig { seed: 8, ..SamplerConfig::default() };
    let hmc = sample_chains_all(&target, &config, SamplerKind::Hmc);
    let rwm = sample_chains_all(&target, &config, SamplerKind::Rwm);
    let (mh, _) = pooled_mean_and_var(&coordinate(&hmc, 0));
    let (mr, _) = pooled_mean_and_var(&coordinate(&rwm, 0));
    let se_h = mcse_mean(&coordinate(&hmc, 0)).unwrap();
    let se_r = mcse_mean(&coordinate(&rwm, 0)).unwrap();
    let combined = (se_h * se_h + se_r * se_r).sqrt();
    assert!((mh - mr).abs() < 3.0 * combined, "hmc {mh} vs rwm {mr} (3se {})", 3.0 * combined);
    // both also near the analytic posterior mean 0.3
    assert!((mh - 0.3).abs() < 3.0 * se_h + 1e-9, "hmc mean {mh}");
}

#[test]
fn oversized_steps_increase_funnel_divergences() {
    let target = FunnelTarget { latent: 5 };
    let mut counts = Vec::new();
    for eps in [0.3, 3.0] {
        let config = SamplerConfig {
            chains: 2,
            warmup_draws: 50,
            keep_draws: 500,
            fixed_step_size: Some(eps),
            path_length_jitter: 0.0,
            seed: 9,
            ..SamplerConfig::default()
        };
        let chains = sample_chains_all(&target, &config, SamplerKind::Hmc);
        counts.push(chains.total_divergences());
    }
    assert!(
        counts[1] > counts[0],
        "divergences did not increase with step size: {counts:?}"
    );
}

#[test]
fn rwm_adapted_scale_tracks_target_scale() {
    struct ScaledNormal {
        sd: f64,
    }
    impl Target for ScaledNormal {
        fn dim(&self) -> usize {
            1
        }
        fn log_density(&self, x: &[f64]) -> f64 {
            -0.5 * (x[0] / self.sd) * (x[0] / self.sd)
        }
    }
    let config = SamplerConfig {
        chains: 1,
        warmup_draws: 4000,
        keep_draws: 100,
        seed: 10,
        ..SamplerConfig::default()
    };
    let narrow = sample_chains_all(&ScaledNormal { sd: 1.0 }, &config, SamplerKind::Rwm);
    let wide = sample_chains_all(&ScaledNormal { sd: 5.0 }, &config, SamplerKind::Rwm);
    let ratio = wide.chains[0].step_size / narrow.chains[0].step_size;
    assert!(
        ratio > 5.0 / 1.5 && ratio < 5.0 * 1.5,
        "scale ratio {ratio} (scales {} / {})",
        wide.chains[0].step_size,
        narrow.chains[0].step_size
    );
}

#[test]
fn sampler_output_is_reproducible() {
    let model = HierarchicalModel::new(Parameterization::NonCentered, 5, 5);
    let mut rng = SeedTree::new(60).rng();
    let draw = model.prior_sample(&mut rng);
    let data = model.simulate(&draw, &mut rng).unwrap();
    let target = PosteriorTarget::new(&model, &data);
    let config = SamplerConfig {
        chains: 2,
        warmup_draws: 200,
        keep_draws: 200,
        seed: 11,
        ..SamplerConfig::default()
    };
    let a = sample_chains_all(&target, &config, SamplerKind::Hmc);
    let b = sample_chains_all(&target, &config, SamplerKind::Hmc);
    for (ca, cb) in a.chains.iter().zip(&b.chains) {
        assert_eq!(ca.draws, cb.draws);
        assert_eq!(ca.step_size, cb.step_size);
    }
}

#[test]
fn thinned_iid_chain_ess_stays_near_target() {
    // thinning an i.i.d. sequence keeps per-draw information
    let mut rng = SeedTree::new(13).rng();
    let draws: Vec<f64> = (0..20_000).map(|_| rng.standard_normal()).collect();
    let thinned = sbc_core::sampler::diagnostics::thin(&draws, 1000).unwrap();
    let halves = vec![thinned[..500].to_vec(), thinned[500..].to_vec()];
    let ess = ess_bulk(&halves).unwrap();
    assert!((ess - 1000.0).abs() < 200.0, "ess {ess}");
}

mod leapfrog_properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reversibility_holds_for_random_states(
            q0 in -3.0f64..3.0,
            q1 in -3.0f64..3.0,
            p0 in -2.0f64..2.0,
            p1 in -2.0f64..2.0,
            eps in 1e-3f64..0.2,
            steps in 1usize..40,
            m0 in 0.2f64..5.0,
            m1 in 0.2f64..5.0,
        ) {
            let target = StdNormalTarget { dim: 2 };
            let inv_mass = [m0, m1];
            let mut grad = |x: &[f64]| target.grad(x);
            let (qf, pf) = leapfrog(&mut grad, &[q0, q1], &[p0, p1], eps, steps, &inv_mass).unwrap();
            let neg: Vec<f64> = pf.iter().map(|v| -v).collect();
            let (qb, pb) = leapfrog(&mut grad, &qf, &neg, eps, steps, &inv_mass).unwrap();
            prop_assert!((qb[0] - q0).abs() < 1e-10);
            prop_assert!((qb[1] - q1).abs() < 1e-10);
            prop_assert!((pb[0] + p0).abs() < 1e-10);
            prop_assert!((pb[1] + p1).abs() < 1e-10);
        }

        #[test]
        fn tiny_steps_are_near_identity(
            q in -3.0f64..3.0,
            p in -2.0f64..2.0,
        ) {
            let target = StdNormalTarget { dim: 1 };
            let mut grad = |x: &[f64]| target.grad(x);
            let (qf, pf) = leapfrog(&mut grad, &[q], &[p], 1e-12, 1, &[1.0]).unwrap();
            prop_assert!((qf[0] - q).abs() < 1e-9);
            prop_assert!((pf[0] - p).abs() < 1e-9);
        }
    }
}
