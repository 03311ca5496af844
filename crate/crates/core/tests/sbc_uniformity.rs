//! End-to-end statistical checks of the calibration engine with the exact
//! conjugate backend: discrete-uniform ranks under the null, the
//! posterior-mode degeneracy with empty observed data, bias detection power
//! of a shifted backend, and simultaneous-band coverage.

use sbc_core::data::Dataset;
use sbc_core::model::conjugate::ConjugateNormalModel;
use sbc_core::model::Model;
use sbc_core::rng::SeedTree;
use sbc_core::sbc::backend::ExactConjugateBackend;
use sbc_core::sbc::{
    evaluate_test_quantities, posterior_sbc, prior_sbc, rank_of, Campaign, RunControls,
    SbcConfig, TestQuantity,
};
use sbc_core::uniformity::{band_check, pit_ecdf_diff, simultaneous_band, ExcursionDirection};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn exact_backend_ranks_are_discrete_uniform() {
    let model = ConjugateNormalModel::standard();
    let backend = ExactConjugateBackend::for_model(&model);
    let mut config = SbcConfig::for_model(&model, 10_000, 77);
    config.ranks_s = 100;
    config.posterior_draws_per_iteration = 100;
    let ensemble = prior_sbc(&model, &backend, &config).unwrap();
    let chi2_crit = ChiSquared::new(100.0).unwrap().inverse_cdf(0.999);
    for quantity in &ensemble.quantities {
        let ranks = ensemble.ranks_for(quantity, true);
        assert_eq!(ranks.len(), 10_000);
        let mut counts = vec![0f64; 101];
        for r in &ranks {
            counts[*r as usize] += 1.0;
        }
        let expected = 10_000.0 / 101.0;
        let stat: f64 = counts.iter().map(|c| (c - expected) * (c - expected) / expected).sum();
        assert!(stat < chi2_crit, "{quantity}: chi2 {stat} >= {chi2_crit}");
    }
}

#[test]
fn posterior_mode_with_empty_data_reproduces_prior_mode() {
    let model = ConjugateNormalModel::standard();
    let backend = ExactConjugateBackend::for_model(&model);
    let config = SbcConfig::for_model(&model, 64, 2024);
    let prior = prior_sbc(&model, &backend, &config).unwrap();
    let posterior =
        posterior_sbc(&model, &backend, &config, &Dataset::empty_scalar()).unwrap();
    assert_eq!(prior.to_ranks_csv(), posterior.to_ranks_csv());
    for (a, b) in prior.iterations.iter().zip(&posterior.iterations) {
        assert_eq!(a.theta_prime, b.theta_prime);
    }
}

#[test]
fn shifted_backend_skews_ranks_upward() {
    // a backend reporting its posterior half a posterior-sd low places the
    // generating draw high among the reported draws
    let model = ConjugateNormalModel::standard();
    let backend = ExactConjugateBackend::with_shift(&model, -0.5);
    let config = SbcConfig::for_model(&model, 300, 5);
    let ensemble = prior_sbc(&model, &backend, &config).unwrap();
    let ranks = ensemble.ranks_for("theta", true);
    let mean_rank =
        ranks.iter().map(|&r| r as f64).sum::<f64>() / (ranks.len() as f64 * 100.0);
    // oracle: E[rank]/S = P(N(0,1) < 0.5/sqrt(2)) ~ 0.638
    assert!(mean_rank > 0.55, "mean rank fraction {mean_rank}");
}

#[test]
fn shifted_backend_fails_the_band_with_a_left_downward_dip() {
    let model = ConjugateNormalModel::standard();
    let backend = ExactConjugateBackend::with_shift(&model, -0.5);
    let config = SbcConfig::for_model(&model, 300, 6);
    let ensemble = prior_sbc(&model, &backend, &config).unwrap();
    let ranks = ensemble.ranks_for("theta", true);
    let envelope = simultaneous_band(ranks.len(), 100, 0.95, 31).unwrap();
    let curve = pit_ecdf_diff(&ranks, 100).unwrap();
    let verdict = band_check(&curve, &envelope).unwrap();
    assert!(!verdict.pass);
    let dip = verdict
        .excursions
        .iter()
        .find(|e| e.direction == ExcursionDirection::Below && e.is_left_region());
    assert!(dip.is_some(), "no left-region downward excursion: {:?}", verdict.excursions);
}

#[test]
fn unbiased_backend_passes_the_band() {
    let model = ConjugateNormalModel::standard();
    let backend = ExactConjugateBackend::for_model(&model);
    let config = SbcConfig::for_model(&model, 300, 7);
    let ensemble = prior_sbc(&model, &backend, &config).unwrap();
    let envelope = simultaneous_band(300, 100, 0.95, 32).unwrap();
    for quantity in &ensemble.quantities {
        let ranks = ensemble.ranks_for(quantity, true);
        let curve = pit_ecdf_diff(&ranks, 100).unwrap();
        let verdict = band_check(&curve, &envelope).unwrap();
        assert!(verdict.pass, "{quantity} failed: {:?}", verdict.excursions);
    }
}

#[test]
fn base_posterior_matches_the_analytic_posterior() {
    let model = ConjugateNormalModel::standard();
    let backend = ExactConjugateBackend::for_model(&model);
    let config = SbcConfig::for_model(&model, 400, 8);
    let y_obs = Dataset::Scalar { values: vec![1.0, 1.4, 0.6, 1.2] };
    let campaign = Campaign::new(&model, &backend, &config);
    let draws = campaign.base_posterior(&y_obs).unwrap();
    assert_eq!(draws.len(), 400);
    let (m, s) = model.posterior(&y_obs);
    let mean =
        draws.iter().map(|d| d.get("theta").unwrap()).sum::<f64>() / draws.len() as f64;
    let se = s / (draws.len() as f64).sqrt();
    assert!((mean - m).abs() < 3.0 * se, "mean {mean} vs {m} (3se {})", 3.0 * se);
}

#[test]
fn base_posterior_with_empty_data_is_the_prior() {
    let model = ConjugateNormalModel::standard();
    let backend = ExactConjugateBackend::for_model(&model);
    let config = SbcConfig::for_model(&model, 2000, 9);
    let campaign = Campaign::new(&model, &backend, &config);
    let draws = campaign.base_posterior(&Dataset::empty_scalar()).unwrap();
    let values: Vec<f64> = draws.iter().map(|d| d.get("theta").unwrap()).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() as f64 - 1.0);
    assert!(mean.abs() < 3.0 / (2000.0f64).sqrt());
    assert!((var - 1.0).abs() < 0.15, "variance {var}");
}

#[test]
fn base_data_fraction_uses_the_leading_slice() {
    let model = ConjugateNormalModel::standard();
    let backend = ExactConjugateBackend::for_model(&model);
    let mut config = SbcConfig::for_model(&model, 4000, 10);
    config.base_data_fraction = 0.5;
    // first half centered at +2, second at -2; the base fit must see only
    // the first half
    let mut values = vec![2.0; 5];
    values.extend(vec![-2.0; 5]);
    let y_obs = Dataset::Scalar { values };
    let campaign = Campaign::new(&model, &backend, &config);
    let draws = campaign.base_posterior(&y_obs).unwrap();
    let (m, s) = model.posterior(&Dataset::Scalar { values: vec![2.0; 5] });
    let mean =
        draws.iter().map(|d| d.get("theta").unwrap()).sum::<f64>() / draws.len() as f64;
    let se = s / (draws.len() as f64).sqrt();
    assert!((mean - m).abs() < 3.0 * se, "mean {mean} vs {m}");
}

#[test]
fn posterior_mode_is_calibrated_for_real_observed_data() {
    let model = ConjugateNormalModel::standard();
    let backend = ExactConjugateBackend::for_model(&model);
    let config = SbcConfig::for_model(&model, 300, 11);
    let y_obs = Dataset::Scalar { values: vec![0.4, -0.9, 1.7, 0.2, 0.8] };
    let ensemble = posterior_sbc(&model, &backend, &config, &y_obs).unwrap();
    let envelope = simultaneous_band(300, 100, 0.95, 33).unwrap();
    for quantity in &ensemble.quantities {
        let ranks = ensemble.ranks_for(quantity, true);
        let curve = pit_ecdf_diff(&ranks, 100).unwrap();
        assert!(
            band_check(&curve, &envelope).unwrap().pass,
            "{quantity} not calibrated"
        );
    }
}

#[test]
fn loglik_quantity_is_additive_over_independent_blocks() {
    let model = ConjugateNormalModel::standard();
    let theta = model.param_vec_from_constrained(vec![0.3]).unwrap();
    let draws =
        vec![model.param_vec_from_constrained(vec![-0.2]).unwrap()];
    let a = Dataset::Scalar { values: vec![0.1, 0.9] };
    let b = Dataset::Scalar { values: vec![-1.4] };
    let joint = evaluate_test_quantities(
        &model,
        &[TestQuantity::JointLogLik],
        &theta,
        &draws,
        &a.concat(&b),
    )
    .unwrap();
    let part_a =
        evaluate_test_quantities(&model, &[TestQuantity::JointLogLik], &theta, &draws, &a)
            .unwrap();
    let part_b =
        evaluate_test_quantities(&model, &[TestQuantity::JointLogLik], &theta, &draws, &b)
            .unwrap();
    assert!(
        (joint[0].true_value - part_a[0].true_value - part_b[0].true_value).abs() < 1e-10
    );
}

#[test]
fn execution_order_does_not_change_the_ensemble() {
    let model = ConjugateNormalModel::standard();
    let backend = ExactConjugateBackend::for_model(&model);
    let config = SbcConfig::for_model(&model, 30, 12);
    let campaign = Campaign::new(&model, &backend, &config);
    // compute the back half first, then resume the front half
    let back = campaign
        .run_prior(&RunControls {
            precomputed: campaign
                .run_prior(&RunControls { limit: Some(15), ..Default::default() })
                .unwrap()
                .iterations,
            ..Default::default()
        })
        .unwrap();
    let straight = campaign.run_prior(&RunControls::default()).unwrap();
    assert_eq!(back.to_ranks_csv(), straight.to_ranks_csv());
}

#[test]
fn band_coverage_is_near_nominal_for_n_100() {
    let envelope = simultaneous_band(100, 100, 0.95, 40).unwrap();
    let mut rng = SeedTree::new(41).rng();
    let mut inside = 0;
    let reps = 2000;
    for _ in 0..reps {
        let ranks: Vec<u32> = (0..100).map(|_| rng.uniform_int(101) as u32).collect();
        let curve = pit_ecdf_diff(&ranks, 100).unwrap();
        if band_check(&curve, &envelope).unwrap().pass {
            inside += 1;
        }
    }
    let coverage = inside as f64 / reps as f64;
    assert!((0.93..=0.97).contains(&coverage), "coverage {coverage}");
}

#[test]
fn chi2_statistic_matches_its_moments_under_the_null() {
    let mut rng = SeedTree::new(42).rng();
    let std_normal = statrs::distribution::Normal::standard();
    let pits: Vec<f64> = (0..1000).map(|_| std_normal.cdf(rng.standard_normal())).collect();
    let (stat, p) = sbc_core::uniformity::cook_chi2(&pits).unwrap();
    let slack = 4.0 * (2.0f64 * 1000.0).sqrt();
    assert!((1000.0 - slack..=1000.0 + slack).contains(&stat), "stat {stat}");
    assert!(p > 1e-6 && p < 1.0);
}

mod rank_properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn ranks_are_invariant_under_strictly_increasing_maps(
            value in -5.0f64..5.0,
            draws in proptest::collection::vec(-5.0f64..5.0, 1..40),
            scale in 0.1f64..3.0,
            seed in 0u64..1000,
        ) {
            // the same tie pattern and the same stream give the same rank
            let mut rng_a = SeedTree::new(seed).rng();
            let mut rng_b = SeedTree::new(seed).rng();
            let mapped: Vec<f64> = draws.iter().map(|d| (scale * d).exp()).collect();
            let a = rank_of(value, &draws, &mut rng_a).unwrap();
            let b = rank_of((scale * value).exp(), &mapped, &mut rng_b).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
