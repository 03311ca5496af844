//! Scratch probe for the hierarchical posterior-mode campaigns: prints band
//! verdicts, diagnostics, and timing so campaign budgets can be tuned.
//!
//! Usage: funnel_probe <regime: small|large> <param: centered|noncentered> [n] [j]

use sbc_core::model::hierarchical::{HierarchicalModel, Parameterization};
use sbc_core::rng::SeedTree;
use sbc_core::sampler::SamplerConfig;
use sbc_core::sbc::backend::McmcBackend;
use sbc_core::sbc::{Campaign, RunControls, SbcConfig};
use sbc_core::uniformity::{band_check, pit_ecdf_diff, simultaneous_band};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let regime = args.get(1).map(|s| s.as_str()).unwrap_or("small");
    let param = args.get(2).map(|s| s.as_str()).unwrap_or("centered");
    let n: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(200);
    let j: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(50);

    let parameterization = match param {
        "centered" => Parameterization::Centered,
        _ => Parameterization::NonCentered,
    };
    let model = HierarchicalModel::new(parameterization, j, 5);
    let (tau, sigma, seed) = match regime {
        "small" => (0.06, 1.96, 406),
        _ => (1.96, 0.06, 604),
    };
    let data_gen = HierarchicalModel::new(Parameterization::Centered, j, 5);
    let y_obs = data_gen.regime_dataset(tau, sigma, &mut SeedTree::new(seed).rng());

    let sampler = SamplerConfig { target_accept: 0.99, seed: 0, ..SamplerConfig::default() };
    let base_sampler = SamplerConfig {
        warmup_draws: 1500,
        keep_draws: 2500,
        ..sampler.clone()
    };
    let mut config = SbcConfig::for_model(&model, n, 1);
    config.sampler = sampler;
    config.base_sampler = Some(base_sampler);
    let backend = McmcBackend::hmc(config.sampler.clone());
    let backend = McmcBackend { base_config: config.base_sampler.clone(), ..backend };

    let t0 = std::time::Instant::now();
    let campaign = Campaign::new(&model, &backend, &config);
    match campaign.base_posterior(&y_obs) {
        Ok(draws) => {
            let taus: Vec<f64> = draws.iter().map(|d| d.get("tau").unwrap()).collect();
            let mean = taus.iter().sum::<f64>() / taus.len() as f64;
            println!(
                "base ok ({} draws) in {:.1}s, tau mean {:.4}, min {:.4}, max {:.4}",
                draws.len(),
                t0.elapsed().as_secs_f64(),
                mean,
                taus.iter().cloned().fold(f64::INFINITY, f64::min),
                taus.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            );
        }
        Err(e) => {
            println!("BASE FAILED after {:.1}s: {e}", t0.elapsed().as_secs_f64());
            return;
        }
    }

    let t1 = std::time::Instant::now();
    let ensemble = campaign
        .run_posterior(&y_obs, &RunControls::default())
        .expect("campaign runs");
    let (ok, flagged, failed) = ensemble.status_counts();
    println!(
        "campaign {:.1}s: ok {ok} flagged {flagged} failed {failed}",
        t1.elapsed().as_secs_f64()
    );
    let usable = ok + flagged;
    let envelope = simultaneous_band(usable, 100, 0.95, 99).unwrap();
    for q in &ensemble.quantities {
        let ranks = ensemble.ranks_for(q, true);
        let curve = pit_ecdf_diff(&ranks, 100).unwrap();
        let verdict = band_check(&curve, &envelope).unwrap();
        let mean_rank = ranks.iter().map(|&r| r as f64).sum::<f64>() / ranks.len() as f64 / 100.0;
        print!("{q:<14} mean_rank={mean_rank:.3} {}", if verdict.pass { "PASS" } else { "FAIL" });
        for e in &verdict.excursions {
            print!(
                "  [{:?} u={:.2}..{:.2} mag={:.3}]",
                e.direction, e.start_u, e.end_u, e.max_magnitude
            );
        }
        println!();
    }
}
