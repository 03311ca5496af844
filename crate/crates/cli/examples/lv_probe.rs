//! Scratch probe for the predator-prey posterior-mode campaign: timing and
//! band verdicts at configurable scale.
//!
//! Usage: lv_probe [n] [chains] [warmup] [keep] [h_step]

use sbc_core::data::parse_pelt_csv;
use sbc_core::model::lotka_volterra::LotkaVolterraModel;
use sbc_core::sampler::SamplerConfig;
use sbc_core::sbc::backend::McmcBackend;
use sbc_core::sbc::{Campaign, RunControls, SbcConfig, TestQuantity};
use sbc_core::uniformity::{band_check, pit_ecdf_diff, simultaneous_band};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let chains: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(4);
    let warmup: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(400);
    let keep: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(300);
    let h_step: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.02);

    let model = LotkaVolterraModel::new((0..=20).map(|t| t as f64).collect(), h_step);
    let csv = std::fs::read_to_string("data/pelts_synthetic.csv").expect("fixture present");
    let y_obs = parse_pelt_csv(&csv, "data/pelts_synthetic.csv").expect("fixture parses");

    let sampler = SamplerConfig {
        chains,
        warmup_draws: warmup,
        keep_draws: keep,
        target_accept: 0.9,
        max_leapfrog_steps: 64,
        seed: 0,
        ..SamplerConfig::default()
    };
    let base_sampler = SamplerConfig { chains: 4, warmup_draws: 2000, keep_draws: 1500, ..sampler.clone() };
    let mut config = SbcConfig::for_model(&model, n, 2);
    config.test_quantities = vec![TestQuantity::JointLogLik];
    config.sampler = sampler;
    config.base_sampler = Some(base_sampler);
    let backend = McmcBackend {
        base_config: config.base_sampler.clone(),
        ..McmcBackend::hmc(config.sampler.clone())
    };

    let t0 = std::time::Instant::now();
    let campaign = Campaign::new(&model, &backend, &config);
    {
        use sbc_core::sampler::{sample_chains, PosteriorTarget, SamplerKind};
        use sbc_core::rng::SeedTree;
        let target = PosteriorTarget::new(&model, &y_obs);
        let t = std::time::Instant::now();
        let chains = sample_chains(
            SamplerKind::Hmc,
            &target,
            config.base_sampler.as_ref().unwrap(),
            &SeedTree::new(77).child(5),
        )
        .unwrap();
        println!("direct base fit {:.1}s", t.elapsed().as_secs_f64());
        for c in &chains.chains {
            println!(
                "  chain eps={:.4} accept={:.3} div={} warmup_div={} mass={:?}",
                c.step_size,
                c.mean_accept(),
                c.divergence_count,
                c.warmup_divergences,
                c.mass_diag.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
            );
        }
        println!(
            "  rhat={:.4} ess={:.0}",
            chains.rhat_max().unwrap(),
            chains.ess_min().unwrap()
        );
    }
    match campaign.base_posterior(&y_obs) {
        Ok(draws) => {
            let alpha: Vec<f64> = draws.iter().map(|d| d.get("alpha").unwrap()).collect();
            println!(
                "base ok in {:.1}s; alpha mean {:.3}",
                t0.elapsed().as_secs_f64(),
                alpha.iter().sum::<f64>() / alpha.len() as f64
            );
        }
        Err(e) => {
            println!("BASE FAILED after {:.1}s: {e}", t0.elapsed().as_secs_f64());
            return;
        }
    }
    let t1 = std::time::Instant::now();
    let ensemble = campaign.run_posterior(&y_obs, &RunControls::default()).expect("runs");
    let (ok, flagged, failed) = ensemble.status_counts();
    println!(
        "campaign {:.1}s ({:.2}s/iter): ok {ok} flagged {flagged} failed {failed}",
        t1.elapsed().as_secs_f64(),
        t1.elapsed().as_secs_f64() / n as f64
    );
    let usable = ok + flagged;
    let envelope = simultaneous_band(usable, 100, 0.95, 99).unwrap();
    for q in &ensemble.quantities {
        let ranks = ensemble.ranks_for(q, true);
        let curve = pit_ecdf_diff(&ranks, 100).unwrap();
        let verdict = band_check(&curve, &envelope).unwrap();
        let mean_rank = ranks.iter().map(|&r| r as f64).sum::<f64>() / ranks.len() as f64 / 100.0;
        println!("{q:<14} mean_rank={mean_rank:.3} {}", if verdict.pass { "PASS" } else { "FAIL" });
    }
}
