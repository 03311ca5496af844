//! Regenerates the bundled example datasets under `data/`. The files are
//! committed; this exists so they can be reproduced and so tests can verify
//! they have not drifted.
//!
//! Usage: `cargo run -p sbc-cli --example gen_fixtures [out_dir]`

use sbc_core::model::hierarchical::{HierarchicalModel, Parameterization};
use sbc_core::model::lotka_volterra::LotkaVolterraModel;
use sbc_core::model::Model;
use sbc_core::rng::SeedTree;

pub const PELT_SEED: u64 = 1900;
pub const REGIME_SMALL_TAU_SEED: u64 = 406;
pub const REGIME_LARGE_TAU_SEED: u64 = 604;

/// Synthetic 21-year pelt series from the predator-prey model at parameters
/// in the historically plausible range, with moderate observation noise.
pub fn synthetic_pelts() -> sbc_core::Dataset {
    let model = LotkaVolterraModel::default_grid();
    let params = model
        .param_vec_from_constrained(vec![0.55, 0.028, 0.84, 0.026, 0.25, 0.25, 30.0, 4.0])
        .expect("positive parameters");
    model
        .simulate(&params, &mut SeedTree::new(PELT_SEED).rng())
        .expect("nominal parameters integrate")
}

/// Hierarchical dataset with a strong population prior and weak likelihood
/// (tau = 0.06, sigma = 1.96), the regime that funnels the centered
/// parameterization.
pub fn regime_small_tau() -> sbc_core::Dataset {
    HierarchicalModel::default_size(Parameterization::Centered)
        .regime_dataset(0.06, 1.96, &mut SeedTree::new(REGIME_SMALL_TAU_SEED).rng())
}

/// Mirror regime: weak population prior and strong likelihood
/// (tau = 1.96, sigma = 0.06).
pub fn regime_large_tau() -> sbc_core::Dataset {
    HierarchicalModel::default_size(Parameterization::Centered)
        .regime_dataset(1.96, 0.06, &mut SeedTree::new(REGIME_LARGE_TAU_SEED).rng())
}

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "data".to_string());
    let dir = std::path::Path::new(&out);
    std::fs::create_dir_all(dir).expect("create data dir");
    for (name, data) in [
        ("pelts_synthetic.csv", synthetic_pelts()),
        ("hierarchical_tau006_sigma196.csv", regime_small_tau()),
        ("hierarchical_tau196_sigma006.csv", regime_large_tau()),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, data.to_csv_string()).expect("write fixture");
        println!("wrote {}", path.display());
    }
}
