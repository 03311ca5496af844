//! Quick cost measurements for the predator-prey target.

use sbc_core::data::parse_pelt_csv;
use sbc_core::model::lotka_volterra::{lv_solve, LotkaVolterraModel, LvParams};
use sbc_core::model::Model;
use sbc_core::sampler::{PosteriorTarget, Target};

fn main() {
    let model = LotkaVolterraModel::default_grid();
    let csv = std::fs::read_to_string("data/pelts_synthetic.csv").unwrap();
    let y_obs = parse_pelt_csv(&csv, "x").unwrap();
    let p = LvParams {
        alpha: 0.55, beta: 0.028, gamma: 0.84, delta: 0.026,
        sigma_h: 0.25, sigma_l: 0.25, h0: 30.0, l0: 4.0,
    };
    let grid: Vec<f64> = (0..=20).map(|t| t as f64).collect();

    let t0 = std::time::Instant::now();
    let reps = 2000;
    let mut acc = 0.0;
    for _ in 0..reps {
        let traj = lv_solve(&p, &grid, 0.01).unwrap();
        acc += traj.states[20][0];
    }
    println!("solve: {:.1} us each (acc {acc:.1})", t0.elapsed().as_secs_f64() * 1e6 / reps as f64);

    let target = PosteriorTarget::new(&model, &y_obs);
    let params = model
        .param_vec_from_constrained(vec![0.55, 0.028, 0.84, 0.026, 0.25, 0.25, 30.0, 4.0])
        .unwrap();
    let z: Vec<f64> = params.unconstrained().to_vec();
    let t1 = std::time::Instant::now();
    let mut acc2 = 0.0;
    for _ in 0..reps {
        acc2 += target.log_density(&z);
    }
    println!("log_density: {:.1} us each (acc {acc2:.1})", t1.elapsed().as_secs_f64() * 1e6 / reps as f64);

    let t2 = std::time::Instant::now();
    let grad_reps = 200;
    let mut acc3 = 0.0;
    for _ in 0..grad_reps {
        acc3 += target.grad(&z).unwrap()[0];
    }
    println!("gradient: {:.1} us each (acc {acc3:.3})", t2.elapsed().as_secs_f64() * 1e6 / grad_reps as f64);
}
