//! Regenerate the registered inequality ceilings: the largest normalized
//! ratio over a wide seeded sweep at 64³, plus a 50% margin.
//!
//! `cargo run --release -p aniso-lp-core --example calibrate_ceilings [seeds] [trials] [kind]`

use aniso_lp_core::ineq::{reference_points, run_named};
use aniso_lp_core::make_grid;

const GRID: usize = 64;
const MARGIN: f64 = 1.5;
const FIRST_SEED: u64 = 1000;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let count = |i: usize, default: usize| args.get(i).map_or(default, |a| a.parse().expect("integer argument"));
    let (seeds, trials) = (count(0, 10), count(1, 400));
    let only = args.get(2);
    let grid = make_grid(GRID).expect("valid grid");
    for (kind, params) in reference_points() {
        if only.is_some_and(|k| k != kind.id()) {
            continue;
        }
        let mut worst: f64 = 0.0;
        for s in 0..seeds as u64 {
            let r = run_named(kind, &params, &grid, trials, FIRST_SEED + s).expect("sweep runs");
            worst = worst.max(r.max_ratio);
        }
        let key: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{:<10} {:<45} max={worst:.6e} ceiling={:.4e}", kind.id(), key.join(","), worst * MARGIN);
    }
}
