//! Fixtures shared by the benchmarks.

use misspec_core::models::{model_by_name, Design, SharedModel};
use misspec_core::numerics::rng::stream_rng;

/// A seeded sample from `model` at its null point.
pub fn null_sample(model: &str, n: usize, seed: u64) -> (SharedModel, Vec<f64>, Design) {
    let m = model_by_name(model).expect("catalogue model");
    let design = m.default_design(n);
    let mut rng = stream_rng(seed, 0);
    let ys = (0..n)
        .map(|i| m.sample(&mut rng, design.row(i), m.theta0(), m.gamma0()))
        .collect();
    (m, ys, design)
}
