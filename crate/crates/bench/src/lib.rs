//! Fixtures shared by the benchmarks.

use aapa_core::sim::{generate, preset};
use aapa_core::{CostMatrix, Frame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Square or rectangular matrix with uniform costs in `[0, 10_000)`.
pub fn random_costs(rows: usize, cols: usize, seed: u64) -> CostMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(0.0..10_000.0)).collect())
        .collect();
    CostMatrix::from_rows(&data)
}

/// Detection frames of a named scenario preset.
pub fn scenario_frames(name: &str, seed: u64) -> Vec<Frame> {
    let config = preset(name, seed).expect("known preset");
    generate(&config).expect("preset is feasible").detections
}
