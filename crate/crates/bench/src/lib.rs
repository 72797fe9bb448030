//! Shared fixtures for the benchmarks.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sgnet_core::graph::build_mst;
use sgnet_core::{NetworkConfig, TactileSgNet, TaxelLayout};

/// Default-sized network on the 39-taxel radial layout with its spanning-tree graph.
pub fn radial_model(seed: u64) -> TactileSgNet {
    let graph = build_mst(&TaxelLayout::radial_example(), 0.0).expect("radial layout builds");
    TactileSgNet::new(NetworkConfig::new(36, 2), graph, seed).expect("default config is valid")
}

/// `(T, N, C)` binary frames where each cell fires with probability `density`.
pub fn random_frames(steps: usize, nodes: usize, channels: usize, density: f64, seed: u64) -> Array3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array3::from_shape_simple_fn(
        (steps, nodes, channels),
        || if rng.random_bool(density) { 1.0 } else { 0.0 },
    )
}
