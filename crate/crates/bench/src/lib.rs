//! Fixtures shared by the kernel benchmarks under `benches/`.

use easysched_core::jobshop::generate_instance;
use easysched_core::pso::decode_position;
use easysched_core::{Instance, Schedule};

/// The 3-machine, 5-speed, 10-job instance used throughout the experiments.
pub fn instance() -> Instance {
    generate_instance(3, 10, 5, 42)
}

/// A fixed predictive schedule at the fastest level.
pub fn predictive(instance: &Instance) -> Schedule {
    let n = instance.num_operations();
    let keys: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
    decode_position(&keys, &vec![instance.max_speed(); n], instance)
}
