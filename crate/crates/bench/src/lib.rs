//! Benchmark fixtures.

use cvdb::gauss::MeasurementModel;
use cvdb::RunConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The default parameter point `(sigma, x0) = (0.2, 1)` with `epsilon = 0.05`.
pub fn default_model() -> MeasurementModel {
    MeasurementModel::new(0.2, 1.0, 0.05).expect("valid defaults")
}

/// Honest run configuration with `instances` instances.
pub fn run_config(instances: u32, seed: u64) -> RunConfig {
    RunConfig { instances, seed, record_transcript: false, ..RunConfig::default() }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
