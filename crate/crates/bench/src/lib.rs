//! Shared fixtures for the benchmarks.

use agent_factory_core::controller::Experiment;
use agent_factory_core::evolution::EvolutionConfig;
use agent_factory_core::feature_model::{expert_configuration, smart_light_model};
use agent_factory_core::streetlight::{AmbientSchedule, WorldConfig, REFERENCE_TICKS};

/// The bright reference street with the expert configuration.
pub fn reference_experiment(seed: u64) -> Experiment {
    Experiment::create(
        "bench",
        smart_light_model(),
        expert_configuration(),
        WorldConfig::reference(AmbientSchedule::bright(REFERENCE_TICKS), seed),
        EvolutionConfig::with_seed(seed),
    )
    .expect("reference experiment is valid")
}
