//! Fixtures shared by the criterion benchmarks.

use lqar_core::simulation::{scenario_dataset, Case};
use lqar_core::{Dataset, ScenarioConfig};

/// One replication of the five-covariate design.
pub fn reference_sample(case: Case, seed: u64) -> Dataset {
    let cfg = ScenarioConfig::reference_p5(case, 1, seed);
    scenario_dataset(&cfg, 0).expect("reference design is valid")
}

/// A short study of the five-covariate design.
pub fn small_study(case: Case, replications: usize) -> ScenarioConfig {
    ScenarioConfig::reference_p5(case, replications, 7)
}
