#![allow(dead_code)]

use lqar_core::simulation::{generate_dataset, Case, ContaminationSpec};
use lqar_core::{Dataset, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn design(beta: &[f64], phi: &[f64], n: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        n,
        beta_true: beta.to_vec(),
        phi_true: phi.to_vec(),
        sigma_true: 1.0,
        contamination: ContaminationSpec::case(Case::I),
        replications: 1,
        seed,
        burn_in: 500,
        level: 0.95,
        sigma_rule: Default::default(),
    }
}

/// Clean AR(p)-error regression sample with standard normal covariates.
pub fn ar_regression(beta: &[f64], phi: &[f64], n: usize, seed: u64) -> Dataset {
    let cfg = design(beta, phi, n, seed);
    generate_dataset(&cfg, &mut cfg.replication_rng(0)).unwrap()
}

/// Random dimensions and coefficients; φ drawn inside the stationary region.
pub fn random_instance(n: usize, m: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let beta: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
    let phi: Vec<f64> = (0..p).map(|_| rng.random_range(-0.4..0.4) / p as f64).collect();
    ar_regression(&beta, &phi, n, seed)
}
