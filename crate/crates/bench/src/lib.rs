//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use slmarl_core::{BeliefVector, Experiment, ExperimentConfig};

/// Default experiment with `num_agents` pistons on a ring.
pub fn experiment(num_agents: usize, horizon: usize) -> Experiment {
    let mut cfg = ExperimentConfig::default();
    cfg.env.num_agents = num_agents;
    cfg.run.horizon = horizon;
    cfg.build().expect("default experiment builds")
}

/// `k` random soft beliefs over `s` states.
pub fn random_beliefs(k: usize, s: usize, seed: u64) -> Vec<BeliefVector> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| {
            let v: Vec<f64> = (0..s).map(|_| rng.random_range(0.01..1.0)).collect();
            let t: f64 = v.iter().sum();
            BeliefVector::new(v.into_iter().map(|x| x / t).collect()).unwrap()
        })
        .collect()
}

/// `k` random binary observations.
pub fn random_observations(k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..k).map(|_| rng.random_range(0..2)).collect()
}

pub fn random_log_ratios(k: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()
}
