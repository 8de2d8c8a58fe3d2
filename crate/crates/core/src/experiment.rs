//! Seeded training loops shared by the command-line runner, examples and tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hrl::{trhpo_step, HierarchicalPolicy, TrhpoConfig, TrhpoDiagnostics};
use crate::mdp::{Mdp, TabularSoftmaxPolicy};
use crate::sampling::MdpSampler;
use crate::trust_region::{trpo_step, trpo_step_exact, TrpoConfig, TrpoDiagnostics};

/// Stops after `iterations` updates or once `max_steps` environment steps
/// have been consumed, whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub iterations: usize,
    #[serde(default)]
    pub max_steps: Option<usize>,
}

impl Budget {
    pub fn iterations(iterations: usize) -> Self {
        Self { iterations, max_steps: None }
    }

    fn exhausted(&self, iters: usize, steps: usize) -> bool {
        iters >= self.iterations || self.max_steps.is_some_and(|m| steps >= m)
    }
}

/// Sampled TRPO from the uniform softmax policy.
pub fn run_trpo(
    mdp: &Mdp,
    horizon: usize,
    config: &TrpoConfig,
    budget: Budget,
    seed: u64,
) -> Result<(TabularSoftmaxPolicy, Vec<TrpoDiagnostics>)> {
    let sampler = MdpSampler::new(mdp, Some(horizon));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = TabularSoftmaxPolicy::uniform(mdp.n_states(), mdp.n_actions());
    let mut rows = Vec::new();
    let mut steps = 0;
    while !budget.exhausted(rows.len(), steps) {
        let (next, diag) = trpo_step(&sampler, &policy, config, &mut rng)?;
        steps += diag.steps;
        policy = next;
        rows.push(diag);
    }
    Ok((policy, rows))
}

/// TRPO with exact advantages; each row's `mean_return` is `η` after the step.
pub fn run_trpo_exact(
    mdp: &Mdp,
    config: &TrpoConfig,
    iterations: usize,
) -> Result<(TabularSoftmaxPolicy, Vec<TrpoDiagnostics>)> {
    let mut policy = TabularSoftmaxPolicy::uniform(mdp.n_states(), mdp.n_actions());
    let mut rows = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let (next, diag) = trpo_step_exact(mdp, &policy, config)?;
        policy = next;
        rows.push(diag);
    }
    Ok((policy, rows))
}

/// TRHPO from a uniform gate over identical uniform options.
pub fn run_trhpo(
    mdp: &Mdp,
    horizon: usize,
    config: &TrhpoConfig,
    budget: Budget,
    seed: u64,
) -> Result<(HierarchicalPolicy, Vec<TrhpoDiagnostics>)> {
    config.validate()?;
    let sampler = MdpSampler::new(mdp, Some(horizon));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = HierarchicalPolicy::uniform(mdp.n_states(), mdp.n_actions(), config.k, config.tau)?;
    let mut rows = Vec::new();
    let mut steps = 0;
    while !budget.exhausted(rows.len(), steps) {
        let (next, diag) = trhpo_step(&sampler, &h, config, &mut rng)?;
        steps += diag.steps;
        h = next;
        rows.push(diag);
    }
    Ok((h, rows))
}

/// Per-seed outcome of a paired comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedRun {
    pub seed: u64,
    pub trpo: Vec<TrpoDiagnostics>,
    pub trhpo: Vec<TrhpoDiagnostics>,
}

impl PairedRun {
    /// Mean per-iteration return over the last `window` iterations of each method.
    pub fn final_returns(&self, window: usize) -> (f64, f64) {
        (
            tail_mean(&self.trpo.iter().map(|d| d.mean_return).collect::<Vec<_>>(), window),
            tail_mean(&self.trhpo.iter().map(|d| d.mean_return).collect::<Vec<_>>(), window),
        )
    }

    pub fn steps(&self) -> (usize, usize) {
        (self.trpo.iter().map(|d| d.steps).sum(), self.trhpo.iter().map(|d| d.steps).sum())
    }
}

/// Flat and hierarchical learners on the same seeds and step budget. Seeds
/// run in parallel on the current rayon pool; each owns its generator.
pub fn paired_comparison(
    mdp: &Mdp,
    horizon: usize,
    config: &TrhpoConfig,
    budget: Budget,
    seeds: &[u64],
) -> Result<Vec<PairedRun>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let (_, trpo) = run_trpo(mdp, horizon, &config.trpo, budget, seed)?;
            let (_, trhpo) = run_trhpo(mdp, horizon, config, budget, seed)?;
            Ok(PairedRun { seed, trpo, trhpo })
        })
        .collect()
}

pub fn tail_mean(values: &[f64], window: usize) -> f64 {
    let tail = &values[values.len().saturating_sub(window.max(1))..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Median; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_tail() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(tail_mean(&[1.0, 2.0, 3.0, 5.0], 2), 4.0);
        assert_eq!(tail_mean(&[1.0], 10), 1.0);
    }

    #[test]
    fn budget_stops_on_steps() {
        let b = Budget { iterations: 100, max_steps: Some(50) };
        assert!(!b.exhausted(3, 49));
        assert!(b.exhausted(3, 50));
        assert!(Budget::iterations(2).exhausted(2, 0));
    }
}
