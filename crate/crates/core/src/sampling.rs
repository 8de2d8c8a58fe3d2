//! Episode sampling from an [`Mdp`].

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{Mdp, Policy};

/// Draws an index from a probability vector by inverse CDF (one uniform).
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Episode {
    pub steps: Vec<Transition>,
    /// True when the episode ended in a terminal state rather than at the horizon.
    pub terminated: bool,
}

impl Episode {
    pub fn undiscounted_return(&self) -> f64 {
        self.steps.iter().map(|t| t.reward).sum()
    }

    pub fn discounted_return(&self, gamma: f64) -> f64 {
        self.steps.iter().rev().fold(0.0, |g, t| t.reward + gamma * g)
    }

    /// `G_t = Σ_k γ^(k−t) r_k` for every step.
    pub fn returns_to_go(&self, gamma: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.steps.len()];
        let mut g = 0.0;
        for (i, t) in self.steps.iter().enumerate().rev() {
            g = t.reward + gamma * g;
            out[i] = g;
        }
        out
    }
}

/// Episodic sampler over an MDP. Absorbing zero-reward states end episodes.
#[derive(Debug, Clone)]
pub struct MdpSampler<'a> {
    mdp: &'a Mdp,
    horizon: Option<usize>,
    terminal: Vec<bool>,
    start: Vec<f64>,
}

impl<'a> MdpSampler<'a> {
    pub fn new(mdp: &'a Mdp, horizon: Option<usize>) -> Self {
        let mut terminal = vec![false; mdp.n_states()];
        for s in mdp.absorbing_states() {
            terminal[s] = true;
        }
        Self { mdp, horizon, terminal, start: mdp.rho0().to_vec() }
    }

    /// Replaces the start distribution (e.g. exploring starts).
    pub fn with_start(mut self, start: Vec<f64>) -> Result<Self> {
        if start.len() != self.mdp.n_states() {
            return Err(Error::Shape(format!("start distribution of length {}", start.len())));
        }
        self.start = start;
        Ok(self)
    }

    /// Uniform start over all non-terminal states.
    pub fn with_uniform_start(self) -> Self {
        let live = self.terminal.iter().filter(|t| !**t).count().max(1);
        let start = self.terminal.iter().map(|&t| if t { 0.0 } else { 1.0 / live as f64 }).collect();
        Self { start, ..self }
    }

    pub fn mdp(&self) -> &Mdp {
        self.mdp
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// Whether every episode is guaranteed to end.
    pub fn is_episodic(&self) -> bool {
        self.horizon.is_some()
    }

    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.start, rng)
    }

    /// Samples `(s', r)`; deterministic rows consume no randomness.
    pub fn step<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> (usize, f64) {
        let row = self.mdp.row(s, a);
        let next = if row.next.len() == 1 { row.next[0] } else { row.next[sample_categorical(row.prob, rng)] };
        (next, self.mdp.reward(s, a))
    }

    /// Runs one episode under `policy` until a terminal state or the horizon.
    pub fn rollout<P: Policy + ?Sized, R: Rng + ?Sized>(&self, policy: &P, rng: &mut R) -> Result<Episode> {
        let cap = self
            .horizon
            .ok_or_else(|| Error::InvalidArgument("episode sampling requires a horizon cap".into()))?;
        let mut s = self.reset(rng);
        let mut ep = Episode::default();
        while !self.terminal[s] && ep.steps.len() < cap {
            let a = sample_categorical(&policy.probs(s), rng);
            let (next, r) = self.step(s, a, rng);
            ep.steps.push(Transition { state: s, action: a, reward: r, next_state: next });
            s = next;
        }
        ep.terminated = self.terminal[s];
        Ok(ep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn categorical_respects_zero_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }

    #[test]
    fn returns_to_go_match_discounted_sum() {
        let ep = Episode {
            steps: (0..3)
                .map(|i| Transition { state: 0, action: 0, reward: i as f64, next_state: 0 })
                .collect(),
            terminated: true,
        };
        let g = ep.returns_to_go(0.5);
        assert_eq!(g, vec![0.0 + 0.5 * 1.0 + 0.25 * 2.0, 1.0 + 0.5 * 2.0, 2.0]);
        assert_eq!(ep.discounted_return(0.5), g[0]);
    }
}
