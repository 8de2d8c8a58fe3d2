//! Bellman operators, value and policy iteration, TD(λ) and ε-greedy sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sup_dist;
use crate::mdp::{exact_value, expected_return, DeterministicPolicy, Mdp, Policy};
use crate::sampling::{Episode, MdpSampler};

/// Actions whose value is within this of the maximum count as tied.
pub const GREEDY_TIE_TOL: f64 = 1e-9;

/// Lowest-index action among those tied for the maximum.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().position(|&v| v >= max - GREEDY_TIE_TOL).unwrap_or(0)
}

fn check_len(mdp: &Mdp, f: &[f64]) -> Result<()> {
    if f.len() != mdp.n_states() {
        return Err(Error::Shape(format!("value vector of length {} for {} states", f.len(), mdp.n_states())));
    }
    Ok(())
}

/// One synchronous sweep of `T_π` (policy given) or `T*` (no policy).
pub fn bellman_backup(mdp: &Mdp, f: &[f64], policy: Option<&dyn Policy>) -> Result<Vec<f64>> {
    check_len(mdp, f)?;
    if let Some(p) = policy {
        if p.n_states() != mdp.n_states() || p.n_actions() != mdp.n_actions() {
            return Err(Error::Shape("policy does not match MDP".into()));
        }
    }
    let gamma = mdp.gamma();
    let out = (0..mdp.n_states())
        .map(|s| {
            let backup = |a: usize| mdp.reward(s, a) + gamma * mdp.expect(s, a, f);
            match policy {
                Some(p) => p.probs(s).iter().enumerate().map(|(a, &w)| if w == 0.0 { 0.0 } else { w * backup(a) }).sum(),
                None => (0..mdp.n_actions()).map(backup).fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    Ok(out)
}

/// Greedy deterministic policy with respect to `V` (lowest-index tie-break).
pub fn greedy_policy(mdp: &Mdp, v: &[f64]) -> DeterministicPolicy {
    let q = mdp.q_from_v(v);
    greedy_from_q(&q, mdp.n_actions())
}

pub fn greedy_from_q(q: &[f64], n_actions: usize) -> DeterministicPolicy {
    let actions = q.chunks(n_actions).map(argmax_lowest).collect();
    DeterministicPolicy::new(n_actions, actions).expect("argmax is in range")
}

/// Synchronous sweeps or in-place (Gauss-Seidel) updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    #[default]
    Synchronous,
    InPlace,
}

/// One row of a convergence log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub delta: f64,
    /// `ρ₀·V` for value iteration, exact `η` for policy iteration.
    pub eta: f64,
}

#[derive(Debug, Clone)]
pub struct ValueIterationResult {
    pub v: Vec<f64>,
    pub policy: DeterministicPolicy,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    /// Iterates `V_1, V_2, ...` when recorded.
    pub history: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueIterationOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub sweep: Sweep,
    pub record_history: bool,
}

impl Default for ValueIterationOptions {
    fn default() -> Self {
        Self { max_iters: 100_000, tol: 1e-10, sweep: Sweep::Synchronous, record_history: false }
    }
}

/// Value iteration with synchronous sweeps; stops when the sup-norm change drops below `tol`.
pub fn value_iteration(mdp: &Mdp, v0: &[f64], max_iters: usize, tol: f64) -> Result<ValueIterationResult> {
    value_iteration_with(mdp, v0, &ValueIterationOptions { max_iters, tol, ..Default::default() })
}

pub fn value_iteration_with(mdp: &Mdp, v0: &[f64], opts: &ValueIterationOptions) -> Result<ValueIterationResult> {
    check_len(mdp, v0)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    let mut v = v0.to_vec();
    let mut trace = Vec::new();
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let next = match opts.sweep {
            Sweep::Synchronous => bellman_backup(mdp, &v, None)?,
            Sweep::InPlace => {
                let mut w = v.clone();
                for s in 0..mdp.n_states() {
                    w[s] = (0..mdp.n_actions())
                        .map(|a| mdp.reward(s, a) + mdp.gamma() * mdp.expect(s, a, &w))
                        .fold(f64::NEG_INFINITY, f64::max);
                }
                w
            }
        };
        iterations += 1;
        let delta = sup_dist(&next, &v);
        v = next;
        let eta = mdp.rho0().iter().zip(&v).map(|(r, x)| r * x).sum();
        trace.push(IterationRecord { iter: iterations, delta, eta });
        if opts.record_history {
            history.push(v.clone());
        }
        if delta < opts.tol {
            break;
        }
    }
    let policy = greedy_policy(mdp, &v);
    Ok(ValueIterationResult { v, policy, iterations, trace, history })
}

#[derive(Debug, Clone)]
pub struct PolicyIterationResult {
    pub policy: DeterministicPolicy,
    pub v: Vec<f64>,
    /// Number of policy evaluations performed.
    pub evaluations: usize,
    pub trace: Vec<IterationRecord>,
}

/// Policy iteration: exact evaluation by linear solve, then greedy improvement.
///
/// The incumbent action is kept whenever it is tied for best, so the loop
/// stops as soon as no state has a strictly better action.
pub fn policy_iteration(mdp: &Mdp, pi0: &dyn Policy, max_iters: usize) -> Result<PolicyIterationResult> {
    let mut eval = exact_value(mdp, pi0)?;
    let mut eta = expected_return(mdp, pi0)?;
    let mut trace = vec![IterationRecord { iter: 1, delta: f64::NAN, eta }];
    let incumbent: Option<Vec<usize>> = (0..mdp.n_states())
        .map(|s| {
            let p = pi0.probs(s);
            p.iter().position(|&x| x == 1.0)
        })
        .collect();
    let mut current = incumbent;
    let mut evaluations = 1;
    loop {
        let na = mdp.n_actions();
        let mut actions = Vec::with_capacity(mdp.n_states());
        for s in 0..mdp.n_states() {
            let q = &eval.q[s * na..(s + 1) * na];
            let best = argmax_lowest(q);
            let keep = current.as_ref().map(|c| c[s]).filter(|&a| q[a] >= q[best] - GREEDY_TIE_TOL);
            actions.push(keep.unwrap_or(best));
        }
        if current.as_deref() == Some(actions.as_slice()) || evaluations >= max_iters {
            let policy = DeterministicPolicy::new(na, current.unwrap_or(actions))?;
            return Ok(PolicyIterationResult { policy, v: eval.v, evaluations, trace });
        }
        let policy = DeterministicPolicy::new(na, actions.clone())?;
        let next = exact_value(mdp, &policy)?;
        let delta = sup_dist(&next.v, &eval.v);
        eval = next;
        eta = expected_return(mdp, &policy)?;
        evaluations += 1;
        trace.push(IterationRecord { iter: evaluations, delta, eta });
        current = Some(actions);
    }
}

/// Step-size rule indexed by the per-state visit count `n ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    /// `α_n = 1/n`: divergent sum, convergent sum of squares.
    Harmonic,
    Constant(f64),
}

impl StepSize {
    pub fn alpha(self, n: usize) -> f64 {
        match self {
            StepSize::Harmonic => 1.0 / n.max(1) as f64,
            StepSize::Constant(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningSchedule {
    pub alpha: StepSize,
    pub epsilon: f64,
    pub lambda: f64,
}

impl Default for LearningSchedule {
    fn default() -> Self {
        Self { alpha: StepSize::Harmonic, epsilon: 0.1, lambda: 0.0 }
    }
}

/// How TD(λ) applies its updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TdMode {
    /// λ-return targets, applied at the end of each episode.
    ForwardOffline,
    /// Accumulating traces, summed and applied at the end of each episode.
    BackwardOffline,
    /// Accumulating traces, applied after every step.
    #[default]
    BackwardOnline,
}

/// Per-state increments `α_s Σ_{t: s_t = s} (G^λ_t − V(s_t))` for one episode,
/// with `V` held fixed. A truncated episode bootstraps from `V(s_T)`.
pub fn forward_view_increments(ep: &Episode, v: &[f64], gamma: f64, lambda: f64, alpha: &[f64]) -> Vec<f64> {
    let mut inc = vec![0.0; v.len()];
    let mut g = match ep.steps.last() {
        Some(t) => v[t.next_state],
        None => return inc,
    };
    for t in ep.steps.iter().rev() {
        // G^λ_t = r_t + γ((1 − λ)V(s_{t+1}) + λ G^λ_{t+1})
        g = t.reward + gamma * ((1.0 - lambda) * v[t.next_state] + lambda * g);
        inc[t.state] += alpha[t.state] * (g - v[t.state]);
    }
    inc
}

/// Same increments via accumulating eligibility traces, `α_s Σ_t δ_t e_t(s)`.
pub fn backward_view_increments(ep: &Episode, v: &[f64], gamma: f64, lambda: f64, alpha: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; v.len()];
    let mut trace = vec![0.0; v.len()];
    let mut touched: Vec<usize> = Vec::new();
    for t in &ep.steps {
        for &s in &touched {
            trace[s] *= gamma * lambda;
        }
        if trace[t.state] == 0.0 && !touched.contains(&t.state) {
            touched.push(t.state);
        }
        trace[t.state] += 1.0;
        let delta = t.reward + gamma * v[t.next_state] - v[t.state];
        for &s in &touched {
            acc[s] += delta * trace[s];
        }
    }
    acc.iter().zip(alpha).map(|(a, al)| a * al).collect()
}

/// TD(λ) policy evaluation from sampled episodes.
pub fn td_lambda(
    sampler: &MdpSampler<'_>,
    policy: &dyn Policy,
    schedule: &LearningSchedule,
    mode: TdMode,
    episodes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let lambda = schedule.lambda;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, 1]")));
    }
    if !sampler.is_episodic() {
        return Err(Error::InvalidArgument("non-episodic stream without horizon cap".into()));
    }
    let mdp = sampler.mdp();
    let gamma = mdp.gamma();
    let n = mdp.n_states();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![0.0; n];
    let mut visits = vec![0usize; n];
    for _ in 0..episodes {
        let ep = sampler.rollout(policy, &mut rng)?;
        match mode {
            TdMode::ForwardOffline | TdMode::BackwardOffline => {
                for t in &ep.steps {
                    visits[t.state] += 1;
                }
                let alpha: Vec<f64> = visits.iter().map(|&c| schedule.alpha.alpha(c)).collect();
                let inc = if mode == TdMode::ForwardOffline {
                    forward_view_increments(&ep, &v, gamma, lambda, &alpha)
                } else {
                    backward_view_increments(&ep, &v, gamma, lambda, &alpha)
                };
                v.iter_mut().zip(&inc).for_each(|(x, d)| *x += d);
            }
            TdMode::BackwardOnline => {
                let mut trace = vec![0.0; n];
                let mut touched: Vec<usize> = Vec::new();
                for t in &ep.steps {
                    visits[t.state] += 1;
                    for &s in &touched {
                        trace[s] *= gamma * lambda;
                    }
                    if !touched.contains(&t.state) {
                        touched.push(t.state);
                    }
                    trace[t.state] += 1.0;
                    let delta = t.reward + gamma * v[t.next_state] - v[t.state];
                    for &s in &touched {
                        v[s] += schedule.alpha.alpha(visits[s]) * delta * trace[s];
                    }
                    if lambda == 0.0 {
                        trace[t.state] = 0.0;
                        touched.clear();
                    }
                }
            }
        }
    }
    Ok(v)
}

/// ε-greedy choice over one row of action values.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    if q.is_empty() {
        return Err(Error::InvalidArgument("empty action set".into()));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside [0, 1]")));
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        Ok(rng.random_range(0..q.len()))
    } else {
        Ok(argmax_lowest(q))
    }
}

/// ε-greedy sampler over a full Q table.
#[derive(Debug, Clone)]
pub struct EpsilonGreedy {
    pub q: Vec<f64>,
    pub n_actions: usize,
    pub epsilon: f64,
}

impl EpsilonGreedy {
    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Result<usize> {
        epsilon_greedy(&self.q[s * self.n_actions..(s + 1) * self.n_actions], self.epsilon, rng)
    }
}

impl Policy for EpsilonGreedy {
    fn n_states(&self) -> usize {
        self.q.len() / self.n_actions
    }
    fn n_actions(&self) -> usize {
        self.n_actions
    }
    fn probs(&self, s: usize) -> Vec<f64> {
        let na = self.n_actions;
        let mut p = vec![self.epsilon / na as f64; na];
        p[argmax_lowest(&self.q[s * na..(s + 1) * na])] += 1.0 - self.epsilon;
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::PolicyTable;
    use crate::sampling::Transition;

    fn one_state() -> Mdp {
        Mdp::new(1, 1, vec![vec![(0, 1.0)]], vec![1.0], 0.9, vec![1.0]).unwrap()
    }

    #[test]
    fn optimal_backup_of_zero() {
        assert_eq!(bellman_backup(&one_state(), &[0.0], None).unwrap(), vec![1.0]);
        assert!(bellman_backup(&one_state(), &[0.0, 1.0], None).is_err());
    }

    #[test]
    fn one_state_value_iteration() {
        let res = value_iteration(&one_state(), &[0.0], 10_000, 1e-12).unwrap();
        assert!((res.v[0] - 10.0).abs() < 1e-10);
    }

    #[test]
    fn lambda_zero_uses_only_one_step_error() {
        let ep = Episode {
            steps: vec![
                Transition { state: 0, action: 0, reward: 1.0, next_state: 1 },
                Transition { state: 1, action: 0, reward: 0.0, next_state: 2 },
            ],
            terminated: true,
        };
        let v = [0.5, 0.25, 0.0];
        let alpha = [1.0; 3];
        let inc = forward_view_increments(&ep, &v, 0.9, 0.0, &alpha);
        assert!((inc[0] - (1.0 + 0.9 * 0.25 - 0.5)).abs() < 1e-15);
        assert!((inc[1] - (0.0 + 0.9 * 0.0 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn td_rejects_bad_lambda_and_missing_horizon() {
        let mdp = one_state();
        let pi = PolicyTable::uniform(1, 1);
        let bad = LearningSchedule { lambda: 1.5, ..Default::default() };
        let sampler = MdpSampler::new(&mdp, Some(10));
        assert!(td_lambda(&sampler, &pi, &bad, TdMode::BackwardOnline, 1, 0).is_err());
        let unbounded = MdpSampler::new(&mdp, None);
        assert!(td_lambda(&unbounded, &pi, &LearningSchedule::default(), TdMode::BackwardOnline, 1, 0).is_err());
    }

    #[test]
    fn epsilon_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(epsilon_greedy(&[0.0, 3.0, 3.0], 0.0, &mut rng).unwrap(), 1);
        }
        assert!(epsilon_greedy(&[], 0.1, &mut rng).is_err());
        let eg = EpsilonGreedy { q: vec![1.0, 0.0], n_actions: 2, epsilon: 1.0 };
        assert_eq!(eg.probs(0), vec![0.5, 0.5]);
    }

    #[test]
    fn harmonic_step_size() {
        assert_eq!(StepSize::Harmonic.alpha(4), 0.25);
        assert_eq!(StepSize::Constant(0.1).alpha(7), 0.1);
    }
}
