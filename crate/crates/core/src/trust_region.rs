//! Trust-region policy optimization for tabular softmax policies.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::mdp::{discounted_density, exact_value, expected_return, softmax, Mdp, Policy, TabularSoftmaxPolicy};
use crate::sampling::{Episode, MdpSampler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrpoConfig {
    /// KL radius.
    pub delta: f64,
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub damping: f64,
    pub backtrack_ratio: f64,
    pub max_backtracks: usize,
    /// Episodes collected per iteration.
    pub rollouts: usize,
    /// Discount for returns-to-go; `None` uses the MDP's.
    pub gamma: Option<f64>,
    /// Standardize advantages across the batch.
    pub normalize_advantages: bool,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        Self {
            delta: 0.01,
            cg_iters: 10,
            cg_tol: 1e-10,
            damping: 1e-8,
            backtrack_ratio: 0.5,
            max_backtracks: 10,
            rollouts: 10,
            gamma: None,
            normalize_advantages: true,
        }
    }
}

impl TrpoConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("delta", self.delta), ("cg_tol", self.cg_tol), ("damping", self.damping)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.cg_iters == 0 || self.max_backtracks == 0 || self.rollouts == 0 {
            return Err(Error::Config("cg_iters, max_backtracks and rollouts must be positive".into()));
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return Err(Error::Config(format!("backtrack_ratio must lie in (0, 1), got {}", self.backtrack_ratio)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::Config(format!("gamma must lie in (0, 1), got {g}")));
            }
        }
        Ok(())
    }
}

/// One weighted `(s, a)` sample of the surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub state: usize,
    pub action: usize,
    pub weight: f64,
    /// Discounted return-to-go (or `Q` in exact mode).
    pub ret: f64,
    pub advantage: f64,
    /// `π_old(a|s)`
    pub behavior_prob: f64,
}

/// Weighted samples for the surrogate plus per-state weights for the mean KL.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub n_states: usize,
    pub n_actions: usize,
    pub samples: Vec<Sample>,
    pub state_weights: Vec<f64>,
    /// Undiscounted return of each episode (empty in exact mode).
    pub episode_returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn new(n_states: usize, n_actions: usize, samples: Vec<Sample>, state_weights: Vec<f64>) -> Result<Self> {
        if state_weights.len() != n_states {
            return Err(Error::Shape(format!("{} state weights for {n_states} states", state_weights.len())));
        }
        for smp in &samples {
            if smp.state >= n_states || smp.action >= n_actions {
                return Err(Error::Shape(format!("sample ({}, {}) out of range", smp.state, smp.action)));
            }
            if !(smp.behavior_prob > 0.0) {
                return Err(Error::Support(format!(
                    "behavior probability {} at ({}, {})",
                    smp.behavior_prob, smp.state, smp.action
                )));
            }
        }
        Ok(Self { n_states, n_actions, samples, state_weights, episode_returns: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_episode_return(&self) -> f64 {
        if self.episode_returns.is_empty() {
            return 0.0;
        }
        self.episode_returns.iter().sum::<f64>() / self.episode_returns.len() as f64
    }
}

/// Per-state mean of the values observed there (the least-squares fit on
/// one-hot state features).
pub fn tabular_baseline(states: &[usize], values: &[f64], n_states: usize) -> Vec<f64> {
    let mut sum = vec![0.0; n_states];
    let mut count = vec![0usize; n_states];
    for (&s, &v) in states.iter().zip(values) {
        sum[s] += v;
        count[s] += 1;
    }
    sum.iter().zip(&count).map(|(&t, &c)| if c > 0 { t / c as f64 } else { 0.0 }).collect()
}

/// Zero mean, unit variance; a constant vector becomes all zeros.
pub fn standardize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v = if std > 1e-12 { (*v - mean) / std } else { 0.0 };
    }
}

/// Sampled batch: weight `1/N` per step, advantages from returns-to-go minus
/// a tabular baseline, optionally standardized.
pub fn build_batch<P: Policy + ?Sized>(
    episodes: &[Episode],
    policy: &P,
    gamma: f64,
    normalize: bool,
) -> Result<RolloutBatch> {
    let mut states = Vec::new();
    let mut actions = Vec::new();
    let mut returns = Vec::new();
    for ep in episodes {
        returns.extend(ep.returns_to_go(gamma));
        for t in &ep.steps {
            states.push(t.state);
            actions.push(t.action);
        }
    }
    let mut batch = build_batch_from_parts(policy, &states, &actions, &returns, normalize)?;
    batch.episode_returns = episodes.iter().map(Episode::undiscounted_return).collect();
    Ok(batch)
}

/// Batch from flattened per-step `(s, a, G)` triples.
pub fn build_batch_from_parts<P: Policy + ?Sized>(
    policy: &P,
    states: &[usize],
    actions: &[usize],
    returns: &[f64],
    normalize: bool,
) -> Result<RolloutBatch> {
    let (n_states, n_actions) = (policy.n_states(), policy.n_actions());
    if actions.len() != states.len() || returns.len() != states.len() {
        return Err(Error::Shape("states, actions and returns differ in length".into()));
    }
    let baseline = tabular_baseline(states, returns, n_states);
    let mut adv: Vec<f64> = states.iter().zip(returns).map(|(&s, &g)| g - baseline[s]).collect();
    if normalize {
        standardize(&mut adv);
    }
    let n = states.len().max(1) as f64;
    let mut state_weights = vec![0.0; n_states];
    let mut samples = Vec::with_capacity(states.len());
    for i in 0..states.len() {
        let s = states[i];
        state_weights[s] += 1.0 / n;
        samples.push(Sample {
            state: s,
            action: actions[i],
            weight: 1.0 / n,
            ret: returns[i],
            advantage: adv[i],
            behavior_prob: policy.probs(s)[actions[i]],
        });
    }
    RolloutBatch::new(n_states, n_actions, samples, state_weights)
}

/// Exact batch: every `(s, a)` with weight `d(s)·π(a|s)`, `d` the normalized
/// discounted density, and true advantages.
pub fn exact_batch<P: Policy + ?Sized>(mdp: &Mdp, policy: &P) -> Result<RolloutBatch> {
    let eval = exact_value(mdp, policy)?;
    let rho = discounted_density(mdp, policy)?;
    let total: f64 = rho.iter().sum();
    let d: Vec<f64> = rho.iter().map(|r| r / total).collect();
    let mut samples = Vec::new();
    for (s, &ds) in d.iter().enumerate() {
        if ds <= 0.0 {
            continue;
        }
        for (a, &p) in policy.probs(s).iter().enumerate() {
            if p > 0.0 {
                samples.push(Sample {
                    state: s,
                    action: a,
                    weight: ds * p,
                    ret: eval.q(s, a),
                    advantage: eval.advantage(s, a),
                    behavior_prob: p,
                });
            }
        }
    }
    RolloutBatch::new(mdp.n_states(), mdp.n_actions(), samples, d)
}

/// `KL(p ‖ q)` for categorical distributions; infinite if `q` misses mass of `p`.
pub fn kl_categorical(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(&pi, &qi)| if qi > 0.0 { pi * (pi / qi).ln() } else { f64::INFINITY })
        .sum()
}

fn check_shape(batch: &RolloutBatch, policy: &TabularSoftmaxPolicy) -> Result<()> {
    if policy.n_states() != batch.n_states || policy.n_actions() != batch.n_actions {
        return Err(Error::Shape(format!(
            "policy {}x{} vs batch {}x{}",
            policy.n_states(),
            policy.n_actions(),
            batch.n_states,
            batch.n_actions
        )));
    }
    Ok(())
}

/// `Σ_i w_i·π(a_i|s_i)/π_old(a_i|s_i)·Â_i`
pub fn surrogate(batch: &RolloutBatch, policy: &TabularSoftmaxPolicy) -> Result<f64> {
    check_shape(batch, policy)?;
    let mut probs: Vec<Option<Vec<f64>>> = vec![None; batch.n_states];
    let mut total = 0.0;
    for smp in &batch.samples {
        let p = probs[smp.state].get_or_insert_with(|| policy.probs(smp.state));
        total += smp.weight * p[smp.action] / smp.behavior_prob * smp.advantage;
    }
    Ok(total)
}

/// `Σ_s W_s·KL(π_old(·|s) ‖ π(·|s))`
pub fn mean_kl(batch: &RolloutBatch, old: &TabularSoftmaxPolicy, new: &TabularSoftmaxPolicy) -> Result<f64> {
    check_shape(batch, old)?;
    check_shape(batch, new)?;
    Ok(batch
        .state_weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(s, &w)| w * kl_categorical(&old.probs(s), &new.probs(s)))
        .sum())
}

pub fn surrogate_and_kl(
    batch: &RolloutBatch,
    old: &TabularSoftmaxPolicy,
    new: &TabularSoftmaxPolicy,
) -> Result<(f64, f64)> {
    Ok((surrogate(batch, new)?, mean_kl(batch, old, new)?))
}

/// Gradient of the surrogate with respect to the flattened logits of `policy`.
pub fn surrogate_gradient(batch: &RolloutBatch, policy: &TabularSoftmaxPolicy) -> Result<Vec<f64>> {
    check_shape(batch, policy)?;
    let na = batch.n_actions;
    let mut grad = vec![0.0; batch.n_states * na];
    for smp in &batch.samples {
        let p = policy.probs(smp.state);
        let c = smp.weight * smp.advantage / smp.behavior_prob * p[smp.action];
        let g = &mut grad[smp.state * na..(smp.state + 1) * na];
        for (b, gb) in g.iter_mut().enumerate() {
            *gb += c * (f64::from(u8::from(b == smp.action)) - p[b]);
        }
    }
    Ok(grad)
}

/// Gradient of the mean KL with respect to the logits of `new`.
pub fn kl_gradient(batch: &RolloutBatch, old: &TabularSoftmaxPolicy, new: &TabularSoftmaxPolicy) -> Result<Vec<f64>> {
    check_shape(batch, old)?;
    check_shape(batch, new)?;
    let na = batch.n_actions;
    let mut grad = vec![0.0; batch.n_states * na];
    for (s, &w) in batch.state_weights.iter().enumerate() {
        if w > 0.0 {
            let (p, q) = (old.probs(s), new.probs(s));
            for b in 0..na {
                grad[s * na + b] = w * (q[b] - p[b]);
            }
        }
    }
    Ok(grad)
}

/// `A·v + damping·v` with `A` the Hessian of the mean KL at `θ_old`:
/// per state, `W_s·(diag(p) − ppᵀ)`.
pub fn fisher_vector_product(
    batch: &RolloutBatch,
    old: &TabularSoftmaxPolicy,
    v: &[f64],
    damping: f64,
) -> Result<Vec<f64>> {
    check_shape(batch, old)?;
    weighted_fisher_product(&batch.state_weights, old, v, damping)
}

pub(crate) fn weighted_fisher_product(
    state_weights: &[f64],
    policy: &TabularSoftmaxPolicy,
    v: &[f64],
    damping: f64,
) -> Result<Vec<f64>> {
    let na = policy.n_actions();
    if v.len() != state_weights.len() * na {
        return Err(Error::Shape(format!("direction of length {} for {} logits", v.len(), state_weights.len() * na)));
    }
    let mut out: Vec<f64> = v.iter().map(|x| damping * x).collect();
    for (s, &w) in state_weights.iter().enumerate() {
        if w > 0.0 {
            let p = softmax(policy.state_logits(s));
            let vs = &v[s * na..(s + 1) * na];
            let pv = dot(&p, vs);
            for b in 0..na {
                out[s * na + b] += w * p[b] * (vs[b] - pv);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Conjugate gradient on `A·x = g` for a symmetric positive (semi)definite operator.
///
/// Stops when `‖A·x − g‖₂ ≤ tol·‖g‖₂` or after `iters` iterations.
pub fn conjugate_gradient(
    mut apply_a: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    g: &[f64],
    iters: usize,
    tol: f64,
) -> Result<CgResult> {
    let n = g.len();
    let mut x = vec![0.0; n];
    let mut r = g.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = tol * rr.sqrt();
    let mut done = 0;
    while done < iters && rr.sqrt() > target {
        let ap = apply_a(&p)?;
        if ap.len() != n {
            return Err(Error::Shape("operator changed the vector length".into()));
        }
        if ap.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("conjugate-gradient operator output".into()));
        }
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        done += 1;
    }
    Ok(CgResult { x, iterations: done, residual_norm: rr.sqrt() })
}

/// Trust-region parameters shared by flat and hierarchical updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustRegion {
    pub delta: f64,
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub backtrack_ratio: f64,
    pub max_backtracks: usize,
    /// Gain the objective must exceed for acceptance; keeps round-off from
    /// driving steps once the gradient has vanished.
    pub min_improvement: f64,
}

impl From<&TrpoConfig> for TrustRegion {
    fn from(c: &TrpoConfig) -> Self {
        Self {
            delta: c.delta,
            cg_iters: c.cg_iters,
            cg_tol: c.cg_tol,
            backtrack_ratio: c.backtrack_ratio,
            max_backtracks: c.max_backtracks,
            min_improvement: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub theta: Vec<f64>,
    pub accepted: bool,
    pub objective_before: f64,
    pub objective_after: f64,
    pub kl: f64,
    pub beta: f64,
    /// Shrinks applied before acceptance (or all of them on rejection).
    pub backtracks: usize,
    /// `sᵀAs` of the CG direction.
    pub shs: f64,
}

/// One constrained step: `s` from CG on `A·s = g`, `β = √(2δ/sᵀAs)`, then
/// backtracking until the objective improves and the KL stays within `δ`.
///
/// `eval` maps candidate parameters to `(objective, kl)`. A zero gradient
/// returns the unchanged parameters without error.
pub fn trust_region_update(
    theta_old: &[f64],
    grad: &[f64],
    mut fvp: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    mut eval: impl FnMut(&[f64]) -> Result<(f64, f64)>,
    objective_before: f64,
    tr: &TrustRegion,
) -> Result<UpdateOutcome> {
    let unchanged = |backtracks, shs| UpdateOutcome {
        theta: theta_old.to_vec(),
        accepted: false,
        objective_before,
        objective_after: objective_before,
        kl: 0.0,
        beta: 0.0,
        backtracks,
        shs,
    };
    if grad.iter().all(|g| *g == 0.0) {
        return Ok(unchanged(0, 0.0));
    }
    let cg = conjugate_gradient(&mut fvp, grad, tr.cg_iters, tr.cg_tol)?;
    let s = cg.x;
    let shs = dot(&s, &fvp(&s)?);
    if !(shs > 0.0) || !shs.is_finite() {
        return Err(Error::TrustRegion(format!("non-positive curvature sᵀAs = {shs:e}")));
    }
    let beta = (2.0 * tr.delta / shs).sqrt();
    let mut scale = 1.0;
    for backtracks in 0..tr.max_backtracks {
        let theta: Vec<f64> = theta_old.iter().zip(&s).map(|(t, d)| t + scale * beta * d).collect();
        let (objective, kl) = eval(&theta)?;
        if objective - objective_before > tr.min_improvement && kl <= tr.delta {
            return Ok(UpdateOutcome {
                theta,
                accepted: true,
                objective_before,
                objective_after: objective,
                kl,
                beta: scale * beta,
                backtracks,
                shs,
            });
        }
        scale *= tr.backtrack_ratio;
    }
    Ok(unchanged(tr.max_backtracks, shs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrpoDiagnostics {
    /// Mean undiscounted episode return (sampled) or `η` (exact).
    pub mean_return: f64,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub kl: f64,
    pub beta: f64,
    pub backtracks: usize,
    pub accepted: bool,
    /// Environment steps consumed.
    pub steps: usize,
}

/// Round-off floor for surrogate gains: `1e-12·Σ_i w_i·max(|Â_i|, |G_i|)`.
pub fn improvement_floor(batch: &RolloutBatch) -> f64 {
    IMPROVEMENT_RTOL * batch.samples.iter().map(|s| s.weight * s.advantage.abs().max(s.ret.abs())).sum::<f64>()
}

pub const IMPROVEMENT_RTOL: f64 = 1e-12;

/// Update on a prepared batch.
pub fn trpo_update(
    batch: &RolloutBatch,
    policy: &TabularSoftmaxPolicy,
    config: &TrpoConfig,
) -> Result<(TabularSoftmaxPolicy, TrpoDiagnostics)> {
    config.validate()?;
    let before = surrogate(batch, policy)?;
    let grad = surrogate_gradient(batch, policy)?;
    let (ns, na) = (policy.n_states(), policy.n_actions());
    let tr = TrustRegion { min_improvement: improvement_floor(batch), ..TrustRegion::from(config) };
    let outcome = trust_region_update(
        policy.logits(),
        &grad,
        |v| fisher_vector_product(batch, policy, v, config.damping),
        |theta| {
            let cand = TabularSoftmaxPolicy::from_logits(ns, na, theta.to_vec())?;
            surrogate_and_kl(batch, policy, &cand)
        },
        before,
        &tr,
    )?;
    let next = TabularSoftmaxPolicy::from_logits(ns, na, outcome.theta)?;
    let diag = TrpoDiagnostics {
        mean_return: batch.mean_episode_return(),
        surrogate_before: before,
        surrogate_after: outcome.objective_after,
        kl: outcome.kl,
        beta: outcome.beta,
        backtracks: outcome.backtracks,
        accepted: outcome.accepted,
        steps: batch.len(),
    };
    Ok((next, diag))
}

/// Collects `config.rollouts` episodes and takes one trust-region step.
pub fn trpo_step<R: Rng + ?Sized>(
    sampler: &MdpSampler<'_>,
    policy: &TabularSoftmaxPolicy,
    config: &TrpoConfig,
    rng: &mut R,
) -> Result<(TabularSoftmaxPolicy, TrpoDiagnostics)> {
    config.validate()?;
    let episodes = (0..config.rollouts).map(|_| sampler.rollout(policy, rng)).collect::<Result<Vec<_>>>()?;
    let gamma = config.gamma.unwrap_or(sampler.mdp().gamma());
    let batch = build_batch(&episodes, policy, gamma, config.normalize_advantages)?;
    trpo_update(&batch, policy, config)
}

/// One step with exact advantages and state density; `mean_return` holds `η`
/// of the returned policy.
pub fn trpo_step_exact(
    mdp: &Mdp,
    policy: &TabularSoftmaxPolicy,
    config: &TrpoConfig,
) -> Result<(TabularSoftmaxPolicy, TrpoDiagnostics)> {
    let batch = exact_batch(mdp, policy)?;
    let (next, mut diag) = trpo_update(&batch, policy, config)?;
    diag.mean_return = expected_return(mdp, &next)?;
    diag.steps = 0;
    Ok((next, diag))
}

/// CSV with header `iter,mean_return,surrogate,kl,beta,backtracks`.
pub fn diagnostics_csv(rows: &[TrpoDiagnostics]) -> String {
    let mut out = String::from("iter,mean_return,surrogate,kl,beta,backtracks\n");
    for (i, d) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            d.mean_return, d.surrogate_after, d.kl, d.beta, d.backtracks
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_small_cases() {
        let diag = |v: &[f64]| Ok(vec![v[0], 2.0 * v[1]]);
        let r = conjugate_gradient(diag, &[1.0, 2.0], 10, 1e-12).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-14 && (r.x[1] - 1.0).abs() < 1e-14);
        let r = conjugate_gradient(|v: &[f64]| Ok(v.to_vec()), &[3.0, -1.0, 2.0], 10, 1e-12).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.x, vec![3.0, -1.0, 2.0]);
    }

    #[test]
    fn cg_rejects_nan() {
        let r = conjugate_gradient(|_: &[f64]| Ok(vec![f64::NAN]), &[1.0], 5, 1e-12);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn beta_with_identity_metric() {
        let tr = TrustRegion { delta: 0.5, cg_iters: 10, cg_tol: 1e-12, backtrack_ratio: 0.5, max_backtracks: 10, min_improvement: 0.0 };
        let g = [0.6, 0.8];
        let out = trust_region_update(
            &[0.0, 0.0],
            &g,
            |v: &[f64]| Ok(v.to_vec()),
            |t: &[f64]| Ok((dot(t, &g), 0.5 * dot(t, t))),
            0.0,
            &tr,
        )
        .unwrap();
        assert!(out.accepted);
        assert!((out.beta - 1.0).abs() < 1e-14);
        assert_eq!(out.backtracks, 0);
    }

    #[test]
    fn ratio_one_at_old_policy() {
        let policy = TabularSoftmaxPolicy::from_logits(2, 2, vec![0.3, -0.1, 1.0, 0.0]).unwrap();
        let samples = vec![
            Sample { state: 0, action: 1, weight: 0.5, ret: 1.0, advantage: 0.4, behavior_prob: policy.prob(0, 1) },
            Sample { state: 1, action: 0, weight: 0.5, ret: 0.0, advantage: -0.2, behavior_prob: policy.prob(1, 0) },
        ];
        let batch = RolloutBatch::new(2, 2, samples, vec![0.5, 0.5]).unwrap();
        let (l, kl) = surrogate_and_kl(&batch, &policy, &policy).unwrap();
        assert!((l - 0.1).abs() < 1e-15);
        assert_eq!(kl, 0.0);
    }

    #[test]
    fn zero_behavior_probability_rejected() {
        let s = Sample { state: 0, action: 0, weight: 1.0, ret: 0.0, advantage: 0.0, behavior_prob: 0.0 };
        assert!(matches!(RolloutBatch::new(1, 2, vec![s], vec![1.0]), Err(Error::Support(_))));
    }

    #[test]
    fn invalid_config_rejected() {
        let c = TrpoConfig { backtrack_ratio: 1.0, ..TrpoConfig::default() };
        assert!(c.validate().is_err());
        assert!(TrpoConfig::default().validate().is_ok());
    }
}
