//! Hierarchical policies over fixed-duration options, the empirical
//! mutual-information regularizer, and trust-region hierarchical updates.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{softmax, Policy, TabularSoftmaxPolicy};
use crate::sampling::{sample_categorical, MdpSampler};
use crate::trust_region::{
    build_batch_from_parts, improvement_floor, kl_categorical, surrogate, surrogate_gradient, weighted_fisher_product,
    RolloutBatch, Sample, TrpoConfig, TrustRegion, trust_region_update,
};

/// Gate over `k` options, each a tabular softmax policy held for `tau` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalPolicy {
    pub gate: TabularSoftmaxPolicy,
    pub options: Vec<TabularSoftmaxPolicy>,
    pub tau: usize,
}

impl HierarchicalPolicy {
    pub fn new(gate: TabularSoftmaxPolicy, options: Vec<TabularSoftmaxPolicy>, tau: usize) -> Result<Self> {
        if tau == 0 {
            return Err(Error::InvalidArgument("option duration must be at least 1".into()));
        }
        if options.len() != gate.n_actions() || options.is_empty() {
            return Err(Error::Shape(format!("gate over {} options, {} given", gate.n_actions(), options.len())));
        }
        for o in &options {
            if o.n_states() != gate.n_states() || o.n_actions() != options[0].n_actions() {
                return Err(Error::Shape("option policies disagree in shape".into()));
            }
        }
        Ok(Self { gate, options, tau })
    }

    /// Uniform gate and uniform options.
    pub fn uniform(n_states: usize, n_actions: usize, k: usize, tau: usize) -> Result<Self> {
        let options = vec![TabularSoftmaxPolicy::uniform(n_states, n_actions); k];
        Self::new(TabularSoftmaxPolicy::uniform(n_states, k), options, tau)
    }

    /// Uniform gate with option logits drawn from `N(0, scale²)`.
    pub fn random_options<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        k: usize,
        tau: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let normal = Normal::new(0.0, scale).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let options = (0..k)
            .map(|_| {
                let logits = (0..n_states * n_actions).map(|_| normal.sample(rng)).collect();
                TabularSoftmaxPolicy::from_logits(n_states, n_actions, logits)
            })
            .collect::<Result<_>>()?;
        Self::new(TabularSoftmaxPolicy::uniform(n_states, k), options, tau)
    }

    pub fn k(&self) -> usize {
        self.options.len()
    }

    pub fn gate_probs(&self, s: usize) -> Vec<f64> {
        self.gate.probs(s)
    }

    /// `π(a|s) = Σ_o π_g(o|s)·π(a|s,o)`
    pub fn mixture_probs(&self, s: usize) -> Vec<f64> {
        let g = self.gate.probs(s);
        let mut p = vec![0.0; self.options[0].n_actions()];
        for (o, opt) in self.options.iter().enumerate() {
            for (pa, qa) in p.iter_mut().zip(opt.probs(s)) {
                *pa += g[o] * qa;
            }
        }
        p
    }

    /// `p(o|s,a) = π_g(o|s)·π(a|s,o) / π(a|s)`
    pub fn responsibilities(&self, s: usize, a: usize) -> Result<Vec<f64>> {
        let g = self.gate.probs(s);
        let joint: Vec<f64> = self.options.iter().enumerate().map(|(o, opt)| g[o] * opt.probs(s)[a]).collect();
        let total: f64 = joint.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Support(format!("zero mixture probability at ({s}, {a})")));
        }
        Ok(joint.into_iter().map(|j| j / total).collect())
    }
}

impl Policy for HierarchicalPolicy {
    fn n_states(&self) -> usize {
        self.gate.n_states()
    }
    fn n_actions(&self) -> usize {
        self.options[0].n_actions()
    }
    fn probs(&self, s: usize) -> Vec<f64> {
        self.mixture_probs(s)
    }
}

pub fn hierarchical_action_prob(h: &HierarchicalPolicy, s: usize, a: usize) -> Result<f64> {
    if s >= h.n_states() || a >= h.n_actions() {
        return Err(Error::Shape(format!("({s}, {a}) outside {}x{}", h.n_states(), h.n_actions())));
    }
    Ok(h.mixture_probs(s)[a])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OptionStep {
    pub state: usize,
    pub action: usize,
    pub reward_bits: u64,
    pub next_state: usize,
    pub option: usize,
    /// Steps since this option was drawn.
    pub step_in_option: usize,
}

impl OptionStep {
    pub fn reward(&self) -> f64 {
        f64::from_bits(self.reward_bits)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptionEpisode {
    pub steps: Vec<OptionStep>,
    pub terminated: bool,
}

impl OptionEpisode {
    pub fn undiscounted_return(&self) -> f64 {
        self.steps.iter().map(OptionStep::reward).sum()
    }

    pub fn returns_to_go(&self, gamma: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.steps.len()];
        let mut acc = 0.0;
        for (t, st) in self.steps.iter().enumerate().rev() {
            acc = st.reward() + gamma * acc;
            out[t] = acc;
        }
        out
    }
}

/// One episode: an option is drawn from the gate at `t = 0` and every `tau`
/// steps, and actions follow the active option in between. With a single
/// option no draw is made, so the random stream matches a flat rollout.
pub fn sample_with_options<R: Rng + ?Sized>(
    h: &HierarchicalPolicy,
    sampler: &MdpSampler<'_>,
    horizon: usize,
    rng: &mut R,
) -> OptionEpisode {
    let mut s = sampler.reset(rng);
    let mut ep = OptionEpisode::default();
    let mut option = 0;
    while !sampler.is_terminal(s) && ep.steps.len() < horizon {
        let t = ep.steps.len();
        if t % h.tau == 0 && h.k() > 1 {
            option = sample_categorical(&h.gate.probs(s), rng);
        }
        let a = sample_categorical(&h.options[option].probs(s), rng);
        let (next, r) = sampler.step(s, a, rng);
        ep.steps.push(OptionStep {
            state: s,
            action: a,
            reward_bits: r.to_bits(),
            next_state: next,
            option,
            step_in_option: t % h.tau,
        });
        s = next;
    }
    ep.terminated = sampler.is_terminal(s);
    ep
}

/// Responsibilities `p(o|s_i,a_i)` per sample and their mean `p̂(o)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponsibilityTable {
    pub rows: Vec<Vec<f64>>,
    pub marginal: Vec<f64>,
}

impl ResponsibilityTable {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.first().map(Vec::len).ok_or_else(|| Error::InvalidArgument("no samples".into()))?;
        let mut marginal = vec![0.0; k];
        for r in &rows {
            if r.len() != k {
                return Err(Error::Shape("ragged responsibility rows".into()));
            }
            for (m, x) in marginal.iter_mut().zip(r) {
                *m += x;
            }
        }
        let n = rows.len() as f64;
        marginal.iter_mut().for_each(|m| *m /= n);
        Ok(Self { rows, marginal })
    }

    /// `(Î, Ĥ(O), Ĥ(O|X))` with nonnegative entropies.
    pub fn mutual_information(&self) -> (f64, f64, f64) {
        let h_o = entropy(&self.marginal);
        let h_cond = self.rows.iter().map(|r| entropy(r)).sum::<f64>() / self.rows.len() as f64;
        (h_o - h_cond, h_o, h_cond)
    }
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiEstimate {
    pub i_hat: f64,
    pub h_o: f64,
    pub h_o_given_x: f64,
    pub table: ResponsibilityTable,
}

/// Empirical mutual information between options and `(s, a)` samples.
pub fn empirical_mi(h: &HierarchicalPolicy, samples: &[(usize, usize)]) -> Result<MiEstimate> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty sample set".into()));
    }
    let rows = samples.iter().map(|&(s, a)| h.responsibilities(s, a)).collect::<Result<Vec<_>>>()?;
    let table = ResponsibilityTable::from_rows(rows)?;
    let (i_hat, h_o, h_o_given_x) = table.mutual_information();
    Ok(MiEstimate { i_hat, h_o, h_o_given_x, table })
}

/// Both sides of the hierarchical KL bound at one state, plus the joint
/// `(o, a)` divergence used by the chain rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlBound {
    /// `KL(π_q(·|s) ‖ π_p(·|s))` of the mixtures.
    pub lhs: f64,
    /// `KL(g_q ‖ g_p)`
    pub gate_term: f64,
    /// `Σ_o g_q(o)·KL(π_q(·|o) ‖ π_p(·|o))`
    pub option_term: f64,
    /// `KL` of the joint over `(o, a)`.
    pub joint: f64,
}

impl KlBound {
    pub fn rhs(&self) -> f64 {
        self.gate_term + self.option_term
    }

    pub fn slack(&self) -> f64 {
        self.rhs() - self.lhs
    }

    /// `|joint − (gate_term + option_term)|`
    pub fn chain_rule_gap(&self) -> f64 {
        (self.joint - self.rhs()).abs()
    }
}

/// Bound terms from explicit probabilities; `q` must be absolutely
/// continuous with respect to `p` on the joint.
pub fn kl_bound_from_probs(
    gate_p: &[f64],
    options_p: &[Vec<f64>],
    gate_q: &[f64],
    options_q: &[Vec<f64>],
) -> Result<KlBound> {
    let k = gate_p.len();
    if gate_q.len() != k || options_p.len() != k || options_q.len() != k {
        return Err(Error::Shape("gate and option counts disagree".into()));
    }
    let na = options_p[0].len();
    let mut mix_p = vec![0.0; na];
    let mut mix_q = vec![0.0; na];
    let mut joint = 0.0;
    let mut option_term = 0.0;
    for o in 0..k {
        if options_p[o].len() != na || options_q[o].len() != na {
            return Err(Error::Shape("option action counts disagree".into()));
        }
        let mut kl_o = 0.0;
        for a in 0..na {
            let (jp, jq) = (gate_p[o] * options_p[o][a], gate_q[o] * options_q[o][a]);
            mix_p[a] += jp;
            mix_q[a] += jq;
            if jq > 0.0 {
                if !(jp > 0.0) {
                    return Err(Error::Support(format!("q puts mass on (o={o}, a={a}) where p has none")));
                }
                joint += jq * (jq / jp).ln();
            }
            let (pp, pq) = (options_p[o][a], options_q[o][a]);
            if pq > 0.0 && gate_q[o] > 0.0 {
                kl_o += pq * (pq / pp).ln();
            }
        }
        if gate_q[o] > 0.0 {
            option_term += gate_q[o] * kl_o;
        }
    }
    Ok(KlBound {
        lhs: kl_categorical(&mix_q, &mix_p),
        gate_term: kl_categorical(gate_q, gate_p),
        option_term,
        joint,
    })
}

/// Hierarchical KL bound terms at state `s` for `KL(q ‖ p)`.
pub fn hierarchical_kl_bound(p: &HierarchicalPolicy, q: &HierarchicalPolicy, s: usize) -> Result<KlBound> {
    if p.k() != q.k() || p.n_states() != q.n_states() || p.n_actions() != q.n_actions() {
        return Err(Error::Shape("hierarchies differ in shape".into()));
    }
    let op: Vec<Vec<f64>> = p.options.iter().map(|o| o.probs(s)).collect();
    let oq: Vec<Vec<f64>> = q.options.iter().map(|o| o.probs(s)).collect();
    kl_bound_from_probs(&p.gate.probs(s), &op, &q.gate.probs(s), &oq)
}

/// `π(o|s) ∝ exp(A_o)`
pub fn softmax_advantage_gating(advantages: &[f64]) -> Result<Vec<f64>> {
    if advantages.is_empty() {
        return Err(Error::InvalidArgument("no options".into()));
    }
    if advantages.iter().any(|a| a.is_nan()) {
        return Err(Error::NonFinite("option advantage".into()));
    }
    Ok(softmax(advantages))
}

/// Direction of the mutual-information term in the objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiSign {
    /// `L + λ·Î`
    #[default]
    Maximize,
    /// `L − λ·Î`
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrhpoConfig {
    pub trpo: TrpoConfig,
    pub k: usize,
    pub tau: usize,
    pub lambda: f64,
    pub mi_sign: MiSign,
    /// Gate KL radius; `None` uses `trpo.delta`.
    pub delta_gate: Option<f64>,
    /// Gate-weighted option KL radius; `None` uses `trpo.delta`.
    pub delta_option: Option<f64>,
    /// Episode cap; `None` uses the sampler's horizon.
    pub horizon: Option<usize>,
}

impl Default for TrhpoConfig {
    fn default() -> Self {
        Self {
            trpo: TrpoConfig::default(),
            k: 4,
            tau: 8,
            lambda: 0.01,
            mi_sign: MiSign::Maximize,
            delta_gate: None,
            delta_option: None,
            horizon: None,
        }
    }
}

impl TrhpoConfig {
    pub fn validate(&self) -> Result<()> {
        self.trpo.validate()?;
        if self.k == 0 || self.tau == 0 {
            return Err(Error::Config("k and tau must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        for d in [self.delta_gate, self.delta_option].into_iter().flatten() {
            if !(d > 0.0) {
                return Err(Error::Config(format!("KL radius must be positive, got {d}")));
            }
        }
        Ok(())
    }

    fn signed_lambda(&self) -> f64 {
        match self.mi_sign {
            MiSign::Maximize => self.lambda,
            MiSign::Minimize => -self.lambda,
        }
    }
}

/// Samples of one TRHPO iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalBatch {
    pub n_states: usize,
    pub n_actions: usize,
    pub k: usize,
    pub samples: Vec<Sample>,
    /// Generating option of each sample.
    pub options: Vec<usize>,
    pub state_weights: Vec<f64>,
    pub episode_returns: Vec<f64>,
}

impl HierarchicalBatch {
    pub fn from_episodes(h: &HierarchicalPolicy, episodes: &[OptionEpisode], gamma: f64, normalize: bool) -> Result<Self> {
        let mut states = Vec::new();
        let mut actions = Vec::new();
        let mut returns = Vec::new();
        let mut options = Vec::new();
        for ep in episodes {
            returns.extend(ep.returns_to_go(gamma));
            for st in &ep.steps {
                states.push(st.state);
                actions.push(st.action);
                options.push(st.option);
            }
        }
        let flat = build_batch_from_parts(h, &states, &actions, &returns, normalize)?;
        Ok(Self {
            n_states: flat.n_states,
            n_actions: flat.n_actions,
            k: h.k(),
            samples: flat.samples,
            options,
            state_weights: flat.state_weights,
            episode_returns: episodes.iter().map(OptionEpisode::undiscounted_return).collect(),
        })
    }

    pub fn mean_episode_return(&self) -> f64 {
        if self.episode_returns.is_empty() {
            return 0.0;
        }
        self.episode_returns.iter().sum::<f64>() / self.episode_returns.len() as f64
    }

    /// Fraction of samples generated by each option.
    pub fn usage(&self) -> Vec<f64> {
        let mut u = vec![0.0; self.k];
        for &o in &self.options {
            u[o] += 1.0;
        }
        let n = self.options.len().max(1) as f64;
        u.iter_mut().for_each(|x| *x /= n);
        u
    }

    fn state_actions(&self) -> Vec<(usize, usize)> {
        self.samples.iter().map(|s| (s.state, s.action)).collect()
    }

    /// Flat batch over all samples (behavior = old mixture).
    fn mixture_batch(&self) -> RolloutBatch {
        RolloutBatch {
            n_states: self.n_states,
            n_actions: self.n_actions,
            samples: self.samples.clone(),
            state_weights: self.state_weights.clone(),
            episode_returns: Vec::new(),
        }
    }

    /// Samples generated by option `o` (behavior = old option policy) with
    /// KL weights `W_s·g(o|s)`.
    fn option_batch(&self, h_old: &HierarchicalPolicy, gate: &TabularSoftmaxPolicy, o: usize) -> RolloutBatch {
        let samples = self
            .samples
            .iter()
            .zip(&self.options)
            .filter(|(_, &oi)| oi == o)
            .map(|(s, _)| Sample { behavior_prob: h_old.options[o].probs(s.state)[s.action], ..*s })
            .collect();
        let state_weights =
            self.state_weights.iter().enumerate().map(|(s, &w)| if w > 0.0 { w * gate.probs(s)[o] } else { 0.0 }).collect();
        RolloutBatch {
            n_states: self.n_states,
            n_actions: self.n_actions,
            samples,
            state_weights,
            episode_returns: Vec::new(),
        }
    }
}

/// Mixture surrogate `Σ_i w_i·π(a_i|s_i)/π_old(a_i|s_i)·Â_i`.
pub fn mixture_surrogate(batch: &HierarchicalBatch, h: &HierarchicalPolicy) -> f64 {
    batch
        .samples
        .iter()
        .map(|s| s.weight * h.mixture_probs(s.state)[s.action] / s.behavior_prob * s.advantage)
        .sum()
}

/// `∂Î/∂θ` for the gate logits and for every option's logits.
pub fn mi_gradients(h: &HierarchicalPolicy, samples: &[(usize, usize)]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let k = h.k();
    let na = h.n_actions();
    let ns = h.n_states();
    let est = empirical_mi(h, samples)?;
    let n = samples.len() as f64;
    let log_marg: Vec<f64> = est.table.marginal.iter().map(|&m| if m > 0.0 { m.ln() } else { 0.0 }).collect();
    let mut gate_grad = vec![0.0; ns * k];
    let mut opt_grad = vec![vec![0.0; ns * na]; k];
    for (&(s, a), q) in samples.iter().zip(&est.table.rows) {
        // c_o = log q_o − log p̂_o, weighted by q_o (zero where q_o = 0).
        let c: Vec<f64> = (0..k).map(|o| if q[o] > 0.0 { q[o].ln() - log_marg[o] } else { 0.0 }).collect();
        let mean_c: f64 = (0..k).map(|o| q[o] * c[o]).sum();
        for o in 0..k {
            let d = q[o] * (c[o] - mean_c) / n;
            if d == 0.0 {
                continue;
            }
            gate_grad[s * k + o] += d;
            let pi = h.options[o].probs(s);
            for b in 0..na {
                opt_grad[o][s * na + b] += d * (f64::from(u8::from(a == b)) - pi[b]);
            }
        }
    }
    Ok((gate_grad, opt_grad))
}

/// Gradient of the mixture surrogate with respect to the gate logits.
fn mixture_gate_gradient(batch: &HierarchicalBatch, h: &HierarchicalPolicy) -> Vec<f64> {
    let k = h.k();
    let mut grad = vec![0.0; batch.n_states * k];
    for smp in &batch.samples {
        let s = smp.state;
        let g = h.gate.probs(s);
        let p = h.mixture_probs(s)[smp.action];
        let c = smp.weight * smp.advantage / smp.behavior_prob;
        for o in 0..k {
            grad[s * k + o] += c * g[o] * (h.options[o].probs(s)[smp.action] - p);
        }
    }
    grad
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrhpoDiagnostics {
    pub mean_return: f64,
    pub i_hat: f64,
    pub objective_before: f64,
    pub objective_after: f64,
    pub gate_kl: f64,
    pub gate_accepted: bool,
    pub option_kls: Vec<f64>,
    pub option_accepted: Vec<bool>,
    /// Updates reverted because the running objective dropped.
    pub option_reverted: Vec<bool>,
    pub usage: Vec<f64>,
    /// Entropy of `usage`.
    pub usage_entropy: f64,
    pub steps: usize,
}

/// Gate update, then option updates in index order, each a trust-region step
/// on its own sub-objective plus the signed `λ·Î` term.
pub fn trhpo_update(
    batch: &HierarchicalBatch,
    h: &HierarchicalPolicy,
    config: &TrhpoConfig,
) -> Result<(HierarchicalPolicy, TrhpoDiagnostics)> {
    config.validate()?;
    let lam = config.signed_lambda();
    let sa = batch.state_actions();
    let (ns, na, k) = (batch.n_states, batch.n_actions, h.k());
    let damping = config.trpo.damping;
    let base = TrustRegion::from(&config.trpo);
    let mi = |hp: &HierarchicalPolicy| -> Result<f64> {
        if lam == 0.0 {
            Ok(0.0)
        } else {
            Ok(empirical_mi(hp, &sa)?.i_hat)
        }
    };
    let full_objective = |hp: &HierarchicalPolicy| -> Result<f64> { Ok(mixture_surrogate(batch, hp) + lam * mi(hp)?) };

    let objective_before = full_objective(h)?;
    let mut current = h.clone();

    // Gate.
    let mut grad = mixture_gate_gradient(batch, &current);
    if lam != 0.0 {
        let (gg, _) = mi_gradients(&current, &sa)?;
        grad.iter_mut().zip(gg).for_each(|(g, m)| *g += lam * m);
    }
    let gate_tr = TrustRegion {
        delta: config.delta_gate.unwrap_or(config.trpo.delta),
        min_improvement: improvement_floor(&batch.mixture_batch()),
        ..base
    };
    let old_gate = current.gate.clone();
    let outcome = trust_region_update(
        old_gate.logits(),
        &grad,
        |v| weighted_fisher_product(&batch.state_weights, &old_gate, v, damping),
        |theta| {
            let mut cand = current.clone();
            cand.gate = TabularSoftmaxPolicy::from_logits(ns, k, theta.to_vec())?;
            let kl = batch
                .state_weights
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(s, &w)| w * kl_categorical(&old_gate.probs(s), &cand.gate.probs(s)))
                .sum();
            Ok((full_objective(&cand)?, kl))
        },
        objective_before,
        &gate_tr,
    )?;
    let gate_kl = outcome.kl;
    let gate_accepted = outcome.accepted;
    current.gate = TabularSoftmaxPolicy::from_logits(ns, k, outcome.theta)?;
    let mut running = if gate_accepted { outcome.objective_after } else { objective_before };

    // Options, in index order.
    let mut option_kls = vec![0.0; k];
    let mut option_accepted = vec![false; k];
    let mut option_reverted = vec![false; k];
    for o in 0..k {
        let ob = batch.option_batch(h, &current.gate, o);
        let old_opt = current.options[o].clone();
        let mi_here = mi(&current)?;
        let sub_before = surrogate(&ob, &old_opt)? + lam * mi_here;
        let mut grad = surrogate_gradient(&ob, &old_opt)?;
        if lam != 0.0 {
            let (_, og) = mi_gradients(&current, &sa)?;
            grad.iter_mut().zip(&og[o]).for_each(|(g, m)| *g += lam * m);
        }
        let tr = TrustRegion {
            delta: config.delta_option.unwrap_or(config.trpo.delta),
            min_improvement: improvement_floor(&ob),
            ..base
        };
        let outcome = trust_region_update(
            old_opt.logits(),
            &grad,
            |v| weighted_fisher_product(&ob.state_weights, &old_opt, v, damping),
            |theta| {
                let cand_opt = TabularSoftmaxPolicy::from_logits(ns, na, theta.to_vec())?;
                let kl: f64 = ob
                    .state_weights
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(s, &w)| w * kl_categorical(&old_opt.probs(s), &cand_opt.probs(s)))
                    .sum();
                let obj = if lam == 0.0 {
                    surrogate(&ob, &cand_opt)?
                } else {
                    let mut cand = current.clone();
                    cand.options[o] = cand_opt.clone();
                    surrogate(&ob, &cand_opt)? + lam * mi(&cand)?
                };
                Ok((obj, kl))
            },
            sub_before,
            &tr,
        )?;
        if outcome.accepted {
            let mut cand = current.clone();
            cand.options[o] = TabularSoftmaxPolicy::from_logits(ns, na, outcome.theta)?;
            let after = full_objective(&cand)?;
            if after >= running {
                current = cand;
                running = after;
                option_kls[o] = outcome.kl;
                option_accepted[o] = true;
            } else {
                option_reverted[o] = true;
            }
        }
    }

    let usage = batch.usage();
    let usage_entropy = entropy(&usage);
    let diag = TrhpoDiagnostics {
        mean_return: batch.mean_episode_return(),
        i_hat: empirical_mi(&current, &sa)?.i_hat,
        objective_before,
        objective_after: running,
        gate_kl,
        gate_accepted,
        option_kls,
        option_accepted,
        option_reverted,
        usage,
        usage_entropy,
        steps: batch.samples.len(),
    };
    Ok((current, diag))
}

/// Samples `config.trpo.rollouts` episodes with options and applies [`trhpo_update`].
pub fn trhpo_step<R: Rng + ?Sized>(
    sampler: &MdpSampler<'_>,
    h: &HierarchicalPolicy,
    config: &TrhpoConfig,
    rng: &mut R,
) -> Result<(HierarchicalPolicy, TrhpoDiagnostics)> {
    config.validate()?;
    let horizon = config
        .horizon
        .or(sampler.horizon())
        .ok_or_else(|| Error::InvalidArgument("episode sampling requires a horizon cap".into()))?;
    let episodes: Vec<OptionEpisode> =
        (0..config.trpo.rollouts).map(|_| sample_with_options(h, sampler, horizon, rng)).collect();
    let gamma = config.trpo.gamma.unwrap_or(sampler.mdp().gamma());
    let batch = HierarchicalBatch::from_episodes(h, &episodes, gamma, config.trpo.normalize_advantages)?;
    trhpo_update(&batch, h, config)
}

/// CSV with header `iter,mean_return,i_hat,gate_kl,usage_0..,option_kl_0..`.
pub fn diagnostics_csv(rows: &[TrhpoDiagnostics]) -> String {
    let k = rows.first().map_or(0, |d| d.usage.len());
    let mut out = String::from("iter,mean_return,i_hat,gate_kl");
    for o in 0..k {
        let _ = write!(out, ",usage_{o}");
    }
    for o in 0..k {
        let _ = write!(out, ",option_kl_{o}");
    }
    out.push('\n');
    for (i, d) in rows.iter().enumerate() {
        let _ = write!(out, "{i},{:.16e},{:.16e},{:.16e}", d.mean_return, d.i_hat, d.gate_kl);
        for u in &d.usage {
            let _ = write!(out, ",{u:.16e}");
        }
        for kl in &d.option_kls {
            let _ = write!(out, ",{kl:.16e}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot_options() -> HierarchicalPolicy {
        let o1 = TabularSoftmaxPolicy::from_logits(1, 2, vec![0.0, f64::NEG_INFINITY]).unwrap();
        let o2 = TabularSoftmaxPolicy::from_logits(1, 2, vec![f64::NEG_INFINITY, 0.0]).unwrap();
        HierarchicalPolicy::new(TabularSoftmaxPolicy::uniform(1, 2), vec![o1, o2], 1).unwrap()
    }

    #[test]
    fn degenerate_and_even_mixtures() {
        let opt = TabularSoftmaxPolicy::from_logits(1, 3, vec![0.2, -0.4, 1.0]).unwrap();
        let h = HierarchicalPolicy::new(TabularSoftmaxPolicy::uniform(1, 1), vec![opt.clone()], 3).unwrap();
        for a in 0..3 {
            assert_eq!(hierarchical_action_prob(&h, 0, a).unwrap(), opt.prob(0, a));
        }
        assert_eq!(hierarchical_action_prob(&one_hot_options(), 0, 0).unwrap(), 0.5);
        assert!(hierarchical_action_prob(&h, 1, 0).is_err());
    }

    #[test]
    fn mi_endpoints() {
        let h = one_hot_options();
        let est = empirical_mi(&h, &[(0, 0), (0, 1), (0, 0), (0, 1)]).unwrap();
        assert!((est.i_hat - 2f64.ln()).abs() < 1e-15);
        let flat = HierarchicalPolicy::uniform(2, 3, 3, 1).unwrap();
        let est = empirical_mi(&flat, &[(0, 0), (1, 2)]).unwrap();
        assert!(est.i_hat.abs() < 1e-15);
    }

    #[test]
    fn gating_arithmetic() {
        let g = softmax_advantage_gating(&[1.0, 0.0]).unwrap();
        let e = std::f64::consts::E;
        assert!((g[0] - e / (e + 1.0)).abs() < 1e-15);
        let shifted = softmax_advantage_gating(&[6.0, 5.0]).unwrap();
        assert!((g[0] - shifted[0]).abs() < 1e-12);
        assert_eq!(softmax_advantage_gating(&[0.3; 4]).unwrap(), vec![0.25; 4]);
        assert!(softmax_advantage_gating(&[f64::NAN]).is_err());
    }

    #[test]
    fn identical_hierarchies_have_zero_bound() {
        let h = HierarchicalPolicy::uniform(1, 3, 2, 1).unwrap();
        let b = hierarchical_kl_bound(&h, &h, 0).unwrap();
        assert_eq!((b.lhs, b.gate_term, b.option_term), (0.0, 0.0, 0.0));
    }

    #[test]
    fn support_violation_detected() {
        let p = one_hot_options();
        let q = HierarchicalPolicy::uniform(1, 2, 2, 1).unwrap();
        assert!(matches!(hierarchical_kl_bound(&p, &q, 0), Err(Error::Support(_))));
    }
}
