//! Finite MDPs, tabular policies and exact (linear-solve) evaluation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sup_dist, Lu, Matrix};

/// Largest state count evaluated with a dense factorization.
pub const DENSE_STATE_CAP: usize = 5000;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Finite MDP with a sparse transition tensor and a deterministic reward table.
///
/// Transitions are stored in compressed rows, one row per `(s, a)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    row_ptr: Vec<usize>,
    next: Vec<usize>,
    prob: Vec<f64>,
    reward: Vec<f64>,
    gamma: f64,
    rho0: Vec<f64>,
}

impl Mdp {
    /// Builds an MDP from one sparse row per `(s, a)` pair, laid out as `s * n_actions + a`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        rows: Vec<Vec<(usize, f64)>>,
        reward: Vec<f64>,
        gamma: f64,
        rho0: Vec<f64>,
    ) -> Result<Self> {
        if rows.len() != n_states * n_actions {
            return Err(Error::Shape(format!(
                "{} transition rows for {n_states} states x {n_actions} actions",
                rows.len()
            )));
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut next = Vec::with_capacity(nnz);
        let mut prob = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (s, p) in row {
                next.push(s);
                prob.push(p);
            }
            row_ptr.push(next.len());
        }
        let mdp = Self { n_states, n_actions, row_ptr, next, prob, reward, gamma, rho0 };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Builds an MDP from `(s, a, s', p)` quadruples. Duplicate entries are summed.
    pub fn from_quadruples(
        n_states: usize,
        n_actions: usize,
        quads: &[(usize, usize, usize, f64)],
        reward: Vec<f64>,
        gamma: f64,
        rho0: Vec<f64>,
    ) -> Result<Self> {
        let mut rows = vec![Vec::new(); n_states * n_actions];
        for &(s, a, sp, p) in quads {
            if s >= n_states || a >= n_actions {
                return Err(Error::Shape(format!("transition ({s}, {a}) out of range")));
            }
            let row: &mut Vec<(usize, f64)> = &mut rows[s * n_actions + a];
            match row.iter_mut().find(|(t, _)| *t == sp) {
                Some(entry) => entry.1 += p,
                None => row.push((sp, p)),
            }
        }
        Self::new(n_states, n_actions, rows, reward, gamma, rho0)
    }

    fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::InvalidModel("state and action counts must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidModel(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if self.reward.len() != self.n_states * self.n_actions {
            return Err(Error::Shape(format!("reward table has {} entries", self.reward.len())));
        }
        if let Some(i) = self.reward.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidModel(format!("non-finite reward at entry {i}")));
        }
        if self.rho0.len() != self.n_states {
            return Err(Error::Shape(format!("rho0 has {} entries", self.rho0.len())));
        }
        check_distribution(&self.rho0, "rho0")?;
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.row(s, a);
                if row.next.is_empty() {
                    return Err(Error::InvalidModel(format!("empty transition row ({s}, {a})")));
                }
                if let Some(&bad) = row.next.iter().find(|&&t| t >= self.n_states) {
                    return Err(Error::InvalidModel(format!("({s}, {a}) leads to unknown state {bad}")));
                }
                check_distribution(row.prob, &format!("transition row ({s}, {a})"))?;
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho0(&self) -> &[f64] {
        &self.rho0
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn row(&self, s: usize, a: usize) -> TransitionRow<'_> {
        let k = s * self.n_actions + a;
        let (lo, hi) = (self.row_ptr[k], self.row_ptr[k + 1]);
        TransitionRow { next: &self.next[lo..hi], prob: &self.prob[lo..hi] }
    }

    /// `E[f(s') | s, a]`
    pub fn expect(&self, s: usize, a: usize, f: &[f64]) -> f64 {
        let row = self.row(s, a);
        row.next.iter().zip(row.prob).map(|(&t, &p)| p * f[t]).sum()
    }

    /// Successor of a deterministic row, `None` if the row has more than one entry.
    pub fn deterministic_successor(&self, s: usize, a: usize) -> Option<usize> {
        let row = self.row(s, a);
        (row.next.len() == 1).then(|| row.next[0])
    }

    pub fn is_deterministic(&self) -> bool {
        (0..self.n_states).all(|s| (0..self.n_actions).all(|a| self.row(s, a).next.len() == 1))
    }

    /// States where every action self-loops with probability one and zero reward.
    pub fn absorbing_states(&self) -> Vec<usize> {
        (0..self.n_states)
            .filter(|&s| {
                (0..self.n_actions).all(|a| {
                    let row = self.row(s, a);
                    row.next == [s] && self.reward(s, a) == 0.0
                })
            })
            .collect()
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut m = self.clone();
        m.gamma = gamma;
        m.validate()?;
        Ok(m)
    }

    pub fn with_rewards(&self, reward: Vec<f64>) -> Result<Self> {
        let mut m = self.clone();
        m.reward = reward;
        m.validate()?;
        Ok(m)
    }

    pub fn with_rho0(&self, rho0: Vec<f64>) -> Result<Self> {
        let mut m = self.clone();
        m.rho0 = rho0;
        m.validate()?;
        Ok(m)
    }

    /// Sub-MDP on `keep` (in that order). Transitions leaving the set are
    /// redirected to the source state; `rho0` becomes uniform.
    pub fn restricted(&self, keep: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; self.n_states];
        for (i, &s) in keep.iter().enumerate() {
            if s >= self.n_states {
                return Err(Error::Shape(format!("state {s} out of range")));
            }
            pos[s] = i;
        }
        let mut rows = Vec::with_capacity(keep.len() * self.n_actions);
        let mut reward = Vec::with_capacity(keep.len() * self.n_actions);
        for (i, &s) in keep.iter().enumerate() {
            for a in 0..self.n_actions {
                let row = self.row(s, a);
                let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.next.len());
                for (&t, &p) in row.next.iter().zip(row.prob) {
                    let target = if pos[t] == usize::MAX { i } else { pos[t] };
                    match out.iter_mut().find(|(u, _)| *u == target) {
                        Some(e) => e.1 += p,
                        None => out.push((target, p)),
                    }
                }
                rows.push(out);
                reward.push(self.reward(s, a));
            }
        }
        let rho0 = vec![1.0 / keep.len() as f64; keep.len()];
        Mdp::new(keep.len(), self.n_actions, rows, reward, self.gamma, rho0)
    }

    fn check_policy<P: Policy + ?Sized>(&self, policy: &P) -> Result<()> {
        if policy.n_states() != self.n_states || policy.n_actions() != self.n_actions {
            return Err(Error::Shape(format!(
                "policy is {}x{}, MDP is {}x{}",
                policy.n_states(),
                policy.n_actions(),
                self.n_states,
                self.n_actions
            )));
        }
        Ok(())
    }

    fn check_dense(&self) -> Result<()> {
        if self.n_states > DENSE_STATE_CAP {
            return Err(Error::TooLarge { n: self.n_states, cap: DENSE_STATE_CAP });
        }
        Ok(())
    }

    /// Dense `P_π` and `r_π` for a policy.
    pub fn policy_model<P: Policy + ?Sized>(&self, policy: &P) -> Result<(Matrix, Vec<f64>)> {
        self.check_policy(policy)?;
        self.check_dense()?;
        let n = self.n_states;
        let mut p_pi = Matrix::zeros(n, n);
        let mut r_pi = vec![0.0; n];
        for s in 0..n {
            let pi = policy.probs(s);
            for (a, &w) in pi.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                r_pi[s] += w * self.reward(s, a);
                let row = self.row(s, a);
                for (&t, &p) in row.next.iter().zip(row.prob) {
                    p_pi[(s, t)] += w * p;
                }
            }
        }
        Ok((p_pi, r_pi))
    }

    /// `Q(s,a) = r(s,a) + γ·E[V(s')]` for every pair.
    pub fn q_from_v(&self, v: &[f64]) -> Vec<f64> {
        let mut q = Vec::with_capacity(self.n_states * self.n_actions);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                q.push(self.reward(s, a) + self.gamma * self.expect(s, a, v));
            }
        }
        q
    }
}

/// Borrowed view of one sparse transition row.
#[derive(Debug, Clone, Copy)]
pub struct TransitionRow<'a> {
    pub next: &'a [usize],
    pub prob: &'a [f64],
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if let Some(v) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidModel(format!("{what} has invalid probability {v}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {total}")));
    }
    Ok(())
}

/// Anything that yields a per-state action distribution.
pub trait Policy {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn probs(&self, s: usize) -> Vec<f64>;

    fn table(&self) -> PolicyTable {
        let mut probs = Vec::with_capacity(self.n_states() * self.n_actions());
        for s in 0..self.n_states() {
            probs.extend(self.probs(s));
        }
        PolicyTable { n_states: self.n_states(), n_actions: self.n_actions(), probs }
    }
}

/// Explicit `π(a|s)` table.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl PolicyTable {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::Shape(format!("{} probabilities", probs.len())));
        }
        for s in 0..n_states {
            check_distribution(&probs[s * n_actions..(s + 1) * n_actions], &format!("policy row {s}"))?;
        }
        Ok(Self { n_states, n_actions, probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, probs: vec![1.0 / n_actions as f64; n_states * n_actions] }
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }
}

impl Policy for PolicyTable {
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn n_actions(&self) -> usize {
        self.n_actions
    }
    fn probs(&self, s: usize) -> Vec<f64> {
        self.row(s).to_vec()
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Per-state action logits; probabilities are the row-wise softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularSoftmaxPolicy {
    n_states: usize,
    n_actions: usize,
    logits: Vec<f64>,
}

impl TabularSoftmaxPolicy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, logits: vec![0.0; n_states * n_actions] }
    }

    pub fn from_logits(n_states: usize, n_actions: usize, logits: Vec<f64>) -> Result<Self> {
        if logits.len() != n_states * n_actions {
            return Err(Error::Shape(format!("{} logits for {n_states}x{n_actions}", logits.len())));
        }
        if logits.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::NonFinite("policy logits".into()));
        }
        Ok(Self { n_states, n_actions, logits })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn state_logits(&self, s: usize) -> &[f64] {
        &self.logits[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs(s)[a]
    }
}

impl Policy for TabularSoftmaxPolicy {
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn n_actions(&self) -> usize {
        self.n_actions
    }
    fn probs(&self, s: usize) -> Vec<f64> {
        softmax(self.state_logits(s))
    }
}

/// One action per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicPolicy {
    n_actions: usize,
    actions: Vec<usize>,
}

impl DeterministicPolicy {
    pub fn new(n_actions: usize, actions: Vec<usize>) -> Result<Self> {
        if let Some(&a) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(Error::Shape(format!("action {a} out of range")));
        }
        Ok(Self { n_actions, actions })
    }

    pub fn constant(n_states: usize, n_actions: usize, action: usize) -> Self {
        Self { n_actions, actions: vec![action; n_states] }
    }

    pub fn action(&self, s: usize) -> usize {
        self.actions[s]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    /// Softmax policy with `-inf` logits off the chosen action.
    pub fn to_softmax(&self) -> TabularSoftmaxPolicy {
        let mut logits = vec![f64::NEG_INFINITY; self.actions.len() * self.n_actions];
        for (s, &a) in self.actions.iter().enumerate() {
            logits[s * self.n_actions + a] = 0.0;
        }
        TabularSoftmaxPolicy { n_states: self.actions.len(), n_actions: self.n_actions, logits }
    }
}

impl Policy for DeterministicPolicy {
    fn n_states(&self) -> usize {
        self.actions.len()
    }
    fn n_actions(&self) -> usize {
        self.n_actions
    }
    fn probs(&self, s: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.n_actions];
        p[self.actions[s]] = 1.0;
        p
    }
}

/// Exact `V_π`, `Q_π` and `A_π = Q_π − V_π`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub n_actions: usize,
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    pub advantage: Vec<f64>,
}

impl Evaluation {
    pub fn q(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.n_actions + a]
    }

    pub fn advantage(&self, s: usize, a: usize) -> f64 {
        self.advantage[s * self.n_actions + a]
    }
}

/// Solves `(I − γ·P_π)·V = r_π` and derives `Q` and the advantage.
pub fn exact_value<P: Policy + ?Sized>(mdp: &Mdp, policy: &P) -> Result<Evaluation> {
    let (p_pi, r_pi) = mdp.policy_model(policy)?;
    let n = mdp.n_states();
    let system = Matrix::identity(n).axpy(-mdp.gamma(), &p_pi);
    let v = Lu::factor(&system)
        .map_err(|e| Error::Inconsistent(format!("I - gamma*P_pi should be invertible: {e}")))?
        .solve(&r_pi)?;
    let q = mdp.q_from_v(&v);
    let na = mdp.n_actions();
    let advantage = q.iter().enumerate().map(|(i, &qv)| qv - v[i / na]).collect();
    Ok(Evaluation { n_actions: na, v, q, advantage })
}

/// Sup-norm residual of `V = r_π + γ·P_π·V`.
pub fn bellman_residual<P: Policy + ?Sized>(mdp: &Mdp, policy: &P, v: &[f64]) -> Result<f64> {
    let (p_pi, r_pi) = mdp.policy_model(policy)?;
    let pv = p_pi.matvec(v);
    let backed: Vec<f64> = r_pi.iter().zip(&pv).map(|(r, x)| r + mdp.gamma() * x).collect();
    Ok(sup_dist(&backed, v))
}

/// Unnormalized discounted state density `ρ_π = Σ_t γᵗ·Pr(s_t = s)`.
pub fn discounted_density<P: Policy + ?Sized>(mdp: &Mdp, policy: &P) -> Result<Vec<f64>> {
    let (p_pi, _) = mdp.policy_model(policy)?;
    let n = mdp.n_states();
    let system = Matrix::identity(n).axpy(-mdp.gamma(), &p_pi.transpose());
    let rho = Lu::factor(&system)
        .map_err(|e| Error::Inconsistent(format!("I - gamma*P_pi^T should be invertible: {e}")))?
        .solve(mdp.rho0())?;
    // Clamp round-off below zero.
    Ok(rho.into_iter().map(|x| x.max(0.0)).collect())
}

/// Agreement required between the two routes to `η(π)`.
pub const RETURN_ROUTE_TOL: f64 = 1e-8;

/// Expected discounted return `η(π)`.
///
/// Computed as `ρ₀·V_π` and cross-checked against `Σ_s ρ_π(s) Σ_a π(a|s) r(s,a)`.
pub fn expected_return<P: Policy + ?Sized>(mdp: &Mdp, policy: &P) -> Result<f64> {
    let eval = exact_value(mdp, policy)?;
    let via_value: f64 = mdp.rho0().iter().zip(&eval.v).map(|(r, v)| r * v).sum();
    let rho = discounted_density(mdp, policy)?;
    let mut via_density = 0.0;
    for (s, &w) in rho.iter().enumerate() {
        let pi = policy.probs(s);
        for (a, &p) in pi.iter().enumerate() {
            via_density += w * p * mdp.reward(s, a);
        }
    }
    let scale = 1.0f64.max(via_value.abs());
    if (via_value - via_density).abs() > RETURN_ROUTE_TOL * scale {
        return Err(Error::Inconsistent(format!(
            "return routes disagree: rho0.V = {via_value}, rho.r = {via_density}"
        )));
    }
    Ok(via_value)
}

/// Both sides of `η(π̃) − η(π) = Σ_s ρ_π̃(s) Σ_a π̃(a|s)·A_π(s,a)`.
pub fn performance_difference<P, Q>(mdp: &Mdp, pi: &P, pi_tilde: &Q) -> Result<(f64, f64)>
where
    P: Policy + ?Sized,
    Q: Policy + ?Sized,
{
    let lhs = expected_return(mdp, pi_tilde)? - expected_return(mdp, pi)?;
    let eval = exact_value(mdp, pi)?;
    let rho = discounted_density(mdp, pi_tilde)?;
    let mut rhs = 0.0;
    for (s, &w) in rho.iter().enumerate() {
        for (a, &p) in pi_tilde.probs(s).iter().enumerate() {
            rhs += w * p * eval.advantage(s, a);
        }
    }
    Ok((lhs, rhs))
}

/// Random dense MDP for tests and examples: every row is a normalized
/// vector of uniform weights, rewards uniform in `[-1, 1]`.
pub fn random_mdp<R: Rng + ?Sized>(n_states: usize, n_actions: usize, gamma: f64, rng: &mut R) -> Mdp {
    let mut rows = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states * n_actions {
        let w: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = w.iter().sum();
        rows.push(w.into_iter().enumerate().map(|(t, x)| (t, x / total)).collect::<Vec<_>>());
    }
    let reward = (0..n_states * n_actions).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    let rho0 = w.into_iter().map(|x| x / total).collect();
    // Row sums are 1 up to a few ulps; renormalization above keeps them within tolerance.
    Mdp::new(n_states, n_actions, rows, reward, gamma, rho0).expect("random MDP is valid")
}

/// Random softmax policy with standard-normal-scale logits.
pub fn random_policy<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> TabularSoftmaxPolicy {
    let logits = (0..n_states * n_actions).map(|_| rng.random_range(-2.0..2.0)).collect();
    TabularSoftmaxPolicy { n_states, n_actions, logits }
}

/// JSON document for an MDP: explicit `[s, a, s', p]` transition entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub rho0: Vec<f64>,
    /// `reward[s][a]`
    pub reward: Vec<Vec<f64>>,
    pub transitions: Vec<(usize, usize, usize, f64)>,
}

impl From<&Mdp> for MdpDocument {
    fn from(mdp: &Mdp) -> Self {
        let mut transitions = Vec::with_capacity(mdp.next.len());
        for s in 0..mdp.n_states {
            for a in 0..mdp.n_actions {
                let row = mdp.row(s, a);
                for (&t, &p) in row.next.iter().zip(row.prob) {
                    transitions.push((s, a, t, p));
                }
            }
        }
        let reward = (0..mdp.n_states)
            .map(|s| (0..mdp.n_actions).map(|a| mdp.reward(s, a)).collect())
            .collect();
        Self {
            n_states: mdp.n_states,
            n_actions: mdp.n_actions,
            gamma: mdp.gamma,
            rho0: mdp.rho0.clone(),
            reward,
            transitions,
        }
    }
}

impl TryFrom<MdpDocument> for Mdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        if doc.reward.len() != doc.n_states || doc.reward.iter().any(|r| r.len() != doc.n_actions) {
            return Err(Error::Shape("reward table does not match n_states x n_actions".into()));
        }
        let reward = doc.reward.into_iter().flatten().collect();
        Mdp::from_quadruples(doc.n_states, doc.n_actions, &doc.transitions, reward, doc.gamma, doc.rho0)
    }
}

impl Mdp {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MdpDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MdpDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}
