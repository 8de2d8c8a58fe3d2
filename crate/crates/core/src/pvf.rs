//! Proto-value functions, Representation Policy Iteration and eigenoptions.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dp::{greedy_policy, value_iteration, GREEDY_TIE_TOL};
use crate::error::{Error, Result};
use crate::linalg::{norm_inf, sup_dist, Lu, Matrix};
use crate::mdp::{DeterministicPolicy, Mdp, Policy, PolicyTable};
use crate::spectral::{GraphAccumulator, SpectrumBundle};

/// Ridge added to a singular feature system.
pub const RIDGE: f64 = 1e-8;

/// Unit-weight transition graph over a subset of MDP states.
///
/// Vertex `i` is `states[i]`; transitions leaving the subset and self-transitions
/// add no edges.
pub fn transition_graph(mdp: &Mdp, states: &[usize]) -> GraphAccumulator<usize> {
    let mut acc = GraphAccumulator::new();
    let inside: HashSet<usize> = states.iter().copied().collect();
    for &s in states {
        acc.intern(s);
    }
    for &s in states {
        for a in 0..mdp.n_actions() {
            for &t in mdp.row(s, a).next {
                if inside.contains(&t) {
                    acc.accumulate_transition(s, t);
                }
            }
        }
    }
    acc
}

/// Orthonormal basis on a subset (`domain`) of the MDP's states.
#[derive(Debug, Clone, PartialEq)]
pub struct PvfBasis {
    pub columns: Matrix,
    pub domain: Vec<usize>,
    pub n_states: usize,
}

impl PvfBasis {
    pub fn new(columns: Matrix, domain: Vec<usize>, n_states: usize) -> Result<Self> {
        if columns.rows() != domain.len() {
            return Err(Error::Shape(format!("{} basis rows for a domain of {}", columns.rows(), domain.len())));
        }
        if columns.cols() > columns.rows() {
            return Err(Error::Shape("more basis columns than domain states".into()));
        }
        let gram = columns.tr_matmul(&columns);
        let err = gram.sub(&Matrix::identity(columns.cols())).max_abs();
        if err > 1e-8 {
            return Err(Error::InvalidArgument(format!("basis not orthonormal (error {err:e})")));
        }
        Ok(Self { columns, domain, n_states })
    }

    /// Bottom-`k` eigenvectors of a spectrum computed on `domain`.
    pub fn from_spectrum(spectrum: &SpectrumBundle, k: usize, domain: Vec<usize>, n_states: usize) -> Result<Self> {
        Self::new(spectrum.eigenvectors.leading_cols(k), domain, n_states)
    }

    pub fn k(&self) -> usize {
        self.columns.cols()
    }

    /// Full-state feature matrix; rows outside the domain are zero.
    pub fn features(&self) -> Matrix {
        let mut phi = Matrix::zeros(self.n_states, self.k());
        for (i, &s) in self.domain.iter().enumerate() {
            phi.row_mut(s).copy_from_slice(self.columns.row(i));
        }
        phi
    }

    /// Values of a full-state vector on the domain.
    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        self.domain.iter().map(|&s| v[s]).collect()
    }

    pub fn expand(&self, v_domain: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states];
        for (&s, &x) in self.domain.iter().zip(v_domain) {
            out[s] = x;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coefficients: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub sup_error: f64,
    /// Euclidean residual, the quantity the projection minimizes.
    pub l2_error: f64,
}

/// Least-squares projection `V̂ = ΦΦᵀV` of a domain-indexed value vector.
pub fn project_value(v: &[f64], basis: &PvfBasis) -> Result<Projection> {
    if v.len() != basis.domain.len() {
        return Err(Error::Shape(format!("value of length {} for a domain of {}", v.len(), basis.domain.len())));
    }
    let coefficients = basis.columns.tr_matvec(v);
    let v_hat = basis.columns.matvec(&coefficients);
    let sup_error = sup_dist(v, &v_hat);
    let l2_error = v.iter().zip(&v_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(Projection { coefficients, v_hat, sup_error, l2_error })
}

#[derive(Debug, Clone)]
pub struct RpiResult {
    pub policy: DeterministicPolicy,
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub ridge_used: bool,
}

/// Least-squares fixed-point weights `Φᵀ(Φ − γP_πΦ)w = Φᵀr_π`.
pub fn lstd_weights(mdp: &Mdp, basis: &PvfBasis, policy: &dyn Policy) -> Result<(Vec<f64>, bool)> {
    let phi = basis.features();
    let (p_pi, r_pi) = mdp.policy_model(policy)?;
    let next = p_pi.matmul(&phi);
    let a = phi.tr_matmul(&phi.axpy(-mdp.gamma(), &next));
    let b = phi.tr_matvec(&r_pi);
    match Lu::factor(&a) {
        Ok(lu) => Ok((lu.solve(&b)?, false)),
        Err(Error::Singular(_)) => {
            log::warn!("singular feature system; solving with ridge {RIDGE:e}");
            let ridged = a.add(&Matrix::identity(a.rows()).scale(RIDGE));
            Ok((ridged.solve(&b)?, true))
        }
        Err(e) => Err(e),
    }
}

/// Representation Policy Iteration: LSTD evaluation on the basis alternating
/// with greedy improvement, starting from the uniform policy.
pub fn representation_policy_iteration(mdp: &Mdp, basis: &PvfBasis, max_iters: usize) -> Result<RpiResult> {
    if basis.n_states != mdp.n_states() {
        return Err(Error::Shape("basis does not cover the MDP's states".into()));
    }
    let phi = basis.features();
    let (mut weights, mut ridge_used) = lstd_weights(mdp, basis, &PolicyTable::uniform(mdp.n_states(), mdp.n_actions()))?;
    let mut policy = greedy_policy(mdp, &phi.matvec(&weights));
    let mut iterations = 1;
    while iterations < max_iters {
        let (w, ridge) = lstd_weights(mdp, basis, &policy)?;
        ridge_used |= ridge;
        iterations += 1;
        weights = w;
        let next = greedy_policy(mdp, &phi.matvec(&weights));
        if next == policy {
            break;
        }
        policy = next;
    }
    Ok(RpiResult { policy, weights, iterations, ridge_used })
}

/// States on closed cycles of a deterministic policy that avoid every target
/// state (absorbing sets other than the goal).
pub fn absorbing_non_goal_states(mdp: &Mdp, policy: &DeterministicPolicy, targets: &[usize]) -> Result<Vec<usize>> {
    let n = mdp.n_states();
    let succ: Vec<usize> = (0..n)
        .map(|s| {
            mdp.deterministic_successor(s, policy.action(s))
                .ok_or_else(|| Error::InvalidArgument("absorbing-state detection needs deterministic dynamics".into()))
        })
        .collect::<Result<_>>()?;
    let mut on_cycle = vec![false; n];
    let mut colour = vec![0u8; n]; // 0 unseen, 1 on current path, 2 done
    for start in 0..n {
        let mut path = Vec::new();
        let mut s = start;
        while colour[s] == 0 {
            colour[s] = 1;
            path.push(s);
            s = succ[s];
        }
        if colour[s] == 1 {
            let pos = path.iter().position(|&x| x == s).unwrap();
            for &x in &path[pos..] {
                on_cycle[x] = true;
            }
        }
        for x in path {
            colour[x] = 2;
        }
    }
    Ok((0..n).filter(|&s| on_cycle[s] && !targets.contains(&s)).collect())
}

/// `r_i(s, a) = φ_i(s') − φ_i(s)`
pub fn intrinsic_reward(phi: &[f64], s: usize, _a: usize, s_next: usize) -> Result<f64> {
    match (phi.get(s), phi.get(s_next)) {
        (Some(x), Some(y)) => Ok(y - x),
        _ => Err(Error::Shape(format!("state {s} or {s_next} outside a field of {}", phi.len()))),
    }
}

/// Option that greedily ascends one eigenvector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenoption {
    pub index: usize,
    pub phi: Vec<f64>,
    pub policy: DeterministicPolicy,
    /// `true` where the option stops.
    pub termination: Vec<bool>,
    /// Intrinsic action values, `n_states × n_actions`.
    pub q: Vec<f64>,
}

impl Eigenoption {
    pub fn termination_set(&self) -> Vec<usize> {
        (0..self.termination.len()).filter(|&s| self.termination[s]).collect()
    }

    /// Next state under the option; terminating states map to themselves.
    pub fn successor(&self, mdp: &Mdp, s: usize) -> usize {
        if self.termination[s] {
            s
        } else {
            mdp.deterministic_successor(s, self.policy.action(s)).expect("deterministic dynamics")
        }
    }

    /// Visited states from `start` until termination (inclusive), capped at `n_states` steps.
    pub fn rollout(&self, mdp: &Mdp, start: usize) -> Vec<usize> {
        let mut path = vec![start];
        let mut s = start;
        while !self.termination[s] && path.len() <= mdp.n_states() {
            s = self.successor(mdp, s);
            path.push(s);
        }
        path
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            index: usize,
            termination_set: Vec<usize>,
            policy: &'a [usize],
        }
        Ok(serde_json::to_string_pretty(&Doc {
            index: self.index,
            termination_set: self.termination_set(),
            policy: self.policy.actions(),
        })?)
    }
}

/// Learns the eigenoption for `phi` with the `max_a Q ≤ 0` termination rule.
pub fn learn_eigenoption(mdp: &Mdp, phi: &[f64], gamma_option: f64) -> Result<Eigenoption> {
    learn_eigenoption_with(mdp, phi, gamma_option, 0.0)
}

/// Value iteration on the intrinsic-reward MDP; the option terminates where
/// `max_a Q(s, a) ≤ threshold`.
pub fn learn_eigenoption_with(mdp: &Mdp, phi: &[f64], gamma_option: f64, threshold: f64) -> Result<Eigenoption> {
    if phi.len() != mdp.n_states() {
        return Err(Error::Shape(format!("field of length {} for {} states", phi.len(), mdp.n_states())));
    }
    let na = mdp.n_actions();
    let rewards: Vec<f64> = (0..mdp.n_states())
        .flat_map(|s| (0..na).map(move |a| (s, a)))
        .map(|(s, a)| mdp.expect(s, a, phi) - phi[s])
        .collect();
    let intrinsic = mdp.with_rewards(rewards)?.with_gamma(gamma_option)?;
    let scale = norm_inf(phi).max(1e-300);
    let vi = value_iteration(&intrinsic, &vec![0.0; mdp.n_states()], 1_000_000, 1e-13 * scale)?;
    let q = intrinsic.q_from_v(&vi.v);
    let termination = q
        .chunks(na)
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max) <= threshold + GREEDY_TIE_TOL * scale)
        .collect();
    Ok(Eigenoption { index: 0, phi: phi.to_vec(), policy: vi.policy, termination, q })
}

/// Eigenoptions for several eigenvector indices of one spectrum.
pub fn learn_eigenoptions(mdp: &Mdp, spectrum: &SpectrumBundle, indices: &[usize], gamma_option: f64) -> Result<Vec<Eigenoption>> {
    indices
        .iter()
        .map(|&i| {
            let mut opt = learn_eigenoption(mdp, &spectrum.vector(i), gamma_option)?;
            opt.index = i;
            Ok(opt)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intrinsic_reward_basics() {
        let phi = [0.1, 0.5, -0.2];
        assert_eq!(intrinsic_reward(&phi, 1, 0, 1).unwrap(), 0.0);
        let path = [0, 1, 2];
        let total: f64 = path.windows(2).map(|w| intrinsic_reward(&phi, w[0], 0, w[1]).unwrap()).sum();
        assert!((total - (phi[2] - phi[0])).abs() < 1e-15);
        let neg: Vec<f64> = phi.iter().map(|x| -x).collect();
        assert_eq!(intrinsic_reward(&neg, 0, 0, 1).unwrap(), -intrinsic_reward(&phi, 0, 0, 1).unwrap());
        assert!(intrinsic_reward(&phi, 0, 0, 3).is_err());
    }

    #[test]
    fn vector_in_span_projects_exactly() {
        let cols = Matrix::from_rows(&[[0.6, 0.0], [0.8, 0.0], [0.0, 1.0]]);
        let basis = PvfBasis::new(cols, vec![0, 1, 2], 3).unwrap();
        let p = project_value(&[0.6, 0.8, 0.0], &basis).unwrap();
        assert!(p.sup_error < 1e-15);
        assert!(project_value(&[1.0], &basis).is_err());
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let cols = Matrix::from_rows(&[[1.0], [1.0]]);
        assert!(PvfBasis::new(cols, vec![0, 1], 2).is_err());
    }
}
