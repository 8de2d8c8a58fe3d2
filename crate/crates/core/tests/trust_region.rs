use nalgebra::{DMatrix, DVector};
use optionlab::experiment::{run_trpo, run_trpo_exact, Budget};
use optionlab::gridworld::GridConfig;
use optionlab::mdp::{random_mdp, random_policy, Policy, TabularSoftmaxPolicy};
use optionlab::trust_region::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn shifted(p: &TabularSoftmaxPolicy, v: &[f64], eps: f64) -> TabularSoftmaxPolicy {
    let theta = p.logits().iter().zip(v).map(|(t, d)| t + eps * d).collect();
    TabularSoftmaxPolicy::from_logits(p.n_states(), p.n_actions(), theta).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    diff / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300)
}

fn random_direction(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn fisher_product_matches_finite_differences() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = random_mdp(10, 4, 0.9, &mut rng);
        let old = random_policy(10, 4, &mut rng);
        let batch = exact_batch(&mdp, &old).unwrap();
        for _ in 0..20 {
            let v = random_direction(40, &mut rng);
            let fvp = fisher_vector_product(&batch, &old, &v, 0.0).unwrap();
            // Central difference of the KL gradient.
            let eps = 1e-5;
            let gp = kl_gradient(&batch, &old, &shifted(&old, &v, eps)).unwrap();
            let gm = kl_gradient(&batch, &old, &shifted(&old, &v, -eps)).unwrap();
            let fd: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
            assert!(rel_err(&fvp, &fd) < 1e-4, "seed {seed}: {}", rel_err(&fvp, &fd));
            // Second difference of the KL itself along v.
            let h = 1e-4;
            let kl = |e: f64| mean_kl(&batch, &old, &shifted(&old, &v, e)).unwrap();
            let second = (kl(h) + kl(-h) - 2.0 * kl(0.0)) / (h * h);
            let vhv: f64 = v.iter().zip(&fvp).map(|(a, b)| a * b).sum();
            assert!((second - vhv).abs() < 1e-4 * vhv.abs(), "{second} vs {vhv}");
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mdp = random_mdp(8, 3, 0.9, &mut rng);
    let old = random_policy(8, 3, &mut rng);
    let new = random_policy(8, 3, &mut rng);
    let batch = exact_batch(&mdp, &old).unwrap();
    let eps = 1e-6;
    let g = surrogate_gradient(&batch, &new).unwrap();
    let gk = kl_gradient(&batch, &old, &new).unwrap();
    for i in 0..24 {
        let mut e = vec![0.0; 24];
        e[i] = 1.0;
        let fd = (surrogate(&batch, &shifted(&new, &e, eps)).unwrap() - surrogate(&batch, &shifted(&new, &e, -eps)).unwrap())
            / (2.0 * eps);
        assert!((fd - g[i]).abs() < 1e-7);
        let fdk = (mean_kl(&batch, &old, &shifted(&new, &e, eps)).unwrap()
            - mean_kl(&batch, &old, &shifted(&new, &e, -eps)).unwrap())
            / (2.0 * eps);
        assert!((fdk - gk[i]).abs() < 1e-7);
    }
}

#[test]
fn conjugate_gradient_matches_a_direct_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mdp = random_mdp(6, 3, 0.9, &mut rng);
    let old = random_policy(6, 3, &mut rng);
    let batch = exact_batch(&mdp, &old).unwrap();
    let damping = 1e-3;
    let n = 18;
    let mut dense = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = fisher_vector_product(&batch, &old, &e, damping).unwrap();
        for i in 0..n {
            dense[(i, j)] = col[i];
        }
    }
    let g = random_direction(n, &mut rng);
    let reference = dense.clone().cholesky().unwrap().solve(&DVector::from_column_slice(&g));
    let cg = conjugate_gradient(|v| fisher_vector_product(&batch, &old, v, damping), &g, 200, 1e-14).unwrap();
    let err = cg.x.iter().zip(reference.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-6 * reference.amax(), "{err}");
}

#[test]
fn accepted_sampled_steps_respect_the_trust_region() {
    let world = GridConfig::default().build(0).unwrap();
    let config = TrpoConfig::default();
    for seed in 0..3 {
        let (_, rows) = run_trpo(&world.mdp, 256, &config, Budget::iterations(30), seed).unwrap();
        assert!(rows.iter().any(|d| d.accepted));
        for d in rows.iter().filter(|d| d.accepted) {
            assert!(d.kl <= 1.01 * config.delta, "kl {}", d.kl);
            assert!(d.surrogate_after >= d.surrogate_before);
        }
    }
}

#[test]
fn exact_mode_improves_monotonically_on_dense_rewards() {
    let world = GridConfig { goals: 4, ..GridConfig::default() }.build(0).unwrap();
    let config = TrpoConfig::default();
    let eta0 = optionlab::mdp::expected_return(&world.mdp, &TabularSoftmaxPolicy::uniform(world.n_states(), 4)).unwrap();
    let (_, rows) = run_trpo_exact(&world.mdp, &config, 100).unwrap();
    let mut prev = eta0;
    for (i, d) in rows.iter().enumerate() {
        assert!(d.mean_return >= prev, "iteration {i}: {} < {prev}", d.mean_return);
        if d.accepted {
            assert!(d.kl <= 1.01 * config.delta);
        }
        prev = d.mean_return;
    }
    assert!(prev > eta0);
}

#[test]
fn zero_gradient_leaves_parameters_alone() {
    let tr = TrustRegion::from(&TrpoConfig::default());
    let out = trust_region_update(&[1.0, 2.0], &[0.0, 0.0], |v| Ok(v.to_vec()), |_| Ok((0.0, 0.0)), 0.0, &tr).unwrap();
    assert!(!out.accepted);
    assert_eq!(out.theta, vec![1.0, 2.0]);
}
