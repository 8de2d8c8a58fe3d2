use optionlab::dp::*;
use optionlab::gridworld::GridConfig;
use optionlab::linalg::sup_dist;
use optionlab::mdp::*;
use optionlab::sampling::MdpSampler;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-5.0..5.0)).collect()
}

#[test]
fn bellman_operators_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let gamma = rng.random_range(0.5..0.99);
        let mdp = random_mdp(8, 3, gamma, &mut rng);
        let pi = random_policy(8, 3, &mut rng);
        let (v, w) = (random_vec(8, &mut rng), random_vec(8, &mut rng));
        let gap = sup_dist(&v, &w);
        let tp = sup_dist(&bellman_backup(&mdp, &v, Some(&pi)).unwrap(), &bellman_backup(&mdp, &w, Some(&pi)).unwrap());
        let ts = sup_dist(&bellman_backup(&mdp, &v, None).unwrap(), &bellman_backup(&mdp, &w, None).unwrap());
        assert!(tp <= gamma * gap * (1.0 + 1e-12));
        assert!(ts <= gamma * gap * (1.0 + 1e-12));
    }
}

#[test]
fn value_iteration_error_decays_geometrically() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let mdp = random_mdp(10, 3, 0.9, &mut rng);
        let v0 = random_vec(10, &mut rng);
        let star = value_iteration(&mdp, &v0, 100_000, 1e-14).unwrap().v;
        let opts = ValueIterationOptions { max_iters: 200, tol: 1e-300, record_history: true, ..Default::default() };
        let run = value_iteration_with(&mdp, &v0, &opts).unwrap();
        let e0 = sup_dist(&v0, &star);
        for (i, v) in run.history.iter().enumerate() {
            let bound = 0.9f64.powi(i as i32 + 1) * e0;
            assert!(sup_dist(v, &star) <= bound + 1e-12, "iteration {}", i + 1);
        }
    }
}

#[test]
fn in_place_sweeps_reach_the_same_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mdp = random_mdp(12, 4, 0.95, &mut rng);
    let sync = value_iteration(&mdp, &[0.0; 12], 100_000, 1e-12).unwrap();
    let opts = ValueIterationOptions { tol: 1e-12, sweep: Sweep::InPlace, ..Default::default() };
    let gs = value_iteration_with(&mdp, &[0.0; 12], &opts).unwrap();
    assert!(sup_dist(&sync.v, &gs.v) < 1e-9);
    assert!(gs.iterations <= sync.iterations);
}

#[test]
fn policy_iteration_agrees_with_value_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let mdp = random_mdp(10, 3, 0.9, &mut rng);
        let vi = value_iteration(&mdp, &[0.0; 10], 100_000, 1e-13).unwrap();
        let pi = policy_iteration(&mdp, &PolicyTable::uniform(10, 3), 100).unwrap();
        assert!(sup_dist(&vi.v, &pi.v) < 1e-9);
        assert!(pi.trace.windows(2).all(|w| w[1].eta >= w[0].eta - 1e-12));
    }
}

#[test]
fn forward_and_backward_views_match_per_episode() {
    let w = GridConfig::default().build(0).unwrap();
    let sampler = MdpSampler::new(&w.mdp, Some(40));
    let pi = PolicyTable::uniform(w.n_states(), 4);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let ep = sampler.rollout(&pi, &mut rng).unwrap();
        let v = random_vec(w.n_states(), &mut rng);
        let alpha: Vec<f64> = (0..w.n_states()).map(|_| rng.random_range(0.01..0.5)).collect();
        let lambda = rng.random_range(0.0..=1.0);
        let f = forward_view_increments(&ep, &v, 0.95, lambda, &alpha);
        let b = backward_view_increments(&ep, &v, 0.95, lambda, &alpha);
        assert!(sup_dist(&f, &b) < 1e-10);
    }
}

#[test]
fn offline_modes_coincide() {
    let w = GridConfig::default().build(0).unwrap();
    let sampler = MdpSampler::new(&w.mdp, Some(256));
    let pi = PolicyTable::uniform(w.n_states(), 4);
    let sch = LearningSchedule { lambda: 0.7, ..Default::default() };
    let f = td_lambda(&sampler, &pi, &sch, TdMode::ForwardOffline, 300, 2).unwrap();
    let b = td_lambda(&sampler, &pi, &sch, TdMode::BackwardOffline, 300, 2).unwrap();
    assert!(sup_dist(&f, &b) < 1e-10);
}

#[test]
fn td_zero_approaches_the_exact_value() {
    let w = GridConfig::default().build(0).unwrap();
    let sampler = MdpSampler::new(&w.mdp, Some(256));
    let pi = PolicyTable::uniform(w.n_states(), 4);
    let exact = exact_value(&w.mdp, &pi).unwrap().v;
    let sch = LearningSchedule { alpha: StepSize::Constant(0.005), ..Default::default() };
    let v = td_lambda(&sampler, &pi, &sch, TdMode::BackwardOnline, 20_000, 0).unwrap();
    assert!(sup_dist(&v, &exact) < 0.05);
}

#[test]
fn invalid_td_arguments() {
    let w = GridConfig::default().build(0).unwrap();
    let pi = PolicyTable::uniform(w.n_states(), 4);
    let sch = LearningSchedule { lambda: 1.5, ..Default::default() };
    let sampler = MdpSampler::new(&w.mdp, Some(10));
    assert!(td_lambda(&sampler, &pi, &sch, TdMode::BackwardOnline, 1, 0).is_err());
}

#[test]
fn epsilon_greedy_frequencies() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let q = [0.0, 1.0, 0.5];
    let n = 60_000;
    let hits = (0..n).filter(|_| epsilon_greedy(&q, 0.3, &mut rng).unwrap() == 1).count();
    // 1 − ε + ε/|A|
    let expected = 0.7 + 0.1;
    assert!((hits as f64 / n as f64 - expected).abs() < 0.01);
}
