// Projection of V* onto growing Laplacian bases and representation policy
// iteration with a small basis.

use optionlab::dp::value_iteration;
use optionlab::gridworld::GridConfig;
use optionlab::pvf::{absorbing_non_goal_states, project_value, representation_policy_iteration, transition_graph, PvfBasis};
use optionlab::spectral::{laplacian_spectrum, LaplacianKind};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let world = GridConfig::default().build(0)?;
    let live = world.live_states();
    let graph = transition_graph(&world.mdp, &live);
    let spec = laplacian_spectrum(&graph, LaplacianKind::Combinatorial, None)?;
    let vi = value_iteration(&world.mdp, &vec![0.0; world.n_states()], 10_000, 1e-12)?;
    let v_live: Vec<f64> = live.iter().map(|&s| vi.v[s]).collect();

    for k in [1, 3, 5, 10, live.len()] {
        let basis = PvfBasis::from_spectrum(&spec, k, live.clone(), world.n_states())?;
        let p = project_value(&v_live, &basis)?;
        println!("k = {k:2}: sup error {:.3e}, l2 error {:.3e}", p.sup_error, p.l2_error);
    }

    for k in [5, live.len()] {
        let basis = PvfBasis::from_spectrum(&spec, k, live.clone(), world.n_states())?;
        let rpi = representation_policy_iteration(&world.mdp, &basis, 100)?;
        let stuck = absorbing_non_goal_states(&world.mdp, &rpi.policy, &[world.terminal_index()])?;
        let agree = rpi.policy == vi.policy;
        println!("rpi k = {k}: {} iterations, optimal: {agree}, trapped states: {stuck:?}", rpi.iterations);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
