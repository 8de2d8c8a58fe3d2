// Options that climb Laplacian eigenvectors, for both signs.

use optionlab::gridworld::{GridConfig, StateKey};
use optionlab::pvf::{learn_eigenoption, transition_graph};
use optionlab::spectral::{laplacian_spectrum, LaplacianKind};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let world = GridConfig::default().build(0)?;
    let live = world.live_states();
    let inner = world.mdp.restricted(&live)?;
    let spec = laplacian_spectrum(&transition_graph(&world.mdp, &live), LaplacianKind::Combinatorial, None)?;
    let cell = |s: usize| match world.key(live[s]) {
        StateKey::Live(gs) => gs.agent,
        StateKey::Terminal => unreachable!(),
    };

    for i in 1..=3 {
        for sign in [1.0, -1.0] {
            let phi: Vec<f64> = spec.vector(i).iter().map(|x| sign * x).collect();
            let option = learn_eigenoption(&inner, &phi, 0.99)?;
            let ends: Vec<_> = option.termination_set().into_iter().map(cell).collect();
            let path: Vec<_> = option.rollout(&inner, 0).into_iter().map(cell).collect();
            println!("phi_{i} sign {sign:+}: stops at {ends:?}; from {:?}: {} steps", cell(0), path.len() - 1);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
