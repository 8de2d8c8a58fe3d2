// Value iteration and policy iteration on the 8x8 four-room world.

use optionlab::dp::{policy_iteration, value_iteration};
use optionlab::gridworld::{render_field_pgm, GridConfig};
use optionlab::linalg::sup_dist;
use optionlab::mdp::{expected_return, PolicyTable};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let world = GridConfig::default().build(0)?;
    println!("{} states, {} free cells", world.n_states(), world.layout.free_cells().len());

    let vi = value_iteration(&world.mdp, &vec![0.0; world.n_states()], 10_000, 1e-12)?;
    let uniform = PolicyTable::uniform(world.n_states(), 4);
    let pi = policy_iteration(&world.mdp, &uniform, 100)?;
    // Greedy policies can differ on tied actions; values cannot.
    assert!(sup_dist(&vi.v, &pi.v) < 1e-8);

    println!("value iteration: {} sweeps", vi.iterations);
    println!("policy iteration: {} evaluations", pi.evaluations);
    println!("eta* = {:.6}", expected_return(&world.mdp, &vi.policy)?);

    let pgm = render_field_pgm(&world.layout, &world.cell_field(&vi.v), 8);
    println!("value heatmap: {} bytes of PGM", pgm.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
