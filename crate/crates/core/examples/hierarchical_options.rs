// Hierarchical trust-region training: a gate over fixed-duration options
// with a mutual-information bonus.

use optionlab::experiment::{run_trhpo, Budget};
use optionlab::gridworld::GridConfig;
use optionlab::hrl::{hierarchical_kl_bound, HierarchicalPolicy, TrhpoConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let world = GridConfig::default().build(0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = HierarchicalPolicy::random_options(world.n_states(), 4, 3, 4, 1.0, &mut rng)?;
    let q = HierarchicalPolicy::random_options(world.n_states(), 4, 3, 4, 1.0, &mut rng)?;
    let b = hierarchical_kl_bound(&p, &q, 0)?;
    println!("mixture kl {:.4} <= gate {:.4} + options {:.4}", b.lhs, b.gate_term, b.option_term);

    let config = TrhpoConfig { k: 3, tau: 4, lambda: 0.01, ..TrhpoConfig::default() };
    let (_, rows) = run_trhpo(&world.mdp, 256, &config, Budget::iterations(15), 1)?;
    for (i, d) in rows.iter().enumerate().step_by(3) {
        let usage: Vec<String> = d.usage.iter().map(|u| format!("{u:.2}")).collect();
        println!("iter {i:2}: return {:.2}, I {:.4}, usage [{}]", d.mean_return, d.i_hat, usage.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
