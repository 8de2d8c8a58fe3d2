// Tabular TRPO on the four-room world, exact and sampled.

use optionlab::experiment::{run_trpo, run_trpo_exact, Budget};
use optionlab::gridworld::GridConfig;
use optionlab::mdp::expected_return;
use optionlab::trust_region::TrpoConfig;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let world = GridConfig::default().build(0)?;
    let config = TrpoConfig::default();

    let (_, exact) = run_trpo_exact(&world.mdp, &config, 20)?;
    for (i, d) in exact.iter().enumerate().step_by(5) {
        println!("exact iter {i:2}: eta {:.5}, kl {:.2e}, beta {:.3}", d.mean_return, d.kl, d.beta);
    }

    let (policy, sampled) = run_trpo(&world.mdp, 256, &config, Budget::iterations(20), 7)?;
    let accepted = sampled.iter().filter(|d| d.accepted).count();
    let max_kl = sampled.iter().filter(|d| d.accepted).map(|d| d.kl).fold(0.0, f64::max);
    println!("sampled: {accepted}/20 steps accepted, max kl {max_kl:.4} (delta {})", config.delta);
    println!("sampled policy eta {:.5}", expected_return(&world.mdp, &policy)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
