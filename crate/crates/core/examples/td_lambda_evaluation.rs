// TD(λ) estimates of the random policy against its exact value.

use optionlab::dp::{td_lambda, LearningSchedule, StepSize, TdMode};
use optionlab::gridworld::GridConfig;
use optionlab::linalg::sup_dist;
use optionlab::mdp::{exact_value, PolicyTable};
use optionlab::sampling::MdpSampler;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let world = GridConfig::default().build(0)?;
    let policy = PolicyTable::uniform(world.n_states(), 4);
    let exact = exact_value(&world.mdp, &policy)?.v;
    let sampler = MdpSampler::new(&world.mdp, Some(256));

    for lambda in [0.0, 0.5, 0.9] {
        let schedule = LearningSchedule { alpha: StepSize::Constant(0.005), lambda, ..Default::default() };
        let v = td_lambda(&sampler, &policy, &schedule, TdMode::BackwardOnline, 2_000, 1)?;
        println!("lambda {lambda:.1}: sup error {:.4} after 2000 episodes", sup_dist(&v, &exact));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
