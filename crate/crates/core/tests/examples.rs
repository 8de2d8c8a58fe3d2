#[allow(dead_code)]
mod gridworld_dynamic_programming {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/gridworld_dynamic_programming.rs"));
}

#[allow(dead_code)]
mod td_lambda_evaluation {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/td_lambda_evaluation.rs"));
}

#[allow(dead_code)]
mod laplacian_spectrum {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/laplacian_spectrum.rs"));
}

#[allow(dead_code)]
mod proto_value_functions {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/proto_value_functions.rs"));
}

#[allow(dead_code)]
mod eigenoptions {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/eigenoptions.rs"));
}

#[allow(dead_code)]
mod trust_region_policy_optimization {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/trust_region_policy_optimization.rs"));
}

#[allow(dead_code)]
mod hierarchical_options {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/hierarchical_options.rs"));
}

#[allow(dead_code)]
mod spectral_network {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/spectral_network.rs"));
}

#[allow(dead_code)]
mod spectral_clustering {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/spectral_clustering.rs"));
}

#[allow(dead_code)]
mod experiment_runner {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/experiment_runner.rs"));
}

#[test]
fn gridworld_dynamic_programming_runs() {
    gridworld_dynamic_programming::run_example().expect("gridworld_dynamic_programming example should run");
}

#[test]
fn td_lambda_evaluation_runs() {
    td_lambda_evaluation::run_example().expect("td_lambda_evaluation example should run");
}

#[test]
fn laplacian_spectrum_runs() {
    laplacian_spectrum::run_example().expect("laplacian_spectrum example should run");
}

#[test]
fn proto_value_functions_runs() {
    proto_value_functions::run_example().expect("proto_value_functions example should run");
}

#[test]
fn eigenoptions_runs() {
    eigenoptions::run_example().expect("eigenoptions example should run");
}

#[test]
fn trust_region_policy_optimization_runs() {
    trust_region_policy_optimization::run_example().expect("trust_region_policy_optimization example should run");
}

#[test]
fn hierarchical_options_runs() {
    hierarchical_options::run_example().expect("hierarchical_options example should run");
}

#[test]
fn spectral_network_runs() {
    spectral_network::run_example().expect("spectral_network example should run");
}

#[test]
fn spectral_clustering_runs() {
    spectral_clustering::run_example().expect("spectral_clustering example should run");
}

#[test]
fn experiment_runner_runs() {
    experiment_runner::run_example().expect("experiment_runner example should run");
}
