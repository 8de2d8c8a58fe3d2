// Driving the runner in-process: the same request the `optionlab` binary builds.

use optionlab::runner::{execute, Command, RunRequest};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join(format!("optionlab-example-{}", std::process::id()));
    let mut req = RunRequest::new(Command::Spectrum);
    req.out = Some(out.clone());
    req.seed = Some(4);
    req.overrides = vec!["spectrum.k=3".into(), "env.n=8".into()];
    let dir = execute(&req)?;

    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    println!("wrote {}", manifest["files"]);
    println!("eigenvalues {}", manifest["summary"]["eigenvalues"]);
    std::fs::remove_dir_all(out)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
