use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optionlab::runner::{execute, Command, RunRequest};

/// Tabular RL, trust-region and spectral experiments on 4-room gridworlds.
#[derive(Parser)]
#[command(name = "optionlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a config leaf, e.g. `--set env.n=16`.
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile the gridworld and dump layout, MDP and states.
    Env,
    /// Value or policy iteration.
    Solve {
        #[arg(long, value_parser = ["vi", "pi"])]
        algo: Option<String>,
    },
    /// TD(λ) evaluation of the uniform policy.
    Td,
    /// Laplacian spectrum of the transition graph.
    Spectrum {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Proto-value function projection and representation policy iteration.
    Pvf {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Options that ascend Laplacian eigenvectors.
    Eigenoption,
    /// Trust-region policy optimization.
    Trpo {
        /// Use exact advantages.
        #[arg(long)]
        exact: bool,
    },
    /// Hierarchical trust-region training with options.
    Trhpo {
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Constrained spectral network on a Laplacian or diagonal operator.
    Spectralnet,
    /// Spectral clustering of Gaussian blobs.
    Cluster,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut shortcuts = Vec::new();
    let command = match cli.command {
        Cmd::Env => Command::Env,
        Cmd::Solve { algo } => {
            shortcuts.extend(algo.map(|a| format!("solve.algo={a}")));
            Command::Solve
        }
        Cmd::Td => Command::Td,
        Cmd::Spectrum { k } => {
            shortcuts.extend(k.map(|k| format!("spectrum.k={k}")));
            Command::Spectrum
        }
        Cmd::Pvf { k } => {
            shortcuts.extend(k.map(|k| format!("pvf.k={k}")));
            Command::Pvf
        }
        Cmd::Eigenoption => Command::Eigenoption,
        Cmd::Trpo { exact } => {
            if exact {
                shortcuts.push("trpo.exact=true".into());
            }
            Command::Trpo
        }
        Cmd::Trhpo { seeds } => {
            shortcuts.extend(seeds.map(|s| format!("trhpo.seeds={s}")));
            Command::Trhpo
        }
        Cmd::Spectralnet => Command::Spectralnet,
        Cmd::Cluster => Command::Cluster,
    };
    let mut overrides = cli.set;
    overrides.extend(shortcuts);
    let req = RunRequest { command, config: cli.config, seed: cli.seed, out: cli.out, overrides };
    match execute(&req) {
        Ok(dir) => {
            println!("{}", dir.join("manifest.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
