//! Experiment runner: JSON configs with dotted overrides, seeded execution and
//! CSV/PGM/JSON artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::cluster::{gaussian_blobs, permutation_accuracy, polygon_centers, spectral_clustering};
use crate::dp::{policy_iteration, td_lambda, value_iteration_with, LearningSchedule, StepSize, Sweep, TdMode, ValueIterationOptions};
use crate::error::Error;
use crate::experiment::{median, run_trhpo, run_trpo, run_trpo_exact, Budget};
use crate::grassmann::{bottom_eigenspace, largest_principal_angle, optimal_sequential_value, spectral_network_train, SpectralNetConfig};
use crate::gridworld::{render_field_pgm, render_layout_pgm, FourRooms, GoalMode, GridConfig, StateKey};
use crate::hrl::{self, TrhpoConfig, TrhpoDiagnostics};
use crate::linalg::{sup_dist, Matrix};
use crate::mdp::{exact_value, PolicyTable, TabularSoftmaxPolicy};
use crate::pvf::{
    absorbing_non_goal_states, learn_eigenoption, project_value, representation_policy_iteration, transition_graph,
    PvfBasis,
};
use crate::sampling::MdpSampler;
use crate::spectral::{laplacian, laplacian_spectrum, LaplacianKind};
use crate::trust_region::{self, TrpoConfig, TrpoDiagnostics};

pub const THREADS_ENV: &str = "OPTIONLAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Env,
    Solve,
    Td,
    Spectrum,
    Pvf,
    Eigenoption,
    Trpo,
    Trhpo,
    Spectralnet,
    Cluster,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Env => "env",
            Command::Solve => "solve",
            Command::Td => "td",
            Command::Spectrum => "spectrum",
            Command::Pvf => "pvf",
            Command::Eigenoption => "eigenoption",
            Command::Trpo => "trpo",
            Command::Trhpo => "trhpo",
            Command::Spectralnet => "spectralnet",
            Command::Cluster => "cluster",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveAlgo {
    #[default]
    Vi,
    Pi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSpec {
    pub algo: SolveAlgo,
    pub tol: f64,
    pub max_iters: usize,
    pub sweep: Sweep,
}

impl Default for SolveSpec {
    fn default() -> Self {
        Self { algo: SolveAlgo::Vi, tol: 1e-10, max_iters: 100_000, sweep: Sweep::Synchronous }
    }
}

/// Evaluates the uniform random policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TdSpec {
    pub episodes: usize,
    pub lambda: f64,
    pub alpha: StepSize,
    pub mode: TdMode,
}

impl Default for TdSpec {
    fn default() -> Self {
        Self { episodes: 20_000, lambda: 0.0, alpha: StepSize::Constant(0.005), mode: TdMode::BackwardOnline }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSpec {
    pub k: usize,
    pub laplacian: LaplacianKind,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        Self { k: 4, laplacian: LaplacianKind::Combinatorial }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PvfSpec {
    pub k: usize,
    pub laplacian: LaplacianKind,
    pub rpi_iters: usize,
    pub vi_tol: f64,
}

impl Default for PvfSpec {
    fn default() -> Self {
        Self { k: 5, laplacian: LaplacianKind::Combinatorial, rpi_iters: 100, vi_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenoptionSpec {
    pub indices: Vec<usize>,
    pub laplacian: LaplacianKind,
    pub gamma_option: f64,
    /// Also learn the option for `-φ`.
    pub negated: bool,
}

impl Default for EigenoptionSpec {
    fn default() -> Self {
        Self { indices: vec![1, 2, 3], laplacian: LaplacianKind::Combinatorial, gamma_option: 0.99, negated: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrpoSpec {
    pub iterations: usize,
    /// Exact advantages and state density instead of sampled episodes.
    pub exact: bool,
    pub max_steps: Option<usize>,
    pub params: TrpoConfig,
}

impl Default for TrpoSpec {
    fn default() -> Self {
        Self { iterations: 100, exact: false, max_steps: None, params: TrpoConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrhpoSpec {
    pub iterations: usize,
    /// Number of consecutive seeds starting at the run seed.
    pub seeds: usize,
    pub max_steps: Option<usize>,
    /// Also train flat TRPO on the same seeds.
    pub baseline: bool,
    pub params: TrhpoConfig,
}

impl Default for TrhpoSpec {
    fn default() -> Self {
        Self { iterations: 60, seeds: 1, max_steps: None, baseline: false, params: TrhpoConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    /// Laplacian of the environment's live-state transition graph.
    #[default]
    FourRooms,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralNetSpec {
    pub k: usize,
    pub operator: Operator,
    pub laplacian: LaplacianKind,
    pub diagonal: Vec<f64>,
    pub params: SpectralNetConfig,
}

impl Default for SpectralNetSpec {
    fn default() -> Self {
        Self {
            k: 4,
            operator: Operator::FourRooms,
            laplacian: LaplacianKind::Combinatorial,
            diagonal: (1..=8).map(f64::from).collect(),
            params: SpectralNetConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterSpec {
    pub clusters: usize,
    pub per_cluster: usize,
    pub spacing: f64,
    pub std: f64,
    pub neighbours: usize,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        Self { clusters: 3, per_cluster: 100, spacing: 10.0, std: 1.0, neighbours: 10 }
    }
}

/// Complete description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Pixels per cell in PGM output.
    pub pgm_scale: usize,
    pub env: GridConfig,
    pub solve: SolveSpec,
    pub td: TdSpec,
    pub spectrum: SpectrumSpec,
    pub pvf: PvfSpec,
    pub eigenoption: EigenoptionSpec,
    pub trpo: TrpoSpec,
    pub trhpo: TrhpoSpec,
    pub spectralnet: SpectralNetSpec,
    pub cluster: ClusterSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 0,
            out: None,
            pgm_scale: 8,
            env: GridConfig::default(),
            solve: SolveSpec::default(),
            td: TdSpec::default(),
            spectrum: SpectrumSpec::default(),
            pvf: PvfSpec::default(),
            eigenoption: EigenoptionSpec::default(),
            trpo: TrpoSpec::default(),
            trhpo: TrhpoSpec::default(),
            spectralnet: SpectralNetSpec::default(),
            cluster: ClusterSpec::default(),
        }
    }
}

/// Failure of a run, classified by exit status.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Runtime(_) => 1,
            RunError::Io { .. } => 3,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => RunError::Config(msg),
            Error::Io(source) => RunError::Io { path: PathBuf::new(), source },
            other => RunError::Runtime(other),
        }
    }
}

type RunResult<T> = std::result::Result<T, RunError>;

/// What the command line asked for, before the config is resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRequest {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// `dotted.path=value`; values parse as JSON, else as strings.
    pub overrides: Vec<String>,
}

impl RunRequest {
    pub fn new(command: Command) -> Self {
        Self { command, config: None, seed: None, out: None, overrides: Vec::new() }
    }
}

/// Sets `path` (dot separated) inside a JSON object, creating objects on the way.
pub fn apply_override(root: &mut Value, assignment: &str) -> RunResult<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| RunError::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(RunError::Config(format!("malformed override path `{path}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        if !node.is_object() {
            *node = Value::Object(Map::new());
        }
        node = node.as_object_mut().unwrap().entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    if !node.is_object() {
        *node = Value::Object(Map::new());
    }
    node.as_object_mut().unwrap().insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Reads the config file (if any), applies overrides and flags, and validates.
pub fn resolve_config(req: &RunRequest) -> RunResult<ExperimentConfig> {
    let mut root = match &req.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|source| RunError::Io { path: path.clone(), source })?;
            serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?
        }
        None => Value::Object(Map::new()),
    };
    if !root.is_object() {
        return Err(RunError::Config("config root must be a JSON object".into()));
    }
    for o in &req.overrides {
        apply_override(&mut root, o)?;
    }
    let mut config: ExperimentConfig =
        serde_json::from_value(root).map_err(|e| RunError::Config(e.to_string()))?;
    match config.command {
        Some(c) if c != req.command => {
            return Err(RunError::Config(format!(
                "config is for `{}` but `{}` was requested",
                c.name(),
                req.command.name()
            )))
        }
        _ => config.command = Some(req.command),
    }
    if let Some(seed) = req.seed {
        config.seed = seed;
    }
    if let Some(out) = &req.out {
        config.out = Some(out.clone());
    }
    validate(&config)?;
    Ok(config)
}

fn validate(c: &ExperimentConfig) -> RunResult<()> {
    let bad = |msg: String| Err(RunError::Config(msg));
    if c.env.n < 8 {
        return bad(format!("env.n must be at least 8, got {}", c.env.n));
    }
    if !(c.env.gamma > 0.0 && c.env.gamma < 1.0) {
        return bad(format!("env.gamma must lie in (0, 1), got {}", c.env.gamma));
    }
    if c.pgm_scale == 0 {
        return bad("pgm_scale must be positive".into());
    }
    match c.command {
        Some(Command::Solve) if !(c.solve.tol > 0.0) => bad("solve.tol must be positive".into()),
        Some(Command::Td) if !(0.0..=1.0).contains(&c.td.lambda) => bad("td.lambda must lie in [0, 1]".into()),
        Some(Command::Spectrum) if c.spectrum.k == 0 => bad("spectrum.k must be positive".into()),
        Some(Command::Pvf) if c.pvf.k == 0 => bad("pvf.k must be positive".into()),
        Some(Command::Eigenoption) if !(c.eigenoption.gamma_option > 0.0 && c.eigenoption.gamma_option < 1.0) => {
            bad("eigenoption.gamma_option must lie in (0, 1)".into())
        }
        Some(Command::Trpo) => Ok(c.trpo.params.validate()?),
        Some(Command::Trhpo) if c.trhpo.seeds == 0 => bad("trhpo.seeds must be positive".into()),
        Some(Command::Trhpo) => Ok(c.trhpo.params.validate()?),
        Some(Command::Spectralnet) => Ok(c.spectralnet.params.validate()?),
        Some(Command::Cluster) if c.cluster.clusters < 2 || c.cluster.clusters > 8 => {
            bad("cluster.clusters must lie in 2..=8".into())
        }
        _ => Ok(()),
    }
}

/// Thread cap from `OPTIONLAB_THREADS`, if set.
pub fn thread_cap() -> RunResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(RunError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

/// Resolves the request, runs it and writes artifacts plus `manifest.json`.
/// Returns the output directory.
pub fn execute(req: &RunRequest) -> RunResult<PathBuf> {
    let config = resolve_config(req)?;
    let threads = thread_cap()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Runtime(Error::InvalidArgument(e.to_string())))?;
    pool.install(|| run_config(&config))
}

/// Runs an already resolved config.
pub fn run_config(config: &ExperimentConfig) -> RunResult<PathBuf> {
    let command = config.command.ok_or_else(|| RunError::Config("no command selected".into()))?;
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut art = Artifacts::create(&out)?;
    log::info!("running {} into {}", command.name(), out.display());
    let summary = match command {
        Command::Env => run_env(config, &mut art)?,
        Command::Solve => run_solve(config, &mut art)?,
        Command::Td => run_td(config, &mut art)?,
        Command::Spectrum => run_spectrum(config, &mut art)?,
        Command::Pvf => run_pvf(config, &mut art)?,
        Command::Eigenoption => run_eigenoption(config, &mut art)?,
        Command::Trpo => run_trpo_cmd(config, &mut art)?,
        Command::Trhpo => run_trhpo_cmd(config, &mut art)?,
        Command::Spectralnet => run_spectralnet(config, &mut art)?,
        Command::Cluster => run_cluster(config, &mut art)?,
    };
    let mut echo = config.clone();
    echo.out = None;
    let manifest = json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "config": echo,
        "files": art.files,
        "summary": summary,
    });
    art.write("manifest.json", serde_json::to_string_pretty(&manifest).map_err(Error::from)? + "\n")?;
    Ok(out)
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn create(dir: &Path) -> RunResult<Self> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> RunResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| RunError::Io { path, source })?;
        if name != "manifest.json" {
            self.files.push(name.to_string());
        }
        Ok(())
    }
}

fn world(c: &ExperimentConfig) -> RunResult<FourRooms> {
    Ok(c.env.build(c.seed)?)
}

/// Writes a per-state field as PGM; skipped outside fixed-goal mode where
/// several states share a cell.
fn field_pgm(art: &mut Artifacts, w: &FourRooms, name: &str, values: &[f64], scale: usize) -> RunResult<()> {
    if w.mode != GoalMode::FixedGoal {
        return Ok(());
    }
    let mut full = values.to_vec();
    full.resize(w.n_states(), 0.0);
    art.write(name, render_field_pgm(&w.layout, &w.cell_field(&full), scale))
}

fn state_label(w: &FourRooms, s: usize) -> String {
    match w.key(s) {
        StateKey::Live(gs) => format!("{},{},{},{}", gs.agent.0, gs.agent.1, gs.goal.0, gs.goal.1),
        StateKey::Terminal => ",,,".into(),
    }
}

const STATE_HEADER: &str = "state,agent_row,agent_col,goal_row,goal_col";

fn run_env(c: &ExperimentConfig, art: &mut Artifacts) -> RunResult<Value> {
    let w = world(c)?;
    art.write("layout.json", w.layout.to_json()? + "\n")?;
    art.write("mdp.json", w.mdp.to_json()? + "\n")?;
    art.write("layout.pgm", render_layout_pgm(&w.layout, w.start, &w.goals, c.pgm_scale))?;
    let mut csv = format!("{STATE_HEADER},rho0\n");
    for s in 0..w.n_states() {
        let _ = writeln!(csv, "{s},{},{:.16e}", state_label(&w, s), w.mdp.rho0()[s]);
    }
    art.write("states.csv", csv)?;
    Ok(json!({ "n_states": w.n_states(), "free_cells": w.layout.free_cells().len(), "goals": w.goals }))
}

fn run_solve(c: &ExperimentConfig, art: &mut Artifacts) -> RunResult<Value> {
    let w = world(c)?;
    let (v, actions, trace, iterations) = match c.solve.algo {
        SolveAlgo::Vi => {
            let opts = ValueIterationOptions {
                max_iters: c.solve.max_iters,
                tol: c.solve.tol,
                sweep: c.solve.sweep,
                record_history: false,
            };
            let r = value_iteration_with(&w.mdp, &vec![0.0; w.n_states()], &opts)?;
            (r.v, r.policy.actions().to_vec(), r.trace, r.iterations)
        }
        SolveAlgo::Pi => {
            let pi0 = PolicyTable::uniform(w.n_states(), w.mdp.n_actions());
            let r = policy_iteration(&w.mdp, &pi0, c.solve.max_iters)?;
            (r.v, r.policy.actions().to_vec(), r.trace, r.evaluations)
        }
    };
    let mut conv = String::from("iter,delta,eta\n");
    for r in &trace {
        let _ = writeln!(conv, "{},{:.16e},{:.16e}", r.iter, r.delta, r.eta);
    }
    art.write("convergence.csv", conv)?;
    let mut csv = format!("{STATE_HEADER},value,action\n");
    for s in 0..w.n_states() {
        let _ = writeln!(csv, "{s},{},{:.16e},{}", state_label(&w, s), v[s], actions[s]);
    }
    art.write("value.csv", csv)?;
    field_pgm(art, &w, "value.pgm", &v, c.pgm_scale)?;
    let eta: f64 = w.mdp.rho0().iter().zip(&v).map(|(r, x)| r * x).sum();
    Ok(json!({ "iterations": iterations, "eta": eta }))
}

fn run_td(c: &ExperimentConfig, art: &mut Artifacts) -> RunResult<Value> {
    let w = world(c)?;
    let sampler = MdpSampler::new(&w.mdp, Some(c.env.horizon()));
    let policy = PolicyTable::uniform(w.n_states(), w.mdp.n_actions());
    let schedule = LearningSchedule { alpha: c.td.alpha, lambda: c.td.lambda, ..LearningSchedule::default() };
    let v = td_lambda(&sampler, &policy, &schedule, c.td.mode, c.td.episodes, c.seed)?;
    let exact = exact_value(&w.mdp, &policy)?.v;
    let mut csv = format!("{STATE_HEADER},td,exact\n");
    for s in 0..w.n_states() {
        let _ = writeln!(csv, "{s},{},{:.16e},{:.16e}", state_label(&w, s), v[s], exact[s]);
    }
    art.write("td_value.csv", csv)?;
    field_pgm(art, &w, "td_value.pgm", &v, c.pgm_scale)?;
    Ok(json!({ "episodes": c.td.episodes, "sup_error": sup_dist(&v, &exact) }))
}

fn run_spectrum(c: &ExperimentConfig, art: &mut Artifacts) -> RunResult<Value> {
    let w = world(c)?;
    let graph = transition_graph(&w.mdp, &w.live_states());
    let spec = laplacian_spectrum(&graph, c.spectrum.laplacian, Some(c.spectrum.k))?;
    art.write("edges.csv", graph.edges_csv())?;
    art.write("spectrum.csv", spec.to_csv())?;
    for i in 0..spec.len() {
        field_pgm(art, &w, &format!("eigvec_{i}.pgm"), &spec.vector(i), c.pgm_scale)?;
    }
    Ok(json!({ "vertices": graph.n_vertices(), "edges": graph.edge_count(), "eigenvalues": spec.eigenvalues }))
}

fn run_pvf(c: &ExperimentConfig, art: &mut Artifacts) -> RunResult<Value> {
    let w = world(c)?;
    let live = w.live_states();
    let graph = transition_graph(&w.mdp, &live);
    let spec = laplacian_spectrum(&graph, c.pvf.laplacian, None)?;
    let vi = value_iteration_with(
        &w.mdp,
        &vec![0.0; w.n_states()],
        &ValueIterationOptions { tol: c.pvf.vi_tol, ..ValueIterationOptions::default() },
    )?;
    let v_live: Vec<f64> = live.iter().map(|&s| vi.v[s]).collect();
    let mut proj = String::from("k,sup_error,l2_error\n");
    let mut at_k = None;
    for k in 1..=spec.len() {
        let basis = PvfBasis::from_spectrum(&spec, k, live.clone(), w.n_states())?;
        let p = project_value(&v_live, &basis)?;
        let _ = writeln!(proj, "{k},{:.16e},{:.16e}", p.sup_error, p.l2_error);
        if k == c.pvf.k.min(spec.len()) {
            at_k = Some(p);
        }
    }
    art.write("projection.csv", proj)?;
    let basis = PvfBasis::from_spectrum(&spec, c.pvf.k, live.clone(), w.n_states())?;
    let rpi = representation_policy_iteration(&w.mdp, &basis, c.pvf.rpi_iters)?;
    let absorbing = absorbing_non_goal_states(&w.mdp, &rpi.policy, &[w.terminal_index()])?;
    let mut csv = format!("{STATE_HEADER},rpi_action,optimal_action,absorbing\n");
    for s in 0..w.n_states() {
        let _ = writeln!(
            csv,
            "{s},{},{},{},{}",
            state_label(&w, s),
            rpi.policy.action(s),
            vi.policy.action(s),
            u8::from(absorbing.contains(&s))
        );
    }
    art.write("rpi_policy.csv", csv)?;
    for i in 0..basis.k() {
        field_pgm(art, &w, &format!("pvf_{i}.pgm"), &spec.vector(i), c.pgm_scale)?;
    }
    let at_k = at_k.expect("k clamps into the spectrum");
    Ok(json!({
        "k": basis.k(),
        "sup_error": at_k.sup_error,
        "l2_error": at_k.l2_error,
        "rpi_iterations": rpi.iterations,
        "rpi_ridge": rpi.ridge_used,
        "absorbing_non_goal_states": absorbing,
    }))
}

fn run_eigenoption(c: &ExperimentConfig, art: &mut Artifacts) -> RunResult<Value> {
    let w = world(c)?;
    let live = w.live_states();
    let inner = w.mdp.restricted(&live)?;
    let graph = transition_graph(&w.mdp, &live);
    let spec = laplacian_spectrum(&graph, c.eigenoption.laplacian, None)?;
    let mut docs = Vec::new();
    for &i in &c.eigenoption.indices {
        if i >= spec.len() {
            return Err(RunError::Config(format!("eigenvector index {i} outside 0..{}", spec.len())));
        }
        let phi = spec.vector(i);
        field_pgm(art, &w, &format!("phi_{i}.pgm"), &phi, c.pgm_scale)?;
        let signs: &[(f64, &str)] = if c.eigenoption.negated { &[(1.0, ""), (-1.0, "_neg")] } else { &[(1.0, "")] };
        for &(sign, suffix) in signs {
            let field: Vec<f64> = phi.iter().map(|x| sign * x).collect();
            let mut opt = learn_eigenoption(&inner, &field, c.eigenoption.gamma_option)?;
            opt.index = i;
            let mut csv = format!("{STATE_HEADER},phi,action,terminates\n");
            for s in 0..live.len() {
                let _ = writeln!(
                    csv,
                    "{s},{},{:.16e},{},{}",
                    state_label(&w, live[s]),
                    field[s],
                    opt.policy.action(s),
                    u8::from(opt.termination[s])
                );
            }
            art.write(&format!("option_{i}{suffix}.csv"), csv)?;
            docs.push(json!({
                "index": i,
                "sign": sign,
                "eigenvalue": spec.eigenvalues[i],
                "termination_set": opt.termination_set(),
                "policy": opt.policy.actions(),
            }));
        }
    }
    art.write("options.json", serde_json::to_string_pretty(&docs).map_err(Error::from)? + "\n")?;
    Ok(json!({ "options": docs.len() }))
}

fn policy_csv(w: &FourRooms, policy: &TabularSoftmaxPolicy) -> String {
    let na = w.mdp.n_actions();
    let mut csv = String::from(STATE_HEADER);
    for a in 0..na {
        let _ = write!(csv, ",p{a}");
    }
    csv.push('\n');
    for s in 0..w.n_states() {
        let _ = write!(csv, "{s},{}", state_label(w, s));
        for a in 0..na {
            let _ = write!(csv, ",{:.16e}", policy.prob(s, a));
        }
        csv.push('\n');
    }
    csv
}

fn run_trpo_cmd(c: &ExperimentConfig, art: &mut Artifacts) -> RunResult<Value> {
    let w = world(c)?;
    let (policy, rows) = if c.trpo.exact {
        run_trpo_exact(&w.mdp, &c.trpo.params, c.trpo.iterations)?
    } else {
        let budget = Budget { iterations: c.trpo.iterations, max_steps: c.trpo.max_steps };
        run_trpo(&w.mdp, c.env.horizon(), &c.trpo.params, budget, c.seed)?
    };
    art.write("trpo.csv", trust_region::diagnostics_csv(&rows))?;
    art.write("policy.csv", policy_csv(&w, &policy))?;
    trpo_summary(&w, &policy, &rows)
}

fn trpo_summary(w: &FourRooms, policy: &TabularSoftmaxPolicy, rows: &[TrpoDiagnostics]) -> RunResult<Value> {
    Ok(json!({
        "iterations": rows.len(),
        "steps": rows.iter().map(|d| d.steps).sum::<usize>(),
        "accepted": rows.iter().filter(|d| d.accepted).count(),
        "eta": crate::mdp::expected_return(&w.mdp, policy)?,
    }))
}

fn run_trhpo_cmd(c: &ExperimentConfig, art: &mut Artifacts) -> RunResult<Value> {
    let w = world(c)?;
    let spec = &c.trhpo;
    let budget = Budget { iterations: spec.iterations, max_steps: spec.max_steps };
    let horizon = spec.params.horizon.unwrap_or(c.env.horizon());
    let seeds: Vec<u64> = (0..spec.seeds as u64).map(|i| c.seed + i).collect();
    type SeedRun = (Vec<TrhpoDiagnostics>, Option<Vec<TrpoDiagnostics>>, f64);
    let runs: Vec<SeedRun> = seeds
        .par_iter()
        .map(|&seed| -> crate::error::Result<SeedRun> {
            let (h, rows) = run_trhpo(&w.mdp, horizon, &spec.params, budget, seed)?;
            let eta = crate::mdp::expected_return(&w.mdp, &h)?;
            let flat = if spec.baseline {
                Some(run_trpo(&w.mdp, horizon, &spec.params.trpo, budget, seed)?.1)
            } else {
                None
            };
            Ok((rows, flat, eta))
        })
        .collect::<crate::error::Result<_>>()?;
    let mut per_seed = Vec::new();
    for (seed, (rows, flat, eta)) in seeds.iter().zip(&runs) {
        art.write(&format!("trhpo_seed{seed}.csv"), hrl::diagnostics_csv(rows))?;
        if let Some(flat) = flat {
            art.write(&format!("trpo_seed{seed}.csv"), trust_region::diagnostics_csv(flat))?;
        }
        per_seed.push(json!({
            "seed": seed,
            "iterations": rows.len(),
            "steps": rows.iter().map(|d| d.steps).sum::<usize>(),
            "eta": eta,
            "final_return": rows.last().map(|d| d.mean_return),
            "baseline_final_return": flat.as_ref().and_then(|f| f.last().map(|d| d.mean_return)),
        }));
    }
    let longest = runs.iter().map(|r| r.0.len().max(r.1.as_ref().map_or(0, Vec::len))).max().unwrap_or(0);
    let mut csv = String::from("iter,seeds,median_return,median_i_hat");
    if spec.baseline {
        csv.push_str(",baseline_seeds,baseline_median_return");
    }
    csv.push('\n');
    for i in 0..longest {
        let returns: Vec<f64> = runs.iter().filter_map(|r| r.0.get(i)).map(|d| d.mean_return).collect();
        let mi: Vec<f64> = runs.iter().filter_map(|r| r.0.get(i)).map(|d| d.i_hat).collect();
        let _ = write!(csv, "{i},{},{:.16e},{:.16e}", returns.len(), median(&returns), median(&mi));
        if spec.baseline {
            let flat: Vec<f64> =
                runs.iter().filter_map(|r| r.1.as_ref().and_then(|f| f.get(i))).map(|d| d.mean_return).collect();
            let _ = write!(csv, ",{},{:.16e}", flat.len(), median(&flat));
        }
        csv.push('\n');
    }
    art.write("medians.csv", csv)?;
    Ok(json!({ "seeds": per_seed }))
}

fn run_spectralnet(c: &ExperimentConfig, art: &mut Artifacts) -> RunResult<Value> {
    let spec = &c.spectralnet;
    let (a, w) = match spec.operator {
        Operator::FourRooms => {
            let w = world(c)?;
            let graph = transition_graph(&w.mdp, &w.live_states());
            (laplacian(&graph, spec.laplacian)?, Some(w))
        }
        Operator::Diagonal => {
            if spec.diagonal.is_empty() {
                return Err(RunError::Config("spectralnet.diagonal is empty".into()));
            }
            (Matrix::diag(&spec.diagonal), None)
        }
    };
    if spec.k == 0 || spec.k > a.rows() {
        return Err(RunError::Config(format!("spectralnet.k = {} for an operator of order {}", spec.k, a.rows())));
    }
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(c.seed);
    let r = spectral_network_train(&a, spec.k, &spec.params, &mut rng)?;
    art.write("trace.csv", r.trace_csv())?;
    art.write("embedding.csv", r.embedding_csv())?;
    if let Some(w) = &w {
        for j in 0..spec.k {
            field_pgm(art, w, &format!("embedding_{j}.pgm"), &r.embedding.col(j), c.pgm_scale)?;
        }
    }
    let (eigenvalues, q) = bottom_eigenspace(&a, spec.k)?;
    let optimum = optimal_sequential_value(&eigenvalues, spec.k);
    Ok(json!({
        "iterations": r.iterations,
        "objective": r.objective,
        "optimum": optimum,
        "largest_principal_angle": largest_principal_angle(&r.embedding, &q)?,
    }))
}

fn run_cluster(c: &ExperimentConfig, art: &mut Artifacts) -> RunResult<Value> {
    let spec = &c.cluster;
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(c.seed);
    let centers = polygon_centers(spec.clusters, spec.spacing);
    let (points, truth) = gaussian_blobs(&centers, spec.per_cluster, spec.std, &mut rng)?;
    let predicted = spectral_clustering(&points, spec.clusters, spec.neighbours, &mut rng)?;
    let accuracy = permutation_accuracy(&predicted, &truth, spec.clusters)?;
    let mut csv = String::from("point,x,y,label,cluster\n");
    for (i, p) in points.iter().enumerate() {
        let _ = writeln!(csv, "{i},{:.16e},{:.16e},{},{}", p[0], p[1], truth[i], predicted[i]);
    }
    art.write("clusters.csv", csv)?;
    Ok(json!({ "points": points.len(), "accuracy": accuracy }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_nest_and_parse() {
        let mut v = json!({ "env": { "n": 8 } });
        apply_override(&mut v, "env.n=16").unwrap();
        apply_override(&mut v, "trpo.params.delta=0.02").unwrap();
        apply_override(&mut v, "solve.algo=pi").unwrap();
        assert_eq!(v["env"]["n"], 16);
        assert_eq!(v["trpo"]["params"]["delta"], 0.02);
        assert_eq!(v["solve"]["algo"], "pi");
        assert!(apply_override(&mut v, "novalue").is_err());
        assert!(apply_override(&mut v, "a..b=1").is_err());
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let mut req = RunRequest::new(Command::Solve);
        req.overrides.push("solve.tolerance=1".into());
        let err = resolve_config(&req).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn command_mismatch_is_rejected() {
        let mut req = RunRequest::new(Command::Td);
        req.overrides.push("command=solve".into());
        assert_eq!(resolve_config(&req).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn library_errors_map_to_exit_codes() {
        assert_eq!(RunError::from(Error::Config("x".into())).exit_code(), 2);
        assert_eq!(RunError::from(Error::Singular("x".into())).exit_code(), 1);
        assert_eq!(RunError::from(Error::Io(std::io::Error::other("x"))).exit_code(), 3);
    }
}
