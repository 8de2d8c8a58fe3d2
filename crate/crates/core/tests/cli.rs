use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use optionlab::gridworld::GridConfig;
use optionlab::pvf::transition_graph;
use optionlab::spectral::{laplacian_spectrum, LaplacianKind};

fn run(args: &[&str], out: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_optionlab"));
    cmd.args(args).arg("--out").arg(out);
    match threads {
        Some(t) => cmd.env("OPTIONLAB_THREADS", t),
        None => cmd.env_remove("OPTIONLAB_THREADS"),
    };
    cmd.output().unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

const QUICK: &[&[&str]] = &[
    &["env"],
    &["solve", "--algo", "vi"],
    &["solve", "--algo", "pi"],
    &["td", "--set", "td.episodes=300"],
    &["spectrum", "--k", "6"],
    &["pvf", "--k", "5"],
    &["eigenoption"],
    &["trpo", "--set", "trpo.iterations=8"],
    &["trpo", "--exact", "--set", "trpo.iterations=8"],
    &["trhpo", "--seeds", "2", "--set", "trhpo.iterations=5"],
    &["spectralnet", "--set", "spectralnet.params.max_iters=200"],
    &["cluster", "--set", "cluster.per_cluster=30"],
];

#[test]
fn every_command_is_byte_identical_across_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    for (i, args) in QUICK.iter().enumerate() {
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--seed", "4"]);
        let a = tmp.path().join(format!("{i}a"));
        let b = tmp.path().join(format!("{i}b"));
        let ra = run(&full, &a, None);
        assert!(ra.status.success(), "{args:?}: {}", String::from_utf8_lossy(&ra.stderr));
        let rb = run(&full, &b, Some("1"));
        assert!(rb.status.success());
        let (sa, sb) = (snapshot(&a), snapshot(&b));
        assert!(sa.contains_key("manifest.json"));
        assert_eq!(sa, sb, "{args:?} differs between runs");
    }
}

#[test]
fn spectrum_csv_is_the_library_output() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&["spectrum", "--k", "4"], tmp.path(), None).status.success());
    let world = GridConfig::default().build(0).unwrap();
    let graph = transition_graph(&world.mdp, &world.live_states());
    let spec = laplacian_spectrum(&graph, LaplacianKind::Combinatorial, Some(4)).unwrap();
    assert_eq!(fs::read_to_string(tmp.path().join("spectrum.csv")).unwrap(), spec.to_csv());
    assert_eq!(fs::read_to_string(tmp.path().join("edges.csv")).unwrap(), graph.edges_csv());
    let pgm = fs::read(tmp.path().join("eigvec_1.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));
}

#[test]
fn trhpo_writes_one_file_per_seed_and_medians() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["trhpo", "--seeds", "5", "--seed", "10", "--set", "trhpo.iterations=3"], tmp.path(), None);
    assert!(out.status.success());
    let files = snapshot(tmp.path());
    for s in 10..15 {
        assert!(files.contains_key(&format!("trhpo_seed{s}.csv")), "seed {s}");
    }
    let medians = String::from_utf8(files["medians.csv"].clone()).unwrap();
    assert_eq!(medians.lines().count(), 4);
    let manifest: serde_json::Value = serde_json::from_slice(&files["manifest.json"]).unwrap();
    assert_eq!(manifest["command"], "trhpo");
    assert_eq!(manifest["seed"], 10);
}

#[test]
fn values_use_full_precision_scientific_notation() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&["solve"], tmp.path(), None).status.success());
    let csv = fs::read_to_string(tmp.path().join("value.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let value = row.split(',').nth(5).unwrap();
    assert_eq!(value, format!("{:.16e}", value.parse::<f64>().unwrap()));
    let (mantissa, _) = value.split_once('e').unwrap();
    assert_eq!(mantissa.trim_start_matches('-').len(), 18, "{value}");
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str], threads: Option<&str>| run(args, &tmp.path().join("x"), threads).status.code();

    let bad_key = tmp.path().join("bad.json");
    fs::write(&bad_key, r#"{"env": {"n": 8, "colour": 1}}"#).unwrap();
    assert_eq!(code(&["env", "--config", bad_key.to_str().unwrap()], None), Some(2));
    assert_eq!(code(&["env", "--set", "env.nope=3"], None), Some(2));
    assert_eq!(code(&["env", "--set", "env.n=5"], None), Some(2));
    assert_eq!(code(&["env"], Some("0")), Some(2));
    assert_eq!(code(&["env"], Some("many")), Some(2));
    assert_eq!(code(&["env", "--config", "/nonexistent/config.json"], None), Some(3));

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    assert_eq!(run(&["env"], &blocker.join("sub"), None).status.code(), Some(3));

    let good = tmp.path().join("good.json");
    fs::write(&good, r#"{"command": "env", "env": {"n": 9}}"#).unwrap();
    assert_eq!(code(&["env", "--config", good.to_str().unwrap()], None), Some(0));
    assert_eq!(code(&["solve", "--config", good.to_str().unwrap()], None), Some(2));
}
