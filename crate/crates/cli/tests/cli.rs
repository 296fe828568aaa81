//! End-to-end tests of the varqite binary: exit codes, determinism, the
//! run-directory layout, and the analyze pass.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn varqite(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varqite"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Relative path -> contents for every file under `root`.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                files.insert(rel, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    files
}

#[test]
fn run_outputs_do_not_depend_on_jobs_or_repetition() {
    let dirs: Vec<TempDir> = (0..3).map(|_| TempDir::new().unwrap()).collect();
    let jobs = ["1", "3", "1"];
    for (dir, j) in dirs.iter().zip(jobs) {
        let out = varqite(&[
            "run",
            "--out",
            dir.path().to_str().unwrap(),
            "--ensemble",
            "sk,nws",
            "--sizes",
            "6",
            "--instances",
            "2",
            "--seed",
            "11",
            "--optimizer",
            "both",
            "--max-iterations",
            "60",
            "--jobs",
            j,
        ]);
        assert_ok(&out);
    }
    let base = snapshot(dirs[0].path());
    assert!(base.keys().any(|k| k.starts_with("traj/")));
    assert!(base.contains_key("summary.csv"));
    assert!(base.contains_key("summary_adam.csv"));
    assert_eq!(base, snapshot(dirs[1].path()), "parallel run diverged");
    assert_eq!(base, snapshot(dirs[2].path()), "repeat run diverged");
}

#[test]
fn generate_is_reproducible_and_run_reuses_instances() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().to_str().unwrap();
    let gen_args = [
        "generate", "--out", out_path, "--ensemble", "three_regular", "--sizes", "6",
        "--instances", "2", "--seed", "3",
    ];
    assert_ok(&varqite(&gen_args));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert_eq!(manifest.lines().count(), 2);
    let graph_path = dir.path().join("graphs/three_regular_n6_i000.graph");
    let original = std::fs::read(&graph_path).unwrap();
    // Byte-identical regeneration from the stored config alone.
    assert_ok(&varqite(&["generate", "--out", out_path]));
    assert_eq!(original, std::fs::read(&graph_path).unwrap());
    // A hand-placed instance survives the run and drives it.
    std::fs::write(&graph_path, "n 6 custom 99\n0 1 1.0e0\n").unwrap();
    assert_ok(&varqite(&["run", "--out", out_path, "--max-iterations", "40"]));
    assert_eq!(
        std::fs::read_to_string(&graph_path).unwrap(),
        "n 6 custom 99\n0 1 1.0e0\n"
    );
    let traj =
        std::fs::read_to_string(dir.path().join("traj/three_regular_n6_e0_i000.varit.csv"))
            .unwrap();
    assert!(traj.starts_with("# n_qubits=6 edge_count=1 "), "got: {}", &traj[..60]);
}

#[test]
fn flags_override_preset_and_config() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().to_str().unwrap();
    assert_ok(&varqite(&["presets", "fig1", "--out", out_path]));
    let config = std::fs::read_to_string(dir.path().join("config.txt")).unwrap();
    assert!(config.contains("ensemble = complete"));
    assert!(config.contains("use_sigmoid = false"));
    // The stored config is the base; the sizes flag wins over it.
    assert_ok(&varqite(&["run", "--out", out_path, "--sizes", "6"]));
    let rewritten = std::fs::read_to_string(dir.path().join("config.txt")).unwrap();
    assert!(rewritten.contains("sizes = 6"));
    assert!(rewritten.contains("use_sigmoid = false"));
    let reference = dir.path().join("reference/complete_n6_e0_i000.csv");
    let table = std::fs::read_to_string(reference).unwrap();
    assert!(table.starts_with("iteration,tau,ar_flow,ar_ite,difference\n"));
    assert!(table.lines().count() > 10);
}

#[test]
fn presets_listing_names_all_four() {
    let out = varqite(&["presets"]);
    assert_ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["fig1", "fig2", "fig3", "fig4"] {
        assert!(text.contains(name), "missing {name} in listing");
    }
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn summary_and_curves_schemas_are_pinned() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().to_str().unwrap();
    assert_ok(&varqite(&[
        "run", "--out", out_path, "--ensemble", "sk", "--sizes", "4,6", "--instances", "2",
        "--seed", "5", "--max-iterations", "30",
    ]));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "ensemble,n,epsilon,instances,success_fraction,mean_iterations,mean_max_layers,entropy_slope_a,entropy_intercept_b"
    );
    assert_eq!(summary.lines().count(), 3);
    for line in summary.lines().skip(1) {
        assert_eq!(line.split(',').count(), 9, "bad row: {line}");
    }
    let curves = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert_eq!(
        curves.lines().next().unwrap(),
        "ensemble,n,epsilon,optimizer,iteration,mean_ar_error,sem_ar_error"
    );
    assert!(curves.lines().count() > 30);
}

#[test]
fn analyze_annotates_entropy_and_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().to_str().unwrap();
    assert_ok(&varqite(&[
        "run", "--out", out_path, "--ensemble", "sk", "--sizes", "6", "--instances", "2",
        "--seed", "7", "--max-iterations", "400",
    ]));
    assert_ok(&varqite(&["analyze", "--out", out_path, "--jobs", "2"]));
    let first = snapshot(dir.path());
    let traj =
        std::fs::read_to_string(dir.path().join("traj/sk_n6_e0_i000.varit.csv")).unwrap();
    let annotated = traj
        .lines()
        .filter(|l| l.contains(",flow,"))
        .filter(|l| !l.ends_with(','))
        .count();
    assert!(annotated > 0, "no entropy column filled:\n{traj}");
    assert!(first.contains_key("fit_report.txt"));
    assert_ok(&varqite(&["analyze", "--out", out_path]));
    assert_eq!(first, snapshot(dir.path()), "second analyze changed files");
}

#[test]
fn error_paths_use_the_documented_exit_codes() {
    let empty = TempDir::new().unwrap();
    let out = varqite(&["analyze", "--out", empty.path().to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("config.txt"));

    let dir = TempDir::new().unwrap();
    let out = varqite(&[
        "run", "--out", dir.path().to_str().unwrap(), "--ensemble", "unknown_family",
    ]);
    assert_eq!(exit_code(&out), 1);

    let out = varqite(&[
        "run", "--out", dir.path().to_str().unwrap(), "--ensemble", "sk", "--sizes", "7",
    ]);
    assert_eq!(exit_code(&out), 1);

    // Target nested under a regular file cannot be created.
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "x").unwrap();
    let nested = blocker.join("sub");
    let out = varqite(&[
        "run", "--out", nested.to_str().unwrap(), "--ensemble", "sk", "--sizes", "6",
        "--instances", "1",
    ]);
    assert_eq!(exit_code(&out), 2);

    let out = varqite(&["--help"]);
    assert_eq!(exit_code(&out), 0);
}

#[test]
fn analyze_reports_missing_trajectories() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().to_str().unwrap();
    assert_ok(&varqite(&[
        "generate", "--out", out_path, "--ensemble", "sk", "--sizes", "6", "--instances", "1",
    ]));
    let out = varqite(&["analyze", "--out", out_path]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing input file"));
}
