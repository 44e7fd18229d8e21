use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn bayesgi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bayesgi")).args(args).output().unwrap()
}

fn run_into(path: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"];
    args.extend_from_slice(extra);
    bayesgi(&args)
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["repeated.toml", "bgi_verify.toml", "sweep_g21.toml"] {
        let (a, b) = (tmp.path().join(format!("{name}.a")), tmp.path().join(format!("{name}.b")));
        assert!(run_into(&scenario(name), &a, &[]).status.success());
        assert!(run_into(&scenario(name), &b, &[]).status.success());
        for entry in fs::read_dir(&a).unwrap() {
            let file = entry.unwrap().file_name();
            assert_eq!(fs::read(a.join(&file)).unwrap(), fs::read(b.join(&file)).unwrap(), "{name}: {file:?}");
        }
    }
}

#[test]
fn seed_flag_overrides_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_into(&scenario("repeated.toml"), &a, &["--seed", "5"]);
    run_into(&scenario("repeated.toml"), &b, &["--seed", "6"]);
    assert_ne!(fs::read(a.join("draws.csv")).unwrap(), fs::read(b.join("draws.csv")).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 5);
}

#[test]
fn validation_failure_exits_2_with_json() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "mode = \"sbgi\"\nseed = 1\n[params]\npower = 1.0\nnoise = 0.01\ncolour = 1\n").unwrap();
    let out = run_into(&bad, &tmp.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    let text = err.to_string();
    assert!(text.contains("params.colour"), "{text}");
    assert!(text.contains("gains.g12"), "{text}");
}

#[test]
fn missing_file_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(&tmp.path().join("nope.toml"), &tmp.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn non_convergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("static_br.toml")).unwrap().replace("max_iter = 100", "max_iter = 2");
    let path = tmp.path().join("short.toml");
    fs::write(&path, text).unwrap();
    let out = run_into(&path, &tmp.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(3));
    // artifacts are still written
    assert!(tmp.path().join("o/trajectory.csv").exists());
}

#[test]
fn best_response_trajectory_ends_at_half() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert!(run_into(&scenario("static_br.toml"), &out, &[]).status.success());
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iteration,p11,p12,p21,p22"));
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    for p in &last[1..] {
        assert!((p - 0.5).abs() < 1e-6);
    }
}

#[test]
fn sweep_switches_to_share_above_g_star() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert!(run_into(&scenario("sweep_g21.toml"), &out, &[]).status.success());
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = |n: &str| header.iter().position(|h| *h == n).unwrap();
    let (g21, gs, action) = (col("g21"), col("g_star"), col("primary_action"));
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (g, s): (f64, f64) = (f[g21].parse().unwrap(), f[gs].parse().unwrap());
        assert_eq!(f[action], if g > s { "SH" } else { "SP" }, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 51);
}

#[test]
fn every_example_scenario_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let out = run_into(&path, &tmp.path().join(path.file_stem().unwrap()), &[]);
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}
