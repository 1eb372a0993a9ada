use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn epispline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epispline"))
        .args(args)
        .env_remove("EPISPLINE_WORKERS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = epispline(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn same_files(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let (x, y) = (fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
        assert!(x == y, "{name:?} differs");
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn every_command_has_help() {
    for cmd in ["simulate", "rates", "fit", "bootstrap", "simstudy"] {
        let out = epispline(&[cmd, "--help"]);
        assert!(out.status.success());
        assert!(String::from_utf8_lossy(&out.stdout).contains("--config"));
    }
}

#[test]
fn flags_beat_the_file_and_the_file_beats_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("a.conf");
    fs::write(&conf, "# study settings\nscenario = 2\nseed = 5\nhorizon = 30\n").unwrap();
    let out = dir.path().join("out");
    ok(&["simulate", "--config", s(&conf), "--seed", "7", "-o", s(&out)]);
    let run = fs::read_to_string(out.join("run.conf")).unwrap();
    assert!(run.contains("scenario = 2\n") && run.contains("seed = 7\n") && run.contains("window = 2\n"));
    assert_eq!(fs::read_to_string(out.join("path.csv")).unwrap().lines().count(), 32);
}

#[test]
fn fit_outputs_and_reproduction_from_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--seed", "1", "-o", s(&sim)]);
    let data = sim.join("path.csv");
    let first = dir.path().join("fit1");
    ok(&["fit", "--data", s(&data), "--degree", "3", "-o", s(&first)]);
    for f in ["model.json", "beta.csv", "bic_trace.csv", "fit.json", "manifest.json", "run.conf"] {
        assert!(first.join(f).exists(), "{f}");
    }
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(first.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["degree"], 3);
    let second = dir.path().join("fit2");
    ok(&["fit", "--config", s(&first.join("run.conf")), "-o", s(&second)]);
    same_files(&first, &second);
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--seed", "2", "-o", s(&sim)]);
    let data = sim.join("path.csv");
    let run = |workers: &str, out: &Path| {
        let o = Command::new(env!("CARGO_BIN_EXE_epispline"))
            .args(["bootstrap", "--data", s(&data), "--bootstrap", "20", "-o", s(out)])
            .env("EPISPLINE_WORKERS", workers)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run("1", &dir.path().join("w1"));
    run("3", &dir.path().join("w3"));
    same_files(&dir.path().join("w1"), &dir.path().join("w3"));
    let summary = fs::read_to_string(dir.path().join("w1/bootstrap.json")).unwrap();
    assert!(summary.contains("\"kept\": 20"));
}

#[test]
fn failures_exit_nonzero_into_quarantine() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad");
    let res = epispline(&["simulate", "--initial-infected", "2", "-o", s(&out)]);
    assert!(!res.status.success());
    let err = fs::read_to_string(out.join("quarantine/error.txt")).unwrap();
    assert!(err.contains("initial_infected"), "{err}");
    assert!(!out.join("manifest.json").exists());

    let csv = dir.path().join("cases.csv");
    fs::write(&csv, "date,cumulative_cases,active_cases\n2021-01-01,5,5\n2021-01-02,4,4\n").unwrap();
    let res = epispline(&["fit", "--data", s(&csv), "--population", "1000", "-o", s(&out)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("lines 3"));
}

#[test]
fn small_simulation_study() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study");
    ok(&[
        "simstudy", "--replicates", "2", "--bootstrap", "5", "--degrees", "0", "--families", "tau-leap,diffusion",
        "--horizon", "40", "-o", s(&out),
    ]);
    let imse = fs::read_to_string(out.join("imse.csv")).unwrap();
    assert_eq!(imse.lines().count(), 1 + 2 * 2);
    assert!(imse.lines().skip(1).all(|l| l.ends_with(",ok")), "{imse}");
    let cov = fs::read_to_string(out.join("coverage.csv")).unwrap();
    // 2 families x 24 band variants x 41 days.
    assert_eq!(cov.lines().count(), 1 + 2 * 24 * 41);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["fits"][0]["fitted"], 2);
}
