use std::path::Path;
use std::process::{Command, Output};

fn bvloc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bvloc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("bvloc runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn error_record(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error record");
    serde_json::from_str(line).expect("stderr ends with a JSON record")
}

#[test]
fn template_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = bvloc(dir.path(), &["--emit-template"]);
    assert!(out.status.success());
    let cfg = write_config(dir.path(), &String::from_utf8(out.stdout).unwrap());
    let run = bvloc(dir.path(), &["--config", &cfg, "--out", "a", "complete"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let feas = std::fs::read_to_string(dir.path().join("a/spiral_feasibility.txt")).unwrap();
    assert!(feas.contains("status: PASS"), "{feas}");
    assert!(feas.contains("ids: PASS"));
}

#[test]
fn short_truncation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "horizon = 1.0\ns_max = 0.5\n");
    let out = bvloc(dir.path(), &["--config", &cfg, "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["kind"], "config");
    assert!(rec["message"].as_str().unwrap().contains("s_max"));
}

#[test]
fn unknown_scenario_and_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"helix\"\n");
    let out = bvloc(dir.path(), &["--config", &cfg, "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["kind"], "config");

    let cfg = write_config(dir.path(), "[grid]\nstep = 3\n");
    let out = bvloc(dir.path(), &["--config", &cfg, "simulate"]);
    assert_eq!(error_record(&out)["kind"], "parse");
}

#[test]
fn approximate_needs_a_control_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"ex1f1\"\n");
    let out = bvloc(dir.path(), &["--config", &cfg, "--out", "o", "approximate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["kind"], "config");
}

#[test]
fn example_ii_payoffs_lie_in_bracket() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"example_ii\"\nexample_ii_k = [5, 10, 20]\n[grid]\nds = 0.002\n");
    let out = bvloc(dir.path(), &["--config", &cfg, "--out", "o", "payoff"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("o/example_ii_payoff.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for (row, k) in rows.iter().zip([5.0, 10.0, 20.0]) {
        let j: f64 = row[1].parse().unwrap();
        assert!((1.0 - 1e-4..=1.0 + 3.0 / k + 1e-4).contains(&j), "J = {j} for k = {k}");
        assert_eq!(&row[5], "true");
    }
}

#[test]
fn identical_configs_give_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"one_jump\"\n");
    for name in ["a", "b"] {
        let out = bvloc(dir.path(), &["--config", &cfg, "--out", name, "simulate"]);
        assert!(out.status.success());
    }
    for file in ["one_jump_xi.csv", "one_jump_x.csv", "one_jump_control.csv"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file} differs between runs");
    }
}

#[test]
fn verify_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = bvloc(dir.path(), &["--out", "o", "verify"]);
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{report}");
    assert_eq!(report.lines().filter(|l| l.ends_with(": PASS")).count(), 10, "{report}");
    let saved = std::fs::read_to_string(dir.path().join("o/verify_report.txt")).unwrap();
    assert!(report.starts_with(&saved));
}
