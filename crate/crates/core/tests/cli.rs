use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use scorebox::ExperienceBundle;

fn scorebox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scorebox"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("bench.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = r#"
seed = 3

[domain]
n = 30

[loocv]
folds = 8
rand_repeats = 4
"#;

#[test]
fn golden_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = scorebox(&["golden", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("golden: PASS"));
}

#[test]
fn bad_configuration_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[loocv]\nzeta = 1.0\nbogus = 3\n");
    assert_eq!(
        scorebox(&["loocv", "--config", &cfg]).status.code(),
        Some(2)
    );

    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("o");
    let o = out_dir.to_str().unwrap();
    assert_eq!(
        scorebox(&[
            "loocv",
            "--config",
            &cfg,
            "--out",
            o,
            "--policies",
            "box,nope"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        scorebox(&["loocv", "--config", &cfg, "--out", o, "--k", "999"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        scorebox(&["loocv", "--config", &cfg, "--out", o, "--zeta", "-1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn gen_then_loocv_and_minset_from_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let gen_out = dir.path().join("gen");
    let out = scorebox(&["gen", "--config", &cfg, "--out", gen_out.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let bundle = ExperienceBundle::read_dir(&gen_out.join("bundle")).unwrap();
    assert_eq!(bundle.n(), 30);

    let from_bundle = format!("bundle = {:?}\n{SMALL}", gen_out.join("bundle"));
    let cfg = write_config(dir.path(), &from_bundle);
    let run_out = dir.path().join("run");
    let r = run_out.to_str().unwrap();
    let out = scorebox(&[
        "loocv",
        "--config",
        &cfg,
        "--out",
        r,
        "--policies",
        "box,static,rand",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(run_out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n"], 30);
    assert_eq!(summary["folds"], 8);
    let curves = fs::read_to_string(run_out.join("curves.csv")).unwrap();
    assert!(curves.starts_with("policy,budget,mean_score,ci95"));
    assert!(fs::read_to_string(run_out.join("firstfeasible.csv"))
        .unwrap()
        .contains("static"));

    let out = scorebox(&["minset", "--config", &cfg, "--out", r]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let set: serde_json::Value =
        serde_json::from_slice(&fs::read(run_out.join("minset.json")).unwrap()).unwrap();
    assert!(!set["indices"].as_array().unwrap().is_empty());
    assert!(run_out.join("minset_report.json").exists());
}

#[test]
fn synthetic_regret_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[regret]\ntrials = 200\nk = 4\n\n[regret.synthetic]\nm = 8\n",
    );
    let out = scorebox(&[
        "regret",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("regret.json")).unwrap()).unwrap();
    assert_eq!(report["trials"], 200);
    assert!(
        report["violation_rate"].as_f64().unwrap() <= 0.05 + 3.0 * (0.05f64 * 0.95 / 200.0).sqrt()
    );
}
