use std::process::{Command, Output};

fn phever(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phever"))
        .args(args)
        .env_remove("PHEVER_CALIBRATION")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn lists_every_family() {
    let out = phever(&["list-families"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 13);
    assert!(text.lines().any(|l| l.starts_with("type-d-ppmm")), "{text}");
}

#[test]
fn classifies_a_point() {
    let out = phever(&["classify", "--family", "type-n-2d", "--point", "0.5,0.7,0.9,1.1"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "SD: D, ASD: N");
}

#[test]
fn verify_writes_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = phever(&[
        "verify", "--family", "type-d-ppmm", "--set", "b0=1", "--points", "3", "--seed", "7", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["verdict"], "PASS");
    assert_eq!(report["seed"], 7);
    assert_eq!(report["params"]["b0"], "1");
    assert_eq!(report["records"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let out = phever(&[
        "verify", "--family", "type-d-pppp", "--points", "4", "--format", "csv", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("draw,"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(phever(&["verify", "--bogus"]).status.code(), Some(2));
    assert_eq!(phever(&["verify", "--family", "type-q"]).status.code(), Some(2));
    assert_eq!(phever(&["verify", "--family", "type-d-pppp", "--set", "nope=1"]).status.code(), Some(2));
}

#[test]
fn sampling_failure_exits_with_one() {
    let out = phever(&["verify", "--family", "type-ii-pppp", "--set", "Q=1", "--points", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sampling failure"));
}

#[test]
fn calibration_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("conventions.toml");
    let out = phever(&["calibrate", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("matches built-in calibration: yes"));
    let out = phever(&["verify", "--family", "type-d-pppp", "--points", "2", "--calibration", path.to_str().unwrap()]);
    assert!(out.status.success());

    let bad = Command::new(env!("CARGO_BIN_EXE_phever"))
        .args(["verify", "--family", "type-d-pppp", "--points", "2"])
        .env("PHEVER_CALIBRATION", dir.path().join("missing.toml"))
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn verify_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.toml");
    std::fs::write(&cfg, "points = 2\nseed = 7\n[family]\nfamily = \"type-d-ppmm\"\nparams = { b0 = \"1\" }\n").unwrap();
    let out = phever(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("family: type-d-ppmm"), "{text}");
    assert!(text.contains("seed: 7, points: 2"), "{text}");

    std::fs::write(&cfg, "points = 2\nfamilly = 3\n").unwrap();
    let out = phever(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}
