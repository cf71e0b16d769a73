use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 4] = ["--set", "grid.N=128", "--set", "search.budget=3"];

fn gsqg(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsqg"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("gsqg runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&o.stderr).lines().last().expect("stderr line")).expect("json error")
}

#[test]
fn pipeline_runs_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    for cmd in ["search", "continue", "construct", "verify"] {
        let o = gsqg(out, &[&[cmd][..], &SMALL[..]].concat());
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let v = json(&out.join("verify.json"));
    assert_eq!(v["residual_ok"], true);
    assert!(v["residual_max_relative"].as_f64().unwrap() < 1e-6);
    for s in v["separation"].as_array().unwrap() {
        assert!(s["relative_error"].as_f64().unwrap() < 0.02);
        assert_eq!(s["envelope_holds"], true);
    }
    let search = json(&out.join("search.json"));
    assert_eq!(search["status"], "instability-found");
    let manifest = json(&out.join("run_manifest.json"));
    let hash = manifest["config_hash"].as_str().unwrap().to_string();
    for cmd in ["search", "continue", "construct", "verify"] {
        assert_eq!(manifest["commands"][cmd]["exit_code"], 0);
    }
    for f in ["verify.json", "eigenpair.json", "continuation.json", "system/golovkin.json"] {
        assert_eq!(json(&out.join(f))["config_hash"], hash.as_str(), "{f}");
    }
    let csv = std::fs::read_to_string(out.join("continuation.csv")).unwrap();
    assert!(csv.starts_with(&format!("# config_hash={hash}")));

    let other = gsqg(out, &["verify", "--set", "grid.N=128", "--set", "search.budget=3", "--set", "grid.r_max=29"]);
    assert_eq!(code(&other), 4);
    assert_eq!(stderr_json(&other)["error"], "missing-prerequisite");

    let path = out.join("system/golovkin.json");
    let mut sys = json(&path);
    let re = sys["lambda"][0].as_f64().unwrap();
    sys["lambda"][0] = Value::from(re + 1e-3);
    std::fs::write(&path, serde_json::to_string_pretty(&sys).unwrap()).unwrap();
    let o = gsqg(out, &[&["verify"][..], &SMALL[..]].concat());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let err = stderr_json(&o);
    assert_eq!(err["command"], "verify");
    assert_eq!(err["exit_code"], 3);
    assert_eq!(json(&out.join("run_manifest.json"))["commands"]["verify"]["exit_code"], 3);
}

#[test]
fn spectrum_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["spectrum", "--set", "grid.N=48", "--threads", "1"];
    assert_eq!(code(&gsqg(a.path(), &args)), 0);
    assert_eq!(code(&gsqg(b.path(), &args)), 0);
    for f in ["spectrum.json", "spectrum.csv", "biot_savart_check.json", "run_manifest.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    let s = json(&a.path().join("spectrum.json"));
    assert_eq!(s["modes"].as_array().unwrap().len(), 10);
    let check = json(&a.path().join("biot_savart_check.json"));
    assert!(check["relative_difference"].as_f64().unwrap() < 1e-2);
}

#[test]
fn inadmissible_beta_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsqg(dir.path(), &["spectrum", "--beta", "5"]);
    assert_eq!(code(&o), 2);
    let err = stderr_json(&o);
    assert_eq!(err["error"], "validation");
    assert!(err["message"].as_str().unwrap().contains("0 < β < 3+α"));
    assert!(!dir.path().join("spectrum.json").exists());
}

#[test]
fn missing_prerequisites_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["continue", "construct", "verify"] {
        let o = gsqg(dir.path(), &[cmd]);
        assert_eq!(code(&o), 4, "{cmd}");
        assert_eq!(stderr_json(&o)["error"], "missing-prerequisite");
    }
}

#[test]
fn regimes_at_the_heat_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = gsqg(dir.path(), &["regimes", "--alpha", "0", "--beta", "2"]);
    assert_eq!(code(&o), 0);
    let r = json(&dir.path().join("regimes.json"));
    assert_eq!(r["solution"], "critical");
    assert_eq!(r["force"], "strict");
    let classes = std::fs::read_to_string(dir.path().join("classes.csv")).unwrap();
    assert!(classes.lines().any(|l| l == "class,threshold,holds,citation"));
    assert!(classes.lines().any(|l| l.starts_with("Ladyzhenskaya–Prodi–Serrin,") && l.contains(",true,")));
    let sweep = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().filter(|l| !l.starts_with('#')).count(), 1 + 11 * 41);
}

#[test]
fn flags_override_config_file_and_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[problem]\nbeta = 1.2\nalpha = 0.5\n").unwrap();
    let out = dir.path().join("out");
    let o = gsqg(&out, &["regimes", "--config", cfg.to_str().unwrap(), "--set", "problem.beta=1.4", "--beta", "1.6", "--flip-shift-sign"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("run_manifest.json"));
    assert_eq!(m["config"]["problem"]["beta"], 1.6);
    assert_eq!(m["config"]["problem"]["alpha"], 0.5);
    assert_eq!(m["config"]["problem"]["convention"], "flipped");

    let o = gsqg(&out, &["regimes", "--set", "problem.gamma=1"]);
    assert_eq!(code(&o), 2);
}
