use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const T11I: &str = r#"
name = "same"
alpha = 4
gamma = 2
S = "0"
B = { "11" = "x2" }
tasks = ["classify", "minimize", "probe"]
"#;

const T11I_JSON: &str = r#"{
  "name": "same",
  "alpha": 4,
  "gamma": 2,
  "S": "0",
  "B": { "11": "x2" },
  "tasks": ["classify", "minimize", "probe"]
}"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prestrain")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn usage_and_config_errors_exit_two() {
    assert_eq!(bin(&[]).status.code(), Some(2));
    assert_eq!(bin(&["run", "/nonexistent/scenario.toml"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "a.toml", T11I);
    let out = bin(&["run", &cfg, "--grid", "9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid"));
    let bad = write(tmp.path(), "bad.toml", "alpha = 4\nS = \"0\"\nB = \"0\"\ntasks = [\"classify\"]\n");
    let out = bin(&["classify", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));
}

#[test]
fn unwritable_output_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = write(tmp.path(), "file", "");
    let cfg = write(tmp.path(), "c.toml", "alpha = 4\ngamma = 2\nS = \"0\"\nB = \"0\"\ntasks = [\"classify\"]\n");
    let out = bin(&["run", &cfg, "--out", &format!("{blocker}/sub")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn classify_prints_the_regime() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "a.toml", T11I);
    let out = bin(&["classify", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["theorem_case"], "T1.1-i");
    assert_eq!(v["predicted_exponent"], 4.0);
}

#[test]
fn run_writes_all_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "a.toml", T11I);
    let out_dir = tmp.path().join("out");
    let out = bin(&["run", &cfg, "--grid", "17", "--seed", "3", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "timings.json", "v.csv", "w.csv", "probe.csv"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let r = report(&out_dir);
    assert_eq!(r["regime"]["theorem_case"], "T1.1-i");
    assert!(fs::read_to_string(out_dir.join("v.csv")).unwrap().lines().count() > 17 * 17);
}

#[test]
fn toml_and_json_configs_hash_alike() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(tmp.path(), "a.toml", T11I);
    let b = write(tmp.path(), "b.json", T11I_JSON);
    let (oa, ob) = (tmp.path().join("oa"), tmp.path().join("ob"));
    for (cfg, o) in [(&a, &oa), (&b, &ob)] {
        let out = bin(&["run", cfg, "--grid", "17", "--out", o.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let (ra, rb) = (report(&oa), report(&ob));
    assert!(ra["config_hash"].as_str().unwrap().len() == 64);
    assert_eq!(ra["config_hash"], rb["config_hash"]);
}

#[test]
fn sweep_writes_one_directory_per_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfgs = tmp.path().join("cfgs");
    fs::create_dir(&cfgs).unwrap();
    write(&cfgs, "first.toml", T11I);
    write(&cfgs, "second.json", T11I_JSON);
    write(&cfgs, "notes.txt", "ignored");
    let base = tmp.path().join("sweep");
    let out = bin(&["sweep", cfgs.to_str().unwrap(), "--grid", "17", "--out", base.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(base.join("first").join("report.json").is_file());
    assert!(base.join("second").join("report.json").is_file());
    assert!(!base.join("notes").exists());
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(bin(&["sweep", empty.to_str().unwrap()]).status.code(), Some(2));
}
