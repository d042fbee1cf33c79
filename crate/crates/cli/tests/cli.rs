use std::path::PathBuf;
use std::process::{Command, Output};

fn slmarl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slmarl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

/// Default config cut down to a short horizon.
fn short_config(dir: &std::path::Path) -> String {
    let text = std::fs::read_to_string(config("default.toml")).unwrap();
    let text = text.replace("horizon = 20000", "horizon = 300");
    assert!(text.contains("horizon = 300"));
    let path = dir.join("short.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn version_prints_the_crate_version() {
    let out = slmarl(&["version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn default_config_passes_every_check() {
    let out = slmarl(&["check-assumptions", "--config", &config("default.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 8);
    assert!(!text.contains("FAIL"));
}

#[test]
fn negative_configs_exit_with_code_2() {
    for (name, check) in [
        ("negative_disconnected.toml", "strong_connectivity"),
        ("negative_uniform_likelihood.toml", "global_identifiability"),
        ("negative_oversized_beta.toml", "step_size_bound"),
    ] {
        let out = slmarl(&["check-assumptions", "--config", &config(name)]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains(&format!("FAIL {check}")), "{name}: {text}");
    }
}

#[test]
fn run_refuses_an_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = slmarl(&[
        "run",
        "--config",
        &config("negative_oversized_beta.toml"),
        "--seed",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.join("traces.csv").exists());
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[env]\nnum_agent = 4\n").unwrap();
    let out = slmarl(&["check-assumptions", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("num_agent"));
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = slmarl(&["run", "--config", &cfg, "--seed", "4", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["traces.csv", "summary.csv", "runs.csv", "config.toml"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let traces = std::fs::read_to_string(out_dir.join("traces.csv")).unwrap();
    assert!(traces.starts_with("run_id,arm,step,agent,metric,value\n"));
    let runs = std::fs::read_to_string(out_dir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().nth(1).unwrap(), "0,0.25,4");
}

#[test]
fn sweep_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = slmarl(&[
        "sweep",
        "--config",
        &cfg,
        "--eps",
        "0.25,0.125",
        "--seeds",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = std::fs::read_to_string(out_dir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 6);
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("eps,arm,metric,n,mean,stderr\n"));
    assert!(summary.lines().skip(1).all(|l| l.split(',').nth(3) == Some("3")));
}

#[test]
fn sweep_rejects_zero_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = slmarl(&[
        "sweep",
        "--config",
        &config("default.toml"),
        "--eps",
        "0.25",
        "--seeds",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
