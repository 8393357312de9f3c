use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_tan");

fn config_json(output_dir: &str) -> serde_json::Value {
    serde_json::json!({
        "name": "cli",
        "dataset": {
            "kind": "generated",
            "generator": "moons",
            "spec": {
                "rotation_deg": 30.0,
                "positive_mode_shift": [0.0, -0.225],
                "noise_std": 0.15,
                "n_source": 80,
                "n_target": 80,
                "positive_fraction_target": 0.3
            }
        },
        "train": {
            "lambda": 1.0, "mu": 0.1, "alpha": 0.004, "beta": 0.0005, "gamma": 0.001,
            "upsilon": 0.75, "momentum": 0.9, "batch_per_domain": 16, "m": 8, "epochs": 2
        },
        "variant": "full",
        "seeds": [0],
        "output_dir": output_dir
    })
}

fn write_config(dir: &Path, value: &serde_json::Value) -> String {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p.to_str().unwrap().to_owned()
}

fn tan(args: &[&str], root: Option<&Path>) -> Output {
    let mut c = Command::new(BIN);
    c.args(args).env_remove("TAN_OUTPUT_ROOT");
    if let Some(r) = root {
        c.env("TAN_OUTPUT_ROOT", r);
    }
    c.output().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(tan(&["--help"], None).status.code(), Some(0));
    assert_eq!(tan(&["--version"], None).status.code(), Some(0));
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(tan(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(tan(&["train"], None).status.code(), Some(1));
}

#[test]
fn missing_or_invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(tan(&["train", "--config", missing.to_str().unwrap()], None).status.code(), Some(1));

    let mut v = config_json("out");
    v["variant"] = "cls_task".into();
    v["train"]["mu"] = 0.0.into();
    let cfg = write_config(dir.path(), &v);
    let out = tan(&["train", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu"));

    fs::write(dir.path().join("config.json"), "{ not json").unwrap();
    assert_eq!(tan(&["generate", "--config", &cfg], None).status.code(), Some(1));
}

#[test]
fn output_root_variable_places_relative_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("root");
    let cfg = write_config(dir.path(), &config_json("results"));
    let out = tan(&["generate", "--config", &cfg], Some(&root));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root.join("results/cli/data/source.csv").exists());
}

#[test]
fn train_with_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), &config_json(out_dir.to_str().unwrap()));
    let out = tan(&["train", "--config", &cfg, "--seeds", "1..2"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("2 seeds"), "{stdout}");
    assert!(stdout.contains("f1"));
    let runs: Vec<_> = fs::read_dir(out_dir.join("cli/runs")).unwrap().collect();
    assert_eq!(runs.len(), 1);
    let run = runs.into_iter().next().unwrap().unwrap().path();
    assert!(run.join("seed-1/log.csv").exists() && run.join("seed-2/log.csv").exists());
    assert!(!run.join("seed-0").exists());
}

#[test]
fn ablate_prints_four_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), &config_json(out_dir.to_str().unwrap()));
    let out = tan(&["ablate", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 5, "{stdout}");
}

#[test]
fn sweep_with_a_failing_cell_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), &config_json(out_dir.to_str().unwrap()));
    let out = tan(&["sweep", "--config", &cfg, "--param", "beta", "--values", "0.001,-1"], None);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("cli/sweep-beta.csv").exists());

    let out = tan(&["sweep", "--config", &cfg, "--param", "gamma", "--values", "1"], None);
    assert_eq!(out.status.code(), Some(1));
}
