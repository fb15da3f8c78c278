//! End-to-end runs of the `cclab` binary.

mod common;

use common::{cclab, csv_lines, TINY_FLAGS};
use std::fs;

#[test]
fn unknown_experiment_lists_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = cclab(&["experiment", "bogus"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["noise_sweep", "context", "wedell", "effect_size", "actions"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn unknown_subcommand_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!cclab(&["fly"], dir.path()).status.success());
}

#[test]
fn invalid_override_names_key_and_range() {
    let dir = tempfile::tempdir().unwrap();
    let out = cclab(&["oracle", "--n", "10", "--env.p_error", "1.5"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("p_error") && err.contains("[0, 1]"), "{err}");
    let out = cclab(&["oracle", "--n", "10", "--env.nonsense", "1"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn config_parse_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "seed = 1\n[env\n").unwrap();
    let out = cclab(&["--config", path.to_str().unwrap(), "oracle", "--n", "10"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn oracle_prints_one_csv_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = cclab(&["oracle", "--n", "1000000", "--seed", "1"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1);
    let fields: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(fields.len(), 4);
    let estimate: f64 = fields[0].parse().unwrap();
    assert!((estimate - 16.29).abs() < 0.1, "{estimate}");
    assert_eq!(fields[2], "1000000");
    assert_eq!(fields[3], "1");
}

#[test]
fn shipped_config_matches_defaults() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml");
    let shipped = cclab::config::RunConfig::load(std::path::Path::new(path)).unwrap();
    shipped.validate().unwrap();
    assert_eq!(shipped.fingerprint(), cclab::config::RunConfig::default().fingerprint());
}

#[test]
fn seed_flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, "seed = 3\n").unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["--config", path.to_str().unwrap(), "oracle", "--n", "100"];
        args.extend_from_slice(extra);
        String::from_utf8(cclab(&args, dir.path()).stdout).unwrap()
    };
    assert!(run(&[]).trim_end().ends_with(",3"));
    assert!(run(&["--seed", "7"]).trim_end().ends_with(",7"));
    assert!(run(&["--seed=7"]).trim_end().ends_with(",7"));
}

#[test]
fn train_then_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = cclab(&["train", "--agent.n_train_samples", "20000", "--agent.curve_window", "500"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let policy = dir.path().join("policy.json");
    assert!(policy.exists());
    let curve = fs::read_to_string(dir.path().join("learning_curve.csv")).unwrap();
    let lines = csv_lines(&curve);
    assert_eq!(lines[0], "agent,seed,steps,episodes,mean_return");
    assert!(lines.len() > 2);
    assert!(curve.contains("# config_fingerprint="));
    assert!(dir.path().join("train.config.toml").exists());

    let out = cclab(&["evaluate", "--policy", policy.to_str().unwrap(), "--agent.eval_episodes", "500"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let lines = csv_lines(&metrics);
    assert_eq!(lines[0], "agent,seed,episodes,mean_chosen_ev,accuracy,mean_return,mean_comparisons,mean_calculations");
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(row[0], "integrated");
    assert_eq!(row[2], "500");
    let ev: f64 = row[3].parse().unwrap();
    assert!(ev > 0.0 && ev < 20.0);
}

#[test]
fn evaluate_without_policy_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = cclab(&["evaluate"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("policy"));
}

#[test]
fn fast_noise_sweep_writes_exact_header_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["experiment", "noise_sweep", "--fast"];
    args.extend_from_slice(TINY_FLAGS);
    let out = cclab(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("noise_sweep.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "agent,noise_axis,noise_level,seed,mean_ev,is_aggregate,ci_low,ci_high");
    assert!(csv.lines().last().unwrap().starts_with("# config_fingerprint="));
    let sidecar = fs::read_to_string(dir.path().join("noise_sweep.config.toml")).unwrap();
    // the sidecar is the effective config: overrides applied, file-loadable
    let cfg: cclab::config::RunConfig = cclab::config::RunConfig::from_toml_str(&sidecar, "sidecar").unwrap();
    assert_eq!(cfg.seeds, vec![1, 2]);
    assert_eq!(cfg.agent.n_train_samples, 5000);
    assert!(sidecar.starts_with(&format!("# config_fingerprint = \"{}\"", cfg.fingerprint())));
}

#[test]
fn out_flag_beats_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let out_dir = tempfile::tempdir().unwrap();
    let mut args = vec!["experiment", "context", "--out", out_dir.path().to_str().unwrap()];
    args.extend_from_slice(TINY_FLAGS);
    assert!(cclab(&args, env_dir.path()).status.success());
    assert!(out_dir.path().join("context.csv").exists());
    assert!(!env_dir.path().join("context.csv").exists());
}
