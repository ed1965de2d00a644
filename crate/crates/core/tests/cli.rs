use std::path::Path;

use spinqubit::cli::{exit_code, run};
use spinqubit::error::Error;

fn argv<'a>(out: &'a str, rest: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["spinqubit", "--out-dir", out, "--seed", "9"];
    v.extend_from_slice(rest);
    v
}

fn hash_of(path: &Path) -> String {
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    v["config_hash"].as_str().unwrap().to_string()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(["spinqubit", "--help"]), 0);
    assert_eq!(run(["spinqubit", "gst-estimate", "--help"]), 0);
    assert_eq!(run(["spinqubit", "--version"]), 0);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(["spinqubit"]), 2);
    assert_eq!(run(["spinqubit", "no-such-command"]), 2);
    assert_eq!(run(["spinqubit", "design-pulse", "--tp", "banana"]), 2);
}

#[test]
fn numerical_errors_map_to_three() {
    assert_eq!(exit_code(&Error::NonConvergence { what: "mle", iterations: 10, residual: 1.0 }), 3);
    assert_eq!(exit_code(&Error::Divergence("x".into())), 3);
    assert_eq!(exit_code(&Error::Domain("x".into())), 2);
    assert_eq!(exit_code(&Error::Parse("x".into())), 2);
}

#[test]
fn missing_input_file_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(run(argv(out, &["gst-estimate", "--dataset", "/nonexistent.jsonl"])), 2);
    let bad = tmp.path().join("device.json");
    std::fs::write(&bad, "{\"not\": \"a device\"}").unwrap();
    assert_eq!(run(argv(out, &["--device", bad.to_str().unwrap(), "design-pulse"])), 2);
}

#[test]
fn gst_design_lists_every_circuit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(run(argv(out, &["gst-design", "--max-l", "2"])), 0);
    let text = std::fs::read_to_string(tmp.path().join("circuits.txt")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    let circuits: Vec<spinqubit::gst::Circuit> = lines.map(|l| l.parse().unwrap()).collect();
    assert_eq!(circuits.len(), spinqubit::gst::Design::standard(2).unwrap().n_circuits());
}

#[test]
fn design_pulse_then_simulate_from_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(run(argv(out, &["design-pulse", "--dt", "1e-10", "--window", "tukey"])), 0);
    let schedule = tmp.path().join("schedule.csv");
    let wave = std::fs::read_to_string(tmp.path().join("waveform.csv")).unwrap();
    assert!(wave.starts_with("# config_hash="));
    assert!(wave.lines().count() > 100);
    assert_eq!(run(argv(out, &["simulate-gate", "--gate", "X1", "--schedule", schedule.to_str().unwrap(), "--trials", "5"])), 0);
    let ptm: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("ptm.json")).unwrap()).unwrap();
    assert_eq!(ptm["seed"], 9);
}

#[test]
fn calibrate_loop_writes_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let code = run(argv(out, &["--shots", "10000", "calibrate-loop", "--max-l", "1", "--trials", "10", "--max-iters", "1"]));
    assert_eq!(code, 0);
    for f in ["conventional.json", "trace.csv", "calibration.json", "loop.json", "run.meta.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
}

#[test]
fn vqe_noiseless_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(run(argv(out, &["vqe-run", "--noiseless", "--n-theta", "6"])), 0);
    let csv = std::fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    // hash line, header, one row per bond length
    let hash_line = csv.lines().next().unwrap();
    let summary = hash_of(&tmp.path().join("vqe_summary.json"));
    assert_eq!(hash_line, format!("# config_hash={summary} seed=9"));
}

#[test]
fn command_line_overrides_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a");
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg,
        format!(r#"{{"seed": 3, "out_dir": "{}", "command_args": {{"n_theta": 5, "noiseless": true}}}}"#, out.display()),
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(run(["spinqubit", "--config", c, "vqe-run", "--seed", "9"]), 0);
    let from_config = hash_of(&out.join("vqe_summary.json"));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("vqe_summary.json")).unwrap()).unwrap();
    assert_eq!(v["seed"], 9);

    // the same resolved settings given directly hash identically
    let o = out.to_str().unwrap();
    assert_eq!(run(["spinqubit", "--out-dir", o, "--seed", "9", "vqe-run", "--n-theta", "5", "--noiseless"]), 0);
    assert_eq!(hash_of(&out.join("vqe_summary.json")), from_config);

    assert_eq!(run(["spinqubit", "--out-dir", o, "--seed", "9", "vqe-run", "--n-theta", "6", "--noiseless"]), 0);
    assert_ne!(hash_of(&out.join("vqe_summary.json")), from_config);
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"sede": 3}"#).unwrap();
    assert_eq!(run(["spinqubit", "--config", cfg.to_str().unwrap(), "gst-design"]), 2);
}

#[test]
fn depolarized_dataset_estimates_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let ds = format!("{out}/dataset.jsonl");
    assert_eq!(run(argv(out, &["gst-simulate", "--max-l", "4", "--depolarizing", "0.02"])), 0);
    assert_eq!(run(argv(out, &["gst-estimate", "--max-l", "4", "--dataset", &ds])), 0);
    let est: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("estimate.json")).unwrap()).unwrap();
    // truth is inside the model, so the violation is statistical only
    let n_sigma = est["model_violation"]["n_sigma"].as_f64().unwrap();
    assert!(n_sigma.abs() < 3.0, "n_sigma {n_sigma}");
}
