//! Drives the command-line front end in-process: pulse design, then a GST
//! dataset and its estimate, then Bell states.

fn main() {
    let dir = std::env::temp_dir().join("spinqubit-cli-pipeline");
    let out = dir.to_str().expect("utf-8 temp dir");
    let ds = format!("{out}/dataset.jsonl");
    let est = format!("{out}/estimate.json");
    let steps: [&[&str]; 4] = [
        &["design-pulse", "--dt", "1e-10"],
        &["gst-simulate", "--max-l", "2", "--zi-error-deg", "1", "--shots", "5000"],
        &["gst-estimate", "--max-l", "2", "--dataset", &ds],
        &["bell-reconstruct", "--estimate", &est],
    ];
    for s in steps {
        let mut argv = vec!["spinqubit", "--out-dir", out];
        argv.extend_from_slice(s);
        let code = spinqubit::cli::run(argv);
        assert_eq!(code, 0, "{s:?} failed");
    }
}
