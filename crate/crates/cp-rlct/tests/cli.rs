//! Exit codes, output text, and flag plumbing of the `cp-rlct` binary.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cp-rlct"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn bound_prints_all_ingredients() {
    let out = run(&["bound", "2", "2", "2", "4", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("bound            7"), "got:\n{text}");
    assert!(text.contains("core_term        5"), "got:\n{text}");
    assert!(text.contains("min residual     m1 = 2"), "got:\n{text}");
    assert!(text.contains("half_params      12"), "got:\n{text}");
    assert!(text.contains("obvious_lambda1  6"), "got:\n{text}");
}

#[test]
fn bound_formats_fractional_values_plainly() {
    // (2,2,2,H=8,H0=4): interior case with odd parity -> x.5 values.
    let out = run(&["bound", "2", "2", "2", "8", "4"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("bound            14.5"), "got:\n{}", stdout(&out));
}

#[test]
fn bound_rejects_zero_true_rank_with_exit_1() {
    let out = run(&["bound", "2", "2", "2", "4", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("H0 must be >= 1"), "got:\n{}", stderr(&out));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["bound", "2", "2"]).status.code(), Some(1));
    assert_eq!(run(&["bound", "2", "2", "2", "x", "1"]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["experiment"]).status.code(), Some(1)); // --config required
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["bound", "--help"]).status.code(), Some(0));
}

#[test]
fn table1_bounds_only_prints_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("t1.csv");
    let out = run(&[
        "table1",
        "--bounds-only",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("bound"), "got:\n{text}");
    assert_eq!(text.lines().count(), 16); // header + 15 cells
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert!(csv.starts_with("I,J,K,H,H0,n,"));
    assert_eq!(csv.lines().count(), 16);
}

#[test]
fn bound_agrees_with_table_csv_row() {
    // Single source of truth: the standalone bound for (3,3,3,H=4,H0=2)
    // equals the corresponding table row.
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("t1.csv");
    let table = run(&[
        "table1",
        "--bounds-only",
        "--format",
        "csv",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert!(table.status.success());
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let row = csv
        .lines()
        .find(|l| l.starts_with("3,3,3,4,2,"))
        .expect("grid row present");
    let fields: Vec<&str> = row.split(',').collect();

    let single = run(&["bound", "3", "3", "3", "4", "2"]);
    let text = stdout(&single);
    for (label, idx) in [("core_term", 6), ("m1", 7), ("m2", 8), ("m3", 9), ("bound", 10)] {
        let value = fields[idx];
        assert!(
            text.lines().any(|l| l.starts_with(label) && l.split_whitespace().nth(1) == Some(value)),
            "{label}={value} not in:\n{text}"
        );
    }
}

#[test]
fn config_validation_error_names_cell_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "[[cells]]\ni=2\nj=2\nk=2\nh=2\nh0=1\n\n[[cells]]\ni=2\nj=2\nk=2\nh=2\nh0=3\n",
    )
    .unwrap();
    let out = run(&["experiment", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("cell 1"), "got:\n{err}");
}

#[test]
fn malformed_toml_exits_1_with_line_context() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "[[cells]]\ni = \"two\"\n").unwrap();
    let out = run(&["experiment", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"), "got:\n{}", stderr(&out));
}

#[test]
fn missing_config_file_exits_1() {
    let out = run(&["experiment", "--config", "/nonexistent/nowhere.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_format_exits_1() {
    let out = run(&["table1", "--bounds-only", "--format", "yaml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("csv or json"), "got:\n{}", stderr(&out));
}

#[test]
fn quick_experiment_writes_json_and_trials() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("one.toml");
    std::fs::write(
        &config_path,
        r#"
master_seed = 3
truth_redraws = 1
datasets_per_cell = 1
n_test = 400

[mcmc]
total_iters = 2000
burn_in = 500
thin = 5
target_samples = 100
chains = 2

[[cells]]
i = 2
j = 2
k = 2
h = 1
h0 = 1
n = 30
"#,
    )
    .unwrap();
    let out_path = dir.path().join("res.json");
    let out = run(&[
        "experiment",
        "--config",
        config_path.to_str().unwrap(),
        "--format",
        "json",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr:\n{}", stderr(&out));

    let json = std::fs::read_to_string(&out_path).unwrap();
    let v: serde_json::Value = serde_json::from_str(json.trim()).unwrap();
    assert_eq!(v["i"], 2);
    assert!(v["lambda_hat"].is_f64());
    assert!(v["error"].is_null());

    let trials = std::fs::read_to_string(out_path.with_extension("trials.jsonl")).unwrap();
    assert_eq!(trials.lines().count(), 1);
    let t: serde_json::Value = serde_json::from_str(trials.trim()).unwrap();
    assert_eq!(t["n_test"], 400);
}

#[test]
fn dump_chains_writes_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("one.toml");
    std::fs::write(
        &config_path,
        r#"
master_seed = 4
truth_redraws = 1
datasets_per_cell = 1
n_test = 200

[mcmc]
total_iters = 1000
burn_in = 200
thin = 4
target_samples = 50
chains = 2

[[cells]]
i = 2
j = 2
k = 2
h = 1
h0 = 1
n = 20
"#,
    )
    .unwrap();
    let out_path = dir.path().join("res.csv");
    let out = run(&[
        "experiment",
        "--config",
        config_path.to_str().unwrap(),
        "--dump-chains",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr:\n{}", stderr(&out));
    let trace_dir = out_path.with_extension("traces");
    let mut names: Vec<String> = std::fs::read_dir(&trace_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        vec![
            "cell0_redraw0_data0_chain0.csv",
            "cell0_redraw0_data0_chain1.csv"
        ]
    );
    let trace = std::fs::read_to_string(trace_dir.join(&names[0])).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("iteration,log_posterior,step,accepted"));
    assert_eq!(lines.count(), 1000);
}

#[test]
fn quick_flag_shrinks_the_run() {
    // --quick on table1 is the CI profile: 3 trials per cell. Bounds-only
    // proves flag plumbing without Monte Carlo cost; here just assert the
    // flag parses and the run succeeds.
    let out = run(&["table1", "--quick", "--bounds-only"]);
    assert_eq!(out.status.code(), Some(0));
}
