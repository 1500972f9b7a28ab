//! Exit-code and output contract of the compiled `reconf` binary:
//! 0 success, 1 usage, 2 infeasible, 3 internal. Driven through real
//! process spawns so argument parsing, stdio, and error mapping are all on
//! the hook.

use std::path::PathBuf;
use std::process::{Command, Output};

fn case_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../cases/ieee37_mod.case")
}

fn reconf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reconf"))
        .args(args)
        .output()
        .expect("spawn reconf")
}

#[test]
fn help_exits_zero_and_lists_subcommands() {
    let out = reconf(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["generate", "train", "predict", "evaluate", "solve", "compare"] {
        assert!(text.contains(sub), "help should mention `{sub}`:\n{text}");
    }
}

#[test]
fn missing_arguments_exit_with_usage_code() {
    assert_eq!(reconf(&[]).status.code(), Some(1));
    assert_eq!(reconf(&["solve"]).status.code(), Some(1));
    assert_eq!(reconf(&["--definitely-not-a-flag"]).status.code(), Some(1));
}

#[test]
fn missing_case_file_exits_with_usage_code() {
    let out = reconf(&["solve", "--case", "/nonexistent/nowhere.case"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty(), "the failure should be explained on stderr");
}

#[test]
fn exact_solve_emits_parsable_json_and_exits_zero() {
    let case = case_path();
    let out = reconf(&["solve", "--case", case.to_str().unwrap(), "--no-timing"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("stdout should be a JSON report");
    assert_eq!(report["mode"], "exact");
    assert!(report["objective"].as_f64().unwrap() > 0.0);
    // Deterministic output asked for: no wall-clock field at all.
    assert!(report.get("wall_ms").is_none());
}

#[test]
fn impossible_operating_point_exits_with_infeasible_code() {
    let case_text = std::fs::read_to_string(case_path()).unwrap();
    let case = reconf_core::netcase::parse_case(&case_text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let scenario_file = dir.path().join("heavy.json");
    // Every load far beyond the feeders' combined capability, no pv help.
    let heavy = serde_json::json!({
        "load_scale": vec![3.0; case.loads.len()],
        "pv_scale": vec![0.0; case.pv_generators().len()],
    });
    std::fs::write(&scenario_file, heavy.to_string()).unwrap();

    let out = reconf(&[
        "solve",
        "--case",
        case_path().to_str().unwrap(),
        "--scenario",
        scenario_file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("no radial configuration"), "stderr: {text}");
}

#[test]
fn corrupt_model_file_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.bin");
    std::fs::write(&model, b"not a model at all").unwrap();
    let out = reconf(&[
        "predict",
        "--case",
        case_path().to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}
