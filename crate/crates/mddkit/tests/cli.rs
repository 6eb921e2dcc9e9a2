//! End-to-end checks of the `mddkit` binary: exit codes, JSON output, and
//! the full pipeline over the bundled model.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
        .display()
        .to_string()
}

fn mddkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mddkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn model_args() -> Vec<String> {
    vec![
        "--model".into(),
        fixture("model/classes.puml"),
        fixture("model/uv_states.puml"),
        fixture("model/mission_activity.puml"),
    ]
}

fn layer_args() -> Vec<String> {
    let mut args = model_args();
    args.push("--constraints".into());
    args.push(fixture("constraints/case_study.ocl"));
    args.push("--ontology".into());
    args.push(fixture("ontology/case_study.onto"));
    args.push(fixture("ontology/discovery.onto"));
    args
}

fn run(args: Vec<String>) -> Output {
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    mddkit(&args)
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

#[test]
fn parse_reports_the_model_summary() {
    let mut args = vec!["parse".to_string()];
    args.extend(model_args());
    let output = run(args);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("classes: 7"));
    assert!(text.contains("state machines: 1"));
}

#[test]
fn parse_emit_model_matches_the_golden_document() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("model.json");
    let mut args = vec!["parse".to_string()];
    args.extend(model_args());
    args.push("--emit-model".into());
    args.push(out.display().to_string());
    assert!(run(args).status.success());

    let emitted = std::fs::read_to_string(&out).unwrap();
    let golden = std::fs::read_to_string(fixture("model/case_study.model.json")).unwrap();
    assert_eq!(emitted, golden, "canonical model document drifted");
}

#[test]
fn check_passes_on_conforming_instances() {
    let mut args = vec!["check".to_string()];
    args.extend(layer_args());
    args.push("--instances".into());
    args.push(fixture("instances/conforming.json"));
    let output = run(args);
    assert_eq!(output.status.code(), Some(0), "{}", stdout(&output));
}

#[test]
fn check_exits_one_on_violating_instances() {
    let mut args = vec!["check".to_string()];
    args.extend(layer_args());
    args.push("--instances".into());
    args.push(fixture("instances/violating.json"));
    let output = run(args);
    assert_eq!(output.status.code(), Some(1));
    let text = stdout(&output);
    assert!(text.contains("performanceRange"));
    assert!(text.contains("uniqueUvId"));
    assert!(text.contains("fleetCardinality"));
}

#[test]
fn check_json_has_a_stable_shape() {
    let mut args = vec!["check".to_string()];
    args.extend(layer_args());
    args.push("--format".into());
    args.push("json".into());
    let output = run(args);
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(parsed["command"], "check");
    assert_eq!(parsed["status"], "ok");
    assert_eq!(parsed["constraints"], 5);
    assert_eq!(parsed["concepts"], 8);
}

#[test]
fn analyze_prints_the_first_table() {
    let output = run(vec!["analyze".into(), "--graph".into(), fixture("graphs/table1.cfg.json")]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("Operator"));
    assert!(text.contains("UVF-Manager"));
    let complexity_line = text.lines().find(|l| l.starts_with("Complexity (M)")).unwrap();
    assert!(complexity_line.contains("12"));
}

#[test]
fn analyze_json_reports_rows_and_total() {
    let output = run(vec![
        "analyze".into(),
        "--graph".into(),
        fixture("graphs/table2.cfg.json"),
        "--format".into(),
        "json".into(),
    ]);
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(parsed["model_total"], 17);
    assert_eq!(parsed["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn analyze_source_directory_of_generated_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut generate = vec!["generate".to_string()];
    generate.extend(layer_args());
    generate.push("--backend".into());
    generate.push("offline".into());
    generate.push("--out".into());
    generate.push(dir.path().display().to_string());
    assert!(run(generate).status.success());

    let output = run(vec![
        "analyze".into(),
        "--source".into(),
        dir.path().display().to_string(),
        "--profile".into(),
        "sim".into(),
    ]);
    assert!(output.status.success(), "{}", stdout(&output));
    let text = stdout(&output);
    assert!(text.contains("UVF-Manager"));
    assert!(text.contains("main"));
}

#[test]
fn simulate_then_conform_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let trace_path = dir.path().join("mission.trace");
    let mut simulate = vec!["simulate".to_string()];
    simulate.extend(layer_args());
    simulate.push("--seed".into());
    simulate.push("42".into());
    simulate.push("--trace-out".into());
    simulate.push(trace_path.display().to_string());
    let output = run(simulate);
    assert!(output.status.success(), "{}", stdout(&output));
    assert_eq!(stdout(&output).lines().count(), 12);

    let golden = std::fs::read_to_string(fixture("traces/mission_seed42.trace")).unwrap();
    assert_eq!(std::fs::read_to_string(&trace_path).unwrap(), golden);

    let mut conform = vec!["conform".to_string()];
    conform.extend(layer_args());
    conform.push("--trace".into());
    conform.push(trace_path.display().to_string());
    conform.push("--mode".into());
    conform.push("strict".into());
    let output = run(conform);
    assert_eq!(output.status.code(), Some(0), "{}", stdout(&output));
    assert!(stdout(&output).contains("verdict: pass"));
}

#[test]
fn conform_fails_against_a_truncated_trace() {
    let dir = tempfile::tempdir().unwrap();
    let golden = std::fs::read_to_string(fixture("traces/mission_seed42.trace")).unwrap();
    let truncated: String =
        golden.lines().take(10).map(|l| format!("{l}\n")).collect();
    let trace_path = dir.path().join("short.trace");
    std::fs::write(&trace_path, truncated).unwrap();

    let mut conform = vec!["conform".to_string()];
    conform.extend(layer_args());
    conform.push("--trace".into());
    conform.push(trace_path.display().to_string());
    conform.push("--mode".into());
    conform.push("strict".into());
    let output = run(conform);
    assert_eq!(output.status.code(), Some(1));
    assert!(stdout(&output).contains("verdict: fail"));
}

#[test]
fn simulate_puml_output_is_a_sequence_diagram() {
    let mut simulate = vec!["simulate".to_string()];
    simulate.extend(layer_args());
    simulate.push("--emit".into());
    simulate.push("puml".into());
    let output = run(simulate);
    let text = stdout(&output);
    assert!(text.contains("@startuml"));
    assert!(text.contains("Operator -> MCC : Mission-Brief"));
}

#[test]
fn missing_file_is_a_config_error() {
    let output = run(vec!["parse".into(), "--model".into(), "nope.puml".into()]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn pipeline_offline_runs_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut pipeline = vec!["pipeline".to_string()];
    pipeline.extend(layer_args());
    pipeline.push("--backend".into());
    pipeline.push("offline".into());
    pipeline.push("--seed".into());
    pipeline.push("42".into());
    pipeline.push("--out".into());
    pipeline.push(dir.path().display().to_string());
    pipeline.push("--format".into());
    pipeline.push("json".into());
    let output = run(pipeline);
    assert_eq!(output.status.code(), Some(0), "{}", stdout(&output));

    let record: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    let stages: Vec<&str> = record["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["stage"].as_str().unwrap())
        .collect();
    assert_eq!(stages, vec!["parse", "check", "generate", "analyze", "simulate", "conform"]);
    assert!(record["stages"]
        .as_array()
        .unwrap()
        .iter()
        .all(|s| s["status"] == "ok"));
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("uvf_manager.sim").exists());
}

#[test]
fn pipeline_is_reproducible_modulo_durations() {
    let strip = |value: &mut serde_json::Value| {
        for stage in value["stages"].as_array_mut().unwrap() {
            stage["duration_ms"] = serde_json::Value::Null;
            stage["artifacts"] = serde_json::Value::Null;
        }
    };
    let mut records = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let mut pipeline = vec!["pipeline".to_string()];
        pipeline.extend(layer_args());
        pipeline.push("--backend".into());
        pipeline.push("offline".into());
        pipeline.push("--seed".into());
        pipeline.push("42".into());
        pipeline.push("--out".into());
        pipeline.push(dir.path().display().to_string());
        pipeline.push("--format".into());
        pipeline.push("json".into());
        let output = run(pipeline);
        let mut record: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
        strip(&mut record);
        records.push(record);
    }
    assert_eq!(records[0], records[1]);
}

#[test]
fn no_discovery_flag_shrinks_the_flow() {
    let mut simulate = vec!["simulate".to_string()];
    simulate.extend(layer_args());
    simulate.push("--no-discovery".into());
    simulate.push("--seed".into());
    simulate.push("42".into());
    let output = run(simulate);
    assert!(output.status.success());
    assert_eq!(stdout(&output).lines().count(), 10);
}
