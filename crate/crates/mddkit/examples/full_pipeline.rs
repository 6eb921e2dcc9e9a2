//! The whole toolchain in one pass: parse the model, check every constraint
//! layer, generate code offline, measure its complexity, simulate the
//! mission, and check the trace against the modeled flow.
//!
//! Run with: `cargo run --example full_pipeline`

use mddkit::codegen::{assemble_prompt, audit_artifact, generate, BackendConfig, LayerTexts};
use mddkit::complexity::{build_cfg_from_source, report, sim_profile};
use mddkit::constraint::{parse_constraints, reconcile_cardinality, CodeQualityRuleSet};
use mddkit::ontology::{check_predicate_consistency, register_ontology};
use mddkit::sim::{check_conformance, derive_expected_flow, run_mission, SimConfig};
use mddkit::{load_model, validate_model};
use std::path::PathBuf;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn main() -> anyhow::Result<()> {
    // 1. Structural + behavioral layers.
    let model_paths = [
        fixture("model/classes.puml"),
        fixture("model/uv_states.puml"),
        fixture("model/mission_activity.puml"),
    ];
    let (model, _) = load_model(&model_paths)?;
    println!("parse:    {} classes, {} defects", model.classes.len(), validate_model(&model).len());

    // 2. Constraint and ontology layers, cross-checked against the model.
    let (constraints, _) =
        parse_constraints(&std::fs::read_to_string(fixture("constraints/case_study.ocl"))?);
    let (mut registry, _) =
        register_ontology(&std::fs::read_to_string(fixture("ontology/case_study.onto"))?)?;
    registry.extend(&std::fs::read_to_string(fixture("ontology/discovery.onto"))?)?;
    let cardinality_defects = reconcile_cardinality(&model, &constraints);
    let predicate_violations = check_predicate_consistency(&registry, &model);
    println!(
        "check:    {} constraints, {} cardinality mismatches, {} predicate violations",
        constraints.len(),
        cardinality_defects.len(),
        predicate_violations.len()
    );

    // 3. Code generation (offline backend) and audit.
    let layers = LayerTexts::load(
        &model_paths,
        fixture("constraints/case_study.ocl"),
        &[fixture("ontology/case_study.onto"), fixture("ontology/discovery.onto")],
    )?;
    let bundle = assemble_prompt(&layers, "sim")?;
    let artifact = generate(&bundle, &BackendConfig::offline())?;
    let audit = audit_artifact(&artifact, &CodeQualityRuleSet::default());
    println!("generate: {} files, {} audit violations", artifact.files.len(), audit.len());

    // 4. Structural evaluation of the generated code.
    let units = build_cfg_from_source(&artifact.files, &sim_profile())?;
    let graphs: Vec<_> = units.into_iter().map(|u| u.cfg).collect();
    let table = report(&graphs)?;
    println!("analyze:  model total M = {}", table.model_total);

    // 5. Behavioral evaluation: simulate and check conformance.
    let config = SimConfig { seed: 42, ..Default::default() };
    let outcome = run_mission(&model, &registry, &constraints, &config)?;
    let roster: Vec<String> = config.roster.iter().map(|e| e.id.clone()).collect();
    let flow = derive_expected_flow(&model, &registry, &roster, config.discovery)?;
    let verdict = check_conformance(&outcome.trace, &flow, config.conformance_mode, &registry);
    println!(
        "simulate: {} events, fleet performance {}",
        outcome.trace.len(),
        outcome.fleet_performance
    );
    println!("conform:  {:?}", verdict.verdict);
    Ok(())
}
