//! Check recorded traces against the flow the activity diagram implies, in
//! both modes: strict (exact order, fork branches may interleave) and
//! relaxed (expected events as a subsequence, schema-valid extras allowed).
//!
//! Run with: `cargo run --example check_conformance`

use mddkit::constraint::parse_constraints;
use mddkit::load_model;
use mddkit::ontology::register_ontology;
use mddkit::sim::{
    check_conformance, derive_expected_flow, run_mission, ConformanceMode, SimConfig,
};
use std::path::PathBuf;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn main() -> anyhow::Result<()> {
    let (model, _) = load_model(&[
        fixture("model/classes.puml"),
        fixture("model/uv_states.puml"),
        fixture("model/mission_activity.puml"),
    ])?;
    let (constraints, _) =
        parse_constraints(&std::fs::read_to_string(fixture("constraints/case_study.ocl"))?);
    let (mut registry, _) =
        register_ontology(&std::fs::read_to_string(fixture("ontology/case_study.onto"))?)?;
    registry.extend(&std::fs::read_to_string(fixture("ontology/discovery.onto"))?)?;

    let config = SimConfig::default();
    let roster: Vec<String> = config.roster.iter().map(|e| e.id.clone()).collect();

    // Two expected flows: the full one (with the discovery exchange the
    // deployed agents perform) and the bare modeled flow.
    let full_flow = derive_expected_flow(&model, &registry, &roster, true)?;
    let core_flow = derive_expected_flow(&model, &registry, &roster, false)?;
    println!(
        "expected events: {} with discovery, {} without",
        full_flow.event_count(),
        core_flow.event_count()
    );

    // A run with discovery: strict-conformant to the full flow, and still
    // relaxed-conformant to the core flow (the extra exchange is
    // schema-valid).
    let outcome = run_mission(&model, &registry, &constraints, &config)?;
    let strict = check_conformance(&outcome.trace, &full_flow, ConformanceMode::Strict, &registry);
    println!("\nfull trace vs full flow, strict:   {:?}", strict.verdict);
    let relaxed = check_conformance(&outcome.trace, &core_flow, ConformanceMode::Relaxed, &registry);
    println!("full trace vs core flow, relaxed:  {:?}", relaxed.verdict);
    let strict_core =
        check_conformance(&outcome.trace, &core_flow, ConformanceMode::Strict, &registry);
    println!(
        "full trace vs core flow, strict:   {:?} ({} mismatches)",
        strict_core.verdict,
        strict_core.mismatches.len()
    );

    // A run without discovery misses two events of the full flow.
    let bare = run_mission(
        &model,
        &registry,
        &constraints,
        &SimConfig { discovery: false, ..Default::default() },
    )?;
    let result = check_conformance(&bare.trace, &full_flow, ConformanceMode::Strict, &registry);
    println!("\nbare trace vs full flow, strict:   {:?}", result.verdict);
    for mismatch in &result.mismatches {
        println!("  {mismatch:?}");
    }
    Ok(())
}
