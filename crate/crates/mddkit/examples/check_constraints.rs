//! Evaluate the five construction-constraint categories over instance data:
//! uniqueness, cardinality, and value invariants over a store, and the
//! pre/postcondition contract of the task-assignment operation.
//!
//! Run with: `cargo run --example check_constraints`

use mddkit::constraint::{
    check_invariants, check_transition_contract, parse_constraints, AttrValue, InstanceStore,
};
use mddkit::load_model;
use std::collections::BTreeMap;
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
    let text = std::fs::read_to_string(fixture("constraints/case_study.ocl"))?;
    let (constraints, diagnostics) = parse_constraints(&text);
    for diagnostic in &diagnostics {
        println!("diagnostic: {diagnostic}");
    }
    println!("parsed {} constraints:", constraints.len());
    for constraint in &constraints {
        println!("  [{:<13}] {} on {}", constraint.kind.as_str(), constraint.id, constraint.context);
    }

    // A conforming store first, then one with every category breached.
    let conforming =
        InstanceStore::from_json(&std::fs::read_to_string(fixture("instances/conforming.json"))?)?;
    println!(
        "\nconforming store: {} violations",
        check_invariants(&model, &conforming, &constraints).len()
    );

    let violating =
        InstanceStore::from_json(&std::fs::read_to_string(fixture("instances/violating.json"))?)?;
    println!("violating store:");
    for violation in check_invariants(&model, &violating, &constraints) {
        println!("  {violation}");
    }

    // Operation contract: the vehicle may only take a task while idle, and
    // must be active afterwards.
    let attrs = |status: &str| -> BTreeMap<String, AttrValue> {
        BTreeMap::from([("status".to_string(), AttrValue::Str(status.to_string()))])
    };
    let ok = check_transition_contract(&constraints, "receiveTask", &attrs("Idle"), &attrs("Active"))?;
    println!("\nIdle -> Active contract: {} violations", ok.len());
    let stuck = check_transition_contract(&constraints, "receiveTask", &attrs("Idle"), &attrs("Idle"))?;
    for violation in &stuck {
        println!("Idle -> Idle contract: {violation}");
    }
    Ok(())
}
