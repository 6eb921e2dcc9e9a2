//! Load the bundled fleet model from its PlantUML sources and walk the
//! result: classes, inheritance, the vehicle state machine, and the
//! mission activity flow.
//!
//! Run with: `cargo run --example parse_model`

use mddkit::{load_model, resolve_hierarchy, validate_model};
use std::path::PathBuf;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn main() -> anyhow::Result<()> {
    let (model, diagnostics) = load_model(&[
        fixture("model/classes.puml"),
        fixture("model/uv_states.puml"),
        fixture("model/mission_activity.puml"),
    ])?;

    println!("classes:");
    for class in &model.classes {
        let chain = resolve_hierarchy(&model, &class.name)?;
        let lineage = if chain.is_empty() {
            String::new()
        } else {
            format!("  (inherits {})", chain.join(" -> "))
        };
        println!(
            "  {:<12} {} attributes, {} operations{lineage}",
            class.name,
            class.attributes.len(),
            class.operations.len()
        );
    }

    let machine = model.state_machine_for("UV").expect("bundled model has the UV machine");
    println!("\nstate machine for {}: initial = {}", machine.owner, machine.initial);
    for transition in &machine.transitions {
        println!("  {} --{}--> {}", transition.from, transition.trigger, transition.to);
    }

    let activity = model.activity.as_ref().expect("bundled model has an activity flow");
    println!("\nactivity flow: {} nodes, {} edges", activity.nodes.len(), activity.edges.len());

    let defects = validate_model(&model);
    println!("\nstructural defects: {}", defects.len());
    for diagnostic in &diagnostics {
        println!("diagnostic: {diagnostic}");
    }

    // The canonical JSON document is what `mddkit parse --emit-model` writes.
    println!("\ncanonical document: {} bytes", model.to_canonical_json().len());
    Ok(())
}
