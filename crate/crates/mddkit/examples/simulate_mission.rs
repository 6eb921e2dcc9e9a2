//! Run the deterministic fleet mission: the operator sends a brief, the
//! command center discovers and plans, the manager dispatches tasks, and
//! the performance metrics flow back up. Prints the trace and the sequence
//! diagram it renders to.
//!
//! Run with: `cargo run --example simulate_mission`

use mddkit::constraint::parse_constraints;
use mddkit::load_model;
use mddkit::ontology::register_ontology;
use mddkit::sim::{run_mission, SimConfig};
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

    let config = SimConfig { seed: 42, ..Default::default() };
    let outcome = run_mission(&model, &registry, &constraints, &config)?;

    println!("trace ({} events):", outcome.trace.len());
    print!("{}", outcome.trace.to_text());

    println!("\nfleet performance: {}", outcome.fleet_performance);
    println!("final vehicle states:");
    for (id, state) in &outcome.uv_states {
        println!("  {id:<8} {state}");
    }

    println!("\nsequence diagram:");
    print!("{}", outcome.trace.to_plantuml());

    // Same seed, same bytes.
    let again = run_mission(&model, &registry, &constraints, &config)?;
    println!(
        "\nreproducible: {}",
        if again.trace.to_text() == outcome.trace.to_text() { "yes" } else { "no" }
    );
    Ok(())
}
