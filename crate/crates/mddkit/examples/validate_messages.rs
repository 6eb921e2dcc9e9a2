//! Build the communication-ontology registry and validate schema-typed
//! messages against it, then check the predicate assertions against the
//! model's relationships.
//!
//! Run with: `cargo run --example validate_messages`

use mddkit::constraint::AttrValue;
use mddkit::load_model;
use mddkit::ontology::{
    check_predicate_consistency, register_ontology, validate_message, ActionKind, AgentMessage,
};
use std::path::PathBuf;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn main() -> anyhow::Result<()> {
    let (mut registry, _) =
        register_ontology(&std::fs::read_to_string(fixture("ontology/case_study.onto"))?)?;
    registry.extend(&std::fs::read_to_string(fixture("ontology/discovery.onto"))?)?;

    println!("registry: {} concepts, {} predicates, {} actions",
        registry.concept_count(),
        registry.predicates().len(),
        registry.action_count(),
    );
    for concept in registry.concepts() {
        let fields: Vec<&str> = concept.fields.iter().map(|f| f.name.as_str()).collect();
        println!("  {:<22} {}", concept.name, fields.join(", "));
    }

    let message = |content: &[(&str, AttrValue)]| AgentMessage {
        sender: "Operator".into(),
        receiver: "MCC".into(),
        action: ActionKind::Send,
        schema: "Mission-Brief".into(),
        content: content.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        sequence_hint: 1,
        performative: Some("inform".into()),
    };

    let well_formed = message(&[
        ("mission-ID", AttrValue::Str("m-1".into())),
        ("description", AttrValue::Str("patrol the operations area".into())),
        ("status", AttrValue::Str("new".into())),
    ]);
    println!("\nwell-formed brief: {} violations", validate_message(&registry, &well_formed)?.len());

    let missing_status = message(&[
        ("mission-ID", AttrValue::Str("m-1".into())),
        ("description", AttrValue::Str("patrol".into())),
    ]);
    for violation in validate_message(&registry, &missing_status)? {
        println!("missing field: {violation}");
    }

    // Predicate assertions mirror the model's relationship kinds.
    let (model, _) = load_model(&[
        fixture("model/classes.puml"),
        fixture("model/uv_states.puml"),
        fixture("model/mission_activity.puml"),
    ])?;
    let inconsistencies = check_predicate_consistency(&registry, &model);
    println!("\npredicate assertions checked: {}", registry.assertions().len());
    println!("inconsistencies: {}", inconsistencies.len());
    Ok(())
}
