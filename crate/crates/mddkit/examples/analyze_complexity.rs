//! Compute cyclomatic complexity two ways: from the bundled graph files
//! (reproducing the bundled per-agent reference numbers) and by extracting
//! control-flow graphs straight from generated source code.
//!
//! Run with: `cargo run --example analyze_complexity`

use mddkit::codegen::{assemble_prompt, generate, BackendConfig, LayerTexts};
use mddkit::complexity::{
    build_cfg_from_graphfile, build_cfg_from_source, classify, cyclomatic, report, sim_profile,
};
use std::path::PathBuf;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn main() -> anyhow::Result<()> {
    // The two deployment tables, from their exact-count graph files.
    for (label, file) in [
        ("construction constraints only", "graphs/table1.cfg.json"),
        ("construction + communication constraints", "graphs/table2.cfg.json"),
    ] {
        let (graphs, _) = build_cfg_from_graphfile(fixture(file))?;
        let table = report(&graphs)?;
        println!("{label}:");
        print!("{}", table.to_text_table());
        println!();
    }

    // The worked example graph.
    let (graphs, _) = build_cfg_from_graphfile(fixture("graphs/example_graph.cfg.json"))?;
    let counts = cyclomatic(&graphs[0])?;
    println!(
        "example graph: E={} N={} P={} -> M={} ({} risk)",
        counts.edges,
        counts.nodes,
        counts.components,
        counts.complexity,
        classify(counts.complexity)?
    );

    // Extraction from source: generate the offline artifact and measure it.
    let layers = LayerTexts::load(
        &[
            fixture("model/classes.puml"),
            fixture("model/uv_states.puml"),
            fixture("model/mission_activity.puml"),
        ],
        fixture("constraints/case_study.ocl"),
        &[fixture("ontology/case_study.onto"), fixture("ontology/discovery.onto")],
    )?;
    let artifact = generate(&assemble_prompt(&layers, "sim")?, &BackendConfig::offline())?;
    let units = build_cfg_from_source(&artifact.files, &sim_profile())?;
    println!("\ngenerated code, extracted per class:");
    for unit in &units {
        let counts = cyclomatic(&unit.cfg)?;
        println!(
            "  {:<14} M = {} (decision points: {})",
            unit.cfg.unit, counts.complexity, unit.decision_points
        );
    }
    Ok(())
}
