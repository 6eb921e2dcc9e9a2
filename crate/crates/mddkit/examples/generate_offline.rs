//! Assemble the four model layers into a code-generation prompt and expand
//! it with the deterministic offline backend, then audit the generated
//! files against the code-quality rules.
//!
//! The HTTP backend takes the same bundle; swap in
//! `BackendConfig::http(endpoint, model, token_env)` to post the prompt to a
//! chat endpoint instead.
//!
//! Run with: `cargo run --example generate_offline`

use mddkit::codegen::{assemble_prompt, audit_artifact, generate, BackendConfig, LayerTexts};
use mddkit::constraint::CodeQualityRuleSet;
use std::path::PathBuf;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn main() -> anyhow::Result<()> {
    let layers = LayerTexts::load(
        &[
            fixture("model/classes.puml"),
            fixture("model/uv_states.puml"),
            fixture("model/mission_activity.puml"),
        ],
        fixture("constraints/case_study.ocl"),
        &[fixture("ontology/case_study.onto"), fixture("ontology/discovery.onto")],
    )?;
    let bundle = assemble_prompt(&layers, "sim")?;
    println!("prompt digest: {}", bundle.digest());
    println!("prompt size: {} bytes", bundle.render().len());

    let artifact = generate(&bundle, &BackendConfig::offline())?;
    println!("\ngenerated {} files:", artifact.files.len());
    for (path, content) in &artifact.files {
        println!("  {:<18} {} lines", path, content.lines().count());
    }

    let violations = audit_artifact(&artifact, &CodeQualityRuleSet::default());
    println!("\ncode-quality violations: {}", violations.len());

    let out = std::env::temp_dir().join("mddkit-generated");
    let written = artifact.write_to(&out)?;
    println!("wrote {} files under {}", written.len(), out.display());

    println!("\n--- {} ---", artifact.files[3].0);
    print!("{}", artifact.files[3].1);
    Ok(())
}
