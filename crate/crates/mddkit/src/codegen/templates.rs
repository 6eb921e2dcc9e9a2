//! Offline backend: deterministic template expansion. Parses the bundle's
//! structural layer and emits one simulation-dialect file per agent class
//! plus a main entry file. Pure: identical bundles yield identical bytes.

use super::{CodegenError, PromptBundle};
use crate::model::{ClassDef, UmlModel};
use crate::puml::{self, DiagramKind, SourceUnit};

pub fn expand_templates(bundle: &PromptBundle) -> Result<Vec<(String, String)>, CodegenError> {
    let model = parse_structural(&bundle.structural_text)?;
    let mut files = Vec::with_capacity(model.classes.len() + 1);
    for class in &model.classes {
        let parent = model.parent_of(&class.name).map(str::to_string);
        files.push((
            format!("{}.sim", snake_case(&class.name)),
            agent_file(class, parent.as_deref()),
        ));
    }
    files.push(("main.sim".to_string(), main_file(&model)));
    Ok(files)
}

fn parse_structural(text: &str) -> Result<UmlModel, CodegenError> {
    // The structural text may concatenate several diagrams; split on headers.
    let mut units = Vec::new();
    let mut current = String::new();
    for line in text.lines() {
        if line.trim_start().starts_with("@startuml") && !current.trim().is_empty() {
            units.push(std::mem::take(&mut current));
        }
        current.push_str(line);
        current.push('\n');
    }
    if !current.trim().is_empty() {
        units.push(current);
    }

    let mut model = UmlModel::default();
    for (idx, text) in units.iter().enumerate() {
        let unit = SourceUnit::new(format!("<structural:{idx}>"), text.clone(), None)
            .map_err(|e| CodegenError::BrokenLayer { layer: "structural", message: e.to_string() })?;
        if unit.kind == DiagramKind::ClassDiagram {
            let (partial, _) = puml::parse_class_diagram(&unit).map_err(|e| {
                CodegenError::BrokenLayer { layer: "structural", message: e.to_string() }
            })?;
            model.classes = partial.classes;
            model.relationships = partial.relationships;
        }
    }
    if model.classes.is_empty() {
        return Err(CodegenError::BrokenLayer {
            layer: "structural",
            message: "no classes in the structural layer".into(),
        });
    }
    Ok(model)
}

pub(crate) fn snake_case(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

fn agent_file(class: &ClassDef, parent: Option<&str>) -> String {
    let mut out = String::new();
    out.push_str("use runtime\nuse ontology\n\n");
    match parent {
        Some(parent) => out.push_str(&format!("agent {} extends {parent} {{\n", class.name)),
        None => out.push_str(&format!("agent {} {{\n", class.name)),
    }
    for attr in &class.attributes {
        let tag = if attr.type_tag.is_empty() { "string" } else { &attr.type_tag };
        out.push_str(&format!("    attr {} : {tag}\n", attr.name));
    }
    if !class.attributes.is_empty() {
        out.push('\n');
    }
    out.push_str(&body_for(class, parent));
    out.push_str("}\n");
    out
}

/// Handler bodies per agent role; classes outside the bundled roles get a
/// generic handler per modeled operation.
fn body_for(class: &ClassDef, parent: Option<&str>) -> String {
    match class.name.as_str() {
        "Operator" => OPERATOR_BODY.to_string(),
        "MCC" => MCC_BODY.to_string(),
        "UVF-Manager" => MANAGER_BODY.to_string(),
        "UV" => UV_BODY.to_string(),
        _ if parent.is_some() => format!(
            "    on start() {{\n        configure \"{}\"\n        report_ready\n    }}\n",
            class.name
        ),
        _ => generic_body(class),
    }
}

const OPERATOR_BODY: &str = r#"    on start() {
        send Mission-Brief to MCC
    }

    on receive Mission-Performance(msg) {
        if msg.performance-metric >= 50 {
            log "mission acceptable"
        } else {
            log "mission needs review"
        }
        stop_agent
    }
"#;

const MCC_BODY: &str = r#"    on receive Mission-Brief(msg) {
        send UV-Discovery-Request to UVF-Manager
    }

    on receive UV-List(msg) {
        if msg.uv-count == 0 {
            abort_mission
        } else {
            send Fleet-Plan to UVF-Manager
        }
    }

    on receive Fleet-Performance(msg) {
        send Mission-Performance to Operator
    }
"#;

const MANAGER_BODY: &str = r#"    on receive UV-Discovery-Request(msg) {
        send UV-List to MCC
    }

    on receive Fleet-Plan(msg) {
        for uv in roster {
            send UV-Task to uv
        }
    }

    on receive UV-Performance(msg) {
        record msg
        if all_performances_in {
            aggregate_fleet_performance
            send Fleet-Performance to MCC
        }
    }
"#;

const UV_BODY: &str = r#"    on receive UV-Task(msg) {
        if self.status != "Idle" {
            reject msg
        } else {
            set status "Active"
            run_task msg
        }
    }

    on task_complete() {
        set status "Idle"
        send UV-Performance to UVF-Manager
    }
"#;

fn generic_body(class: &ClassDef) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "    on start() {{\n        log \"{} online\"\n    }}\n",
        class.name
    ));
    for op in &class.operations {
        out.push_str(&format!(
            "\n    on {}(msg) {{\n        log \"{}\"\n    }}\n",
            op.name, op.name
        ));
    }
    out
}

fn main_file(model: &UmlModel) -> String {
    let mut out = String::new();
    out.push_str("use runtime\nuse ontology\n\nfn main() {\n");
    for class in &model.classes {
        out.push_str(&format!("    spawn {}\n", class.name));
    }
    out.push_str("    run_scheduler\n}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snake_case_handles_hyphens() {
        assert_eq!(snake_case("UVF-Manager"), "uvf_manager");
        assert_eq!(snake_case("Operator"), "operator");
    }
}
