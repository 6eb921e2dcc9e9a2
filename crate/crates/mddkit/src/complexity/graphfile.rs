//! Ingestion of `.cfg.json` graph files: `{ "units": [ { "name", "entry",
//! "nodes", "edges" } ] }`. Node ids are normalized by trimming whitespace;
//! schema problems carry a path into the document.

use super::{ComplexityError, ControlFlowGraph};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
struct GraphDoc {
    units: Vec<GraphUnit>,
}

#[derive(Debug, Deserialize)]
struct GraphUnit {
    name: String,
    #[serde(default)]
    entry: Option<String>,
    nodes: Vec<String>,
    edges: Vec<(String, String)>,
}

/// Loads every unit in the file as a control-flow graph, plus one warning
/// per collapsed duplicate edge.
pub fn build_cfg_from_graphfile(
    path: impl AsRef<Path>,
) -> Result<(Vec<ControlFlowGraph>, Vec<String>), ComplexityError> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ComplexityError::Schema {
        path: label.clone(),
        message: format!("cannot read file: {e}"),
    })?;
    build_cfg_from_json(&label, &text)
}

pub fn build_cfg_from_json(
    label: &str,
    text: &str,
) -> Result<(Vec<ControlFlowGraph>, Vec<String>), ComplexityError> {
    let doc: GraphDoc = serde_json::from_str(text).map_err(|e| ComplexityError::Schema {
        path: label.to_string(),
        message: e.to_string(),
    })?;
    let mut graphs = Vec::with_capacity(doc.units.len());
    let mut warnings = Vec::new();
    for (idx, unit) in doc.units.into_iter().enumerate() {
        let nodes: Vec<String> = unit.nodes.iter().map(|n| n.trim().to_string()).collect();
        let edges: Vec<(String, String)> = unit
            .edges
            .iter()
            .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
            .collect();
        let entries = match &unit.entry {
            Some(entry) => vec![entry.trim().to_string()],
            None => Vec::new(),
        };
        if nodes.is_empty() {
            return Err(ComplexityError::Schema {
                path: format!("{label}: units[{idx}]"),
                message: format!("unit `{}` has no nodes", unit.name),
            });
        }
        for entry in &entries {
            if !nodes.contains(entry) {
                return Err(ComplexityError::Schema {
                    path: format!("{label}: units[{idx}].entry"),
                    message: format!("entry `{entry}` is not a declared node"),
                });
            }
        }
        let (cfg, mut unit_warnings) = ControlFlowGraph::build(unit.name, nodes, edges, entries)
            .map_err(|e| match e {
                ComplexityError::Schema { path, message } => ComplexityError::Schema {
                    path: format!("{label}: units[{idx}] ({path})"),
                    message,
                },
                other => other,
            })?;
        warnings.append(&mut unit_warnings);
        graphs.push(cfg);
    }
    Ok((graphs, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexity::{cyclomatic, report};
    use std::path::PathBuf;

    fn fixture(rel: &str) -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
    }

    #[test]
    fn table1_fixture_reproduces_reference_complexities() {
        let (graphs, warnings) = build_cfg_from_graphfile(fixture("graphs/table1.cfg.json")).unwrap();
        assert!(warnings.is_empty());
        let ms: Vec<i64> =
            graphs.iter().map(|g| cyclomatic(g).unwrap().complexity).collect();
        assert_eq!(ms, vec![2, 4, 4, 2]);
        assert_eq!(report(&graphs).unwrap().model_total, 12);
    }

    #[test]
    fn table2_fixture_reproduces_reference_complexities() {
        let (graphs, _) = build_cfg_from_graphfile(fixture("graphs/table2.cfg.json")).unwrap();
        let ms: Vec<i64> =
            graphs.iter().map(|g| cyclomatic(g).unwrap().complexity).collect();
        assert_eq!(ms, vec![3, 5, 6, 3]);
        assert_eq!(report(&graphs).unwrap().model_total, 17);
    }

    #[test]
    fn edge_to_missing_node_is_schema_error_with_path() {
        let err = build_cfg_from_json(
            "bad.json",
            r#"{"units":[{"name":"u","nodes":["a"],"edges":[["a","ghost"]]}]}"#,
        )
        .unwrap_err();
        match err {
            ComplexityError::Schema { path, message } => {
                assert!(path.contains("units[0]"), "{path}");
                assert!(message.contains("ghost"));
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_is_schema_error() {
        assert!(matches!(
            build_cfg_from_json("bad.json", "{"),
            Err(ComplexityError::Schema { .. })
        ));
    }

    #[test]
    fn ids_are_trimmed() {
        let (graphs, _) = build_cfg_from_json(
            "ok.json",
            r#"{"units":[{"name":"u","nodes":[" a ","b"],"edges":[["a"," b"]]}]}"#,
        )
        .unwrap();
        assert_eq!(graphs[0].nodes, vec!["a", "b"]);
        assert_eq!(graphs[0].edges, vec![("a".to_string(), "b".to_string())]);
    }
}
