//! Parsers for the PlantUML subset the toolchain accepts: class diagrams,
//! state diagrams, and activity diagrams.
//!
//! The grammar is deliberately closed. Only the constructs the model layer
//! can represent are parsed; presentation directives (notes, skinparam,
//! colors) are skipped with a warning diagnostic, and unparseable lines are
//! reported and skipped rather than failing the whole file.

mod activity_diagram;
mod class_diagram;
mod state_diagram;

pub use activity_diagram::parse_activity_diagram;
pub use class_diagram::parse_class_diagram;
pub use state_diagram::parse_state_diagram;

use crate::diag::{sort_diagnostics, ParseDiagnostic};
use crate::model::{validate_model, StateMachine, UmlModel};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagramKind {
    ClassDiagram,
    StateDiagram,
    ActivityDiagram,
}

impl fmt::Display for DiagramKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DiagramKind::ClassDiagram => "class diagram",
            DiagramKind::StateDiagram => "state diagram",
            DiagramKind::ActivityDiagram => "activity diagram",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum PumlError {
    #[error("empty input: `{0}` contains no diagram content")]
    EmptyInput(String),
    #[error("cannot detect diagram kind of `{0}`")]
    UnknownKind(String),
    #[error("`{path}` declared as {declared} but its content looks like {detected}")]
    KindMismatch { path: String, declared: DiagramKind, detected: DiagramKind },
    #[error("`{path}`: expected a {expected}, got a {actual}")]
    WrongKind { path: String, expected: DiagramKind, actual: DiagramKind },
    #[error("state diagram `{0}` has no initial state marker `[*] --> ...`")]
    MissingInitialState(String),
    #[error("unbalanced `{construct}` block at {path}:{line}")]
    UnbalancedBlock { path: String, line: u32, construct: String },
    #[error("conflicting duplicate definition of `{name}` between `{first}` and `{second}`")]
    ConflictingDuplicate { name: String, first: String, second: String },
    #[error("no input paths given")]
    NoInputs,
    #[error("more than one {0} among the inputs")]
    TooMany(DiagramKind),
    #[error("failed to read `{path}`")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One input file: its path, detected (or declared) kind, and raw text with
/// line endings normalized to `\n`.
#[derive(Debug, Clone)]
pub struct SourceUnit {
    pub path: String,
    pub kind: DiagramKind,
    pub text: String,
}

impl SourceUnit {
    /// Builds a unit from raw text. When `declared` is given it must agree
    /// with what the content looks like.
    pub fn new(
        path: impl Into<String>,
        text: impl Into<String>,
        declared: Option<DiagramKind>,
    ) -> Result<Self, PumlError> {
        let path = path.into();
        let text = normalize_endings(&text.into());
        if text.trim().is_empty() {
            return Err(PumlError::EmptyInput(path));
        }
        let detected = detect_kind(&text).ok_or_else(|| PumlError::UnknownKind(path.clone()))?;
        if let Some(declared) = declared {
            if declared != detected {
                return Err(PumlError::KindMismatch { path, declared, detected });
            }
        }
        Ok(Self { path, kind: detected, text })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, PumlError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PumlError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::new(path.display().to_string(), text, None)
    }
}

fn normalize_endings(text: &str) -> String {
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// Guesses the diagram kind from top-level content markers.
pub fn detect_kind(text: &str) -> Option<DiagramKind> {
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\'') {
            continue;
        }
        if line.starts_with("class ") {
            return Some(DiagramKind::ClassDiagram);
        }
        if line.starts_with("[*]") || line.starts_with("state ") {
            return Some(DiagramKind::StateDiagram);
        }
        if line == "start"
            || line.starts_with("start ")
            || line.starts_with('|')
            || (line.starts_with(':') && line.ends_with(';'))
        {
            return Some(DiagramKind::ActivityDiagram);
        }
    }
    None
}

/// Iterates meaningful lines: 1-based line number plus trimmed content.
/// Blank lines, `'` comments, and the `@startuml`/`@enduml` envelope are
/// skipped.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (u32, &str)> {
    text.lines().enumerate().filter_map(|(idx, raw)| {
        let line = raw.trim();
        if line.is_empty()
            || line.starts_with('\'')
            || line.starts_with("@startuml")
            || line.starts_with("@enduml")
        {
            None
        } else {
            Some((idx as u32 + 1, line))
        }
    })
}

/// Directives the subset deliberately ignores.
pub(crate) fn is_noise_directive(line: &str) -> bool {
    const NOISE: &[&str] =
        &["skinparam", "title", "note", "hide", "show", "scale", "legend", "caption", "header", "footer"];
    NOISE.iter().any(|prefix| {
        line == *prefix || line.starts_with(&format!("{prefix} ")) || line.starts_with(&format!("{prefix}\t"))
    })
}

/// Loads and merges a set of `.puml` files into one model.
///
/// At most one distinct class diagram and one distinct activity diagram are
/// accepted; byte-identical duplicates merge idempotently. The merged model
/// is validated and structural defects are appended to the diagnostics under
/// the pseudo-path `<model>`.
pub fn load_model(
    paths: &[impl AsRef<Path>],
) -> Result<(UmlModel, Vec<ParseDiagnostic>), PumlError> {
    if paths.is_empty() {
        return Err(PumlError::NoInputs);
    }
    let units: Vec<SourceUnit> =
        paths.iter().map(SourceUnit::from_path).collect::<Result<_, _>>()?;
    load_model_from_units(&units)
}

pub fn load_model_from_units(
    units: &[SourceUnit],
) -> Result<(UmlModel, Vec<ParseDiagnostic>), PumlError> {
    if units.is_empty() {
        return Err(PumlError::NoInputs);
    }
    let mut diagnostics = Vec::new();
    let mut model = UmlModel::default();
    let mut class_source: Option<(&SourceUnit, UmlModel)> = None;
    let mut activity_source: Option<&SourceUnit> = None;
    let mut machines: Vec<(String, StateMachine)> = Vec::new();

    for unit in units {
        match unit.kind {
            DiagramKind::ClassDiagram => {
                let (partial, mut diags) = parse_class_diagram(unit)?;
                diagnostics.append(&mut diags);
                match &class_source {
                    None => class_source = Some((unit, partial)),
                    Some((first, existing)) => {
                        if *existing != partial {
                            let name = existing
                                .classes
                                .iter()
                                .zip(partial.classes.iter())
                                .find(|(a, b)| a != b)
                                .map(|(a, _)| a.name.clone())
                                .unwrap_or_else(|| "class diagram".to_string());
                            return Err(PumlError::ConflictingDuplicate {
                                name,
                                first: first.path.clone(),
                                second: unit.path.clone(),
                            });
                        }
                    }
                }
            }
            DiagramKind::StateDiagram => {
                let (machine, mut diags) = parse_state_diagram(unit)?;
                diagnostics.append(&mut diags);
                if let Some((path, existing)) =
                    machines.iter().find(|(_, m)| m.owner == machine.owner)
                {
                    if *existing != machine {
                        return Err(PumlError::ConflictingDuplicate {
                            name: machine.owner,
                            first: path.clone(),
                            second: unit.path.clone(),
                        });
                    }
                } else {
                    machines.push((unit.path.clone(), machine));
                }
            }
            DiagramKind::ActivityDiagram => {
                let (flow, mut diags) = parse_activity_diagram(unit)?;
                diagnostics.append(&mut diags);
                match (&activity_source, &model.activity) {
                    (Some(first), Some(existing)) => {
                        if *existing != flow {
                            return Err(PumlError::ConflictingDuplicate {
                                name: "activity flow".to_string(),
                                first: first.path.clone(),
                                second: unit.path.clone(),
                            });
                        }
                    }
                    _ => {
                        activity_source = Some(unit);
                        model.activity = Some(flow);
                    }
                }
            }
        }
    }

    if let Some((_, partial)) = class_source {
        model.classes = partial.classes;
        model.relationships = partial.relationships;
    }
    model.state_machines = machines.into_iter().map(|(_, m)| m).collect();

    for defect in validate_model(&model) {
        diagnostics.push(ParseDiagnostic::error(
            "<model>",
            1,
            1,
            defect.code.as_str(),
            format!("{}: {}", defect.location, defect.message),
        ));
    }
    sort_diagnostics(&mut diagnostics);
    Ok((model, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_the_three_kinds() {
        assert_eq!(detect_kind("class A {\n}\n"), Some(DiagramKind::ClassDiagram));
        assert_eq!(detect_kind("[*] --> A\n"), Some(DiagramKind::StateDiagram));
        assert_eq!(detect_kind("|Lane|\nstart\n"), Some(DiagramKind::ActivityDiagram));
        assert_eq!(detect_kind("' only a comment\n"), None);
    }

    #[test]
    fn empty_input_is_an_error() {
        let err = SourceUnit::new("x.puml", "  \n", None).unwrap_err();
        assert!(matches!(err, PumlError::EmptyInput(_)));
    }

    #[test]
    fn declared_kind_must_agree() {
        let err =
            SourceUnit::new("x.puml", "class A {\n}\n", Some(DiagramKind::StateDiagram))
                .unwrap_err();
        assert!(matches!(err, PumlError::KindMismatch { .. }));
    }
}
