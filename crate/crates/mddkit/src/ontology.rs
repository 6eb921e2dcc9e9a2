//! Communication-ontology registry: concept schemas for message payloads,
//! predicate schemas mirroring the four UML relationship kinds, send/receive
//! action schemas, and validation of messages and relationship assertions.

use crate::constraint::AttrValue;
use crate::diag::{sort_violations, ParseDiagnostic, Subject, Violation};
use crate::model::{RelationshipKind, UmlModel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldType {
    String,
    Number,
    EnumStatus,
}

impl FieldType {
    fn parse(text: &str) -> Option<Self> {
        match text {
            "string" => Some(FieldType::String),
            "number" => Some(FieldType::Number),
            "enum-status" => Some(FieldType::EnumStatus),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FieldType::String => "string",
            FieldType::Number => "number",
            FieldType::EnumStatus => "enum-status",
        }
    }

    fn accepts(&self, value: &AttrValue) -> bool {
        match self {
            FieldType::String => matches!(value, AttrValue::Str(_)),
            FieldType::Number => matches!(value, AttrValue::Num(_)),
            // The enum aspect is tag-level: any non-empty string is a status.
            FieldType::EnumStatus => matches!(value, AttrValue::Str(s) if !s.is_empty()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDef {
    pub name: String,
    pub field_type: FieldType,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptSchema {
    pub name: String,
    pub fields: Vec<FieldDef>,
}

impl ConceptSchema {
    pub fn field(&self, name: &str) -> Option<&FieldDef> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredicateName {
    IsA,
    HasA,
    Owns,
    Collaborates,
}

impl PredicateName {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "is-a" => Some(PredicateName::IsA),
            "has-a" => Some(PredicateName::HasA),
            "owns" => Some(PredicateName::Owns),
            "collaborates" => Some(PredicateName::Collaborates),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PredicateName::IsA => "is-a",
            PredicateName::HasA => "has-a",
            PredicateName::Owns => "owns",
            PredicateName::Collaborates => "collaborates",
        }
    }

    /// The relationship kind each predicate mirrors. The four pairs are
    /// fixed; a definition declaring any other pairing is rejected.
    pub fn mirrored_kind(&self) -> RelationshipKind {
        match self {
            PredicateName::IsA => RelationshipKind::Inheritance,
            PredicateName::HasA => RelationshipKind::Composition,
            PredicateName::Owns => RelationshipKind::Aggregation,
            PredicateName::Collaborates => RelationshipKind::Association,
        }
    }
}

impl fmt::Display for PredicateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Send,
    Receive,
}

impl ActionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionKind::Send => "send",
            ActionKind::Receive => "receive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: ActionKind,
    /// Representative payload concept the action is declared with.
    pub payload: String,
}

/// `subject predicate object`, e.g. `UAV is-a UV`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateAssertion {
    pub subject: String,
    pub predicate: PredicateName,
    pub object: String,
}

impl fmt::Display for PredicateAssertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.predicate, self.object)
    }
}

/// A schema-typed message exchanged between agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMessage {
    pub sender: String,
    pub receiver: String,
    pub action: ActionKind,
    pub schema: String,
    pub content: BTreeMap<String, AttrValue>,
    /// Monotone counter assigned by the emitting runtime.
    pub sequence_hint: u64,
    /// Optional performative metadata (inform/request/agree); carried, not
    /// interpreted.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub performative: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OntologyRegistry {
    concepts: BTreeMap<String, ConceptSchema>,
    predicates: BTreeMap<PredicateName, RelationshipKind>,
    actions: BTreeMap<ActionKind, ActionSchema>,
    assertions: Vec<PredicateAssertion>,
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("duplicate schema `{0}`")]
    DuplicateSchema(String),
    #[error("action payload `{0}` is not a registered concept")]
    UnknownPayload(String),
    #[error("predicate `{predicate}` mirrors {expected}, not {declared}")]
    InvalidPredicateMapping {
        predicate: PredicateName,
        expected: RelationshipKind,
        declared: RelationshipKind,
    },
    #[error("message schema `{0}` is not registered")]
    UnknownSchema(String),
    #[error("line {line}: {message}")]
    Syntax { line: u32, message: String },
}

impl OntologyRegistry {
    pub fn concepts(&self) -> impl Iterator<Item = &ConceptSchema> {
        self.concepts.values()
    }

    pub fn concept(&self, name: &str) -> Option<&ConceptSchema> {
        self.concepts.get(name)
    }

    pub fn predicates(&self) -> &BTreeMap<PredicateName, RelationshipKind> {
        &self.predicates
    }

    pub fn actions(&self) -> impl Iterator<Item = &ActionSchema> {
        self.actions.values()
    }

    pub fn assertions(&self) -> &[PredicateAssertion] {
        &self.assertions
    }

    pub fn concept_count(&self) -> usize {
        self.concepts.len()
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    /// Resolves a free-form label (`mission-brief`) to the canonical name of
    /// a registered concept, ignoring case and punctuation.
    pub fn resolve_concept(&self, label: &str) -> Option<&str> {
        let key = normalize_schema_key(label);
        self.concepts
            .values()
            .find(|c| normalize_schema_key(&c.name) == key)
            .map(|c| c.name.as_str())
    }

    /// JSON dump of the registry, for the prompt assembler and debugging.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }

    /// Parses additional definitions into this registry; duplicates are
    /// rejected against what is already present.
    pub fn extend(&mut self, text: &str) -> Result<Vec<ParseDiagnostic>, OntologyError> {
        let mut diagnostics = Vec::new();
        let mut lines = text.lines().enumerate().peekable();
        while let Some((idx, raw)) = lines.next() {
            let line_no = idx as u32 + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }

            if let Some(rest) = line.strip_prefix("concept ") {
                let name = rest.trim_end_matches('{').trim().to_string();
                if name.is_empty() {
                    return Err(OntologyError::Syntax {
                        line: line_no,
                        message: "concept without a name".into(),
                    });
                }
                if self.concepts.contains_key(&name) {
                    return Err(OntologyError::DuplicateSchema(name));
                }
                let mut fields = Vec::new();
                if rest.trim_end().ends_with('{') {
                    let mut closed = false;
                    for (idx, raw) in lines.by_ref() {
                        let line_no = idx as u32 + 1;
                        let line = raw.trim();
                        if line.is_empty() || line.starts_with('#') {
                            continue;
                        }
                        if line == "}" {
                            closed = true;
                            break;
                        }
                        fields.push(parse_field(line, line_no)?);
                    }
                    if !closed {
                        return Err(OntologyError::Syntax {
                            line: line_no,
                            message: format!("concept `{name}` block is not closed"),
                        });
                    }
                }
                self.concepts.insert(name.clone(), ConceptSchema { name, fields });
                continue;
            }

            if let Some(rest) = line.strip_prefix("predicate ") {
                let mut words = rest.split_whitespace();
                let (name, kind) = match (words.next(), words.next(), words.next()) {
                    (Some(n), Some("mirrors"), Some(k)) => (n, k),
                    _ => {
                        return Err(OntologyError::Syntax {
                            line: line_no,
                            message: "expected `predicate <name> mirrors <relationship>`".into(),
                        })
                    }
                };
                let predicate = PredicateName::parse(name).ok_or_else(|| OntologyError::Syntax {
                    line: line_no,
                    message: format!("unknown predicate `{name}`"),
                })?;
                let declared = parse_relationship_kind(kind).ok_or_else(|| {
                    OntologyError::Syntax {
                        line: line_no,
                        message: format!("unknown relationship kind `{kind}`"),
                    }
                })?;
                if declared != predicate.mirrored_kind() {
                    return Err(OntologyError::InvalidPredicateMapping {
                        predicate,
                        expected: predicate.mirrored_kind(),
                        declared,
                    });
                }
                if self.predicates.insert(predicate, declared).is_some() {
                    return Err(OntologyError::DuplicateSchema(predicate.as_str().to_string()));
                }
                continue;
            }

            if let Some(rest) = line.strip_prefix("assert ") {
                let words: Vec<&str> = rest.split_whitespace().collect();
                let [subject, predicate, object] = words.as_slice() else {
                    return Err(OntologyError::Syntax {
                        line: line_no,
                        message: "expected `assert <subject> <predicate> <object>`".into(),
                    });
                };
                let predicate =
                    PredicateName::parse(predicate).ok_or_else(|| OntologyError::Syntax {
                        line: line_no,
                        message: format!("unknown predicate `{predicate}`"),
                    })?;
                self.assertions.push(PredicateAssertion {
                    subject: subject.to_string(),
                    predicate,
                    object: object.to_string(),
                });
                continue;
            }

            if let Some(rest) = line.strip_prefix("action ") {
                let (action, payload) = parse_action(rest, line_no)?;
                if !self.concepts.contains_key(&payload) {
                    return Err(OntologyError::UnknownPayload(payload));
                }
                if self.actions.contains_key(&action) {
                    return Err(OntologyError::DuplicateSchema(action.as_str().to_string()));
                }
                self.actions.insert(action, ActionSchema { name: action, payload });
                continue;
            }

            diagnostics.push(ParseDiagnostic::warning(
                "<ontology>",
                line_no,
                1,
                "unparsed-line",
                format!("skipping unrecognized line `{line}`"),
            ));
        }
        Ok(diagnostics)
    }
}

/// Builds a registry from definitions text. Construction is deterministic:
/// the same text always yields the same registry.
pub fn register_ontology(
    text: &str,
) -> Result<(OntologyRegistry, Vec<ParseDiagnostic>), OntologyError> {
    let mut registry = OntologyRegistry::default();
    let diagnostics = registry.extend(text)?;
    Ok((registry, diagnostics))
}

fn parse_field(line: &str, line_no: u32) -> Result<FieldDef, OntologyError> {
    let (name, rest) = line.split_once(':').ok_or_else(|| OntologyError::Syntax {
        line: line_no,
        message: format!("expected `name : type [required]`, got `{line}`"),
    })?;
    let mut words = rest.split_whitespace();
    let type_word = words.next().ok_or_else(|| OntologyError::Syntax {
        line: line_no,
        message: "field without a type".into(),
    })?;
    let field_type = FieldType::parse(type_word).ok_or_else(|| OntologyError::Syntax {
        line: line_no,
        message: format!("unknown field type `{type_word}`"),
    })?;
    let required = match words.next() {
        None => false,
        Some("required") => true,
        Some(other) => {
            return Err(OntologyError::Syntax {
                line: line_no,
                message: format!("unexpected `{other}` after field type"),
            })
        }
    };
    Ok(FieldDef { name: name.trim().to_string(), field_type, required })
}

/// `send(payload = Mission-Brief)`
fn parse_action(rest: &str, line_no: u32) -> Result<(ActionKind, String), OntologyError> {
    let rest = rest.trim();
    let (name, args) = match rest.split_once('(') {
        Some((n, a)) => (n.trim(), a.trim_end_matches(')').trim()),
        None => (rest, ""),
    };
    let action = match name {
        "send" => ActionKind::Send,
        "receive" => ActionKind::Receive,
        other => {
            return Err(OntologyError::Syntax {
                line: line_no,
                message: format!("unknown action `{other}`; only send/receive exist"),
            })
        }
    };
    let payload = args
        .strip_prefix("payload")
        .map(|r| r.trim_start_matches(['=', ' ']).trim())
        .unwrap_or(args)
        .to_string();
    if payload.is_empty() {
        return Err(OntologyError::Syntax {
            line: line_no,
            message: "action without a payload concept".into(),
        });
    }
    Ok((action, payload))
}

fn parse_relationship_kind(text: &str) -> Option<RelationshipKind> {
    match text {
        "inheritance" => Some(RelationshipKind::Inheritance),
        "composition" => Some(RelationshipKind::Composition),
        "aggregation" => Some(RelationshipKind::Aggregation),
        "association" => Some(RelationshipKind::Association),
        _ => None,
    }
}

pub fn normalize_schema_key(name: &str) -> String {
    name.chars().filter(char::is_ascii_alphanumeric).flat_map(char::to_lowercase).collect()
}

/// Checks a message against its concept schema: every required field must be
/// present with the declared type, and no undeclared fields may appear. Field
/// order is irrelevant. An unregistered schema is an error, not a violation.
pub fn validate_message(
    registry: &OntologyRegistry,
    message: &AgentMessage,
) -> Result<Vec<Violation>, OntologyError> {
    let schema = registry
        .concept(&message.schema)
        .ok_or_else(|| OntologyError::UnknownSchema(message.schema.clone()))?;

    let subject = || Subject::Instance {
        id: format!("{}->{}#{}", message.sender, message.receiver, message.sequence_hint),
    };
    let mut violations = Vec::new();

    for field in &schema.fields {
        match message.content.get(&field.name) {
            None if field.required => violations.push(Violation::new(
                format!("{}.{}", schema.name, field.name),
                subject(),
                "missing".to_string(),
                format!("missing required field `{}`", field.name),
            )),
            Some(value) if !field.field_type.accepts(value) => violations.push(Violation::new(
                format!("{}.{}", schema.name, field.name),
                subject(),
                value.render(),
                format!(
                    "field `{}` must be {}, got `{}`",
                    field.name,
                    field.field_type.as_str(),
                    value.render()
                ),
            )),
            _ => {}
        }
    }
    for key in message.content.keys() {
        if schema.field(key).is_none() {
            violations.push(Violation::new(
                format!("{}.{key}", schema.name),
                subject(),
                key.clone(),
                format!("field `{key}` is not declared on `{}`", schema.name),
            ));
        }
    }
    sort_violations(&mut violations);
    Ok(violations)
}

/// Every declared predicate assertion must have a matching relationship of
/// the mirrored kind in the model. `collaborates` (association) matches in
/// either orientation; the other predicates are directional.
pub fn check_predicate_consistency(
    registry: &OntologyRegistry,
    model: &UmlModel,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    for assertion in &registry.assertions {
        let kind = assertion.predicate.mirrored_kind();
        let matched = model.relationships.iter().any(|rel| {
            rel.kind == kind
                && ((rel.source == assertion.subject && rel.target == assertion.object)
                    || (kind == RelationshipKind::Association
                        && rel.source == assertion.object
                        && rel.target == assertion.subject))
        });
        if !matched {
            violations.push(Violation::new(
                assertion.predicate.as_str(),
                Subject::Instance { id: assertion.to_string() },
                assertion.to_string(),
                format!(
                    "no {kind} relationship `{}` -> `{}` in the model",
                    assertion.subject, assertion.object
                ),
            ));
        }
    }
    sort_violations(&mut violations);
    violations
}
