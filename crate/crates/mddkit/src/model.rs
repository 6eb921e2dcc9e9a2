//! In-memory representation of the UML model layers: classes and
//! relationships, state machines, and the activity flow. All other stages
//! consume this representation; values are immutable once built.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stereotype {
    Agent,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Private,
    Protected,
}

/// A class attribute. Type tags are free-form semantic labels
/// (`string`, `int`, `percent`); value typing happens in the constraint layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub type_tag: String,
    pub visibility: Visibility,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    pub type_tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationSig {
    pub name: String,
    pub params: Vec<ParamDef>,
    pub return_tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDef {
    pub name: String,
    pub stereotype: Stereotype,
    pub attributes: Vec<AttributeDef>,
    pub operations: Vec<OperationSig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationshipKind {
    Inheritance,
    Composition,
    Aggregation,
    Association,
}

impl fmt::Display for RelationshipKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RelationshipKind::Inheritance => "inheritance",
            RelationshipKind::Composition => "composition",
            RelationshipKind::Aggregation => "aggregation",
            RelationshipKind::Association => "association",
        };
        f.write_str(s)
    }
}

/// Cardinality bounds on one end of a relationship. `upper == None` means
/// unbounded (`*`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiplicityRange {
    pub lower: u32,
    pub upper: Option<u32>,
}

impl MultiplicityRange {
    pub const ONE: MultiplicityRange = MultiplicityRange { lower: 1, upper: Some(1) };

    pub fn new(lower: u32, upper: Option<u32>) -> Self {
        Self { lower, upper }
    }

    /// Parses `1`, `0..1`, `1..*`, `*`.
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if text == "*" {
            return Some(Self::new(0, None));
        }
        if let Some((lo, hi)) = text.split_once("..") {
            let lower = lo.trim().parse().ok()?;
            let upper = match hi.trim() {
                "*" => None,
                n => Some(n.parse().ok()?),
            };
            return Some(Self::new(lower, upper));
        }
        let n: u32 = text.parse().ok()?;
        Some(Self::new(n, Some(n)))
    }

    pub fn contains(&self, count: u32) -> bool {
        count >= self.lower && self.upper.is_none_or(|u| count <= u)
    }

    pub fn is_valid(&self) -> bool {
        self.upper.is_none_or(|u| self.lower <= u)
    }
}

impl fmt::Display for MultiplicityRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.lower, self.upper) {
            (lo, Some(hi)) if lo == hi => write!(f, "{lo}"),
            (0, None) => write!(f, "*"),
            (lo, None) => write!(f, "{lo}..*"),
            (lo, Some(hi)) => write!(f, "{lo}..{hi}"),
        }
    }
}

/// For inheritance, `source` is the subclass and `target` the superclass.
/// For composition and aggregation, `source` is the whole and `target` the part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relationship {
    pub kind: RelationshipKind,
    pub source: String,
    pub target: String,
    pub source_multiplicity: MultiplicityRange,
    pub target_multiplicity: MultiplicityRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDef {
    pub name: String,
    /// Containing composite state, if nested. Two nesting levels are enough
    /// for the bundled model; the representation allows any forest.
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub trigger: String,
    pub guard: Option<String>,
    pub action: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateMachine {
    pub owner: String,
    pub states: Vec<StateDef>,
    pub initial: String,
    pub transitions: Vec<Transition>,
}

impl StateMachine {
    pub fn state(&self, name: &str) -> Option<&StateDef> {
        self.states.iter().find(|s| s.name == name)
    }

    /// Ancestor chain of a state, nearest parent first.
    pub fn state_ancestors(&self, name: &str) -> Vec<&str> {
        let mut chain = Vec::new();
        let mut current = self.state(name).and_then(|s| s.parent.as_deref());
        while let Some(parent) = current {
            if chain.contains(&parent) {
                break; // defensive: cycle is reported by validate_model
            }
            chain.push(parent);
            current = self.state(parent).and_then(|s| s.parent.as_deref());
        }
        chain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Start,
    End,
    Action,
    Decision,
    Fork,
    Join,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityNode {
    pub id: String,
    pub kind: NodeKind,
    /// Swimlane the node belongs to; empty for control nodes.
    pub actor: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityEdge {
    pub from: String,
    pub to: String,
    pub guard: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityFlow {
    pub nodes: Vec<ActivityNode>,
    pub edges: Vec<ActivityEdge>,
}

impl ActivityFlow {
    pub fn node(&self, id: &str) -> Option<&ActivityNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn successors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a ActivityNode> {
        self.edges
            .iter()
            .filter(move |e| e.from == id)
            .filter_map(|e| self.node(&e.to))
    }
}

/// The assembled model: structural layer (classes, relationships), behavioral
/// layer (state machines, activity flow).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UmlModel {
    pub classes: Vec<ClassDef>,
    pub relationships: Vec<Relationship>,
    pub state_machines: Vec<StateMachine>,
    pub activity: Option<ActivityFlow>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("inheritance cycle involving `{0}`")]
    InheritanceCycle(String),
}

/// Stable reason codes for structural defects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefectCode {
    DuplicateClass,
    EmptyClassName,
    DuplicateAttribute,
    UnknownClass,
    InheritanceCycle,
    MultiplicityInverted,
    UnknownState,
    StateParentCycle,
    DuplicateStateMachine,
    MissingStart,
    MultipleStart,
    MissingEnd,
    UnknownNode,
    MissingActor,
    MissingLabel,
    CardinalityMismatch,
}

impl DefectCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DefectCode::DuplicateClass => "duplicate-class",
            DefectCode::EmptyClassName => "empty-class-name",
            DefectCode::DuplicateAttribute => "duplicate-attribute",
            DefectCode::UnknownClass => "unknown-class",
            DefectCode::InheritanceCycle => "inheritance-cycle",
            DefectCode::MultiplicityInverted => "multiplicity-inverted",
            DefectCode::UnknownState => "unknown-state",
            DefectCode::StateParentCycle => "state-parent-cycle",
            DefectCode::DuplicateStateMachine => "duplicate-state-machine",
            DefectCode::MissingStart => "missing-start",
            DefectCode::MultipleStart => "multiple-start",
            DefectCode::MissingEnd => "missing-end",
            DefectCode::UnknownNode => "unknown-node",
            DefectCode::MissingActor => "missing-actor",
            DefectCode::MissingLabel => "missing-label",
            DefectCode::CardinalityMismatch => "cardinality-mismatch",
        }
    }
}

impl fmt::Display for DefectCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A structural defect found by [`validate_model`]. Defects are returned,
/// never thrown; an empty list means the model is well-formed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDefect {
    /// Class name, state name, or node id the defect points at.
    pub location: String,
    pub code: DefectCode,
    pub message: String,
}

impl ModelDefect {
    fn new(location: impl Into<String>, code: DefectCode, message: impl Into<String>) -> Self {
        Self { location: location.into(), code, message: message.into() }
    }
}

impl fmt::Display for ModelDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.location, self.code.as_str(), self.message)
    }
}

impl UmlModel {
    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn has_class(&self, name: &str) -> bool {
        self.class(name).is_some()
    }

    /// Direct superclass, if any. With multiple declared inheritance edges the
    /// first declared one wins; the bundled model is single-inheritance.
    pub fn parent_of(&self, class: &str) -> Option<&str> {
        self.relationships
            .iter()
            .find(|r| r.kind == RelationshipKind::Inheritance && r.source == class)
            .map(|r| r.target.as_str())
    }

    /// All attributes visible on a class, own attributes first, then inherited
    /// ones walking up the hierarchy.
    pub fn attributes_with_inherited(&self, class: &str) -> Vec<&AttributeDef> {
        let mut attrs: Vec<&AttributeDef> = Vec::new();
        let mut current = Some(class);
        let mut hops = 0;
        while let Some(name) = current {
            if let Some(def) = self.class(name) {
                attrs.extend(def.attributes.iter());
            }
            current = self.parent_of(name);
            hops += 1;
            if hops > self.classes.len() {
                break;
            }
        }
        attrs
    }

    /// True if `class` equals `ancestor` or inherits from it (transitively).
    pub fn is_kind_of(&self, class: &str, ancestor: &str) -> bool {
        if class == ancestor {
            return true;
        }
        resolve_hierarchy(self, class)
            .map(|chain| chain.iter().any(|c| c == ancestor))
            .unwrap_or(false)
    }

    /// Classes equal to or descending from `ancestor`.
    pub fn descendants_including(&self, ancestor: &str) -> Vec<&str> {
        self.classes
            .iter()
            .map(|c| c.name.as_str())
            .filter(|name| self.is_kind_of(name, ancestor))
            .collect()
    }

    pub fn state_machine_for(&self, owner: &str) -> Option<&StateMachine> {
        self.state_machines.iter().find(|m| m.owner == owner)
    }

    /// Reorders collections whose order carries no meaning, so that two
    /// equivalent models serialize identically.
    pub fn canonicalize(&mut self) {
        self.classes.sort_by(|a, b| a.name.cmp(&b.name));
        self.relationships.sort_by(|a, b| {
            (a.kind, &a.source, &a.target).cmp(&(b.kind, &b.source, &b.target))
        });
        self.state_machines.sort_by(|a, b| a.owner.cmp(&b.owner));
        for machine in &mut self.state_machines {
            machine.states.sort_by(|a, b| a.name.cmp(&b.name));
            machine.transitions.sort_by(|a, b| {
                (&a.from, &a.trigger, &a.to).cmp(&(&b.from, &b.trigger, &b.to))
            });
        }
    }

    /// Canonical JSON document (stable key and element order).
    pub fn to_canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.canonicalize();
        let mut out = serde_json::to_string_pretty(&copy).expect("model serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<UmlModel, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Walks the inheritance chain of `class`, nearest ancestor first, excluding
/// the class itself. Roots yield an empty list.
pub fn resolve_hierarchy(model: &UmlModel, class: &str) -> Result<Vec<String>, ModelError> {
    if !model.has_class(class) {
        return Err(ModelError::UnknownClass(class.to_string()));
    }
    let mut chain = Vec::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    seen.insert(class);
    let mut current = model.parent_of(class);
    while let Some(parent) = current {
        if !seen.insert(parent) {
            return Err(ModelError::InheritanceCycle(parent.to_string()));
        }
        chain.push(parent.to_string());
        current = model.parent_of(parent);
    }
    Ok(chain)
}

/// Checks every structural invariant and returns the defects found, sorted by
/// location. Pure: the same model always yields the identical list.
pub fn validate_model(model: &UmlModel) -> Vec<ModelDefect> {
    let mut defects = Vec::new();

    let mut seen_classes: BTreeSet<&str> = BTreeSet::new();
    for class in &model.classes {
        if class.name.is_empty() {
            defects.push(ModelDefect::new(
                "<unnamed>",
                DefectCode::EmptyClassName,
                "class name must be non-empty",
            ));
            continue;
        }
        if !seen_classes.insert(&class.name) {
            defects.push(ModelDefect::new(
                &class.name,
                DefectCode::DuplicateClass,
                format!("class `{}` declared more than once", class.name),
            ));
        }
        let mut seen_attrs: BTreeSet<&str> = BTreeSet::new();
        for attr in &class.attributes {
            if !seen_attrs.insert(&attr.name) {
                defects.push(ModelDefect::new(
                    format!("{}.{}", class.name, attr.name),
                    DefectCode::DuplicateAttribute,
                    format!("attribute `{}` declared more than once", attr.name),
                ));
            }
        }
    }

    for rel in &model.relationships {
        for end in [&rel.source, &rel.target] {
            if !model.has_class(end) {
                defects.push(ModelDefect::new(
                    end,
                    DefectCode::UnknownClass,
                    format!("relationship references undeclared class `{end}`"),
                ));
            }
        }
        for (side, mult) in
            [("source", rel.source_multiplicity), ("target", rel.target_multiplicity)]
        {
            if !mult.is_valid() {
                defects.push(ModelDefect::new(
                    format!("{} -> {}", rel.source, rel.target),
                    DefectCode::MultiplicityInverted,
                    format!("{side} multiplicity `{mult}` has lower > upper"),
                ));
            }
        }
    }

    // Inheritance must form a forest: no class may reach itself.
    for class in &model.classes {
        if let Err(ModelError::InheritanceCycle(at)) = resolve_hierarchy(model, &class.name) {
            defects.push(ModelDefect::new(
                &class.name,
                DefectCode::InheritanceCycle,
                format!("inheritance cycle detected at `{at}`"),
            ));
        }
    }

    let mut machine_owners: BTreeSet<&str> = BTreeSet::new();
    for machine in &model.state_machines {
        if !model.has_class(&machine.owner) {
            defects.push(ModelDefect::new(
                &machine.owner,
                DefectCode::UnknownClass,
                format!("state machine owner `{}` is not a declared class", machine.owner),
            ));
        }
        if !machine_owners.insert(&machine.owner) {
            defects.push(ModelDefect::new(
                &machine.owner,
                DefectCode::DuplicateStateMachine,
                format!("class `{}` owns more than one state machine", machine.owner),
            ));
        }
        defects.extend(validate_state_machine(machine));
    }

    if let Some(activity) = &model.activity {
        defects.extend(validate_activity(model, activity));
    }

    defects.sort_by(|a, b| (&a.location, a.code).cmp(&(&b.location, b.code)));
    defects
}

fn validate_state_machine(machine: &StateMachine) -> Vec<ModelDefect> {
    let mut defects = Vec::new();
    let names: BTreeSet<&str> = machine.states.iter().map(|s| s.name.as_str()).collect();

    if !names.contains(machine.initial.as_str()) {
        defects.push(ModelDefect::new(
            format!("{}::{}", machine.owner, machine.initial),
            DefectCode::UnknownState,
            format!("initial state `{}` is not declared", machine.initial),
        ));
    }
    for t in &machine.transitions {
        for end in [&t.from, &t.to] {
            if !names.contains(end.as_str()) {
                defects.push(ModelDefect::new(
                    format!("{}::{}", machine.owner, end),
                    DefectCode::UnknownState,
                    format!("transition endpoint `{end}` is not a declared state"),
                ));
            }
        }
    }

    // Parent references must exist and form a forest.
    let parent: BTreeMap<&str, &str> = machine
        .states
        .iter()
        .filter_map(|s| s.parent.as_deref().map(|p| (s.name.as_str(), p)))
        .collect();
    for (state, p) in &parent {
        if !names.contains(p) {
            defects.push(ModelDefect::new(
                format!("{}::{}", machine.owner, p),
                DefectCode::UnknownState,
                format!("parent `{p}` of state `{state}` is not declared"),
            ));
        }
    }
    for state in machine.states.iter().map(|s| s.name.as_str()) {
        let mut seen = BTreeSet::from([state]);
        let mut cursor = parent.get(state).copied();
        while let Some(p) = cursor {
            if !seen.insert(p) {
                defects.push(ModelDefect::new(
                    format!("{}::{}", machine.owner, state),
                    DefectCode::StateParentCycle,
                    format!("state nesting cycle through `{p}`"),
                ));
                break;
            }
            cursor = parent.get(p).copied();
        }
    }
    defects
}

fn validate_activity(model: &UmlModel, activity: &ActivityFlow) -> Vec<ModelDefect> {
    let mut defects = Vec::new();
    let starts: Vec<_> =
        activity.nodes.iter().filter(|n| n.kind == NodeKind::Start).collect();
    match starts.len() {
        0 => defects.push(ModelDefect::new(
            "activity",
            DefectCode::MissingStart,
            "activity flow has no start node",
        )),
        1 => {}
        n => defects.push(ModelDefect::new(
            "activity",
            DefectCode::MultipleStart,
            format!("activity flow has {n} start nodes, expected exactly one"),
        )),
    }
    if !activity.nodes.iter().any(|n| n.kind == NodeKind::End) {
        defects.push(ModelDefect::new(
            "activity",
            DefectCode::MissingEnd,
            "activity flow has no end node",
        ));
    }

    let ids: BTreeSet<&str> = activity.nodes.iter().map(|n| n.id.as_str()).collect();
    for edge in &activity.edges {
        for end in [&edge.from, &edge.to] {
            if !ids.contains(end.as_str()) {
                defects.push(ModelDefect::new(
                    end,
                    DefectCode::UnknownNode,
                    format!("edge references undeclared node `{end}`"),
                ));
            }
        }
    }

    for node in &activity.nodes {
        if node.kind == NodeKind::Action {
            if node.actor.is_empty() {
                defects.push(ModelDefect::new(
                    &node.id,
                    DefectCode::MissingActor,
                    format!("action node `{}` has no actor", node.id),
                ));
            } else if !model.has_class(&node.actor) {
                defects.push(ModelDefect::new(
                    &node.id,
                    DefectCode::UnknownClass,
                    format!("action node `{}` names unknown actor `{}`", node.id, node.actor),
                ));
            }
            if node.label.is_empty() {
                defects.push(ModelDefect::new(
                    &node.id,
                    DefectCode::MissingLabel,
                    format!("action node `{}` has no label", node.id),
                ));
            }
        }
    }
    defects
}
