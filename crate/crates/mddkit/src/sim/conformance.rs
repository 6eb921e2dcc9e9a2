//! Behavioral conformance: derive the expected message order from the
//! activity flow and check a recorded trace against it. Events inside a
//! fork/join region may interleave freely across branches; order within a
//! branch is fixed.

use super::trace::{Trace, TraceEvent};
use super::SimError;
use crate::model::{ActivityFlow, NodeKind, UmlModel};
use crate::ontology::OntologyRegistry;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConformanceMode {
    #[default]
    Strict,
    Relaxed,
}

impl fmt::Display for ConformanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConformanceMode::Strict => f.write_str("strict"),
            ConformanceMode::Relaxed => f.write_str("relaxed"),
        }
    }
}

/// One expected message: concrete sender and receiver ids plus the canonical
/// schema name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTemplate {
    pub sender: String,
    pub receiver: String,
    pub schema: String,
}

impl EventTemplate {
    fn matches(&self, event: &TraceEvent) -> bool {
        self.sender == event.sender
            && self.receiver == event.receiver
            && self.schema == event.schema
    }
}

impl fmt::Display for EventTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{} {}", self.sender, self.receiver, self.schema)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Linear(EventTemplate),
    /// Branches of a fork/join region: each branch is ordered, branches
    /// interleave freely.
    Parallel(Vec<Vec<EventTemplate>>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedFlow {
    pub segments: Vec<Segment>,
}

impl ExpectedFlow {
    pub fn event_count(&self) -> usize {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Linear(_) => 1,
                Segment::Parallel(branches) => branches.iter().map(Vec::len).sum(),
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mismatch {
    /// An expected event never appeared; position is the trace index where
    /// it was given up on.
    Missing { expected: String, position: usize },
    /// A trace event matched nothing that was expected.
    Unexpected { event: String, position: usize },
    /// Relaxed mode: an extra event whose schema is not even registered.
    UnknownSchema { event: String, position: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConformanceResult {
    pub mode: ConformanceMode,
    pub verdict: Verdict,
    pub mismatches: Vec<Mismatch>,
}

impl ConformanceResult {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

// ---------------------------------------------------------------------------
// Expected-flow derivation
// ---------------------------------------------------------------------------

/// Derives the expected message order from the activity flow.
///
/// `send X` / `receive X` action pairs become one message template (sender =
/// actor of the send, receiver = actor of the matching receive, schema
/// resolved against the registry). Branches acted by the generic vehicle
/// class are instantiated once per roster entry. When `discovery` is set,
/// the reconstructed discovery exchange is inserted right after the
/// mission-brief handoff.
pub fn derive_expected_flow(
    model: &UmlModel,
    registry: &OntologyRegistry,
    roster_ids: &[String],
    discovery: bool,
) -> Result<ExpectedFlow, SimError> {
    let activity = model
        .activity
        .as_ref()
        .ok_or_else(|| SimError::FlowDerivation("model has no activity flow".into()))?;
    let start = activity
        .nodes
        .iter()
        .find(|n| n.kind == NodeKind::Start)
        .ok_or_else(|| SimError::FlowDerivation("activity flow has no start node".into()))?;

    let mut segments = Vec::new();
    let walker = Walker { activity, registry };
    let mut cursor = walker.sole_successor(&start.id)?;
    let mut pending_send: Option<(String, String)> = None;

    while let Some(node_id) = cursor {
        let node = activity
            .node(&node_id)
            .ok_or_else(|| SimError::FlowDerivation(format!("unknown node `{node_id}`")))?;
        match node.kind {
            NodeKind::Action => {
                if let Some(template) =
                    walker.handle_action(&node.actor, &node.label, &mut pending_send)?
                {
                    segments.push(Segment::Linear(template));
                }
                cursor = walker.sole_successor(&node_id)?;
            }
            NodeKind::Fork => {
                let (branches, join_id) = walker.walk_fork(&node_id)?;
                let branches = instantiate_branches(model, branches, roster_ids)?;
                segments.push(Segment::Parallel(branches));
                cursor = walker.sole_successor(&join_id)?;
            }
            NodeKind::End => break,
            NodeKind::Start => {
                return Err(SimError::FlowDerivation("unexpected second start node".into()))
            }
            NodeKind::Decision | NodeKind::Join => {
                return Err(SimError::FlowDerivation(format!(
                    "expected-flow derivation does not support stray {:?} nodes",
                    node.kind
                )))
            }
        }
    }

    if discovery {
        let brief_pos = segments.iter().position(|s| {
            matches!(s, Segment::Linear(t) if t.schema == "Mission-Brief")
        });
        let insert_at = brief_pos.map(|p| p + 1).unwrap_or(0);
        let discovery_request = EventTemplate {
            sender: "MCC".into(),
            receiver: "UVF-Manager".into(),
            schema: resolve_schema(registry, "UV-Discovery-Request")?,
        };
        let uv_list = EventTemplate {
            sender: "UVF-Manager".into(),
            receiver: "MCC".into(),
            schema: resolve_schema(registry, "UV-List")?,
        };
        segments.insert(insert_at, Segment::Linear(uv_list));
        segments.insert(insert_at, Segment::Linear(discovery_request));
    }
    Ok(ExpectedFlow { segments })
}

struct Walker<'a> {
    activity: &'a ActivityFlow,
    registry: &'a OntologyRegistry,
}

impl Walker<'_> {
    fn sole_successor(&self, id: &str) -> Result<Option<String>, SimError> {
        let successors: Vec<&str> = self
            .activity
            .edges
            .iter()
            .filter(|e| e.from == id)
            .map(|e| e.to.as_str())
            .collect();
        match successors.as_slice() {
            [] => Ok(None),
            [next] => Ok(Some(next.to_string())),
            many => Err(SimError::FlowDerivation(format!(
                "node `{id}` has {} successors outside a fork",
                many.len()
            ))),
        }
    }

    /// `send X` opens a pending message; `receive X` closes it into a
    /// template. Other actions are internal steps.
    fn handle_action(
        &self,
        actor: &str,
        label: &str,
        pending_send: &mut Option<(String, String)>,
    ) -> Result<Option<EventTemplate>, SimError> {
        if let Some(payload) = label.strip_prefix("send ") {
            if let Some((prev_actor, prev_payload)) = pending_send.take() {
                return Err(SimError::FlowDerivation(format!(
                    "send `{prev_payload}` by `{prev_actor}` has no matching receive"
                )));
            }
            *pending_send = Some((actor.to_string(), payload.trim().to_string()));
            return Ok(None);
        }
        if let Some(payload) = label.strip_prefix("receive ") {
            let payload = payload.trim();
            let Some((sender, sent_payload)) = pending_send.take() else {
                return Err(SimError::FlowDerivation(format!(
                    "receive `{payload}` by `{actor}` has no preceding send"
                )));
            };
            if normalize(payload) != normalize(&sent_payload) {
                return Err(SimError::FlowDerivation(format!(
                    "receive `{payload}` does not match pending send `{sent_payload}`"
                )));
            }
            return Ok(Some(EventTemplate {
                sender,
                receiver: actor.to_string(),
                schema: resolve_schema(self.registry, payload)?,
            }));
        }
        Ok(None) // internal action
    }

    /// Walks every branch of a fork until the shared join node.
    fn walk_fork(&self, fork_id: &str) -> Result<(Vec<Vec<EventTemplate>>, String), SimError> {
        let heads: Vec<String> = self
            .activity
            .edges
            .iter()
            .filter(|e| e.from == fork_id)
            .map(|e| e.to.clone())
            .collect();
        if heads.is_empty() {
            return Err(SimError::FlowDerivation("fork with no branches".into()));
        }
        let mut branches = Vec::new();
        let mut join_id: Option<String> = None;
        for head in heads {
            let mut templates = Vec::new();
            let mut pending_send: Option<(String, String)> = None;
            let mut cursor = Some(head);
            loop {
                let Some(node_id) = cursor else {
                    return Err(SimError::FlowDerivation(
                        "fork branch ended without reaching a join".into(),
                    ));
                };
                let node = self.activity.node(&node_id).ok_or_else(|| {
                    SimError::FlowDerivation(format!("unknown node `{node_id}`"))
                })?;
                match node.kind {
                    NodeKind::Join => {
                        match &join_id {
                            Some(expected) if *expected != node_id => {
                                return Err(SimError::FlowDerivation(
                                    "fork branches reach different joins".into(),
                                ))
                            }
                            _ => join_id = Some(node_id),
                        }
                        break;
                    }
                    NodeKind::Action => {
                        if let Some(template) =
                            self.handle_action(&node.actor, &node.label, &mut pending_send)?
                        {
                            templates.push(template);
                        }
                        cursor = self.sole_successor(&node_id)?;
                    }
                    other => {
                        return Err(SimError::FlowDerivation(format!(
                            "unsupported {other:?} node inside a fork branch"
                        )))
                    }
                }
            }
            branches.push(templates);
        }
        Ok((branches, join_id.expect("set by every branch")))
    }
}

fn resolve_schema(registry: &OntologyRegistry, label: &str) -> Result<String, SimError> {
    registry
        .resolve_concept(label)
        .map(str::to_string)
        .ok_or_else(|| SimError::FlowDerivation(format!("no concept schema matches `{label}`")))
}

fn normalize(label: &str) -> String {
    crate::ontology::normalize_schema_key(label)
}

/// Branches acted by the generic vehicle class are replicated once per
/// roster vehicle; branches naming concrete actors are used positionally.
fn instantiate_branches(
    model: &UmlModel,
    branches: Vec<Vec<EventTemplate>>,
    roster_ids: &[String],
) -> Result<Vec<Vec<EventTemplate>>, SimError> {
    let generic = |name: &str| {
        // The base vehicle class itself, not a singleton agent: any class
        // that other classes inherit from.
        model.has_class(name)
            && model.classes.iter().any(|c| model.parent_of(&c.name) == Some(name))
    };
    let is_generic_branch = |branch: &[EventTemplate]| {
        branch.iter().any(|t| generic(&t.sender) || generic(&t.receiver))
    };

    if branches.iter().all(|b| is_generic_branch(b)) && !branches.is_empty() {
        let prototype = branches[0].clone();
        if branches.iter().any(|b| *b != prototype) {
            return Err(SimError::FlowDerivation(
                "generic fork branches differ; cannot instantiate per roster".into(),
            ));
        }
        return Ok(roster_ids
            .iter()
            .map(|id| {
                prototype
                    .iter()
                    .map(|t| EventTemplate {
                        sender: if generic(&t.sender) { id.clone() } else { t.sender.clone() },
                        receiver: if generic(&t.receiver) {
                            id.clone()
                        } else {
                            t.receiver.clone()
                        },
                        schema: t.schema.clone(),
                    })
                    .collect()
            })
            .collect());
    }
    Ok(branches)
}

// ---------------------------------------------------------------------------
// Conformance checking
// ---------------------------------------------------------------------------

/// Checks a trace against the expected flow.
///
/// Strict: the trace must replay the flow exactly, except that branches of a
/// parallel segment may interleave. Relaxed: the expected events must appear
/// as a subsequence (same interleaving freedom), and every extra event must
/// name a registered schema.
pub fn check_conformance(
    trace: &Trace,
    flow: &ExpectedFlow,
    mode: ConformanceMode,
    registry: &OntologyRegistry,
) -> ConformanceResult {
    let mut cursor = FlowCursor::new(flow);
    let mut mismatches = Vec::new();

    for (position, event) in trace.events.iter().enumerate() {
        if cursor.try_consume(event) {
            continue;
        }
        match mode {
            ConformanceMode::Strict => {
                // Skip ahead on the expected side, recording what was missed.
                // A trace event matching nothing at all is reported without
                // moving the expected side, so one stray event cannot turn
                // the rest of the trace into noise.
                let snapshot = cursor.snapshot();
                let mut skipped_templates = Vec::new();
                let mut matched = false;
                while let Some(skipped) = cursor.skip_one() {
                    skipped_templates.push(skipped);
                    if cursor.try_consume(event) {
                        matched = true;
                        break;
                    }
                }
                if matched {
                    for skipped in skipped_templates {
                        mismatches.push(Mismatch::Missing {
                            expected: skipped.to_string(),
                            position,
                        });
                    }
                } else {
                    cursor.restore(snapshot);
                    mismatches.push(Mismatch::Unexpected {
                        event: render_event(event),
                        position,
                    });
                }
            }
            ConformanceMode::Relaxed => {
                if registry.resolve_concept(&event.schema).is_none() {
                    mismatches.push(Mismatch::UnknownSchema {
                        event: render_event(event),
                        position,
                    });
                }
            }
        }
    }

    let tail_position = trace.events.len();
    while let Some(skipped) = cursor.skip_one() {
        mismatches.push(Mismatch::Missing { expected: skipped.to_string(), position: tail_position });
    }

    ConformanceResult {
        mode,
        verdict: if mismatches.is_empty() { Verdict::Pass } else { Verdict::Fail },
        mismatches,
    }
}

fn render_event(event: &TraceEvent) -> String {
    format!("{}->{} {}", event.sender, event.receiver, event.schema)
}

/// Position in the expected flow: segment index plus per-branch pointers
/// inside the active parallel segment.
struct FlowCursor<'a> {
    flow: &'a ExpectedFlow,
    segment: usize,
    branch_positions: Vec<usize>,
}

impl<'a> FlowCursor<'a> {
    fn new(flow: &'a ExpectedFlow) -> Self {
        let mut cursor = Self { flow, segment: 0, branch_positions: Vec::new() };
        cursor.enter_segment();
        cursor
    }

    fn snapshot(&self) -> (usize, Vec<usize>) {
        (self.segment, self.branch_positions.clone())
    }

    fn restore(&mut self, snapshot: (usize, Vec<usize>)) {
        self.segment = snapshot.0;
        self.branch_positions = snapshot.1;
    }

    fn enter_segment(&mut self) {
        self.branch_positions = match self.flow.segments.get(self.segment) {
            Some(Segment::Parallel(branches)) => vec![0; branches.len()],
            _ => Vec::new(),
        };
    }

    fn advance_if_done(&mut self) {
        loop {
            if let Some(Segment::Parallel(branches)) = self.flow.segments.get(self.segment) {
                let done = branches
                    .iter()
                    .zip(&self.branch_positions)
                    .all(|(branch, pos)| *pos >= branch.len());
                if done {
                    self.segment += 1;
                    self.enter_segment();
                    continue;
                }
            }
            break;
        }
    }

    /// Consumes the event if it matches the current expectation.
    fn try_consume(&mut self, event: &TraceEvent) -> bool {
        self.advance_if_done();
        match self.flow.segments.get(self.segment) {
            None => false,
            Some(Segment::Linear(template)) => {
                if template.matches(event) {
                    self.segment += 1;
                    self.enter_segment();
                    true
                } else {
                    false
                }
            }
            Some(Segment::Parallel(branches)) => {
                for (branch, pos) in branches.iter().zip(self.branch_positions.iter_mut()) {
                    if let Some(template) = branch.get(*pos) {
                        if template.matches(event) {
                            *pos += 1;
                            self.advance_if_done();
                            return true;
                        }
                    }
                }
                false
            }
        }
    }

    /// Gives up on the next expected event, returning it.
    fn skip_one(&mut self) -> Option<EventTemplate> {
        self.advance_if_done();
        match self.flow.segments.get(self.segment) {
            None => None,
            Some(Segment::Linear(template)) => {
                let template = template.clone();
                self.segment += 1;
                self.enter_segment();
                Some(template)
            }
            Some(Segment::Parallel(branches)) => {
                for (branch, pos) in branches.iter().zip(self.branch_positions.iter_mut()) {
                    if let Some(template) = branch.get(*pos) {
                        let template = template.clone();
                        *pos += 1;
                        self.advance_if_done();
                        return Some(template);
                    }
                }
                None
            }
        }
    }
}
