//! Deterministic multi-agent mission runtime: agents with FIFO mailboxes,
//! the hierarchical vehicle state machine, schema-validated messages, and
//! trace recording.
//!
//! One logical event loop advances in ticks. Within a tick agents act in
//! fixed order (Operator, MCC, UVF-Manager, then the roster); messages sent
//! at tick t are delivered at t+1. Nothing reads the wall clock: identical
//! (model, config, seed) runs produce byte-identical traces and stores.

mod config;
mod conformance;
mod trace;

pub use config::{AggregationKind, ConfigError, PerformanceModel, RosterEntry, SimConfig};
pub use conformance::{
    check_conformance, derive_expected_flow, ConformanceMode, ConformanceResult, EventTemplate,
    ExpectedFlow, Mismatch, Segment, Verdict,
};
pub use trace::{payload_digest, Trace, TraceEvent, TraceParseError};

use crate::constraint::{
    check_transition_contract, eval, AttrValue, Constraint, ConstraintKind, InstanceStore, Link,
    Value,
};
use crate::constraint::{Instance, StoreScope};
use crate::diag::Violation;
use crate::model::{ModelDefect, RelationshipKind, StateMachine, UmlModel};
use crate::ontology::{validate_message, ActionKind, AgentMessage, OntologyError, OntologyRegistry};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, VecDeque};
use thiserror::Error;

/// Safety valve for the event loop; a healthy mission finishes within tens
/// of ticks.
const MAX_TICKS: u64 = 100_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("model has structural defects:\n{}", render_defects(.0))]
    ModelInvalid(Vec<ModelDefect>),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("roster class `{0}` is not declared in the model")]
    UnknownRosterClass(String),
    #[error("no state machine found for `{0}` or its ancestors")]
    NoStateMachine(String),
    #[error("state `{0}` is not part of the machine")]
    UnknownState(String),
    #[error("constraint violations aborted the mission:\n{}", render_violations(.0))]
    ConstraintViolation(Vec<Violation>),
    #[error("schema violations aborted the mission:\n{}", render_violations(.0))]
    SchemaViolation(Vec<Violation>),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error("deadlock at tick {tick}: {waiting}")]
    Deadlock { tick: u64, waiting: String },
    #[error("mission exceeded {MAX_TICKS} ticks")]
    TickBudgetExceeded,
    #[error("performance list is empty")]
    EmptyPerformanceList,
    #[error("performance {0} is outside [0, 100]")]
    PerformanceOutOfRange(f64),
    #[error("cannot derive expected flow: {0}")]
    FlowDerivation(String),
    #[error("trace I/O: {0}")]
    Trace(#[from] TraceParseError),
}

fn render_defects(defects: &[ModelDefect]) -> String {
    defects.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

fn render_violations(violations: &[Violation]) -> String {
    violations.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n")
}

// ---------------------------------------------------------------------------
// Vehicle state machine stepping
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UvStepOutcome {
    /// The transition fired; the new current state.
    Transition { to: String },
    /// No transition for this event from the current state or its ancestors.
    Rejected { event: String },
}

/// Resolves an event against the current state, deepest state first: the
/// current state's own transitions win over transitions declared on an
/// enclosing composite state.
pub fn uv_step(
    machine: &StateMachine,
    current: &str,
    event: &str,
) -> Result<UvStepOutcome, SimError> {
    if machine.state(current).is_none() {
        return Err(SimError::UnknownState(current.to_string()));
    }
    let mut candidates = vec![current];
    candidates.extend(machine.state_ancestors(current));
    for state in candidates {
        if let Some(transition) =
            machine.transitions.iter().find(|t| t.from == state && t.trigger == event)
        {
            return Ok(UvStepOutcome::Transition { to: transition.to.clone() });
        }
    }
    Ok(UvStepOutcome::Rejected { event: event.to_string() })
}

// ---------------------------------------------------------------------------
// Fleet performance aggregation
// ---------------------------------------------------------------------------

/// Arithmetic mean rounded half-up to two decimals; the default fleet
/// aggregation.
pub fn aggregate_fleet_performance(values: &[f64]) -> Result<f64, SimError> {
    aggregate_fleet_performance_with(AggregationKind::Mean, values)
}

pub fn aggregate_fleet_performance_with(
    kind: AggregationKind,
    values: &[f64],
) -> Result<f64, SimError> {
    if values.is_empty() {
        return Err(SimError::EmptyPerformanceList);
    }
    for value in values {
        if !(0.0..=100.0).contains(value) {
            return Err(SimError::PerformanceOutOfRange(*value));
        }
    }
    let raw = match kind {
        AggregationKind::Mean => values.iter().sum::<f64>() / values.len() as f64,
        AggregationKind::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
        AggregationKind::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    Ok((raw * 100.0).round() / 100.0)
}

// ---------------------------------------------------------------------------
// Mission runtime
// ---------------------------------------------------------------------------

/// The trace and final instance store of a completed mission.
#[derive(Debug, Clone)]
pub struct MissionOutcome {
    pub trace: Trace,
    pub store: InstanceStore,
    /// Per-vehicle final machine states, for assertions and reports.
    pub uv_states: BTreeMap<String, String>,
    pub fleet_performance: f64,
}

/// Runs the full mission flow over the model. Every emitted message is
/// schema-validated, every vehicle task honors the receive contract, and
/// every performance write re-checks the value constraints; any breach
/// aborts the run with the violation list.
pub fn run_mission(
    model: &UmlModel,
    registry: &OntologyRegistry,
    constraints: &[Constraint],
    config: &SimConfig,
) -> Result<MissionOutcome, SimError> {
    let defects = crate::model::validate_model(model);
    if !defects.is_empty() {
        return Err(SimError::ModelInvalid(defects));
    }
    config.validate()?;

    let mut engine = Engine::new(model, registry, constraints, config)?;
    engine.run()?;
    Ok(MissionOutcome {
        trace: engine.trace,
        store: engine.store,
        uv_states: engine.uv_states,
        fleet_performance: engine.fleet_metric.unwrap_or(0.0),
    })
}

const OPERATOR: &str = "Operator";
const MCC: &str = "MCC";
const MANAGER: &str = "UVF-Manager";

struct Engine<'a> {
    model: &'a UmlModel,
    registry: &'a OntologyRegistry,
    constraints: &'a [Constraint],
    config: &'a SimConfig,
    machine: &'a StateMachine,

    store: InstanceStore,
    mailboxes: BTreeMap<String, VecDeque<AgentMessage>>,
    in_flight: Vec<(u64, AgentMessage)>,
    trace: Trace,
    seq: u64,
    tick: u64,
    progressed: bool,

    uv_states: BTreeMap<String, String>,
    durations: BTreeMap<String, u64>,
    performances: BTreeMap<String, f64>,
    completions: BTreeMap<String, u64>,

    collected: Vec<f64>,
    fleet_metric: Option<f64>,
    operator_sent: bool,
    operator_done: bool,
}

impl<'a> Engine<'a> {
    fn new(
        model: &'a UmlModel,
        registry: &'a OntologyRegistry,
        constraints: &'a [Constraint],
        config: &'a SimConfig,
    ) -> Result<Self, SimError> {
        // The machine shared by the roster classes, found on the class or
        // its nearest ancestor.
        let mut machine = None;
        for entry in &config.roster {
            if !model.has_class(&entry.class) {
                return Err(SimError::UnknownRosterClass(entry.class.clone()));
            }
            let found = machine_for(model, &entry.class)
                .ok_or_else(|| SimError::NoStateMachine(entry.class.clone()))?;
            machine.get_or_insert(found);
        }
        let machine = machine.expect("roster is non-empty");

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut durations = BTreeMap::new();
        for entry in &config.roster {
            let ticks = match config.task_duration {
                Some(fixed) => fixed as u64,
                None => rng.random_range(1..=5),
            };
            durations.insert(entry.id.clone(), ticks);
        }
        let mut performances = BTreeMap::new();
        for entry in &config.roster {
            let value = match config.performance {
                PerformanceModel::Fixed { value } => value,
                PerformanceModel::SeededUniform { low, high } => {
                    rng.random_range(low..=high) as f64
                }
            };
            performances.insert(entry.id.clone(), value);
        }

        let mut engine = Engine {
            model,
            registry,
            constraints,
            config,
            machine,
            store: InstanceStore::default(),
            mailboxes: BTreeMap::new(),
            in_flight: Vec::new(),
            trace: Trace::default(),
            seq: 0,
            tick: 0,
            progressed: false,
            uv_states: BTreeMap::new(),
            durations,
            performances,
            completions: BTreeMap::new(),
            collected: Vec::new(),
            fleet_metric: None,
            operator_sent: false,
            operator_done: false,
        };
        engine.build_store()?;
        Ok(engine)
    }

    fn build_store(&mut self) -> Result<(), SimError> {
        let singleton = |id: &str, attrs: &[(&str, AttrValue)]| Instance {
            id: id.to_string(),
            attributes: attrs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        };
        let s = |v: &str| AttrValue::Str(v.to_string());
        let n = |v: f64| AttrValue::Num(v);

        self.store.instances.insert(
            OPERATOR.into(),
            vec![singleton(OPERATOR, &[("operatorID", s("op-1"))])],
        );
        self.store
            .instances
            .insert(MCC.into(), vec![singleton(MCC, &[("mccID", s("mcc-1"))])]);
        self.store.instances.insert(
            MANAGER.into(),
            vec![singleton(
                MANAGER,
                &[
                    ("uvfID", s("uvf-1")),
                    ("uvCount", n(self.config.roster.len() as f64)),
                    ("fleetPlan", s("")),
                    ("fleetPerformance", n(0.0)),
                ],
            )],
        );
        self.store.links.push(Link {
            kind: RelationshipKind::Association,
            source: OPERATOR.into(),
            target: MCC.into(),
        });
        self.store.links.push(Link {
            kind: RelationshipKind::Composition,
            source: MCC.into(),
            target: MANAGER.into(),
        });

        for entry in &self.config.roster {
            self.store.instances.entry(entry.class.clone()).or_default().push(Instance {
                id: entry.id.clone(),
                attributes: [
                    ("uvID".to_string(), s(&entry.id)),
                    ("task".to_string(), s("")),
                    ("status".to_string(), s("Idle")),
                    ("performance".to_string(), n(0.0)),
                ]
                .into_iter()
                .collect(),
            });
            self.store.links.push(Link {
                kind: RelationshipKind::Aggregation,
                source: MANAGER.into(),
                target: entry.id.clone(),
            });

            // Bring the vehicle up: activate, then finish configuration.
            // Vehicles configured offline are pulled out of service instead.
            let mut state = self.machine.initial.clone();
            let mut events = vec!["activate", "configure-complete"];
            if self.config.offline.contains(&entry.id) {
                events.push("take-offline");
            }
            for event in events {
                match uv_step(self.machine, &state, event)? {
                    UvStepOutcome::Transition { to } => state = to,
                    UvStepOutcome::Rejected { event } => {
                        return Err(SimError::FlowDerivation(format!(
                            "setup event `{event}` rejected in state `{state}`"
                        )))
                    }
                }
            }
            self.uv_states.insert(entry.id.clone(), state);
        }

        for id in [OPERATOR, MCC, MANAGER] {
            self.mailboxes.insert(id.to_string(), VecDeque::new());
        }
        for entry in &self.config.roster {
            self.mailboxes.insert(entry.id.clone(), VecDeque::new());
        }
        Ok(())
    }

    fn run(&mut self) -> Result<(), SimError> {
        while !self.operator_done {
            if self.tick > MAX_TICKS {
                return Err(SimError::TickBudgetExceeded);
            }
            self.progressed = false;
            self.deliver_due();
            self.act_operator()?;
            self.act_mcc()?;
            self.act_manager()?;
            for entry in self.config.roster.clone() {
                self.act_uv(&entry.id)?;
            }
            if self.operator_done {
                break;
            }
            if !self.progressed && self.in_flight.is_empty() && self.completions.is_empty() {
                return Err(SimError::Deadlock {
                    tick: self.tick,
                    waiting: format!(
                        "{} of {} vehicle performances collected, flow incomplete",
                        self.collected.len(),
                        self.config.roster.len()
                    ),
                });
            }
            self.tick += 1;
        }
        Ok(())
    }

    fn deliver_due(&mut self) {
        let due: Vec<AgentMessage> = {
            let tick = self.tick;
            let (ready, later): (Vec<_>, Vec<_>) =
                self.in_flight.drain(..).partition(|(at, _)| *at <= tick);
            self.in_flight = later;
            ready.into_iter().map(|(_, m)| m).collect()
        };
        for message in due {
            self.progressed = true;
            if let Some(mailbox) = self.mailboxes.get_mut(&message.receiver) {
                mailbox.push_back(message);
            }
        }
    }

    /// Validates and emits a message: trace event now, delivery next tick.
    fn send(
        &mut self,
        sender: &str,
        receiver: &str,
        schema: &str,
        content: &[(&str, AttrValue)],
    ) -> Result<(), SimError> {
        self.seq += 1;
        let message = AgentMessage {
            sender: sender.to_string(),
            receiver: receiver.to_string(),
            action: ActionKind::Send,
            schema: schema.to_string(),
            content: content.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            sequence_hint: self.seq,
            performative: None,
        };
        let violations = validate_message(self.registry, &message)?;
        if !violations.is_empty() {
            return Err(SimError::SchemaViolation(violations));
        }
        self.trace.push(TraceEvent {
            seq: self.seq,
            tick: self.tick,
            sender: sender.to_string(),
            receiver: receiver.to_string(),
            schema: schema.to_string(),
            digest: payload_digest(&message),
        });
        self.in_flight.push((self.tick + 1, message));
        self.progressed = true;
        Ok(())
    }

    fn drain_mailbox(&mut self, agent: &str) -> Vec<AgentMessage> {
        self.mailboxes.get_mut(agent).map(|m| m.drain(..).collect()).unwrap_or_default()
    }

    fn act_operator(&mut self) -> Result<(), SimError> {
        if !self.operator_sent {
            self.operator_sent = true;
            self.send(
                OPERATOR,
                MCC,
                "Mission-Brief",
                &[
                    ("mission-ID", AttrValue::Str("m-1".into())),
                    ("description", AttrValue::Str("patrol the operations area".into())),
                    ("status", AttrValue::Str("new".into())),
                ],
            )?;
        }
        for message in self.drain_mailbox(OPERATOR) {
            if message.schema == "Mission-Performance" {
                self.operator_done = true;
                self.progressed = true;
            }
        }
        Ok(())
    }

    fn act_mcc(&mut self) -> Result<(), SimError> {
        for message in self.drain_mailbox(MCC) {
            self.progressed = true;
            match message.schema.as_str() {
                "Mission-Brief" => {
                    if self.config.discovery {
                        self.send(
                            MCC,
                            MANAGER,
                            "UV-Discovery-Request",
                            &[
                                ("request-ID", AttrValue::Str("disc-1".into())),
                                ("description", AttrValue::Str("report available UVs".into())),
                            ],
                        )?;
                    } else {
                        self.send_fleet_plan()?;
                    }
                }
                "UV-List" => self.send_fleet_plan()?,
                "Fleet-Performance" => {
                    let metric = message
                        .content
                        .get("performance-metric")
                        .and_then(|v| match v {
                            AttrValue::Num(n) => Some(*n),
                            _ => None,
                        })
                        .unwrap_or(0.0);
                    // Mission performance is the fleet metric passed through.
                    self.send(
                        MCC,
                        OPERATOR,
                        "Mission-Performance",
                        &[
                            ("mission-performance-ID", AttrValue::Str("mp-1".into())),
                            ("performance-metric", AttrValue::Num(metric)),
                        ],
                    )?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn send_fleet_plan(&mut self) -> Result<(), SimError> {
        self.send(
            MCC,
            MANAGER,
            "Fleet-Plan",
            &[
                ("plan-ID", AttrValue::Str("fp-1".into())),
                ("description", AttrValue::Str("allocate tasks across the fleet".into())),
                ("status", AttrValue::Str("ready".into())),
            ],
        )
    }

    fn act_manager(&mut self) -> Result<(), SimError> {
        for message in self.drain_mailbox(MANAGER) {
            self.progressed = true;
            match message.schema.as_str() {
                "UV-Discovery-Request" => {
                    self.send(
                        MANAGER,
                        MCC,
                        "UV-List",
                        &[
                            ("list-ID", AttrValue::Str("list-1".into())),
                            ("uv-count", AttrValue::Num(self.config.roster.len() as f64)),
                        ],
                    )?;
                }
                "Fleet-Plan" => {
                    for (index, entry) in self.config.roster.clone().iter().enumerate() {
                        self.send(
                            MANAGER,
                            &entry.id,
                            "UV-Task",
                            &[
                                ("task-ID", AttrValue::Str(format!("t-{}", index + 1))),
                                (
                                    "description",
                                    AttrValue::Str("execute assigned patrol segment".into()),
                                ),
                                ("status", AttrValue::Str("assigned".into())),
                            ],
                        )?;
                    }
                }
                "UV-Performance" => {
                    if let Some(AttrValue::Num(metric)) = message.content.get("performance-metric")
                    {
                        self.collected.push(*metric);
                    }
                    if self.collected.len() == self.config.roster.len() {
                        let fleet = aggregate_fleet_performance_with(
                            self.config.aggregation,
                            &self.collected,
                        )?;
                        self.fleet_metric = Some(fleet);
                        self.write_attr(MANAGER, "fleetPerformance", AttrValue::Num(fleet))?;
                        self.send(
                            MANAGER,
                            MCC,
                            "Fleet-Performance",
                            &[
                                ("Fleet-Performance-ID", AttrValue::Str("fleet-perf-1".into())),
                                ("performance-metric", AttrValue::Num(fleet)),
                            ],
                        )?;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn act_uv(&mut self, id: &str) -> Result<(), SimError> {
        for message in self.drain_mailbox(id) {
            self.progressed = true;
            if message.schema != "UV-Task" {
                continue;
            }
            let state = self.uv_states[id].clone();
            match uv_step(self.machine, &state, "assign-mission")? {
                UvStepOutcome::Rejected { .. } => {
                    // An out-of-service vehicle cannot take the mission; the
                    // task is dropped and the flow will starve.
                    continue;
                }
                UvStepOutcome::Transition { to } => {
                    let task_id = message
                        .content
                        .get("task-ID")
                        .map(AttrValue::render)
                        .unwrap_or_default();
                    let before = self.attrs_of(id);
                    let mut after = before.clone();
                    after.insert("status".into(), AttrValue::Str("Active".into()));
                    after.insert("task".into(), AttrValue::Str(task_id.clone()));
                    let violations = check_transition_contract(
                        self.constraints,
                        "receiveTask",
                        &before,
                        &after,
                    )
                    .map_err(|e| SimError::FlowDerivation(e.to_string()))?;
                    if !violations.is_empty() {
                        return Err(SimError::ConstraintViolation(violations));
                    }
                    self.write_attr(id, "status", AttrValue::Str("Active".into()))?;
                    self.write_attr(id, "task", AttrValue::Str(task_id))?;
                    self.uv_states.insert(id.to_string(), to);
                    self.completions.insert(id.to_string(), self.tick + self.durations[id]);
                }
            }
        }

        if let Some(due) = self.completions.get(id).copied() {
            if due <= self.tick {
                self.completions.remove(id);
                self.progressed = true;
                let metric = self.performances[id];
                self.write_attr(id, "performance", AttrValue::Num(metric))?;
                self.write_attr(id, "status", AttrValue::Str("Idle".into()))?;
                self.write_attr(id, "task", AttrValue::Str(String::new()))?;
                let state = self.uv_states[id].clone();
                if let UvStepOutcome::Transition { to } =
                    uv_step(self.machine, &state, "mission-complete")?
                {
                    self.uv_states.insert(id.to_string(), to);
                }
                self.send(
                    id,
                    MANAGER,
                    "UV-Performance",
                    &[
                        ("UV-performance-ID", AttrValue::Str(format!("perf-{id}"))),
                        ("performance-metric", AttrValue::Num(metric)),
                    ],
                )?;
            }
        }
        Ok(())
    }

    fn attrs_of(&self, id: &str) -> BTreeMap<String, AttrValue> {
        self.store.find(id).map(|(_, i)| i.attributes.clone()).unwrap_or_default()
    }

    /// Writes an attribute and re-evaluates every value constraint that
    /// applies to the instance's class; a breach aborts the mission.
    fn write_attr(&mut self, id: &str, attr: &str, value: AttrValue) -> Result<(), SimError> {
        if let Some(instance) = self.store.find_mut(id) {
            instance.attributes.insert(attr.to_string(), value);
        }
        let Some((class, _)) = self.store.find(id) else {
            return Ok(());
        };
        let class = class.to_string();
        let mut violations = Vec::new();
        for constraint in self
            .constraints
            .iter()
            .filter(|c| c.kind == ConstraintKind::Value)
            .filter(|c| self.model.is_kind_of(&class, &c.context))
        {
            let scope = StoreScope::new(self.model, &self.store, Some(id.to_string()));
            if let Ok(Value::Bool(false)) = eval(&constraint.expr, &scope) {
                violations.push(Violation::new(
                    &constraint.id,
                    crate::diag::Subject::Instance { id: id.to_string() },
                    format!("{attr} write"),
                    format!("value constraint `{}` violated on write", constraint.id),
                ));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(SimError::ConstraintViolation(violations))
        }
    }
}

fn machine_for<'m>(model: &'m UmlModel, class: &str) -> Option<&'m StateMachine> {
    if let Some(machine) = model.state_machine_for(class) {
        return Some(machine);
    }
    let chain = crate::model::resolve_hierarchy(model, class).ok()?;
    chain.iter().find_map(|ancestor| model.state_machine_for(ancestor))
}
