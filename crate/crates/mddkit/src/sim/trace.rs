//! Mission traces: the ordered message events of a run, with text, JSON,
//! and sequence-diagram renderings.

use crate::ontology::AgentMessage;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub tick: u64,
    pub sender: String,
    pub receiver: String,
    pub schema: String,
    /// Short stable hash of the message content.
    pub digest: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {0}: expected `seq tick sender->receiver schema digest`")]
    Malformed(u32),
}

/// Twelve hex chars of the content hash: stable, short enough for trace lines.
pub fn payload_digest(message: &AgentMessage) -> String {
    let canonical = serde_json::to_string(&message.content).expect("content serializes");
    let hash = Sha256::digest(canonical.as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect::<String>()[..12].to_string()
}

impl Trace {
    pub fn push(&mut self, event: TraceEvent) {
        debug_assert!(
            self.events.last().map(|e| e.seq < event.seq && e.tick <= event.tick).unwrap_or(true),
            "seq must increase strictly, tick monotonically"
        );
        self.events.push(event);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Line-oriented rendering: `seq tick sender->receiver schema digest`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&format!(
                "{} {} {}->{} {} {}\n",
                e.seq, e.tick, e.sender, e.receiver, e.schema, e.digest
            ));
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Trace, TraceParseError> {
        let mut events = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let line_no = idx as u32 + 1;
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [seq, tick, route, schema, digest] = parts.as_slice() else {
                return Err(TraceParseError::Malformed(line_no));
            };
            let (sender, receiver) =
                route.split_once("->").ok_or(TraceParseError::Malformed(line_no))?;
            events.push(TraceEvent {
                seq: seq.parse().map_err(|_| TraceParseError::Malformed(line_no))?,
                tick: tick.parse().map_err(|_| TraceParseError::Malformed(line_no))?,
                sender: sender.to_string(),
                receiver: receiver.to_string(),
                schema: schema.to_string(),
                digest: digest.to_string(),
            });
        }
        Ok(Trace { events })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    /// PlantUML sequence diagram of the run, participants in first-appearance
    /// order.
    pub fn to_plantuml(&self) -> String {
        let mut out = String::from("@startuml mission_trace\n");
        let mut participants: Vec<&str> = Vec::new();
        for event in &self.events {
            for agent in [event.sender.as_str(), event.receiver.as_str()] {
                if !participants.contains(&agent) {
                    participants.push(agent);
                }
            }
        }
        for participant in &participants {
            if participant.contains('-') {
                out.push_str(&format!(
                    "participant \"{participant}\" as {}\n",
                    alias(participant)
                ));
            } else {
                out.push_str(&format!("participant {participant}\n"));
            }
        }
        for event in &self.events {
            out.push_str(&format!(
                "{} -> {} : {}\n",
                alias(&event.sender),
                alias(&event.receiver),
                event.schema
            ));
        }
        out.push_str("@enduml\n");
        out
    }
}

fn alias(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}
