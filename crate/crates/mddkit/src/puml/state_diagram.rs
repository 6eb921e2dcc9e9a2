//! State-diagram parser: `[*] --> S` initial marker, nested `state` blocks
//! for composite states, and `A --> B : event [guard] / action` transitions.

use super::{content_lines, is_noise_directive, DiagramKind, PumlError, SourceUnit};
use crate::diag::ParseDiagnostic;
use crate::model::{StateDef, StateMachine, Transition};

/// Parses a state diagram. The owning class is taken from the
/// `@startuml <Owner>` header; a headerless diagram gets an empty owner plus
/// a warning, and model merge will flag it.
pub fn parse_state_diagram(
    unit: &SourceUnit,
) -> Result<(StateMachine, Vec<ParseDiagnostic>), PumlError> {
    if unit.kind != DiagramKind::StateDiagram {
        return Err(PumlError::WrongKind {
            path: unit.path.clone(),
            expected: DiagramKind::StateDiagram,
            actual: unit.kind,
        });
    }

    let mut diagnostics = Vec::new();
    let owner = header_owner(&unit.text).unwrap_or_default();
    if owner.is_empty() {
        diagnostics.push(ParseDiagnostic::warning(
            &unit.path,
            1,
            1,
            "missing-owner",
            "state diagram has no `@startuml <Owner>` header naming its class",
        ));
    }

    let mut machine = StateMachine {
        owner,
        states: Vec::new(),
        initial: String::new(),
        transitions: Vec::new(),
    };
    // Stack of enclosing composite state names.
    let mut parents: Vec<String> = Vec::new();

    for (line_no, line) in content_lines(&unit.text) {
        if line == "}" {
            if parents.pop().is_none() {
                return Err(PumlError::UnbalancedBlock {
                    path: unit.path.clone(),
                    line: line_no,
                    construct: "state".to_string(),
                });
            }
            continue;
        }

        if let Some(rest) = line.strip_prefix("state ") {
            let has_body = rest.trim_end().ends_with('{');
            let name = rest.trim_end().trim_end_matches('{').trim();
            if name.is_empty() {
                diagnostics.push(ParseDiagnostic::warning(
                    &unit.path,
                    line_no,
                    1,
                    "unparsed-state",
                    "state declaration without a name",
                ));
                continue;
            }
            declare_state(&mut machine, name, parents.last().cloned());
            if has_body {
                parents.push(name.to_string());
            }
            continue;
        }

        if let Some(rest) = line.strip_prefix("[*]") {
            let rest = rest.trim();
            if let Some(target) = rest.strip_prefix("-->") {
                let target = target.trim().trim_end_matches(':').trim();
                if parents.is_empty() {
                    if machine.initial.is_empty() {
                        machine.initial = target.to_string();
                        declare_state(&mut machine, target, None);
                    } else {
                        diagnostics.push(ParseDiagnostic::warning(
                            &unit.path,
                            line_no,
                            1,
                            "duplicate-initial",
                            "second top-level initial marker ignored",
                        ));
                    }
                } else {
                    diagnostics.push(ParseDiagnostic::warning(
                        &unit.path,
                        line_no,
                        1,
                        "nested-initial-ignored",
                        "per-composite initial markers are outside the supported subset",
                    ));
                }
            } else {
                diagnostics.push(ParseDiagnostic::warning(
                    &unit.path,
                    line_no,
                    1,
                    "unparsed-line",
                    format!("skipping unrecognized line `{line}`"),
                ));
            }
            continue;
        }

        if is_noise_directive(line) {
            diagnostics.push(ParseDiagnostic::warning(
                &unit.path,
                line_no,
                1,
                "ignored-directive",
                format!("directive outside the supported subset: `{line}`"),
            ));
            continue;
        }

        match parse_transition(line) {
            Some(TransitionLine::ToFinal) => diagnostics.push(ParseDiagnostic::warning(
                &unit.path,
                line_no,
                1,
                "final-state-ignored",
                "transitions to `[*]` are outside the supported subset",
            )),
            Some(TransitionLine::Missing) => diagnostics.push(ParseDiagnostic::warning(
                &unit.path,
                line_no,
                1,
                "missing-trigger",
                "transition without an event label skipped",
            )),
            Some(TransitionLine::Ok(t)) => {
                declare_state(&mut machine, &t.from, parents.last().cloned());
                declare_state(&mut machine, &t.to, None);
                machine.transitions.push(t);
            }
            None => diagnostics.push(ParseDiagnostic::warning(
                &unit.path,
                line_no,
                1,
                "unparsed-line",
                format!("skipping unrecognized line `{line}`"),
            )),
        }
    }

    if !parents.is_empty() {
        return Err(PumlError::UnbalancedBlock {
            path: unit.path.clone(),
            line: unit.text.lines().count() as u32,
            construct: format!("state {}", parents.last().unwrap()),
        });
    }
    if machine.initial.is_empty() {
        return Err(PumlError::MissingInitialState(unit.path.clone()));
    }
    Ok((machine, diagnostics))
}

fn header_owner(text: &str) -> Option<String> {
    text.lines().find_map(|line| {
        line.trim()
            .strip_prefix("@startuml")
            .map(|rest| rest.trim().to_string())
            .filter(|s| !s.is_empty())
    })
}

/// Adds a state if unseen. An already-declared state keeps its first parent;
/// transition endpoints never overwrite nesting declared by `state` blocks.
fn declare_state(machine: &mut StateMachine, name: &str, parent: Option<String>) {
    if machine.state(name).is_none() {
        machine.states.push(StateDef { name: name.to_string(), parent });
    }
}

enum TransitionLine {
    Ok(Transition),
    ToFinal,
    Missing,
}

/// `A --> B : event [guard] / action`
fn parse_transition(line: &str) -> Option<TransitionLine> {
    let (ends, label) = match line.split_once(':') {
        Some((ends, label)) => (ends.trim(), Some(label.trim())),
        None => (line.trim(), None),
    };
    let (from, to) = ends.split_once("-->")?;
    let from = from.trim();
    let to = to.trim();
    if from.is_empty() || to.is_empty() || !is_state_name(from) {
        return None;
    }
    if to == "[*]" {
        return Some(TransitionLine::ToFinal);
    }
    if !is_state_name(to) {
        return None;
    }
    let Some(label) = label else {
        return Some(TransitionLine::Missing);
    };

    // Split `event [guard] / action` from the right: action first, then guard.
    let (rest, action) = match label.split_once('/') {
        Some((r, a)) => (r.trim(), Some(a.trim().to_string()).filter(|s| !s.is_empty())),
        None => (label, None),
    };
    let (trigger, guard) = match rest.find('[') {
        Some(open) => {
            let close = rest.rfind(']')?;
            if close < open {
                return None;
            }
            (
                rest[..open].trim(),
                Some(rest[open + 1..close].trim().to_string()).filter(|s| !s.is_empty()),
            )
        }
        None => (rest.trim(), None),
    };
    if trigger.is_empty() {
        return Some(TransitionLine::Missing);
    }
    Some(TransitionLine::Ok(Transition {
        from: from.to_string(),
        to: to.to_string(),
        trigger: trigger.to_string(),
        guard,
        action,
    }))
}

fn is_state_name(word: &str) -> bool {
    !word.is_empty()
        && word.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
        && word.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(text: &str) -> SourceUnit {
        SourceUnit::new("states.puml", text, None).unwrap()
    }

    #[test]
    fn initial_and_nesting() {
        let text = "@startuml UV\n[*] --> Available\nstate Available {\nstate Unregistered\n}\n@enduml\n";
        let (machine, diags) = parse_state_diagram(&unit(text)).unwrap();
        assert!(diags.is_empty());
        assert_eq!(machine.owner, "UV");
        assert_eq!(machine.initial, "Available");
        let unreg = machine.state("Unregistered").unwrap();
        assert_eq!(unreg.parent.as_deref(), Some("Available"));
    }

    #[test]
    fn transition_with_trigger() {
        let text = "@startuml UV\n[*] --> Unregistered\nUnregistered --> Registered : configure\n";
        let (machine, _) = parse_state_diagram(&unit(text)).unwrap();
        assert_eq!(machine.transitions.len(), 1);
        let t = &machine.transitions[0];
        assert_eq!((t.from.as_str(), t.to.as_str(), t.trigger.as_str()),
                   ("Unregistered", "Registered", "configure"));
        assert_eq!(t.guard, None);
        assert_eq!(t.action, None);
    }

    #[test]
    fn transition_with_guard_and_action() {
        let text = "[*] --> A\nA --> B : go [ready] / launch\n";
        let (machine, _) = parse_state_diagram(&unit(text)).unwrap();
        let t = &machine.transitions[0];
        assert_eq!(t.trigger, "go");
        assert_eq!(t.guard.as_deref(), Some("ready"));
        assert_eq!(t.action.as_deref(), Some("launch"));
    }

    #[test]
    fn missing_initial_is_an_error() {
        let err = parse_state_diagram(&unit("state A\nA --> B : go\n")).unwrap_err();
        assert!(matches!(err, PumlError::MissingInitialState(_)));
    }

    #[test]
    fn unclosed_composite_is_unbalanced() {
        let err = parse_state_diagram(&unit("[*] --> A\nstate A {\nstate B\n")).unwrap_err();
        assert!(matches!(err, PumlError::UnbalancedBlock { .. }));
    }

    #[test]
    fn two_level_nesting() {
        let text = "@startuml UV\n[*] --> Initial\nstate Available {\nstate Registered {\nstate Controlled\n}\n}\n";
        let (machine, _) = parse_state_diagram(&unit(text)).unwrap();
        assert_eq!(machine.state("Registered").unwrap().parent.as_deref(), Some("Available"));
        assert_eq!(machine.state("Controlled").unwrap().parent.as_deref(), Some("Registered"));
    }
}
