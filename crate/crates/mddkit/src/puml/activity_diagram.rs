//! Activity-diagram parser: swimlanes, `start`/`stop`, `:action;` nodes,
//! `if/then/else/endif` decisions, and `fork/fork again/end fork` regions.

use super::{content_lines, is_noise_directive, DiagramKind, PumlError, SourceUnit};
use crate::diag::ParseDiagnostic;
use crate::model::{ActivityEdge, ActivityFlow, ActivityNode, NodeKind};

/// Dangling control-flow exits: nodes waiting to be wired to the next node,
/// each with an optional guard for the edge.
type Pending = Vec<(String, Option<String>)>;

pub fn parse_activity_diagram(
    unit: &SourceUnit,
) -> Result<(ActivityFlow, Vec<ParseDiagnostic>), PumlError> {
    if unit.kind != DiagramKind::ActivityDiagram {
        return Err(PumlError::WrongKind {
            path: unit.path.clone(),
            expected: DiagramKind::ActivityDiagram,
            actual: unit.kind,
        });
    }

    let mut parser = Parser {
        unit,
        statements: split_into_statements(&unit.text),
        cursor: 0,
        flow: ActivityFlow { nodes: Vec::new(), edges: Vec::new() },
        diagnostics: Vec::new(),
        lane: String::new(),
        counter: 0,
    };
    let (_, terminator) = parser.parse_block(Vec::new(), &[])?;
    debug_assert!(terminator.is_none());
    Ok((parser.flow, parser.diagnostics))
}

struct Parser<'a> {
    unit: &'a SourceUnit,
    statements: Vec<(u32, String)>,
    cursor: usize,
    flow: ActivityFlow,
    diagnostics: Vec<ParseDiagnostic>,
    lane: String,
    counter: u32,
}

impl Parser<'_> {
    fn add_node(&mut self, kind: NodeKind, label: &str) -> String {
        self.counter += 1;
        let id = format!("n{}", self.counter);
        self.flow.nodes.push(ActivityNode {
            id: id.clone(),
            kind,
            actor: self.lane.clone(),
            label: label.to_string(),
        });
        id
    }

    fn connect(&mut self, pending: &Pending, to: &str) {
        for (from, guard) in pending {
            self.flow.edges.push(ActivityEdge {
                from: from.clone(),
                to: to.to_string(),
                guard: guard.clone(),
            });
        }
    }

    fn warn(&mut self, line: u32, code: &str, message: String) {
        self.diagnostics.push(ParseDiagnostic::warning(&self.unit.path, line, 1, code, message));
    }

    /// Parses statements until one of `terminators` (or end of input when the
    /// list is empty), starting from the given dangling exits. The terminator
    /// statement itself is left unconsumed.
    fn parse_block(
        &mut self,
        start: Pending,
        terminators: &[&str],
    ) -> Result<(Pending, Option<String>), PumlError> {
        let mut pending = start;
        while self.cursor < self.statements.len() {
            let (line_no, stmt) = self.statements[self.cursor].clone();
            let normalized = normalize_keyword(&stmt);

            if terminators.contains(&normalized.as_str()) {
                return Ok((pending, Some(normalized)));
            }
            self.cursor += 1;

            // Closers with no open block.
            if ["endif", "else", "fork-again", "end-fork"].contains(&normalized.as_str()) {
                return Err(PumlError::UnbalancedBlock {
                    path: self.unit.path.clone(),
                    line: line_no,
                    construct: normalized,
                });
            }

            if stmt.starts_with('|') && stmt.ends_with('|') && stmt.len() > 1 {
                let lane = stmt.trim_matches('|').split('|').next_back().unwrap_or("").trim();
                self.lane = lane.to_string();
                continue;
            }

            if let Some(label) = stmt.strip_prefix(':') {
                match label.strip_suffix(';') {
                    Some(label) => {
                        let id = self.add_node(NodeKind::Action, label.trim());
                        self.connect(&pending, &id);
                        pending = vec![(id, None)];
                    }
                    None => self.warn(
                        line_no,
                        "unterminated-action",
                        format!("action `{stmt}` is missing its closing `;`"),
                    ),
                }
                continue;
            }

            match normalized.as_str() {
                "start" => {
                    let id = self.add_node(NodeKind::Start, "start");
                    pending = vec![(id, None)];
                }
                "stop" | "end" => {
                    let id = self.add_node(NodeKind::End, &normalized);
                    self.connect(&pending, &id);
                    pending = Vec::new();
                }
                "if" => {
                    pending = self.parse_if(line_no, &stmt, pending)?;
                }
                "fork" => {
                    pending = self.parse_fork(pending)?;
                }
                _ if is_noise_directive(&stmt) => {
                    self.warn(
                        line_no,
                        "ignored-directive",
                        format!("directive outside the supported subset: `{stmt}`"),
                    );
                }
                _ => {
                    self.warn(line_no, "unparsed-line", format!("skipping unrecognized `{stmt}`"));
                }
            }
        }

        if terminators.is_empty() {
            Ok((pending, None))
        } else {
            Err(PumlError::UnbalancedBlock {
                path: self.unit.path.clone(),
                line: self.statements.last().map(|(l, _)| *l).unwrap_or(1),
                construct: terminators.join("/"),
            })
        }
    }

    /// `if (cond) then (label)` ... [`else (label)` ...] `endif`
    fn parse_if(
        &mut self,
        line_no: u32,
        stmt: &str,
        incoming: Pending,
    ) -> Result<Pending, PumlError> {
        let cond = extract_parens(stmt).unwrap_or_default();
        if cond.is_empty() {
            self.warn(line_no, "missing-condition", "decision without a condition".to_string());
        }
        let then_guard =
            extract_parens(stmt.split(" then").nth(1).unwrap_or("")).or(Some("yes".to_string()));
        let decision = self.add_node(NodeKind::Decision, &cond);
        self.connect(&incoming, &decision);

        let (mut exits, terminator) = self
            .parse_block(vec![(decision.clone(), then_guard)], &["else", "endif"])?;
        let terminator = terminator.expect("parse_block errors when the terminator is missing");

        if terminator == "else" {
            let else_stmt = self.statements[self.cursor].1.clone();
            self.cursor += 1; // consume `else`
            let else_guard = extract_parens(&else_stmt).or(Some("no".to_string()));
            let (mut else_exits, _) =
                self.parse_block(vec![(decision, else_guard)], &["endif"])?;
            exits.append(&mut else_exits);
        } else {
            // No else branch: the false edge falls through past the endif.
            exits.push((decision, Some("no".to_string())));
        }
        self.cursor += 1; // consume `endif`
        Ok(exits)
    }

    /// `fork` branch (`fork again` branch)* `end fork`
    fn parse_fork(&mut self, incoming: Pending) -> Result<Pending, PumlError> {
        let fork = self.add_node(NodeKind::Fork, "fork");
        self.connect(&incoming, &fork);

        let mut exits: Pending = Vec::new();
        loop {
            let (mut branch_exits, terminator) =
                self.parse_block(vec![(fork.clone(), None)], &["fork-again", "end-fork"])?;
            exits.append(&mut branch_exits);
            self.cursor += 1; // consume the terminator
            if terminator.as_deref() == Some("end-fork") {
                break;
            }
        }

        let join = self.add_node(NodeKind::Join, "join");
        self.connect(&exits, &join);
        Ok(vec![(join, None)])
    }
}

/// Lowercases a statement head and joins multi-word closers so terminators
/// compare as single tokens: `fork again` -> `fork-again`, `end fork` ->
/// `end-fork`.
fn normalize_keyword(stmt: &str) -> String {
    let words: Vec<&str> = stmt.split_whitespace().collect();
    match words.as_slice() {
        ["fork", "again", ..] => "fork-again".to_string(),
        ["end", "fork", ..] => "end-fork".to_string(),
        _ => words.first().map(|w| w.to_lowercase()).unwrap_or_default(),
    }
}

fn extract_parens(text: &str) -> Option<String> {
    let open = text.find('(')?;
    let close = text[open..].find(')')? + open;
    Some(text[open + 1..close].trim().to_string()).filter(|s| !s.is_empty())
}

/// Splits raw lines into statements; a line may hold several, e.g.
/// `|Operator| start :send mission-brief;`.
fn split_into_statements(text: &str) -> Vec<(u32, String)> {
    let mut statements = Vec::new();
    for (line_no, line) in content_lines(text) {
        let mut rest = line.trim();
        while !rest.is_empty() {
            if let Some(after) = rest.strip_prefix('|') {
                match after.find('|') {
                    Some(end) => {
                        statements.push((line_no, format!("|{}|", &after[..end])));
                        rest = after[end + 1..].trim_start();
                    }
                    None => {
                        statements.push((line_no, rest.to_string()));
                        rest = "";
                    }
                }
            } else if rest.starts_with(':') {
                match rest.find(';') {
                    Some(end) => {
                        statements.push((line_no, rest[..=end].to_string()));
                        rest = rest[end + 1..].trim_start();
                    }
                    None => {
                        statements.push((line_no, rest.to_string()));
                        rest = "";
                    }
                }
            } else {
                match rest.find([':', '|']) {
                    Some(idx) => {
                        statements.push((line_no, rest[..idx].trim().to_string()));
                        rest = rest[idx..].trim_start();
                    }
                    None => {
                        statements.push((line_no, rest.to_string()));
                        rest = "";
                    }
                }
            }
        }
    }
    statements
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(text: &str) -> SourceUnit {
        SourceUnit::new("activity.puml", text, None).unwrap()
    }

    fn parse(text: &str) -> (ActivityFlow, Vec<ParseDiagnostic>) {
        parse_activity_diagram(&unit(text)).unwrap()
    }

    #[test]
    fn lane_start_and_action_on_one_line() {
        let (flow, diags) = parse("|Operator| start :send mission-brief;\nstop\n");
        assert!(diags.is_empty());
        assert_eq!(flow.nodes[0].kind, NodeKind::Start);
        assert_eq!(flow.nodes[1].kind, NodeKind::Action);
        assert_eq!(flow.nodes[1].actor, "Operator");
        assert_eq!(flow.nodes[1].label, "send mission-brief");
        // start -> action -> stop
        assert_eq!(flow.edges.len(), 2);
    }

    #[test]
    fn fork_with_three_branches() {
        let text = "|M| start\nfork\n:send UV-task;\nfork again\n:send UV-task;\nfork again\n:send UV-task;\nend fork\nstop\n";
        let (flow, _) = parse(text);
        let forks: Vec<_> = flow.nodes.iter().filter(|n| n.kind == NodeKind::Fork).collect();
        let joins: Vec<_> = flow.nodes.iter().filter(|n| n.kind == NodeKind::Join).collect();
        let actions: Vec<_> = flow.nodes.iter().filter(|n| n.kind == NodeKind::Action).collect();
        assert_eq!(forks.len(), 1);
        assert_eq!(joins.len(), 1);
        assert_eq!(actions.len(), 3);
        // fork fans out to all three actions, join collects them
        let fork_id = &forks[0].id;
        let join_id = &joins[0].id;
        assert_eq!(flow.edges.iter().filter(|e| &e.from == fork_id).count(), 3);
        assert_eq!(flow.edges.iter().filter(|e| &e.to == join_id).count(), 3);
    }

    #[test]
    fn if_else_branches_rejoin() {
        let text = "|A| start\nif (ok?) then (yes)\n:accept;\nelse (no)\n:refuse;\nendif\n:continue;\nstop\n";
        let (flow, _) = parse(text);
        let decision = flow.nodes.iter().find(|n| n.kind == NodeKind::Decision).unwrap();
        assert_eq!(decision.label, "ok?");
        let guards: Vec<_> = flow
            .edges
            .iter()
            .filter(|e| e.from == decision.id)
            .map(|e| e.guard.clone().unwrap())
            .collect();
        assert_eq!(guards, vec!["yes", "no"]);
        // both branch actions flow into `continue`
        let cont = flow.nodes.iter().find(|n| n.label == "continue").unwrap();
        assert_eq!(flow.edges.iter().filter(|e| e.to == cont.id).count(), 2);
    }

    #[test]
    fn unclosed_if_is_unbalanced() {
        let err = parse_activity_diagram(&unit("|A| start\nif (ok?) then\n:x;\n")).unwrap_err();
        assert!(matches!(err, PumlError::UnbalancedBlock { .. }));
    }

    #[test]
    fn unclosed_fork_is_unbalanced() {
        let err = parse_activity_diagram(&unit("|A| start\nfork\n:x;\n")).unwrap_err();
        assert!(matches!(err, PumlError::UnbalancedBlock { .. }));
    }

    #[test]
    fn stray_endif_is_unbalanced() {
        let err = parse_activity_diagram(&unit("|A| start\nendif\n")).unwrap_err();
        assert!(matches!(err, PumlError::UnbalancedBlock { .. }));
    }

    #[test]
    fn if_without_else_falls_through() {
        let text = "|A| start\nif (ok?) then (yes)\n:accept;\nendif\n:done;\nstop\n";
        let (flow, _) = parse(text);
        let done = flow.nodes.iter().find(|n| n.label == "done").unwrap();
        // accept -> done and decision -(no)-> done
        assert_eq!(flow.edges.iter().filter(|e| e.to == done.id).count(), 2);
    }
}
