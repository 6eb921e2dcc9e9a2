//! Control-flow extraction from structured source text, driven by a language
//! profile (branch keywords, block delimiters). Each agent class becomes one
//! connected graph: method subgraphs are chained between a virtual class
//! entry and class exit, so P = 1 per class and the graph complexity equals
//! the syntactic decision-point count plus one. Both numbers are computed and
//! cross-checked on every extraction.

use super::{ComplexityError, ControlFlowGraph};
use serde::{Deserialize, Serialize};

/// Syntax of one code dialect, enough to recover block structure and
/// decision points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageProfile {
    pub name: String,
    /// Keywords opening a method-like block (`on`, `fn`).
    pub function_keywords: Vec<String>,
    /// Keyword opening a class-like container (`agent`).
    pub class_keyword: String,
    pub if_keyword: String,
    pub else_keyword: String,
    pub loop_keywords: Vec<String>,
    pub match_keyword: String,
    pub case_keyword: String,
    pub default_keyword: String,
    pub comment_prefix: String,
    /// File extension the dialect uses, without the dot.
    pub file_extension: String,
    /// When true, `&&`/`||` in conditions add decision points (and matching
    /// branch edges). Off by default: operator-level counting is a different
    /// convention than block-level counting.
    pub count_short_circuit: bool,
}

/// Profile for the bundled simulation dialect emitted by the offline
/// code-generation backend.
pub fn sim_profile() -> LanguageProfile {
    LanguageProfile {
        name: "sim".to_string(),
        function_keywords: vec!["on".to_string(), "fn".to_string()],
        class_keyword: "agent".to_string(),
        if_keyword: "if".to_string(),
        else_keyword: "else".to_string(),
        loop_keywords: vec!["while".to_string(), "for".to_string()],
        match_keyword: "match".to_string(),
        case_keyword: "case".to_string(),
        default_keyword: "default".to_string(),
        comment_prefix: "#".to_string(),
        file_extension: "sim".to_string(),
        count_short_circuit: false,
    }
}

/// Looks up a bundled profile by name.
pub fn profile_named(name: &str) -> Result<LanguageProfile, ComplexityError> {
    match name {
        "sim" => Ok(sim_profile()),
        other => Err(ComplexityError::UnsupportedDialect(other.to_string())),
    }
}

/// A unit extracted from source: its graph plus the syntactic decision count
/// the graph complexity was cross-checked against.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedUnit {
    pub cfg: ControlFlowGraph,
    pub decision_points: u64,
}

/// Extracts one unit per agent class (or one per file of free functions)
/// from `(file name, content)` pairs.
pub fn build_cfg_from_source(
    files: &[(String, String)],
    profile: &LanguageProfile,
) -> Result<Vec<ExtractedUnit>, ComplexityError> {
    let mut units = Vec::new();
    for (file, text) in files {
        units.extend(extract_file(file, text, profile)?);
    }
    Ok(units)
}

fn extract_file(
    file: &str,
    text: &str,
    profile: &LanguageProfile,
) -> Result<Vec<ExtractedUnit>, ComplexityError> {
    let lines: Vec<(u32, String)> = text
        .lines()
        .enumerate()
        .map(|(idx, raw)| (idx as u32 + 1, raw.trim().to_string()))
        .filter(|(_, line)| !line.is_empty() && !line.starts_with(&profile.comment_prefix))
        .collect();

    let mut units = Vec::new();
    let mut free_methods: Vec<Method> = Vec::new();
    let mut cursor = 0usize;

    while cursor < lines.len() {
        let (line_no, line) = &lines[cursor];
        let head = first_word(line);
        if head == profile.class_keyword && line.ends_with('{') {
            let class_name = line
                .trim_end_matches('{')
                .split_whitespace()
                .nth(1)
                .unwrap_or("anonymous")
                .to_string();
            cursor += 1;
            let methods = parse_class_body(file, &lines, &mut cursor, profile)?;
            units.push(assemble_unit(&class_name, methods, profile));
        } else if profile.function_keywords.iter().any(|k| k == head) && line.ends_with('{') {
            cursor += 1;
            let body = parse_block(file, &lines, &mut cursor, profile)?;
            free_methods.push(Method { name: method_name(line), body });
        } else if line.ends_with('{') {
            // Unknown container: scan through it transparently.
            cursor += 1;
            let _ = parse_block(file, &lines, &mut cursor, profile)?;
        } else if line == "}" {
            return Err(ComplexityError::Parse {
                file: file.to_string(),
                line: *line_no,
                message: "unmatched closing brace".to_string(),
            });
        } else {
            cursor += 1; // top-level simple line (imports etc.)
        }
    }

    if !free_methods.is_empty() {
        let stem = std::path::Path::new(file)
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| file.to_string());
        units.push(assemble_unit(&stem, free_methods, profile));
    }
    Ok(units)
}

fn first_word(line: &str) -> &str {
    line.split_whitespace().next().unwrap_or("")
}

fn method_name(header: &str) -> String {
    let header = header.trim_end_matches('{').trim();
    let tail = header.split_whitespace().skip(1).collect::<Vec<_>>().join(" ");
    let name = tail.split('(').next().unwrap_or(&tail).trim();
    if name.is_empty() {
        "anonymous".to_string()
    } else {
        name.to_string()
    }
}

struct Method {
    name: String,
    body: Vec<Stmt>,
}

#[derive(Debug)]
enum Stmt {
    Simple,
    If {
        short_circuits: u64,
        then_block: Vec<Stmt>,
        else_block: Option<Vec<Stmt>>,
    },
    Loop {
        short_circuits: u64,
        body: Vec<Stmt>,
    },
    Match {
        arms: Vec<Vec<Stmt>>,
        has_default: bool,
    },
}

fn parse_class_body(
    file: &str,
    lines: &[(u32, String)],
    cursor: &mut usize,
    profile: &LanguageProfile,
) -> Result<Vec<Method>, ComplexityError> {
    let mut methods = Vec::new();
    while *cursor < lines.len() {
        let (_, line) = &lines[*cursor];
        if line == "}" {
            *cursor += 1;
            return Ok(methods);
        }
        let head = first_word(line);
        if profile.function_keywords.iter().any(|k| k == head) && line.ends_with('{') {
            let header = line.clone();
            *cursor += 1;
            let body = parse_block(file, lines, cursor, profile)?;
            methods.push(Method { name: method_name(&header), body });
        } else {
            *cursor += 1; // attribute declarations and the like
        }
    }
    Err(ComplexityError::Parse {
        file: file.to_string(),
        line: lines.last().map(|(l, _)| *l).unwrap_or(1),
        message: "class body is not closed".to_string(),
    })
}

/// Parses statements up to (and consuming) the closing `}` of the current
/// block. `} else ... {` closers are handled by the `if` parser.
fn parse_block(
    file: &str,
    lines: &[(u32, String)],
    cursor: &mut usize,
    profile: &LanguageProfile,
) -> Result<Vec<Stmt>, ComplexityError> {
    let mut stmts = Vec::new();
    while *cursor < lines.len() {
        let (line_no, line) = &lines[*cursor];
        if line == "}" {
            *cursor += 1;
            return Ok(stmts);
        }
        if line.starts_with("} ") {
            // `} else {` style closers belong to the enclosing if.
            return Ok(stmts);
        }
        let head = first_word(line);
        if head == profile.if_keyword && line.ends_with('{') {
            stmts.push(parse_if(file, lines, cursor, profile)?);
        } else if profile.loop_keywords.iter().any(|k| k == head) && line.ends_with('{') {
            let short_circuits = count_short_circuits(line, profile);
            *cursor += 1;
            let body = parse_block(file, lines, cursor, profile)?;
            stmts.push(Stmt::Loop { short_circuits, body });
        } else if head == profile.match_keyword && line.ends_with('{') {
            *cursor += 1;
            stmts.push(parse_match(file, lines, cursor, profile)?);
        } else if line.ends_with('{') {
            // Anonymous block: contents flow inline.
            *cursor += 1;
            stmts.append(&mut parse_block(file, lines, cursor, profile)?);
        } else {
            stmts.push(Stmt::Simple);
            *cursor += 1;
        }
        let _ = line_no;
    }
    Err(ComplexityError::Parse {
        file: file.to_string(),
        line: lines.last().map(|(l, _)| *l).unwrap_or(1),
        message: "block is not closed".to_string(),
    })
}

fn parse_if(
    file: &str,
    lines: &[(u32, String)],
    cursor: &mut usize,
    profile: &LanguageProfile,
) -> Result<Stmt, ComplexityError> {
    let (_, header) = &lines[*cursor];
    let short_circuits = count_short_circuits(header, profile);
    *cursor += 1;
    let then_block = parse_block(file, lines, cursor, profile)?;

    // parse_block stops before `} else ...` closers.
    let mut else_block = None;
    if *cursor < lines.len() {
        let (_, line) = &lines[*cursor];
        let else_if = format!("}} {} {} ", profile.else_keyword, profile.if_keyword);
        let else_plain = format!("}} {} {{", profile.else_keyword);
        if line.starts_with(&else_if) && line.ends_with('{') {
            // Rewrite `} else if c {` as an else block holding a nested if.
            let nested_header = line
                .trim_start_matches('}')
                .trim_start()
                .strip_prefix(&profile.else_keyword)
                .unwrap_or(line)
                .trim()
                .to_string();
            let mut nested_lines = vec![(lines[*cursor].0, nested_header)];
            *cursor += 1;
            // The nested if re-parses from a synthetic view: splice the rest.
            nested_lines.extend_from_slice(&lines[*cursor..]);
            let mut nested_cursor = 0usize;
            let nested = parse_if(file, &nested_lines, &mut nested_cursor, profile)?;
            *cursor += nested_cursor - 1;
            else_block = Some(vec![nested]);
        } else if *line == else_plain || (line.starts_with("} ") && line.ends_with('{')) {
            *cursor += 1;
            else_block = Some(parse_block(file, lines, cursor, profile)?);
        }
    }
    Ok(Stmt::If { short_circuits, then_block, else_block })
}

fn parse_match(
    file: &str,
    lines: &[(u32, String)],
    cursor: &mut usize,
    profile: &LanguageProfile,
) -> Result<Stmt, ComplexityError> {
    let mut arms = Vec::new();
    let mut has_default = false;
    while *cursor < lines.len() {
        let (line_no, line) = &lines[*cursor];
        if line == "}" {
            *cursor += 1;
            return Ok(Stmt::Match { arms, has_default });
        }
        let head = first_word(line);
        if (head == profile.case_keyword || head == profile.default_keyword)
            && line.ends_with('{')
        {
            if head == profile.default_keyword {
                has_default = true;
            }
            *cursor += 1;
            arms.push(parse_block(file, lines, cursor, profile)?);
        } else {
            return Err(ComplexityError::Parse {
                file: file.to_string(),
                line: *line_no,
                message: format!("expected `{}` arm or `}}` in match, got `{line}`", profile.case_keyword),
            });
        }
    }
    Err(ComplexityError::Parse {
        file: file.to_string(),
        line: lines.last().map(|(l, _)| *l).unwrap_or(1),
        message: "match block is not closed".to_string(),
    })
}

fn count_short_circuits(line: &str, profile: &LanguageProfile) -> u64 {
    if !profile.count_short_circuit {
        return 0;
    }
    (line.matches("&&").count() + line.matches("||").count()) as u64
}

// ---------------------------------------------------------------------------
// Graph assembly
// ---------------------------------------------------------------------------

struct GraphBuilder {
    nodes: Vec<String>,
    edges: Vec<(String, String)>,
    counter: u32,
    decisions: u64,
}

impl GraphBuilder {
    fn node(&mut self, label: &str) -> String {
        self.counter += 1;
        let id = format!("{}_{}", label, self.counter);
        self.nodes.push(id.clone());
        id
    }

    fn connect(&mut self, from: &[String], to: &str) {
        for source in from {
            self.edges.push((source.clone(), to.to_string()));
        }
    }

    /// Emits a statement list; `pending` are the dangling exits flowing in.
    fn emit_block(&mut self, stmts: &[Stmt], mut pending: Vec<String>) -> Vec<String> {
        for stmt in stmts {
            pending = self.emit_stmt(stmt, pending);
        }
        pending
    }

    fn emit_stmt(&mut self, stmt: &Stmt, pending: Vec<String>) -> Vec<String> {
        match stmt {
            Stmt::Simple => {
                let id = self.node("stmt");
                self.connect(&pending, &id);
                vec![id]
            }
            Stmt::If { short_circuits, then_block, else_block } => {
                let (decision, mut exits) = self.emit_guard(pending, *short_circuits);
                self.decisions += 1;
                let then_exits = self.emit_block(then_block, vec![decision.clone()]);
                exits.extend(then_exits);
                match else_block {
                    Some(block) => {
                        let else_exits = self.emit_block(block, vec![decision]);
                        exits.extend(else_exits);
                    }
                    None => exits.push(decision),
                }
                exits
            }
            Stmt::Loop { short_circuits, body } => {
                let (condition, mut exits) = self.emit_guard(pending, *short_circuits);
                self.decisions += 1;
                let body_exits = self.emit_block(body, vec![condition.clone()]);
                self.connect(&body_exits, &condition);
                exits.push(condition);
                exits
            }
            Stmt::Match { arms, has_default } => {
                let selector = self.node("match");
                self.connect(&pending, &selector);
                let mut exits = Vec::new();
                for arm in arms {
                    exits.extend(self.emit_block(arm, vec![selector.clone()]));
                }
                if !*has_default {
                    exits.push(selector.clone());
                }
                self.decisions += exits_added(arms.len(), *has_default);
                exits
            }
        }
    }

    /// Emits the condition node of an if/loop, preceded by one extra guard
    /// node per counted short-circuit operator; each guard can divert past
    /// the condition, adding one decision each.
    fn emit_guard(&mut self, pending: Vec<String>, short_circuits: u64) -> (String, Vec<String>) {
        let mut incoming = pending;
        let mut diverted = Vec::new();
        for _ in 0..short_circuits {
            let guard = self.node("guard");
            self.connect(&incoming, &guard);
            incoming = vec![guard.clone()];
            diverted.push(guard);
            self.decisions += 1;
        }
        let condition = self.node("cond");
        self.connect(&incoming, &condition);
        (condition, diverted)
    }
}

fn exits_added(arm_count: usize, has_default: bool) -> u64 {
    if has_default {
        arm_count.saturating_sub(1) as u64
    } else {
        arm_count as u64
    }
}

fn assemble_unit(name: &str, methods: Vec<Method>, profile: &LanguageProfile) -> ExtractedUnit {
    let _ = profile;
    let mut builder = GraphBuilder {
        nodes: Vec::new(),
        edges: Vec::new(),
        counter: 0,
        decisions: 0,
    };
    let entry = builder.node("entry");
    let mut pending = vec![entry.clone()];
    for method in &methods {
        let method_entry = builder.node(&format!("fn_{}", sanitize(&method.name)));
        builder.connect(&pending, &method_entry);
        let body_exits = builder.emit_block(&method.body, vec![method_entry]);
        let method_exit = builder.node("ret");
        builder.connect(&body_exits, &method_exit);
        pending = vec![method_exit];
    }
    let exit = builder.node("exit");
    builder.connect(&pending, &exit);

    let cfg = ControlFlowGraph {
        unit: name.to_string(),
        nodes: builder.nodes,
        edges: builder.edges,
        entries: vec![entry],
    };
    ExtractedUnit { cfg, decision_points: builder.decisions }
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_alphanumeric() { c } else { '_' }).collect()
}
