//! Code-quality rules applied to generated source text: indentation
//! consistency (`leading spaces mod space-per-indent = 0`), maximum line
//! length, trailing whitespace, function length, and import placement.

use crate::diag::{sort_violations, Subject, Violation};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeQualityRuleSet {
    pub space_per_indent: u32,
    pub max_line_length: u32,
    pub max_function_length: u32,
    pub trailing_whitespace_allowed: bool,
    pub imports_at_top_required: bool,
}

impl Default for CodeQualityRuleSet {
    fn default() -> Self {
        Self {
            space_per_indent: 4,
            max_line_length: 120,
            max_function_length: 60,
            trailing_whitespace_allowed: false,
            imports_at_top_required: true,
        }
    }
}

impl CodeQualityRuleSet {
    /// All numeric fields must be at least 1.
    pub fn is_valid(&self) -> bool {
        self.space_per_indent >= 1 && self.max_line_length >= 1 && self.max_function_length >= 1
    }
}

/// Keywords that open a function-like block in the supported dialects.
const FUNCTION_KEYWORDS: &[&str] = &["fn", "on", "def", "function"];
/// Keywords that open any definition; imports must appear before the first.
const DEFINITION_KEYWORDS: &[&str] = &["agent", "class", "fn", "on", "def", "function", "struct"];
const IMPORT_PREFIXES: &[&str] = &["use ", "import ", "from ", "#include"];

/// Runs every rule over `source`, labelling violations with `file`. All
/// findings are violations; nothing aborts the scan.
pub fn check_code_quality(
    file: &str,
    source: &str,
    rules: &CodeQualityRuleSet,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen_definition = false;

    for (idx, line) in source.lines().enumerate() {
        let line_no = idx as u32 + 1;
        let subject = |line_no| Subject::Code { file: file.to_string(), line: line_no };

        if line.is_empty() {
            continue;
        }

        // Indentation: tabs are flagged one violation each, space runs must
        // be a multiple of the indent width.
        let leading: String = line.chars().take_while(|c| c.is_whitespace()).collect();
        for _ in leading.chars().filter(|c| *c == '\t') {
            violations.push(Violation::new(
                "indentation",
                subject(line_no),
                "tab".to_string(),
                "tab character in indentation".to_string(),
            ));
        }
        if !leading.contains('\t') {
            let spaces = leading.chars().filter(|c| *c == ' ').count() as u32;
            if !spaces.is_multiple_of(rules.space_per_indent) {
                violations.push(Violation::new(
                    "indentation",
                    subject(line_no),
                    spaces.to_string(),
                    format!(
                        "{spaces} leading spaces is not a multiple of {}",
                        rules.space_per_indent
                    ),
                ));
            }
        }

        let length = line.chars().count() as u32;
        if length > rules.max_line_length {
            violations.push(Violation::new(
                "line-length",
                subject(line_no),
                length.to_string(),
                format!("line is {length} characters, maximum is {}", rules.max_line_length),
            ));
        }

        if !rules.trailing_whitespace_allowed && line != line.trim_end() {
            violations.push(Violation::new(
                "trailing-whitespace",
                subject(line_no),
                format!("{} trailing", line.len() - line.trim_end().len()),
                "trailing whitespace".to_string(),
            ));
        }

        let trimmed = line.trim_start();
        let first_word = trimmed.split_whitespace().next().unwrap_or("");
        if DEFINITION_KEYWORDS.contains(&first_word) {
            seen_definition = true;
        }
        if rules.imports_at_top_required
            && seen_definition
            && IMPORT_PREFIXES.iter().any(|p| trimmed.starts_with(p))
        {
            violations.push(Violation::new(
                "import-placement",
                subject(line_no),
                trimmed.to_string(),
                "import after the first definition".to_string(),
            ));
        }
    }

    check_function_lengths(file, source, rules, &mut violations);
    sort_violations(&mut violations);
    violations
}

/// Brace-based heuristic: a line whose first word is a function keyword and
/// that ends with `{` opens a body; the body runs until the matching brace.
/// The body length excludes the opening and closing lines.
fn check_function_lengths(
    file: &str,
    source: &str,
    rules: &CodeQualityRuleSet,
    violations: &mut Vec<Violation>,
) {
    let lines: Vec<&str> = source.lines().collect();
    let mut open: Vec<(u32, i64)> = Vec::new(); // (start line, depth at open)
    let mut depth: i64 = 0;

    for (idx, line) in lines.iter().enumerate() {
        let line_no = idx as u32 + 1;
        let trimmed = line.trim_start();
        let first_word = trimmed.split_whitespace().next().unwrap_or("");
        let opens_function =
            FUNCTION_KEYWORDS.contains(&first_word) && trimmed.trim_end().ends_with('{');
        if opens_function {
            open.push((line_no, depth));
        }
        depth += line.matches('{').count() as i64 - line.matches('}').count() as i64;
        while let Some(&(start, open_depth)) = open.last() {
            if depth <= open_depth {
                open.pop();
                let body_lines = line_no.saturating_sub(start + 1);
                if body_lines > rules.max_function_length {
                    violations.push(Violation::new(
                        "function-length",
                        Subject::Code { file: file.to_string(), line: start },
                        body_lines.to_string(),
                        format!(
                            "function body is {body_lines} lines, maximum is {}",
                            rules.max_function_length
                        ),
                    ));
                }
            } else {
                break;
            }
        }
    }
}
