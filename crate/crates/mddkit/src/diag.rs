//! Shared diagnostic and violation types used by every pipeline stage.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Diagnostic severity. `Error` diagnostics make a stage fail; warnings do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// A located message produced while parsing a source file.
///
/// Line and column are 1-based and point into the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub path: String,
    pub line: u32,
    pub column: u32,
    pub severity: Severity,
    /// Stable kebab-case reason code, e.g. `unknown-arrow`.
    pub code: String,
    pub message: String,
}

impl ParseDiagnostic {
    pub fn error(
        path: impl Into<String>,
        line: u32,
        column: u32,
        code: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Self {
            path: path.into(),
            line,
            column,
            severity: Severity::Error,
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn warning(
        path: impl Into<String>,
        line: u32,
        column: u32,
        code: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Self {
            path: path.into(),
            line,
            column,
            severity: Severity::Warning,
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// Sorts diagnostics by (path, line, column), the order contract all parsers share.
pub fn sort_diagnostics(diags: &mut [ParseDiagnostic]) {
    diags.sort_by(|a, b| {
        (&a.path, a.line, a.column, &a.code).cmp(&(&b.path, b.line, b.column, &b.code))
    });
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(
            f,
            "{}:{}:{}: {sev}[{}]: {}",
            self.path, self.line, self.column, self.code, self.message
        )
    }
}

/// What a violation is attached to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Subject {
    /// An instance in the instance store.
    Instance { id: String },
    /// An operation contract (pre/postcondition check).
    Operation { name: String },
    /// A location in a source file, for code-quality rules.
    Code { file: String, line: u32 },
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Instance { id } => write!(f, "{id}"),
            Subject::Operation { name } => write!(f, "{name}()"),
            Subject::Code { file, line } => write!(f, "{file}:{line}"),
        }
    }
}

/// A detected breach of a constraint, schema, or code-quality rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Id of the constraint or rule that was breached.
    pub constraint_id: String,
    pub subject: Subject,
    /// Rendering of the offending value, for the report.
    pub observed: String,
    pub message: String,
}

impl Violation {
    pub fn new(
        constraint_id: impl Into<String>,
        subject: Subject,
        observed: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Self {
            constraint_id: constraint_id.into(),
            subject,
            observed: observed.into(),
            message: message.into(),
        }
    }
}

/// Sorts violations by (constraint id, subject), the deterministic report order.
pub fn sort_violations(violations: &mut [Violation]) {
    violations.sort_by(|a, b| {
        (&a.constraint_id, &a.subject, &a.message).cmp(&(&b.constraint_id, &b.subject, &b.message))
    });
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {} (observed: {})",
            self.constraint_id, self.subject, self.message, self.observed
        )
    }
}
