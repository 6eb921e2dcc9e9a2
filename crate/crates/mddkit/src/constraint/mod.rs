//! Construction-constraint engine: parses the OCL-like constraint files,
//! evaluates invariants over instance stores, checks operation contracts
//! (pre/postconditions), and applies the code-quality rules to source text.
//!
//! Five constraint categories are supported. `inv` constraints are
//! classified by shape: an `isUnique` call makes a uniqueness constraint, a
//! `size()` call over a relationship navigation makes a cardinality
//! constraint, anything else is a value constraint. `pre` and `post`
//! keywords map directly.

mod code_quality;
mod expr;
mod store;

pub use code_quality::{check_code_quality, CodeQualityRuleSet};
pub use expr::{
    as_bool, eval, parse_expr, render_number, BinOp, CollOp, ConstraintExpr, EvalError, EvalScope,
    Value,
};
pub use store::{resolve_navigation, AttrValue, Instance, InstanceStore, Link, StoreScope};

use crate::diag::{sort_violations, ParseDiagnostic, Subject, Violation};
use crate::model::{DefectCode, ModelDefect, UmlModel};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Uniqueness,
    Cardinality,
    Value,
    Precondition,
    Postcondition,
}

impl ConstraintKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstraintKind::Uniqueness => "uniqueness",
            ConstraintKind::Cardinality => "cardinality",
            ConstraintKind::Value => "value",
            ConstraintKind::Precondition => "precondition",
            ConstraintKind::Postcondition => "postcondition",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub id: String,
    pub context: String,
    pub kind: ConstraintKind,
    /// Operation the contract applies to; set for pre/postconditions.
    pub operation: Option<String>,
    pub expr: ConstraintExpr,
}

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("no pre/postcondition constraint references operation `{0}`")]
    UnknownOperation(String),
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parses `context <Class> inv|pre|post [name]: <expr>` blocks. The operation
/// for contract constraints is written in the context path:
/// `context UV::receiveTask pre idle: ...`. Lines starting with `--` are
/// comments. Syntax problems become error diagnostics; well-formed blocks
/// around them still parse.
pub fn parse_constraints(text: &str) -> (Vec<Constraint>, Vec<ParseDiagnostic>) {
    let path = "<constraints>";
    let mut constraints = Vec::new();
    let mut diagnostics = Vec::new();

    // Group lines into blocks, one per `context` header.
    let mut blocks: Vec<(u32, String, Vec<String>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with("--") {
            continue;
        }
        if line.starts_with("context ") || line == "context" {
            blocks.push((idx as u32 + 1, line.to_string(), Vec::new()));
        } else if let Some((_, _, body)) = blocks.last_mut() {
            body.push(line.to_string());
        } else {
            diagnostics.push(ParseDiagnostic::error(
                path,
                idx as u32 + 1,
                1,
                "expected-context",
                format!("expected a `context` block, got `{line}`"),
            ));
        }
    }

    for (line_no, header, body) in blocks {
        match parse_block(&header, &body, line_no, constraints.len()) {
            Ok((constraint, warnings)) => {
                for (code, message) in warnings {
                    diagnostics.push(ParseDiagnostic::warning(path, line_no, 1, code, message));
                }
                constraints.push(constraint);
            }
            Err((column, code, message)) => {
                diagnostics.push(ParseDiagnostic::error(path, line_no, column, code, message));
            }
        }
    }
    (constraints, diagnostics)
}

type BlockWarnings = Vec<(&'static str, String)>;

fn parse_block(
    header: &str,
    body: &[String],
    _line_no: u32,
    ordinal: usize,
) -> Result<(Constraint, BlockWarnings), (u32, &'static str, String)> {
    let mut warnings = BlockWarnings::new();

    // Header shape: `context <Class>[::<operation>] <kw> [name]:` with the
    // expression either after the colon or on the following lines.
    let rest = header.strip_prefix("context").unwrap_or(header).trim();
    let (decl, inline_expr) = match rest.split_once(':') {
        // `::` belongs to the operation path, not the expression separator.
        Some((before, after)) if !after.starts_with(':') => (before.trim(), after.trim()),
        _ => {
            // Find the last single `:` that is not part of `::`.
            let bytes = rest.as_bytes();
            let mut split_at = None;
            let mut i = 0;
            while i < bytes.len() {
                if bytes[i] == b':' {
                    if i + 1 < bytes.len() && bytes[i + 1] == b':' {
                        i += 2;
                        continue;
                    }
                    split_at = Some(i);
                    break;
                }
                i += 1;
            }
            match split_at {
                Some(i) => (rest[..i].trim(), rest[i + 1..].trim()),
                None => (rest, ""),
            }
        }
    };

    let mut words = decl.split_whitespace();
    let context_path = words
        .next()
        .ok_or((1, "missing-context", "context block without a class name".to_string()))?;
    let (context, operation) = match context_path.split_once("::") {
        Some((class, op)) => (class.to_string(), Some(op.to_string())),
        None => (context_path.to_string(), None),
    };
    let keyword = words.next().ok_or((
        1,
        "missing-keyword",
        "expected `inv`, `pre` or `post` after the context".to_string(),
    ))?;
    let name = words.next().map(str::to_string);
    if let Some(extra) = words.next() {
        return Err((1, "malformed-header", format!("unexpected `{extra}` in constraint header")));
    }

    let mut expr_text = inline_expr.to_string();
    for line in body {
        if !expr_text.is_empty() {
            expr_text.push(' ');
        }
        expr_text.push_str(line);
    }
    if expr_text.trim().is_empty() {
        return Err((1, "missing-expression", "constraint block has no expression".to_string()));
    }
    let expr = parse_expr(&expr_text)
        .map_err(|e| (e.column as u32, "syntax-error", e.message.clone()))?;

    let kind = match keyword {
        "inv" => infer_inv_kind(&expr),
        "pre" => ConstraintKind::Precondition,
        "post" => ConstraintKind::Postcondition,
        other => {
            return Err((
                1,
                "unknown-keyword",
                format!("expected `inv`, `pre` or `post`, got `{other}`"),
            ))
        }
    };

    match kind {
        ConstraintKind::Precondition | ConstraintKind::Postcondition => {
            if operation.is_none() {
                warnings.push((
                    "missing-operation",
                    "pre/postcondition without an operation path (`Class::operation`) \
                     can never be checked"
                        .to_string(),
                ));
            }
            if kind == ConstraintKind::Precondition && contains_at_pre(&expr) {
                return Err((
                    1,
                    "pre-in-precondition",
                    "`@pre` is only available inside postconditions".to_string(),
                ));
            }
        }
        _ => {
            if operation.is_some() {
                warnings.push((
                    "operation-on-invariant",
                    "invariants do not take an operation path; it is ignored".to_string(),
                ));
            }
        }
    }

    let id = name.unwrap_or_else(|| format!("{context}.{keyword}{}", ordinal + 1));
    Ok((Constraint { id, context, kind, operation, expr }, warnings))
}

fn infer_inv_kind(expr: &ConstraintExpr) -> ConstraintKind {
    if expr.any(&|e| matches!(e, ConstraintExpr::Collection { op: CollOp::IsUnique, .. })) {
        return ConstraintKind::Uniqueness;
    }
    if expr.any(&|e| matches!(e, ConstraintExpr::Collection { op: CollOp::Size, .. })) {
        return ConstraintKind::Cardinality;
    }
    ConstraintKind::Value
}

fn contains_at_pre(expr: &ConstraintExpr) -> bool {
    expr.any(&|e| matches!(e, ConstraintExpr::Attr { at_pre: true, .. }))
}

// ---------------------------------------------------------------------------
// Invariant checking over an instance store
// ---------------------------------------------------------------------------

/// Evaluates every uniqueness, cardinality, and value constraint over the
/// store. One violation per (constraint, offending subject); evaluation
/// errors are reported as violations on the constraint without aborting the
/// remaining checks. The result is sorted by (constraint id, subject).
pub fn check_invariants(
    model: &UmlModel,
    store: &InstanceStore,
    constraints: &[Constraint],
) -> Vec<Violation> {
    let mut violations = Vec::new();
    for constraint in constraints {
        match constraint.kind {
            ConstraintKind::Uniqueness => {
                check_uniqueness(model, store, constraint, &mut violations)
            }
            ConstraintKind::Cardinality | ConstraintKind::Value => {
                check_per_instance(model, store, constraint, &mut violations)
            }
            _ => {} // contracts are checked by check_transition_contract
        }
    }
    sort_violations(&mut violations);
    violations
}

fn check_uniqueness(
    model: &UmlModel,
    store: &InstanceStore,
    constraint: &Constraint,
    violations: &mut Vec<Violation>,
) {
    // Locate the `...->isUnique(body)` node; the surrounding expression is
    // the collection to draw from.
    let mut found = None;
    find_is_unique(&constraint.expr, &mut found);
    let Some((base, body)) = found else {
        violations.push(eval_problem(constraint, "no isUnique(...) call in uniqueness constraint"));
        return;
    };

    let scope = store::StoreScope::new(model, store, None);
    let items = match eval(base, &scope) {
        Ok(Value::Collection(items)) => items,
        Ok(other) => {
            violations.push(eval_problem(
                constraint,
                &format!("isUnique base must be a collection, got {}", other.type_name()),
            ));
            return;
        }
        Err(e) => {
            violations.push(eval_problem(constraint, &e.to_string()));
            return;
        }
    };

    let mut first_seen: BTreeMap<String, String> = BTreeMap::new();
    for item in items {
        let Value::Instance(id) = item else { continue };
        let scoped = store::StoreScope::new(model, store, Some(id.clone()));
        match eval(body, &scoped) {
            Ok(value) => {
                let key = value.render();
                if first_seen.contains_key(&key) {
                    violations.push(Violation::new(
                        &constraint.id,
                        Subject::Instance { id: id.clone() },
                        key.clone(),
                        format!(
                            "duplicate value `{key}` also held by `{}`",
                            first_seen[&key]
                        ),
                    ));
                } else {
                    first_seen.insert(key, id);
                }
            }
            Err(e) => violations.push(eval_problem(constraint, &e.to_string())),
        }
    }
}

fn find_is_unique<'a>(
    expr: &'a ConstraintExpr,
    found: &mut Option<(&'a ConstraintExpr, &'a ConstraintExpr)>,
) {
    if found.is_some() {
        return;
    }
    match expr {
        ConstraintExpr::Collection { base, op: CollOp::IsUnique, arg: Some(arg) } => {
            *found = Some((base, arg));
        }
        ConstraintExpr::Attr { base, .. } => find_is_unique(base, found),
        ConstraintExpr::Not(e) | ConstraintExpr::Neg(e) => find_is_unique(e, found),
        ConstraintExpr::Binary { lhs, rhs, .. } => {
            find_is_unique(lhs, found);
            find_is_unique(rhs, found);
        }
        ConstraintExpr::Collection { base, arg, .. } => {
            find_is_unique(base, found);
            if let Some(arg) = arg {
                find_is_unique(arg, found);
            }
        }
        _ => {}
    }
}

fn check_per_instance(
    model: &UmlModel,
    store: &InstanceStore,
    constraint: &Constraint,
    violations: &mut Vec<Violation>,
) {
    for instance in store.instances_of_kind(model, &constraint.context) {
        let scope = store::StoreScope::new(model, store, Some(instance.id.clone()));
        match eval(&constraint.expr, &scope) {
            Ok(Value::Bool(true)) => {}
            Ok(Value::Bool(false)) => {
                violations.push(Violation::new(
                    &constraint.id,
                    Subject::Instance { id: instance.id.clone() },
                    observe(&constraint.expr, &scope),
                    format!("{} constraint `{}` not satisfied", constraint.kind.as_str(), constraint.id),
                ));
            }
            Ok(other) => violations.push(eval_problem(
                constraint,
                &format!("constraint must evaluate to a boolean, got {}", other.type_name()),
            )),
            Err(e) => violations.push(eval_problem(constraint, &e.to_string())),
        }
    }
}

/// Renders the values of the attributes a constraint reads, for the report.
fn observe(expr: &ConstraintExpr, scope: &dyn EvalScope) -> String {
    let mut parts = Vec::new();
    for name in expr.self_attr_names() {
        let probe = ConstraintExpr::Attr {
            base: Box::new(ConstraintExpr::SelfRef),
            name: name.clone(),
            at_pre: false,
        };
        if let Ok(value) = eval(&probe, scope) {
            parts.push(format!("{name}={}", value.render()));
        }
    }
    parts.join(", ")
}

fn eval_problem(constraint: &Constraint, message: &str) -> Violation {
    Violation::new(
        &constraint.id,
        Subject::Instance { id: format!("<{}>", constraint.context) },
        String::new(),
        format!("evaluation error: {message}"),
    )
}

// ---------------------------------------------------------------------------
// Operation contracts
// ---------------------------------------------------------------------------

/// Checks the pre/postconditions attached to `operation`: preconditions
/// against the `before` snapshot, postconditions against `after` with
/// `self.attr@pre` resolving into `before`. Postconditions are only owed
/// when every precondition held; a failed precondition is reported alone.
pub fn check_transition_contract(
    constraints: &[Constraint],
    operation: &str,
    before: &BTreeMap<String, AttrValue>,
    after: &BTreeMap<String, AttrValue>,
) -> Result<Vec<Violation>, ConstraintError> {
    let matching: Vec<&Constraint> = constraints
        .iter()
        .filter(|c| {
            c.operation.as_deref() == Some(operation)
                && matches!(
                    c.kind,
                    ConstraintKind::Precondition | ConstraintKind::Postcondition
                )
        })
        .collect();
    if matching.is_empty() {
        return Err(ConstraintError::UnknownOperation(operation.to_string()));
    }

    let mut violations = check_contract_phase(&matching, ConstraintKind::Precondition, operation, before, after);
    if violations.is_empty() {
        violations =
            check_contract_phase(&matching, ConstraintKind::Postcondition, operation, before, after);
    }
    sort_violations(&mut violations);
    Ok(violations)
}

fn check_contract_phase(
    matching: &[&Constraint],
    phase_kind: ConstraintKind,
    operation: &str,
    before: &BTreeMap<String, AttrValue>,
    after: &BTreeMap<String, AttrValue>,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    for constraint in matching.iter().filter(|c| c.kind == phase_kind) {
        let (scope, phase) = match constraint.kind {
            ConstraintKind::Precondition => {
                (store::SnapshotScope::new(before, None), "precondition")
            }
            _ => (store::SnapshotScope::new(after, Some(before)), "postcondition"),
        };
        match eval(&constraint.expr, &scope) {
            Ok(Value::Bool(true)) => {}
            Ok(Value::Bool(false)) => violations.push(Violation::new(
                &constraint.id,
                Subject::Operation { name: operation.to_string() },
                observe(&constraint.expr, &scope),
                format!("{phase} `{}` failed", constraint.id),
            )),
            Ok(other) => violations.push(Violation::new(
                &constraint.id,
                Subject::Operation { name: operation.to_string() },
                String::new(),
                format!(
                    "evaluation error: {phase} must evaluate to a boolean, got {}",
                    other.type_name()
                ),
            )),
            Err(e) => violations.push(Violation::new(
                &constraint.id,
                Subject::Operation { name: operation.to_string() },
                String::new(),
                format!("evaluation error: {e}"),
            )),
        }
    }
    violations
}

// ---------------------------------------------------------------------------
// Diagram/constraint reconciliation
// ---------------------------------------------------------------------------

/// Cardinality constraints and diagram multiplicities are two statements of
/// the same fact; disagreement is a model defect, not something to merge
/// silently. Compares the lower bound implied by `self.<nav>->size() >= n`
/// shapes against the declared target multiplicity of the navigated
/// relationship.
pub fn reconcile_cardinality(model: &UmlModel, constraints: &[Constraint]) -> Vec<ModelDefect> {
    let mut defects = Vec::new();
    for constraint in constraints.iter().filter(|c| c.kind == ConstraintKind::Cardinality) {
        let Some((nav, ocl_lower)) = implied_lower_bound(&constraint.expr) else {
            continue;
        };
        let Some(rel) = store::resolve_navigation(model, &constraint.context, &nav) else {
            defects.push(ModelDefect {
                location: format!("{}.{nav}", constraint.context),
                code: DefectCode::UnknownClass,
                message: format!(
                    "cardinality constraint `{}` navigates `{nav}`, which matches no relationship",
                    constraint.id
                ),
            });
            continue;
        };
        let declared = rel.target_multiplicity;
        if declared.lower != ocl_lower {
            defects.push(ModelDefect {
                location: format!("{} -> {}", rel.source, rel.target),
                code: DefectCode::CardinalityMismatch,
                message: format!(
                    "constraint `{}` implies lower bound {ocl_lower}, diagram declares `{declared}`",
                    constraint.id
                ),
            });
        }
    }
    defects
}

/// Extracts (navigation, lower bound) from `self.<nav>->size() >= n`,
/// `> n`, or `= n` comparisons.
fn implied_lower_bound(expr: &ConstraintExpr) -> Option<(String, u32)> {
    if let ConstraintExpr::Binary { op, lhs, rhs } = expr {
        if let (ConstraintExpr::Collection { base, op: CollOp::Size, .. }, ConstraintExpr::Number(n)) =
            (lhs.as_ref(), rhs.as_ref())
        {
            if let ConstraintExpr::Attr { base: inner, name, .. } = base.as_ref() {
                if matches!(**inner, ConstraintExpr::SelfRef) {
                    let bound = match op {
                        BinOp::Ge | BinOp::Eq => *n as u32,
                        BinOp::Gt => *n as u32 + 1,
                        _ => return None,
                    };
                    return Some((name.clone(), bound));
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests;
