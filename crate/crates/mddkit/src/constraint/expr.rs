//! Expression language for construction constraints: attribute references,
//! literals, comparisons, arithmetic (including `div` and `mod`), boolean
//! connectives, and the collection operations `forAll`, `exists`, `isUnique`
//! and `size`.
//!
//! Identifiers may contain hyphens (`UVF-Manager`); write subtraction with
//! spaces around the minus sign.

use serde::Serialize;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ConstraintExpr {
    Number(f64),
    Str(String),
    Bool(bool),
    /// The contextual instance.
    SelfRef,
    /// Bare identifier: an attribute of the implicit self (inside collection
    /// bodies) or a class name in `Class.allInstances()` position.
    Ident(String),
    /// `base.name`, optionally `base.name@pre` inside postconditions.
    Attr { base: Box<ConstraintExpr>, name: String, at_pre: bool },
    /// `Class.allInstances()`
    AllInstances(String),
    Not(Box<ConstraintExpr>),
    Neg(Box<ConstraintExpr>),
    Binary { op: BinOp, lhs: Box<ConstraintExpr>, rhs: Box<ConstraintExpr> },
    /// `base->op(...)`
    Collection { base: Box<ConstraintExpr>, op: CollOp, arg: Option<Box<ConstraintExpr>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    IntDiv,
    Mod,
    And,
    Or,
    Implies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CollOp {
    ForAll,
    Exists,
    IsUnique,
    Size,
}

impl ConstraintExpr {
    /// Depth-first search for any node matching the predicate.
    pub fn any(&self, pred: &impl Fn(&ConstraintExpr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            ConstraintExpr::Attr { base, .. } => base.any(pred),
            ConstraintExpr::Not(e) | ConstraintExpr::Neg(e) => e.any(pred),
            ConstraintExpr::Binary { lhs, rhs, .. } => lhs.any(pred) || rhs.any(pred),
            ConstraintExpr::Collection { base, arg, .. } => {
                base.any(pred) || arg.as_ref().is_some_and(|a| a.any(pred))
            }
            _ => false,
        }
    }

    /// Names of attributes referenced through `self.`, in first-seen order.
    pub fn self_attr_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.collect_self_attrs(&mut names);
        names
    }

    fn collect_self_attrs(&self, out: &mut Vec<String>) {
        match self {
            ConstraintExpr::Attr { base, name, .. } => {
                if matches!(**base, ConstraintExpr::SelfRef) && !out.contains(name) {
                    out.push(name.clone());
                }
                base.collect_self_attrs(out);
            }
            ConstraintExpr::Not(e) | ConstraintExpr::Neg(e) => e.collect_self_attrs(out),
            ConstraintExpr::Binary { lhs, rhs, .. } => {
                lhs.collect_self_attrs(out);
                rhs.collect_self_attrs(out);
            }
            ConstraintExpr::Collection { base, arg, .. } => {
                base.collect_self_attrs(out);
                if let Some(arg) = arg {
                    arg.collect_self_attrs(out);
                }
            }
            _ => {}
        }
    }
}

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

/// Runtime value of a constraint expression under the simple type system
/// {number, string, boolean, collection}.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Str(String),
    Bool(bool),
    Collection(Vec<Value>),
    /// Reference to a store instance, produced by `allInstances` and
    /// relationship navigation.
    Instance(String),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Number(_) => "number",
            Value::Str(_) => "string",
            Value::Bool(_) => "boolean",
            Value::Collection(_) => "collection",
            Value::Instance(_) => "instance",
        }
    }

    /// Canonical rendering used for uniqueness keys and violation reports.
    pub fn render(&self) -> String {
        match self {
            Value::Number(n) => render_number(*n),
            Value::Str(s) => s.clone(),
            Value::Bool(b) => b.to_string(),
            Value::Instance(id) => id.clone(),
            Value::Collection(items) => {
                let parts: Vec<String> = items.iter().map(Value::render).collect();
                format!("[{}]", parts.join(", "))
            }
        }
    }
}

pub fn render_number(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq)]
#[error("{message} at column {column}")]
pub struct ExprParseError {
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    Str(String),
    Symbol(&'static str),
}

struct Lexer<'a> {
    text: &'a str,
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
}

impl Lexer<'_> {
    fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ExprParseError> {
        let mut lexer = Lexer { text, chars: text.char_indices().peekable() };
        let mut tokens = Vec::new();
        while let Some(&(pos, c)) = lexer.chars.peek() {
            if c.is_whitespace() {
                lexer.chars.next();
                continue;
            }
            let token = lexer.next_token(pos, c)?;
            tokens.push((pos + 1, token));
        }
        Ok(tokens)
    }

    fn next_token(&mut self, pos: usize, c: char) -> Result<Token, ExprParseError> {
        if c.is_ascii_digit() {
            return Ok(self.lex_number(pos));
        }
        if c.is_alphabetic() || c == '_' {
            return Ok(self.lex_ident(pos));
        }
        if c == '\'' {
            return self.lex_string(pos);
        }
        self.chars.next();
        if let Some(&(_, next)) = self.chars.peek() {
            let two = match (c, next) {
                ('-', '>') => Some("->"),
                ('<', '>') => Some("<>"),
                ('<', '=') => Some("<="),
                ('>', '=') => Some(">="),
                _ => None,
            };
            if let Some(sym) = two {
                self.chars.next();
                return Ok(Token::Symbol(sym));
            }
        }
        let sym = match c {
            '@' => "@",
            '(' => "(",
            ')' => ")",
            '.' => ".",
            ',' => ",",
            '=' => "=",
            '<' => "<",
            '>' => ">",
            '+' => "+",
            '-' => "-",
            '*' => "*",
            '/' => "/",
            _ => {
                return Err(ExprParseError {
                    column: pos + 1,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        Ok(Token::Symbol(sym))
    }

    fn lex_number(&mut self, start: usize) -> Token {
        let mut end = start;
        while let Some(&(idx, c)) = self.chars.peek() {
            if c.is_ascii_digit() || c == '.' {
                // A `.` only continues the number when a digit follows
                // (`1.5`), not in `1.mod(...)`.
                if c == '.' {
                    let mut ahead = self.chars.clone();
                    ahead.next();
                    if !ahead.peek().is_some_and(|(_, c)| c.is_ascii_digit()) {
                        break;
                    }
                }
                end = idx + c.len_utf8();
                self.chars.next();
            } else {
                break;
            }
        }
        let text = &self.text[start..end];
        Token::Number(text.parse().unwrap_or(0.0))
    }

    fn lex_ident(&mut self, start: usize) -> Token {
        let mut end = start;
        while let Some(&(idx, c)) = self.chars.peek() {
            let continues = c.is_alphanumeric() || c == '_';
            // Hyphens join identifiers only when glued to an alphanumeric
            // (`UVF-Manager`); `a -> b` and `a - b` stay operators.
            let hyphen_joins = c == '-' && {
                let mut ahead = self.chars.clone();
                ahead.next();
                ahead.peek().is_some_and(|(_, c)| c.is_alphanumeric() || *c == '_')
            };
            if continues || hyphen_joins {
                end = idx + c.len_utf8();
                self.chars.next();
            } else {
                break;
            }
        }
        Token::Ident(self.text[start..end].to_string())
    }

    fn lex_string(&mut self, start: usize) -> Result<Token, ExprParseError> {
        self.chars.next(); // opening quote
        let mut content = String::new();
        for (_, c) in self.chars.by_ref() {
            if c == '\'' {
                return Ok(Token::Str(content));
            }
            content.push(c);
        }
        Err(ExprParseError { column: start + 1, message: "unterminated string literal".into() })
    }
}

pub fn parse_expr(text: &str) -> Result<ConstraintExpr, ExprParseError> {
    let tokens = Lexer::tokenize(text)?;
    let mut parser = ExprParser { tokens, pos: 0 };
    let expr = parser.implies()?;
    if parser.pos < parser.tokens.len() {
        let (col, tok) = &parser.tokens[parser.pos];
        return Err(ExprParseError {
            column: *col,
            message: format!("unexpected trailing token {tok:?}"),
        });
    }
    Ok(expr)
}

struct ExprParser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl ExprParser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map(|(c, _)| *c).unwrap_or_else(|| {
            self.tokens.last().map(|(c, _)| *c).unwrap_or(1)
        })
    }

    fn bump(&mut self) -> Option<Token> {
        let token = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        token
    }

    fn eat_symbol(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Token::Symbol(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Token::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_symbol(&mut self, sym: &'static str) -> Result<(), ExprParseError> {
        if self.eat_symbol(sym) {
            Ok(())
        } else {
            Err(ExprParseError { column: self.column(), message: format!("expected `{sym}`") })
        }
    }

    fn implies(&mut self) -> Result<ConstraintExpr, ExprParseError> {
        let mut lhs = self.or_expr()?;
        while self.eat_keyword("implies") {
            let rhs = self.or_expr()?;
            lhs = ConstraintExpr::Binary {
                op: BinOp::Implies,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> Result<ConstraintExpr, ExprParseError> {
        let mut lhs = self.and_expr()?;
        while self.eat_keyword("or") {
            let rhs = self.and_expr()?;
            lhs = ConstraintExpr::Binary { op: BinOp::Or, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<ConstraintExpr, ExprParseError> {
        let mut lhs = self.comparison()?;
        while self.eat_keyword("and") {
            let rhs = self.comparison()?;
            lhs = ConstraintExpr::Binary { op: BinOp::And, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn comparison(&mut self) -> Result<ConstraintExpr, ExprParseError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Some(Token::Symbol("=")) => Some(BinOp::Eq),
            Some(Token::Symbol("<>")) => Some(BinOp::Ne),
            Some(Token::Symbol("<")) => Some(BinOp::Lt),
            Some(Token::Symbol("<=")) => Some(BinOp::Le),
            Some(Token::Symbol(">")) => Some(BinOp::Gt),
            Some(Token::Symbol(">=")) => Some(BinOp::Ge),
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let rhs = self.additive()?;
            return Ok(ConstraintExpr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) });
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<ConstraintExpr, ExprParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Token::Symbol("+")) => BinOp::Add,
                Some(Token::Symbol("-")) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = ConstraintExpr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ConstraintExpr, ExprParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Token::Symbol("*")) => BinOp::Mul,
                Some(Token::Symbol("/")) => BinOp::Div,
                Some(Token::Ident(kw)) if kw == "div" => BinOp::IntDiv,
                Some(Token::Ident(kw)) if kw == "mod" => BinOp::Mod,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = ConstraintExpr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ConstraintExpr, ExprParseError> {
        if self.eat_keyword("not") {
            return Ok(ConstraintExpr::Not(Box::new(self.unary()?)));
        }
        if self.eat_symbol("-") {
            return Ok(ConstraintExpr::Neg(Box::new(self.unary()?)));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<ConstraintExpr, ExprParseError> {
        let mut expr = self.primary()?;
        loop {
            if self.eat_symbol(".") {
                let name = match self.bump() {
                    Some(Token::Ident(name)) => name,
                    _ => {
                        return Err(ExprParseError {
                            column: self.column(),
                            message: "expected member name after `.`".into(),
                        })
                    }
                };
                expr = self.member(expr, name)?;
            } else if self.eat_symbol("->") {
                let name = match self.bump() {
                    Some(Token::Ident(name)) => name,
                    _ => {
                        return Err(ExprParseError {
                            column: self.column(),
                            message: "expected collection operation after `->`".into(),
                        })
                    }
                };
                expr = self.collection_op(expr, &name)?;
            } else {
                break;
            }
        }
        Ok(expr)
    }

    /// `.name`, `.name@pre`, `.allInstances()`, `.mod(x)`, `.div(x)`
    fn member(
        &mut self,
        base: ConstraintExpr,
        name: String,
    ) -> Result<ConstraintExpr, ExprParseError> {
        if name == "allInstances" {
            self.expect_symbol("(")?;
            self.expect_symbol(")")?;
            return match base {
                ConstraintExpr::Ident(class) => Ok(ConstraintExpr::AllInstances(class)),
                _ => Err(ExprParseError {
                    column: self.column(),
                    message: "allInstances() requires a class name".into(),
                }),
            };
        }
        if (name == "mod" || name == "div") && matches!(self.peek(), Some(Token::Symbol("("))) {
            self.expect_symbol("(")?;
            let arg = self.implies()?;
            self.expect_symbol(")")?;
            let op = if name == "mod" { BinOp::Mod } else { BinOp::IntDiv };
            return Ok(ConstraintExpr::Binary { op, lhs: Box::new(base), rhs: Box::new(arg) });
        }
        let at_pre = if self.eat_symbol("@") {
            if !self.eat_keyword("pre") {
                return Err(ExprParseError {
                    column: self.column(),
                    message: "expected `pre` after `@`".into(),
                });
            }
            true
        } else {
            false
        };
        Ok(ConstraintExpr::Attr { base: Box::new(base), name, at_pre })
    }

    fn collection_op(
        &mut self,
        base: ConstraintExpr,
        name: &str,
    ) -> Result<ConstraintExpr, ExprParseError> {
        let op = match name {
            "forAll" => CollOp::ForAll,
            "exists" => CollOp::Exists,
            "isUnique" => CollOp::IsUnique,
            "size" => CollOp::Size,
            other => {
                return Err(ExprParseError {
                    column: self.column(),
                    message: format!("unsupported collection operation `{other}`"),
                })
            }
        };
        self.expect_symbol("(")?;
        let arg = if matches!(self.peek(), Some(Token::Symbol(")"))) {
            None
        } else {
            Some(Box::new(self.implies()?))
        };
        self.expect_symbol(")")?;
        if op == CollOp::Size && arg.is_some() {
            return Err(ExprParseError {
                column: self.column(),
                message: "size() takes no argument".into(),
            });
        }
        if op != CollOp::Size && arg.is_none() {
            return Err(ExprParseError {
                column: self.column(),
                message: format!("{name}() requires a body expression"),
            });
        }
        Ok(ConstraintExpr::Collection { base: Box::new(base), op, arg })
    }

    fn primary(&mut self) -> Result<ConstraintExpr, ExprParseError> {
        let column = self.column();
        match self.bump() {
            Some(Token::Number(n)) => Ok(ConstraintExpr::Number(n)),
            Some(Token::Str(s)) => Ok(ConstraintExpr::Str(s)),
            Some(Token::Ident(word)) => match word.as_str() {
                "self" => Ok(ConstraintExpr::SelfRef),
                "true" => Ok(ConstraintExpr::Bool(true)),
                "false" => Ok(ConstraintExpr::Bool(false)),
                _ => Ok(ConstraintExpr::Ident(word)),
            },
            Some(Token::Symbol("(")) => {
                let expr = self.implies()?;
                self.expect_symbol(")")?;
                Ok(expr)
            }
            other => Err(ExprParseError {
                column,
                message: format!("expected an expression, got {other:?}"),
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("type mismatch: expected {expected}, got {got}")]
    TypeMismatch { expected: &'static str, got: &'static str },
    #[error("unknown attribute `{attribute}` on `{subject}`")]
    UnknownAttribute { subject: String, attribute: String },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("`@pre` is only available inside postconditions")]
    PreOutsidePost,
    #[error("division by zero")]
    DivisionByZero,
    #[error("`{0}` cannot be evaluated in this scope")]
    UnsupportedInScope(&'static str),
}

/// What an expression evaluates against: a full instance store or a pair of
/// before/after attribute snapshots for contract checks.
pub trait EvalScope {
    /// Value bound to `self`, if any.
    fn self_instance(&self) -> Option<Value>;
    /// Attribute (or relationship navigation) on an instance.
    fn attr(&self, instance: &str, name: &str, at_pre: bool) -> Result<Value, EvalError>;
    fn all_instances(&self, class: &str) -> Result<Vec<Value>, EvalError>;
    /// Rebinds `self` to a collection element for quantifier bodies.
    fn with_self(&self, instance: &str) -> Box<dyn EvalScope + '_>;
}

pub fn eval(expr: &ConstraintExpr, scope: &dyn EvalScope) -> Result<Value, EvalError> {
    match expr {
        ConstraintExpr::Number(n) => Ok(Value::Number(*n)),
        ConstraintExpr::Str(s) => Ok(Value::Str(s.clone())),
        ConstraintExpr::Bool(b) => Ok(Value::Bool(*b)),
        ConstraintExpr::SelfRef => {
            scope.self_instance().ok_or(EvalError::UnsupportedInScope("self"))
        }
        // A bare identifier is an attribute of the implicit self.
        ConstraintExpr::Ident(name) => match scope.self_instance() {
            Some(Value::Instance(id)) => scope.attr(&id, name, false),
            _ => Err(EvalError::UnknownAttribute {
                subject: "<unbound>".into(),
                attribute: name.clone(),
            }),
        },
        ConstraintExpr::Attr { base, name, at_pre } => {
            let base = eval(base, scope)?;
            match base {
                Value::Instance(id) => scope.attr(&id, name, *at_pre),
                other => Err(EvalError::TypeMismatch {
                    expected: "instance",
                    got: other.type_name(),
                }),
            }
        }
        ConstraintExpr::AllInstances(class) => {
            Ok(Value::Collection(scope.all_instances(class)?))
        }
        ConstraintExpr::Not(inner) => match eval(inner, scope)? {
            Value::Bool(b) => Ok(Value::Bool(!b)),
            other => {
                Err(EvalError::TypeMismatch { expected: "boolean", got: other.type_name() })
            }
        },
        ConstraintExpr::Neg(inner) => match eval(inner, scope)? {
            Value::Number(n) => Ok(Value::Number(-n)),
            other => Err(EvalError::TypeMismatch { expected: "number", got: other.type_name() }),
        },
        ConstraintExpr::Binary { op, lhs, rhs } => eval_binary(*op, lhs, rhs, scope),
        ConstraintExpr::Collection { base, op, arg } => eval_collection(base, *op, arg, scope),
    }
}

fn eval_binary(
    op: BinOp,
    lhs: &ConstraintExpr,
    rhs: &ConstraintExpr,
    scope: &dyn EvalScope,
) -> Result<Value, EvalError> {
    // Short-circuit the boolean connectives.
    match op {
        BinOp::And => {
            return match as_bool(eval(lhs, scope)?)? {
                false => Ok(Value::Bool(false)),
                true => Ok(Value::Bool(as_bool(eval(rhs, scope)?)?)),
            }
        }
        BinOp::Or => {
            return match as_bool(eval(lhs, scope)?)? {
                true => Ok(Value::Bool(true)),
                false => Ok(Value::Bool(as_bool(eval(rhs, scope)?)?)),
            }
        }
        BinOp::Implies => {
            return match as_bool(eval(lhs, scope)?)? {
                false => Ok(Value::Bool(true)),
                true => Ok(Value::Bool(as_bool(eval(rhs, scope)?)?)),
            }
        }
        _ => {}
    }

    let left = eval(lhs, scope)?;
    let right = eval(rhs, scope)?;
    match op {
        BinOp::Eq => Ok(Value::Bool(values_equal(&left, &right)?)),
        BinOp::Ne => Ok(Value::Bool(!values_equal(&left, &right)?)),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let l = as_number(left)?;
            let r = as_number(right)?;
            let result = match op {
                BinOp::Lt => l < r,
                BinOp::Le => l <= r,
                BinOp::Gt => l > r,
                _ => l >= r,
            };
            Ok(Value::Bool(result))
        }
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::IntDiv | BinOp::Mod => {
            let l = as_number(left)?;
            let r = as_number(right)?;
            if r == 0.0 && matches!(op, BinOp::Div | BinOp::IntDiv | BinOp::Mod) {
                return Err(EvalError::DivisionByZero);
            }
            let result = match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => l / r,
                BinOp::IntDiv => (l / r).trunc(),
                _ => l.rem_euclid(r),
            };
            Ok(Value::Number(result))
        }
        BinOp::And | BinOp::Or | BinOp::Implies => unreachable!("handled above"),
    }
}

fn eval_collection(
    base: &ConstraintExpr,
    op: CollOp,
    arg: &Option<Box<ConstraintExpr>>,
    scope: &dyn EvalScope,
) -> Result<Value, EvalError> {
    let items = match eval(base, scope)? {
        Value::Collection(items) => items,
        other => {
            return Err(EvalError::TypeMismatch { expected: "collection", got: other.type_name() })
        }
    };
    match op {
        CollOp::Size => Ok(Value::Number(items.len() as f64)),
        CollOp::ForAll | CollOp::Exists | CollOp::IsUnique => {
            let body = arg.as_ref().expect("checked at parse time");
            let mut keys = Vec::new();
            for item in &items {
                let scoped: Box<dyn EvalScope> = match item {
                    Value::Instance(id) => scope.with_self(id),
                    other => {
                        return Err(EvalError::TypeMismatch {
                            expected: "instance",
                            got: other.type_name(),
                        })
                    }
                };
                let value = eval(body, scoped.as_ref())?;
                match op {
                    CollOp::ForAll => {
                        if !as_bool(value)? {
                            return Ok(Value::Bool(false));
                        }
                    }
                    CollOp::Exists => {
                        if as_bool(value)? {
                            return Ok(Value::Bool(true));
                        }
                    }
                    CollOp::IsUnique => keys.push(value.render()),
                    CollOp::Size => unreachable!(),
                }
            }
            match op {
                CollOp::ForAll => Ok(Value::Bool(true)),
                CollOp::Exists => Ok(Value::Bool(false)),
                CollOp::IsUnique => {
                    let mut seen = std::collections::BTreeSet::new();
                    Ok(Value::Bool(keys.iter().all(|k| seen.insert(k))))
                }
                CollOp::Size => unreachable!(),
            }
        }
    }
}

pub fn as_bool(value: Value) -> Result<bool, EvalError> {
    match value {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::TypeMismatch { expected: "boolean", got: other.type_name() }),
    }
}

pub fn as_number(value: Value) -> Result<f64, EvalError> {
    match value {
        Value::Number(n) => Ok(n),
        other => Err(EvalError::TypeMismatch { expected: "number", got: other.type_name() }),
    }
}

fn values_equal(left: &Value, right: &Value) -> Result<bool, EvalError> {
    match (left, right) {
        (Value::Number(l), Value::Number(r)) => Ok(l == r),
        // String comparison is exact and case-sensitive.
        (Value::Str(l), Value::Str(r)) => Ok(l == r),
        (Value::Bool(l), Value::Bool(r)) => Ok(l == r),
        (Value::Instance(l), Value::Instance(r)) => Ok(l == r),
        (l, r) => {
            Err(EvalError::TypeMismatch { expected: l.type_name(), got: r.type_name() })
        }
    }
}

impl fmt::Display for ConstraintExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintExpr::Number(n) => write!(f, "{}", render_number(*n)),
            ConstraintExpr::Str(s) => write!(f, "'{s}'"),
            ConstraintExpr::Bool(b) => write!(f, "{b}"),
            ConstraintExpr::SelfRef => write!(f, "self"),
            ConstraintExpr::Ident(name) => write!(f, "{name}"),
            ConstraintExpr::Attr { base, name, at_pre } => {
                write!(f, "{base}.{name}{}", if *at_pre { "@pre" } else { "" })
            }
            ConstraintExpr::AllInstances(class) => write!(f, "{class}.allInstances()"),
            ConstraintExpr::Not(e) => write!(f, "not {e}"),
            ConstraintExpr::Neg(e) => write!(f, "-{e}"),
            ConstraintExpr::Binary { op, lhs, rhs } => {
                let op = match op {
                    BinOp::Eq => "=",
                    BinOp::Ne => "<>",
                    BinOp::Lt => "<",
                    BinOp::Le => "<=",
                    BinOp::Gt => ">",
                    BinOp::Ge => ">=",
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::IntDiv => "div",
                    BinOp::Mod => "mod",
                    BinOp::And => "and",
                    BinOp::Or => "or",
                    BinOp::Implies => "implies",
                };
                write!(f, "({lhs} {op} {rhs})")
            }
            ConstraintExpr::Collection { base, op, arg } => {
                let op = match op {
                    CollOp::ForAll => "forAll",
                    CollOp::Exists => "exists",
                    CollOp::IsUnique => "isUnique",
                    CollOp::Size => "size",
                };
                match arg {
                    Some(arg) => write!(f, "{base}->{op}({arg})"),
                    None => write!(f, "{base}->{op}()"),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    struct MapScope {
        attrs: BTreeMap<String, Value>,
    }

    impl EvalScope for MapScope {
        fn self_instance(&self) -> Option<Value> {
            Some(Value::Instance("it".into()))
        }
        fn attr(&self, _instance: &str, name: &str, _at_pre: bool) -> Result<Value, EvalError> {
            self.attrs.get(name).cloned().ok_or_else(|| EvalError::UnknownAttribute {
                subject: "it".into(),
                attribute: name.into(),
            })
        }
        fn all_instances(&self, class: &str) -> Result<Vec<Value>, EvalError> {
            Err(EvalError::UnknownClass(class.into()))
        }
        fn with_self(&self, _instance: &str) -> Box<dyn EvalScope + '_> {
            Box::new(MapScope { attrs: self.attrs.clone() })
        }
    }

    fn scope(pairs: &[(&str, Value)]) -> MapScope {
        MapScope {
            attrs: pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        }
    }

    #[test]
    fn parses_range_constraint() {
        let expr = parse_expr("self.performance >= 0 and self.performance <= 100").unwrap();
        let ok = scope(&[("performance", Value::Number(80.0))]);
        assert_eq!(eval(&expr, &ok).unwrap(), Value::Bool(true));
        let bad = scope(&[("performance", Value::Number(150.0))]);
        assert_eq!(eval(&expr, &bad).unwrap(), Value::Bool(false));
    }

    #[test]
    fn parses_is_unique_over_all_instances() {
        let expr = parse_expr("UV.allInstances()->isUnique(uvID)").unwrap();
        assert!(expr.any(&|e| matches!(
            e,
            ConstraintExpr::Collection { op: CollOp::IsUnique, .. }
        )));
    }

    #[test]
    fn mod_method_call_form() {
        let expr = parse_expr("self.leadingSpaces.mod(spacePerIndent) = 0").unwrap();
        let s = scope(&[
            ("leadingSpaces", Value::Number(8.0)),
            ("spacePerIndent", Value::Number(4.0)),
        ]);
        assert_eq!(eval(&expr, &s).unwrap(), Value::Bool(true));
        let s = scope(&[
            ("leadingSpaces", Value::Number(3.0)),
            ("spacePerIndent", Value::Number(4.0)),
        ]);
        assert_eq!(eval(&expr, &s).unwrap(), Value::Bool(false));
    }

    #[test]
    fn string_comparison_is_case_sensitive() {
        let expr = parse_expr("self.status = 'Idle'").unwrap();
        let s = scope(&[("status", Value::Str("idle".into()))]);
        assert_eq!(eval(&expr, &s).unwrap(), Value::Bool(false));
    }

    #[test]
    fn hyphenated_identifiers_lex_as_one_token() {
        let expr = parse_expr("mission-ID = 'm-1'").unwrap();
        assert!(expr.any(&|e| matches!(e, ConstraintExpr::Ident(n) if n == "mission-ID")));
    }

    #[test]
    fn subtraction_needs_spaces() {
        let expr = parse_expr("self.a - 1 > 0").unwrap();
        let s = scope(&[("a", Value::Number(5.0))]);
        assert_eq!(eval(&expr, &s).unwrap(), Value::Bool(true));
    }

    #[test]
    fn implies_short_circuits() {
        let expr = parse_expr("false implies self.missing = 1").unwrap();
        let s = scope(&[]);
        assert_eq!(eval(&expr, &s).unwrap(), Value::Bool(true));
    }

    #[test]
    fn type_mismatch_is_an_error() {
        let expr = parse_expr("self.status > 3").unwrap();
        let s = scope(&[("status", Value::Str("Idle".into()))]);
        assert!(matches!(eval(&expr, &s), Err(EvalError::TypeMismatch { .. })));
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let expr = parse_expr("self.a mod 0 = 1").unwrap();
        let s = scope(&[("a", Value::Number(4.0))]);
        assert_eq!(eval(&expr, &s), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn unterminated_string_is_a_parse_error() {
        assert!(parse_expr("self.status = 'Idle").is_err());
    }
}
