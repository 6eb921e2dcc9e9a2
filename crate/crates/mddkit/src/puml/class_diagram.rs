//! Class-diagram parser: class declarations with attributes, operations and
//! visibility markers, plus the four relationship arrows.

use super::{content_lines, is_noise_directive, DiagramKind, PumlError, SourceUnit};
use crate::diag::ParseDiagnostic;
use crate::model::{
    AttributeDef, ClassDef, MultiplicityRange, OperationSig, ParamDef, Relationship,
    RelationshipKind, Stereotype, UmlModel, Visibility,
};

/// Parses a class diagram into a partial model (classes and relationships
/// only). Unparseable lines are reported as diagnostics and skipped.
pub fn parse_class_diagram(
    unit: &SourceUnit,
) -> Result<(UmlModel, Vec<ParseDiagnostic>), PumlError> {
    if unit.kind != DiagramKind::ClassDiagram {
        return Err(PumlError::WrongKind {
            path: unit.path.clone(),
            expected: DiagramKind::ClassDiagram,
            actual: unit.kind,
        });
    }

    let mut model = UmlModel::default();
    let mut diagnostics = Vec::new();
    let mut current_class: Option<ClassDef> = None;

    for (line_no, line) in content_lines(&unit.text) {
        if let Some(class) = current_class.as_mut() {
            // Inside a class body.
            if line == "}" {
                model.classes.push(current_class.take().unwrap());
                continue;
            }
            match parse_member(line) {
                Some(Member::Attribute(attr)) => class.attributes.push(attr),
                Some(Member::Operation(op)) => class.operations.push(op),
                None => diagnostics.push(ParseDiagnostic::warning(
                    &unit.path,
                    line_no,
                    1,
                    "unparsed-member",
                    format!("skipping unrecognized class member `{line}`"),
                )),
            }
            continue;
        }

        if let Some(rest) = line.strip_prefix("class ") {
            match parse_class_header(rest) {
                Some((class, has_body)) => {
                    if has_body {
                        current_class = Some(class);
                    } else {
                        model.classes.push(class);
                    }
                }
                None => diagnostics.push(ParseDiagnostic::warning(
                    &unit.path,
                    line_no,
                    1,
                    "unparsed-class",
                    format!("skipping malformed class declaration `{line}`"),
                )),
            }
            continue;
        }

        if is_noise_directive(line) {
            diagnostics.push(ParseDiagnostic::warning(
                &unit.path,
                line_no,
                1,
                "ignored-directive",
                format!("directive `{}` is outside the supported subset", first_word(line)),
            ));
            continue;
        }

        match parse_relationship(line) {
            Some(rel) => model.relationships.push(rel),
            None => diagnostics.push(ParseDiagnostic::warning(
                &unit.path,
                line_no,
                1,
                "unparsed-line",
                format!("skipping unrecognized line `{line}`"),
            )),
        }
    }

    if let Some(class) = current_class {
        return Err(PumlError::UnbalancedBlock {
            path: unit.path.clone(),
            line: unit.text.lines().count() as u32,
            construct: format!("class {}", class.name),
        });
    }
    Ok((model, diagnostics))
}

fn first_word(line: &str) -> &str {
    line.split_whitespace().next().unwrap_or(line)
}

/// `Name`, `"Quoted Name"`, optional `<<stereotype>>`, optional trailing `{`.
fn parse_class_header(rest: &str) -> Option<(ClassDef, bool)> {
    let mut rest = rest.trim();
    let has_body = rest.ends_with('{');
    if has_body {
        rest = rest[..rest.len() - 1].trim_end();
    }
    let (name, remainder) = take_name(rest)?;
    let remainder = remainder.trim();
    let stereotype = if remainder.is_empty() {
        Stereotype::Plain
    } else {
        let tag = remainder.strip_prefix("<<").and_then(|r| r.strip_suffix(">>"))?;
        if tag.trim() == "agent" {
            Stereotype::Agent
        } else {
            Stereotype::Plain
        }
    };
    Some((
        ClassDef { name, stereotype, attributes: Vec::new(), operations: Vec::new() },
        has_body,
    ))
}

/// Takes a bare identifier or a quoted name off the front of `text`.
fn take_name(text: &str) -> Option<(String, &str)> {
    let text = text.trim_start();
    if let Some(rest) = text.strip_prefix('"') {
        let end = rest.find('"')?;
        return Some((rest[..end].to_string(), &rest[end + 1..]));
    }
    let end = text
        .find(|c: char| !(c.is_alphanumeric() || c == '_' || c == '-'))
        .unwrap_or(text.len());
    if end == 0 {
        return None;
    }
    Some((text[..end].to_string(), &text[end..]))
}

enum Member {
    Attribute(AttributeDef),
    Operation(OperationSig),
}

fn parse_member(line: &str) -> Option<Member> {
    let (visibility, rest) = match line.chars().next()? {
        '+' => (Visibility::Public, &line[1..]),
        '-' => (Visibility::Private, &line[1..]),
        '#' => (Visibility::Protected, &line[1..]),
        _ => (Visibility::Public, line),
    };
    let rest = rest.trim();

    if let Some(open) = rest.find('(') {
        let name = rest[..open].trim().to_string();
        if name.is_empty() {
            return None;
        }
        let close = rest.find(')')?;
        if close < open {
            return None;
        }
        let params = parse_params(&rest[open + 1..close])?;
        let return_tag = rest[close + 1..]
            .trim()
            .strip_prefix(':')
            .map(|r| r.trim().to_string())
            .unwrap_or_default();
        return Some(Member::Operation(OperationSig { name, params, return_tag }));
    }

    let (name, type_tag) = match rest.split_once(':') {
        Some((n, t)) => (n.trim().to_string(), t.trim().to_string()),
        None => (rest.to_string(), String::new()),
    };
    if name.is_empty() || name.contains(char::is_whitespace) {
        return None;
    }
    Some(Member::Attribute(AttributeDef { name, type_tag, visibility }))
}

fn parse_params(text: &str) -> Option<Vec<ParamDef>> {
    let text = text.trim();
    if text.is_empty() {
        return Some(Vec::new());
    }
    let mut params = Vec::new();
    for part in text.split(',') {
        let (name, type_tag) = match part.split_once(':') {
            Some((n, t)) => (n.trim().to_string(), t.trim().to_string()),
            None => (part.trim().to_string(), String::new()),
        };
        if name.is_empty() {
            return None;
        }
        params.push(ParamDef { name, type_tag });
    }
    Some(params)
}

/// The relationship arrows, in match order. Mirrored arrows swap the ends so
/// that the canonical orientation always holds: inheritance source = subclass,
/// composition/aggregation source = whole.
const ARROWS: &[(&str, RelationshipKind, bool)] = &[
    ("<|--", RelationshipKind::Inheritance, true),
    ("--|>", RelationshipKind::Inheritance, false),
    ("*--", RelationshipKind::Composition, false),
    ("--*", RelationshipKind::Composition, true),
    ("o--", RelationshipKind::Aggregation, false),
    ("--o", RelationshipKind::Aggregation, true),
    ("--", RelationshipKind::Association, false),
];

fn parse_relationship(line: &str) -> Option<Relationship> {
    // Strip an optional trailing `: label`; the label itself is not stored.
    let mut tokens = tokenize(line);
    if let Some(pos) = tokens.iter().position(|t| matches!(t, Token::Colon)) {
        tokens.truncate(pos);
    }

    let arrow_pos = tokens.iter().position(|t| {
        matches!(t, Token::Bare(s) if ARROWS.iter().any(|(a, _, _)| a == s))
    })?;
    let (kind, swap) = match &tokens[arrow_pos] {
        Token::Bare(s) => {
            let (_, kind, swap) = ARROWS.iter().find(|(a, _, _)| a == s)?;
            (*kind, *swap)
        }
        _ => return None,
    };

    let (left, left_mult) = parse_end(&tokens[..arrow_pos])?;
    let (right, right_mult) = parse_end_reversed(&tokens[arrow_pos + 1..])?;

    let (source, target, source_multiplicity, target_multiplicity) = if swap {
        (right, left, right_mult, left_mult)
    } else {
        (left, right, left_mult, right_mult)
    };
    Some(Relationship { kind, source, target, source_multiplicity, target_multiplicity })
}

/// `Name ["mult"]` — the tokens left of the arrow.
fn parse_end(tokens: &[Token]) -> Option<(String, MultiplicityRange)> {
    match tokens {
        [Token::Name(name)] => Some((name.clone(), MultiplicityRange::ONE)),
        [Token::Name(name), Token::Quoted(mult)] => {
            Some((name.clone(), MultiplicityRange::parse(mult)?))
        }
        _ => None,
    }
}

/// `["mult"] Name` — the tokens right of the arrow.
fn parse_end_reversed(tokens: &[Token]) -> Option<(String, MultiplicityRange)> {
    match tokens {
        [Token::Name(name)] => Some((name.clone(), MultiplicityRange::ONE)),
        [Token::Quoted(mult), Token::Name(name)] => {
            Some((name.clone(), MultiplicityRange::parse(mult)?))
        }
        _ => None,
    }
}

#[derive(Debug, PartialEq)]
enum Token {
    /// Bare word that is a plausible class name.
    Name(String),
    /// Bare word that is not a name (arrow candidates).
    Bare(String),
    /// A `"..."` quoted string: a quoted class name or a multiplicity.
    Quoted(String),
    Colon,
}

fn tokenize(line: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chars = line.char_indices().peekable();
    while let Some((start, c)) = chars.next() {
        match c {
            c if c.is_whitespace() => {}
            '"' => {
                let mut content = String::new();
                for (_, c) in chars.by_ref() {
                    if c == '"' {
                        break;
                    }
                    content.push(c);
                }
                // A quoted token that parses as a multiplicity stays Quoted;
                // otherwise it is a quoted class name.
                if MultiplicityRange::parse(&content).is_some() {
                    tokens.push(Token::Quoted(content));
                } else {
                    tokens.push(Token::Name(content));
                }
            }
            ':' => tokens.push(Token::Colon),
            _ => {
                let mut end = start + c.len_utf8();
                while let Some(&(idx, c)) = chars.peek() {
                    if c.is_whitespace() || c == '"' || c == ':' {
                        break;
                    }
                    end = idx + c.len_utf8();
                    chars.next();
                }
                let word = &line[start..end];
                if ARROWS.iter().any(|(a, _, _)| *a == word) {
                    tokens.push(Token::Bare(word.to_string()));
                } else if word.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
                    && word.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
                {
                    tokens.push(Token::Name(word.to_string()));
                } else {
                    tokens.push(Token::Bare(word.to_string()));
                }
            }
        }
    }
    tokens
}
