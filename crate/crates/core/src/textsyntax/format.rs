use std::fmt::Write;

use thiserror::Error;

use crate::grammar::{EntryForm, Grammar, MemberEntry, ProductionRule};
use crate::metamodel::{PrimitiveKind, SHORT_NAME};
use crate::model::{ElementId, ModelElement};

const INDENT: &str = "    ";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("no grammar rule for class `{0}`")]
    NoRule(String),
    #[error("rule `{class}` has no entry for member `{member}`")]
    UnknownMember { class: String, member: String },
    #[error("element {id} of class `{class}` needs a short name")]
    MissingName { id: ElementId, class: String },
}

/// Prints a model in canonical layout: one construct per line, braces on
/// their own lines, four spaces per level.
pub fn format_model(m: &ModelElement, g: &Grammar) -> Result<String, FormatError> {
    let mut out = String::new();
    element(m, g, 0, &mut out)?;
    Ok(out)
}

fn line(out: &mut String, depth: usize, text: &str) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
    out.push_str(text);
    out.push('\n');
}

fn value_text(kind: PrimitiveKind, lexeme: &str) -> String {
    if kind == PrimitiveKind::String {
        format!("\"{lexeme}\"")
    } else {
        lexeme.to_string()
    }
}

fn check_members(e: &ModelElement, rule: &ProductionRule) -> Result<(), FormatError> {
    let known = |m: &str| rule.entry(m).is_some();
    let unknown = e
        .attributes
        .iter()
        .map(|(m, _)| m)
        .chain(e.cross_refs.iter().map(|r| &r.member))
        .chain(e.children.iter().map(|(m, _)| m))
        .find(|m| !known(m));
    match unknown {
        Some(m) => Err(FormatError::UnknownMember { class: e.class_name.clone(), member: m.clone() }),
        None => Ok(()),
    }
}

fn element(e: &ModelElement, g: &Grammar, depth: usize, out: &mut String) -> Result<(), FormatError> {
    let rule = g.rule(&e.class_name).ok_or_else(|| FormatError::NoRule(e.class_name.clone()))?;
    check_members(e, rule)?;

    let mut header = rule.keyword.clone();
    if rule.name_inline {
        let name = e
            .short_name
            .as_ref()
            .ok_or_else(|| FormatError::MissingName { id: e.id, class: e.class_name.clone() })?;
        write!(header, " {name}").unwrap();
    }

    let mut body = String::new();
    for entry in rule.entries.iter().filter(|en| !en.is_inline()) {
        entry_lines(e, entry, g, depth + 1, &mut body)?;
    }
    for (member, child) in &e.children {
        if rule.entry(member).is_some_and(MemberEntry::is_inline) {
            element(child, g, depth + 1, &mut body)?;
        }
    }

    line(out, depth, &header);
    if body.is_empty() && rule.body_optional {
        return Ok(());
    }
    line(out, depth, "{");
    out.push_str(&body);
    line(out, depth, "}");
    Ok(())
}

fn entry_lines(
    e: &ModelElement,
    entry: &MemberEntry,
    g: &Grammar,
    depth: usize,
    out: &mut String,
) -> Result<(), FormatError> {
    match &entry.form {
        EntryForm::Attribute { keyword, kind } => {
            let values: Vec<&str> = if entry.member == SHORT_NAME && *kind == PrimitiveKind::Identifier {
                e.short_name.as_deref().into_iter().collect()
            } else {
                e.attributes.iter().filter(|(m, _)| *m == entry.member).map(|(_, v)| v.as_str()).collect()
            };
            for v in values.into_iter().filter(|v| !v.is_empty()) {
                let text = value_text(*kind, v);
                match keyword {
                    Some(k) => line(out, depth, &format!("{k} {text}")),
                    None => line(out, depth, &text),
                }
            }
        }
        EntryForm::CrossRef { keyword, .. } => {
            for r in e.cross_refs.iter().filter(|r| r.member == entry.member) {
                line(out, depth, &format!("{keyword} {}", r.target));
            }
        }
        EntryForm::Wrapped { keyword, braces, comma_separated, .. } => {
            let children: Vec<&ModelElement> = e.children_of(&entry.member).collect();
            if children.is_empty() && entry.optional {
                return Ok(());
            }
            line(out, depth, keyword);
            if *braces {
                line(out, depth, "{");
            }
            let inner = depth + 1;
            for (i, child) in children.iter().enumerate() {
                let mut text = String::new();
                element(child, g, inner, &mut text)?;
                if *comma_separated && i + 1 < children.len() {
                    text.pop();
                    text.push_str(",\n");
                }
                out.push_str(&text);
            }
            if *braces {
                line(out, depth, "}");
            }
        }
        EntryForm::Inline { .. } => {}
    }
    Ok(())
}
