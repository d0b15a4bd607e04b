//! Context-sensitive completion: member and class keywords addable at a
//! cursor, followed by element templates with mandatory members filled in.

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

use crate::diagnostic::LineIndex;
use crate::grammar::{EntryForm, Grammar, MemberEntry, ProductionRule};
use crate::metamodel::{Metamodel, PrimitiveKind};
use crate::model::{ElementId, ReferenceLookup};
use crate::textsyntax::{LexConfigError, ParsedModel, Syntax};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AssistError {
    #[error("position {line}:{column} is outside the document")]
    OutOfRange { line: usize, column: usize },
    #[error(transparent)]
    Config(#[from] LexConfigError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    /// Outside every element; only the root element can go here.
    Document { root_present: bool },
    /// Directly inside an element body.
    Element,
    /// Inside the braces of a wrapped containment member.
    Wrapper { member: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CursorContext {
    pub scope: Scope,
    pub enclosing_element: Option<ElementId>,
    pub enclosing_class: String,
    pub members_present: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalKind {
    Keyword,
    Template,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub kind: ProposalKind,
    pub label: String,
    /// Templates mark blanks as `${n:hint}`.
    pub insert_text: String,
}

/// A parsed document ready for repeated context queries.
pub struct AssistDocument<'a> {
    text: &'a str,
    syntax: &'a Syntax<'a>,
    pub parsed: ParsedModel,
}

impl<'a> AssistDocument<'a> {
    pub fn new(text: &'a str, syntax: &'a Syntax<'a>) -> Self {
        AssistDocument { text, syntax, parsed: syntax.parse(text) }
    }

    /// Context at a 1-based line and column. `Ok(None)` means no proposal
    /// makes sense there: inside a string, a header or a statement.
    pub fn context_at(&self, line: usize, column: usize) -> Result<Option<CursorContext>, AssistError> {
        let offset = LineIndex::new(self.text)
            .offset(line, column)
            .ok_or(AssistError::OutOfRange { line, column })?;
        Ok(self.context_at_offset(offset))
    }

    pub fn context_at_offset(&self, o: usize) -> Option<CursorContext> {
        let layout = &self.parsed.layout;
        let strictly_inside = |&(s, e): &(usize, usize)| s < o && o < e;
        if layout.strings.iter().any(strictly_inside) || layout.statements.iter().any(strictly_inside) {
            return None;
        }
        for el in &layout.elements {
            let inside_header = match el.body_open {
                Some(open) => el.keyword_start < o && o <= open,
                None => el.keyword_start < o && o < el.header_end,
            };
            if inside_header {
                return None;
            }
        }

        let encloses = |open: usize, close: Option<usize>| open < o && close.is_none_or(|c| o <= c);
        let element = layout
            .elements
            .iter()
            .filter_map(|el| el.body_open.filter(|&open| encloses(open, el.body_close)).map(|open| (open, el.id)))
            .max();
        let wrapper = layout
            .wrappers
            .iter()
            .filter(|w| encloses(w.open, w.close))
            .max_by_key(|w| w.open);

        let g = self.syntax.grammar();
        let root = self.parsed.root.as_ref();
        let (scope, id) = match (element, wrapper) {
            (None, None) => {
                return Some(CursorContext {
                    scope: Scope::Document { root_present: root.is_some() },
                    enclosing_element: None,
                    enclosing_class: g.root_rule.clone(),
                    members_present: BTreeSet::new(),
                })
            }
            (Some((open, _)), Some(w)) if w.open > open => (Scope::Wrapper { member: w.member.clone() }, w.owner),
            (None, Some(w)) => (Scope::Wrapper { member: w.member.clone() }, w.owner),
            (Some((_, id)), _) => (Scope::Element, id),
        };
        let element = root?.find(id)?;
        let mut members_present: BTreeSet<String> = element
            .attributes
            .iter()
            .map(|(m, _)| m.clone())
            .chain(element.cross_refs.iter().map(|r| r.member.clone()))
            .chain(element.children.iter().map(|(m, _)| m.clone()))
            .collect();
        if element.short_name.is_some() {
            members_present.insert(crate::metamodel::SHORT_NAME.to_string());
        }
        Some(CursorContext {
            scope,
            enclosing_element: Some(id),
            enclosing_class: element.class_name.clone(),
            members_present,
        })
    }
}

/// Parses `text` and locates the completion context at `line`:`column`.
pub fn locate_context(
    text: &str,
    line: usize,
    column: usize,
    g: &Grammar,
    mm: &Metamodel,
) -> Result<Option<CursorContext>, AssistError> {
    let syntax = Syntax::new(g, mm)?;
    let doc = AssistDocument::new(text, &syntax);
    doc.context_at(line, column)
}

/// Rules whose class fits `target`, by keyword.
fn fitting_rules<'g>(g: &'g Grammar, mm: &Metamodel, target: &str) -> Vec<&'g ProductionRule> {
    let mut rules: Vec<&ProductionRule> =
        g.rules.values().filter(|r| mm.is_subtype(&r.class_name, target).unwrap_or(false)).collect();
    rules.sort_by(|a, b| a.keyword.cmp(&b.keyword));
    rules
}

/// Proposals for a context, keywords first, then templates.
pub fn complete(
    ctx: &CursorContext,
    g: &Grammar,
    mm: &Metamodel,
    lookup: &impl ReferenceLookup,
) -> Vec<Proposal> {
    let mut keywords: Vec<String> = Vec::new();
    let mut templates: Vec<(String, String)> = Vec::new();
    let present = |m: &str| ctx.members_present.contains(m);
    let addable = |e: &MemberEntry| e.repeatable || !present(&e.member);

    match &ctx.scope {
        Scope::Document { root_present } => {
            if let (false, Some(rule)) = (root_present, g.rule(&g.root_rule)) {
                keywords.push(rule.keyword.clone());
                templates.push((rule.keyword.clone(), template(rule, lookup)));
            }
        }
        Scope::Element => {
            let Some(rule) = g.rule(&ctx.enclosing_class) else { return Vec::new() };
            for entry in &rule.entries {
                if !addable(entry) {
                    continue;
                }
                match &entry.form {
                    EntryForm::Inline { target } => {
                        for child in fitting_rules(g, mm, target) {
                            let first = rule.entries.iter().find(|e| {
                                matches!(&e.form, EntryForm::Inline { target } if mm.is_subtype(&child.class_name, target).unwrap_or(false))
                            });
                            if first == Some(entry) {
                                keywords.push(child.keyword.clone());
                                templates.push((child.keyword.clone(), template(child, lookup)));
                            }
                        }
                    }
                    EntryForm::Wrapped { keyword, braces, target, .. } => {
                        keywords.push(keyword.clone());
                        for child in fitting_rules(g, mm, target) {
                            let inner = template(child, lookup);
                            let text = if *braces {
                                format!("{keyword}\n{{\n{}\n}}", indent_block(&inner))
                            } else {
                                format!("{keyword} {inner}")
                            };
                            templates.push((child.keyword.clone(), text));
                        }
                    }
                    _ => {
                        if let Some(k) = entry.keyword() {
                            keywords.push(k.to_string());
                        }
                    }
                }
            }
        }
        Scope::Wrapper { member } => {
            let entry = g.rule(&ctx.enclosing_class).and_then(|r| r.entry(member));
            if let Some(entry @ MemberEntry { form: EntryForm::Wrapped { target, .. }, .. }) = entry {
                if addable(entry) {
                    for child in fitting_rules(g, mm, target) {
                        keywords.push(child.keyword.clone());
                        templates.push((child.keyword.clone(), template(child, lookup)));
                    }
                }
            }
        }
    }

    let mut seen = HashSet::new();
    let mut out: Vec<Proposal> = keywords
        .into_iter()
        .filter(|k| seen.insert(k.clone()))
        .map(|k| Proposal { kind: ProposalKind::Keyword, label: k.clone(), insert_text: k })
        .collect();
    out.extend(
        templates
            .into_iter()
            .map(|(label, insert_text)| Proposal { kind: ProposalKind::Template, label, insert_text }),
    );
    out
}

fn indent_block(text: &str) -> String {
    text.lines().map(|l| format!("    {l}")).collect::<Vec<_>>().join("\n")
}

fn placeholder(n: &mut usize, hint: &str) -> String {
    let p = format!("${{{n}:{hint}}}");
    *n += 1;
    p
}

fn value_placeholder(n: &mut usize, kind: PrimitiveKind) -> String {
    let p = placeholder(n, kind.name());
    if kind == PrimitiveKind::String {
        format!("\"{p}\"")
    } else {
        p
    }
}

/// Snippet for a new element: header plus exactly the mandatory entries.
pub fn template(rule: &ProductionRule, lookup: &impl ReferenceLookup) -> String {
    let mut n = 1;
    let mut header = rule.keyword.clone();
    if rule.name_inline {
        header.push(' ');
        header.push_str(&placeholder(&mut n, "name"));
    }
    let mut lines: Vec<String> = Vec::new();
    for entry in rule.entries.iter().filter(|e| !e.optional) {
        match &entry.form {
            EntryForm::Attribute { keyword, kind } => {
                let value = value_placeholder(&mut n, *kind);
                lines.push(match keyword {
                    Some(k) => format!("{k} {value}"),
                    None => value,
                });
            }
            EntryForm::CrossRef { keyword, target } => {
                let value = match lookup.first_fitting(target) {
                    Some(q) => q.to_string(),
                    None => placeholder(&mut n, target),
                };
                lines.push(format!("{keyword} {value}"));
            }
            EntryForm::Inline { target } => lines.push(placeholder(&mut n, target)),
            EntryForm::Wrapped { keyword, braces: true, target, .. } => {
                lines.push(keyword.clone());
                lines.push("{".into());
                lines.push(format!("    {}", placeholder(&mut n, target)));
                lines.push("}".into());
            }
            EntryForm::Wrapped { keyword, target, .. } => {
                lines.push(format!("{keyword} {}", placeholder(&mut n, target)));
            }
        }
    }
    if lines.is_empty() && rule.body_optional {
        return header;
    }
    let mut out = header;
    out.push_str("\n{\n");
    for l in lines {
        out.push_str("    ");
        out.push_str(&l);
        out.push('\n');
    }
    out.push('}');
    out
}
