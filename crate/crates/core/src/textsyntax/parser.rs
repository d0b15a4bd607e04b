use crate::diagnostic::{Diagnostic, Span};
use crate::grammar::{EntryForm, MemberEntry, ProductionRule};
use crate::metamodel::{PrimitiveKind, SHORT_NAME};
use crate::model::{CrossRef, ElementId, ModelElement, Origin, QualifiedName};

use super::lexer::{Token, TokenKind};
use super::{unquote, Syntax};

/// Where an element sits in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementLayout {
    pub id: ElementId,
    pub keyword_start: usize,
    /// End of the last header token (keyword or name).
    pub header_end: usize,
    /// Offset of the body's `{`, if the element has a body.
    pub body_open: Option<usize>,
    /// Offset of the matching `}`; `None` when the body is never closed.
    pub body_close: Option<usize>,
}

/// A braced block of a wrapped containment member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrapperLayout {
    pub owner: ElementId,
    pub member: String,
    pub open: usize,
    pub close: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Layout {
    pub elements: Vec<ElementLayout>,
    pub wrappers: Vec<WrapperLayout>,
    /// Byte ranges of attribute and reference statements.
    pub statements: Vec<(usize, usize)>,
    /// Byte ranges of string literals, quotes included.
    pub strings: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct ParsedModel {
    pub root: Option<ModelElement>,
    pub diagnostics: Vec<Diagnostic>,
    pub layout: Layout,
}

pub(super) struct Parser<'a> {
    syn: &'a Syntax<'a>,
    toks: Vec<Token>,
    pos: usize,
    eof: Span,
    next_id: usize,
    diags: Vec<Diagnostic>,
    layout: Layout,
}

impl<'a> Parser<'a> {
    pub(super) fn new(syn: &'a Syntax<'a>, toks: Vec<Token>, eof: Span, diags: Vec<Diagnostic>) -> Self {
        Parser { syn, toks, pos: 0, eof, next_id: 0, diags, layout: Layout::default() }
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn span_here(&self) -> Span {
        self.peek().map_or(self.eof, |t| t.span)
    }

    fn error(&mut self, message: impl Into<String>, span: Span) {
        self.diags.push(Diagnostic::error(message, Some(span)));
    }

    fn at_punct(&self, c: char) -> bool {
        self.peek().is_some_and(|t| t.is_punct(c))
    }

    fn keyword_here(&self) -> Option<&str> {
        match &self.peek()?.kind {
            TokenKind::Keyword(k) => Some(k),
            _ => None,
        }
    }

    /// Rule introduced by the keyword under the cursor, if any.
    fn class_rule_here(&self) -> Option<&'a ProductionRule> {
        let syn = self.syn;
        self.keyword_here().and_then(|k| syn.rule_for_keyword(k))
    }

    /// Consumes a value token acceptable as `kind`.
    fn value(&mut self, kind: PrimitiveKind) -> Option<Token> {
        let t = self.peek()?;
        let ok = match &t.kind {
            TokenKind::TerminalValue(k, lexeme) => *k == kind || self.syn.lexer.accepts(kind, lexeme),
            _ => false,
        };
        if ok {
            self.pos += 1;
            self.toks.get(self.pos - 1).cloned()
        } else {
            None
        }
    }

    pub(super) fn document(mut self) -> ParsedModel {
        let g = self.syn.grammar;
        let root_class = g.root_rule.as_str();
        let mut root = None;
        let mut reported = false;
        while self.peek().is_some() {
            match self.class_rule_here() {
                Some(rule) if root.is_none() && self.syn.is_subtype(&rule.class_name, root_class) => {
                    root = Some(self.element(rule));
                }
                _ => {
                    if !reported {
                        let span = self.span_here();
                        let msg = if root.is_some() {
                            format!("unexpected `{}` after the root element", self.peek().unwrap().lexeme())
                        } else {
                            format!("expected `{}`, found `{}`", keyword_of(g.rule(root_class)), self.peek().unwrap().lexeme())
                        };
                        self.error(msg, span);
                        reported = true;
                    }
                    self.skip_unit();
                }
            }
        }
        if root.is_none() && !reported {
            let msg = format!("empty document: expected `{}`", keyword_of(g.rule(root_class)));
            self.error(msg, self.eof);
        }
        ParsedModel { root, diagnostics: self.diags, layout: self.layout }
    }

    /// Skips one token, or a whole brace-balanced block starting here.
    fn skip_unit(&mut self) {
        if self.at_punct('{') {
            self.skip_block();
        } else {
            self.pos += 1;
        }
    }

    fn skip_block(&mut self) {
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            if t.is_punct('{') {
                depth += 1;
            } else if t.is_punct('}') {
                depth -= 1;
                if depth == 0 {
                    self.pos += 1;
                    return;
                }
            }
            self.pos += 1;
        }
    }

    /// Skips an element written with `rule`'s keyword: keyword, name, body.
    fn skip_element(&mut self, rule: &ProductionRule) {
        self.pos += 1;
        if rule.name_inline {
            self.value(PrimitiveKind::Identifier);
        }
        if self.at_punct('{') {
            self.skip_block();
        }
    }

    /// Parses an element whose keyword is under the cursor.
    fn element(&mut self, rule: &'a ProductionRule) -> ModelElement {
        let kw = self.peek().unwrap().clone();
        self.pos += 1;
        let id = ElementId(self.next_id);
        self.next_id += 1;
        let mut el = ModelElement::new(id, &rule.class_name);
        let mut header_end = kw.span.end;

        if rule.name_inline {
            match self.value(PrimitiveKind::Identifier) {
                Some(t) => {
                    header_end = t.span.end;
                    el.short_name = Some(t.lexeme());
                }
                None => {
                    let span = self.span_here();
                    self.error(format!("expected Identifier after keyword `{}`", rule.keyword), span);
                }
            }
        }
        el.origin = Origin(Some(Span::new(kw.span.start, header_end)));
        let slot = self.layout.elements.len();
        self.layout.elements.push(ElementLayout {
            id,
            keyword_start: kw.span.start.offset,
            header_end: header_end.offset,
            body_open: None,
            body_close: None,
        });

        if self.at_punct('{') {
            let open = self.peek().unwrap().span;
            self.layout.elements[slot].body_open = Some(open.start.offset);
            self.pos += 1;
            let close = self.body(rule, &mut el, open);
            self.layout.elements[slot].body_close = close;
        } else if !rule.body_optional {
            let span = self.span_here();
            self.error(format!("expected `{{` to open the body of `{}`", rule.keyword), span);
        }

        for entry in rule.entries.iter().filter(|e| !e.optional) {
            if !el.has_member(&entry.member) {
                self.error(
                    format!("missing mandatory member `{}` in `{}`", entry.member, rule.class_name),
                    Span::new(kw.span.start, header_end),
                );
            }
        }
        el.sort_members(self.syn.mm);
        el
    }

    /// Parses body statements up to the closing brace; returns its offset.
    fn body(&mut self, rule: &'a ProductionRule, el: &mut ModelElement, open: Span) -> Option<usize> {
        loop {
            let Some(tok) = self.peek().cloned() else {
                self.error(format!("unclosed `{{` of `{}`", rule.keyword), open);
                return None;
            };
            match &tok.kind {
                TokenKind::Punct('}') => {
                    self.pos += 1;
                    return Some(tok.span.start.offset);
                }
                TokenKind::Punct(c) => {
                    self.error(format!("unexpected `{c}`"), tok.span);
                    self.skip_unit();
                }
                TokenKind::Keyword(k) => {
                    if let Some(entry) = rule.entries.iter().find(|e| e.keyword() == Some(k.as_str())) {
                        self.member_statement(rule, entry, el);
                    } else if let Some(child_rule) = self.syn.rule_for_keyword(k) {
                        self.inline_child(rule, child_rule, el);
                    } else {
                        self.unknown(rule, &tok);
                    }
                }
                TokenKind::TerminalValue(_, lexeme) => match rule.positional_attribute() {
                    Some(entry) if self.accepts(entry, lexeme) => self.member_statement(rule, entry, el),
                    _ => self.unknown(rule, &tok),
                },
            }
        }
    }

    fn accepts(&self, entry: &MemberEntry, lexeme: &str) -> bool {
        match (&entry.form, &self.peek().map(|t| &t.kind)) {
            (EntryForm::Attribute { kind, .. }, Some(TokenKind::TerminalValue(k, _))) => {
                k == kind || self.syn.lexer.accepts(*kind, lexeme)
            }
            _ => false,
        }
    }

    fn unknown(&mut self, rule: &ProductionRule, tok: &Token) {
        let mut expected: Vec<String> = Vec::new();
        for e in &rule.entries {
            match (&e.form, e.keyword()) {
                (_, Some(k)) => expected.push(k.to_string()),
                (EntryForm::Inline { target }, None) => {
                    expected.extend(self.syn.class_keywords(target).into_iter().map(str::to_string))
                }
                (EntryForm::Attribute { kind, .. }, None) => expected.push(format!("<{}>", kind.name())),
                _ => {}
            }
        }
        expected.dedup();
        expected.push("}".into());
        self.error(
            format!(
                "unknown keyword `{}` in `{}`; expected one of: {}",
                tok.lexeme(),
                rule.class_name,
                expected.join(", ")
            ),
            tok.span,
        );
        self.pos += 1;
        if self.at_punct('{') {
            self.skip_block();
        } else if self.toks.get(self.pos + 1).is_some_and(|t| t.is_punct('{'))
            && matches!(self.peek().map(|t| &t.kind), Some(TokenKind::TerminalValue(..)))
        {
            self.pos += 1;
            self.skip_block();
        }
    }

    fn inline_child(&mut self, rule: &'a ProductionRule, child_rule: &'a ProductionRule, el: &mut ModelElement) {
        let span = self.span_here();
        let fitting: Vec<&MemberEntry> = rule
            .entries
            .iter()
            .filter(|e| matches!(&e.form, EntryForm::Inline { target } if self.syn.is_subtype(&child_rule.class_name, target)))
            .collect();
        let Some(entry) = fitting.first().copied() else {
            self.error(
                format!("`{}` cannot be contained in `{}`", child_rule.class_name, rule.class_name),
                span,
            );
            self.skip_element(child_rule);
            return;
        };
        if fitting.len() > 1 {
            self.diags.push(Diagnostic::warning(
                format!(
                    "`{}` fits several containments of `{}`; assigned to `{}`",
                    child_rule.class_name, rule.class_name, entry.member
                ),
                Some(span),
            ));
        }
        if !entry.repeatable && el.has_member(&entry.member) {
            self.error(format!("duplicate member `{}`", entry.member), span);
            self.skip_element(child_rule);
            return;
        }
        let child = self.element(child_rule);
        el.children.push((entry.member.clone(), child));
    }

    fn member_statement(&mut self, rule: &'a ProductionRule, entry: &'a MemberEntry, el: &mut ModelElement) {
        let start = self.span_here();
        let duplicate = !entry.repeatable && el.has_member(&entry.member);
        if entry.keyword().is_some() {
            self.pos += 1;
        }
        match &entry.form {
            EntryForm::Attribute { kind, .. } => {
                let Some(t) = self.value(*kind) else {
                    let span = self.span_here();
                    self.error(format!("expected {} value for `{}`", kind.name(), entry.member), span);
                    return;
                };
                self.layout.statements.push((start.start.offset, t.span.end.offset));
                let mut lexeme = t.lexeme();
                if *kind == PrimitiveKind::String {
                    self.layout.strings.push((t.span.start.offset, t.span.end.offset));
                    lexeme = unquote(&lexeme).to_string();
                }
                if duplicate {
                    self.error(format!("duplicate member `{}`", entry.member), start);
                } else if entry.member == SHORT_NAME && *kind == PrimitiveKind::Identifier {
                    el.short_name = Some(lexeme);
                } else {
                    el.attributes.push((entry.member.clone(), lexeme));
                }
            }
            EntryForm::CrossRef { .. } => {
                let Some(first) = self.value(PrimitiveKind::Identifier) else {
                    let span = self.span_here();
                    self.error(format!("expected qualified name for `{}`", entry.member), span);
                    return;
                };
                let mut segments = vec![first.lexeme()];
                let mut end = first.span.end;
                while self.at_punct('.') {
                    self.pos += 1;
                    match self.value(PrimitiveKind::Identifier) {
                        Some(t) => {
                            segments.push(t.lexeme());
                            end = t.span.end;
                        }
                        None => {
                            let span = self.span_here();
                            self.error("expected Identifier after `.`", span);
                            break;
                        }
                    }
                }
                self.layout.statements.push((start.start.offset, end.offset));
                if duplicate {
                    self.error(format!("duplicate member `{}`", entry.member), start);
                    return;
                }
                el.cross_refs.push(CrossRef {
                    member: entry.member.clone(),
                    target: QualifiedName::new(segments).expect("segments are non-empty"),
                    resolved: None,
                    origin: Origin(Some(Span::new(start.start, end))),
                });
            }
            EntryForm::Wrapped { braces, comma_separated, target, .. } => {
                if duplicate {
                    self.error(format!("duplicate member `{}`", entry.member), start);
                }
                self.wrapped(rule, entry, el, *braces, *comma_separated, target, duplicate);
            }
            EntryForm::Inline { .. } => unreachable!("inline entries have no keyword"),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn wrapped(
        &mut self,
        rule: &'a ProductionRule,
        entry: &'a MemberEntry,
        el: &mut ModelElement,
        braces: bool,
        comma: bool,
        target: &str,
        discard: bool,
    ) {
        let mut wrapper = None;
        if braces {
            if !self.at_punct('{') {
                let span = self.span_here();
                self.error(format!("expected `{{` after `{}`", entry.member), span);
                return;
            }
            let open = self.peek().unwrap().span;
            wrapper = Some(self.layout.wrappers.len());
            self.layout.wrappers.push(WrapperLayout {
                owner: el.id,
                member: entry.member.clone(),
                open: open.start.offset,
                close: None,
            });
            self.pos += 1;
        }
        let mut count = 0;
        loop {
            if braces && self.at_punct('}') {
                let close = self.peek().unwrap().span.start.offset;
                self.layout.wrappers[wrapper.unwrap()].close = Some(close);
                self.pos += 1;
                break;
            }
            if count > 0 && comma {
                if self.at_punct(',') {
                    self.pos += 1;
                } else if braces {
                    let span = self.span_here();
                    self.error("expected `,` or `}`", span);
                } else {
                    break;
                }
            }
            let Some(tok) = self.peek().cloned() else {
                if braces {
                    self.error(format!("unclosed `{{` of `{}`", entry.member), self.eof);
                }
                break;
            };
            let child_rule = self.class_rule_here().filter(|r| self.syn.is_subtype(&r.class_name, target));
            match child_rule {
                Some(child_rule) => {
                    if count > 0 && !entry.repeatable {
                        self.error(format!("`{}` holds a single element", entry.member), tok.span);
                        self.skip_element(child_rule);
                    } else {
                        let child = self.element(child_rule);
                        if !discard {
                            el.children.push((entry.member.clone(), child));
                        }
                    }
                    count += 1;
                }
                None if !braces => {
                    if count == 0 {
                        self.error(format!("expected `{target}` element after `{}`", entry.member), tok.span);
                    }
                    break;
                }
                None => {
                    self.error(
                        format!("`{}` cannot be contained in `{}.{}`", tok.lexeme(), rule.class_name, entry.member),
                        tok.span,
                    );
                    match self.syn.rule_for_keyword(&tok.lexeme()) {
                        Some(r) if matches!(tok.kind, TokenKind::Keyword(_)) => self.skip_element(r),
                        _ => self.skip_unit(),
                    }
                    count += 1;
                }
            }
            if !entry.repeatable && !braces {
                break;
            }
        }
    }
}

fn keyword_of(rule: Option<&ProductionRule>) -> String {
    rule.map_or_else(String::new, |r| r.keyword.clone())
}
