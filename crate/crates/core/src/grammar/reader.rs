//! Reads grammar text produced by [`emit_grammar`](super::emit_grammar)
//! back into the IR. Only the shapes the emitter produces are accepted.

use indexmap::IndexMap;

use super::{EntryForm, Grammar, GrammarError, MemberEntry, ProductionRule, TerminalRule};
use crate::diagnostic::LineIndex;
use crate::metamodel::{PrimitiveKind, SHORT_NAME};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    /// Single- or double-quoted literal.
    Quoted(String),
    Regex(String),
    Sym(&'static str),
}

struct Lexed {
    toks: Vec<(Tok, usize)>,
}

fn tokenize(text: &str) -> Result<Lexed, (usize, String)> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if text[i..].starts_with("//") {
            i = text[i..].find('\n').map_or(bytes.len(), |n| i + n);
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            toks.push((Tok::Ident(text[start..i].to_string()), start));
        } else if c == b'\'' || c == b'"' {
            let start = i;
            let end = text[i + 1..].find(c as char).ok_or((i, "unterminated literal".to_string()))?;
            toks.push((Tok::Quoted(text[i + 1..i + 1 + end].to_string()), start));
            i += end + 2;
        } else if c == b'/' {
            let start = i;
            i += 1;
            let mut pat = String::new();
            loop {
                match bytes.get(i) {
                    None | Some(b'\n') => return Err((start, "unterminated pattern".into())),
                    Some(b'\\') if bytes.get(i + 1) == Some(&b'/') => {
                        pat.push('/');
                        i += 2;
                    }
                    Some(b'/') => {
                        i += 1;
                        break;
                    }
                    Some(_) => {
                        let ch = text[i..].chars().next().unwrap();
                        pat.push(ch);
                        i += ch.len_utf8();
                    }
                }
            }
            toks.push((Tok::Regex(pat), start));
        } else if text[i..].starts_with("+=") {
            toks.push((Tok::Sym("+="), i));
            i += 2;
        } else {
            let sym = match c {
                b'=' => "=",
                b'(' => "(",
                b')' => ")",
                b'?' => "?",
                b'*' => "*",
                b'+' => "+",
                b'[' => "[",
                b']' => "]",
                b'|' => "|",
                b':' => ":",
                b';' => ";",
                _ => return Err((i, format!("unexpected character `{}`", text[i..].chars().next().unwrap()))),
            };
            toks.push((Tok::Sym(sym), i));
            i += 1;
        }
    }
    Ok(Lexed { toks })
}

struct Reader<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    index: LineIndex<'a>,
    end: usize,
}

type R<T> = Result<T, GrammarError>;

impl<'a> Reader<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, n: usize) -> Option<&Tok> {
        self.toks.get(self.pos + n).map(|(t, _)| t)
    }

    fn fail<T>(&self, message: impl Into<String>) -> R<T> {
        let offset = self.toks.get(self.pos).map_or(self.end, |(_, o)| *o);
        let p = self.index.position(offset);
        Err(GrammarError::Syntax { line: p.line, column: p.column, message: message.into() })
    }

    fn next(&mut self) -> R<Tok> {
        match self.toks.get(self.pos) {
            Some((t, _)) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => self.fail("unexpected end of grammar text"),
        }
    }

    fn sym(&mut self, s: &str) -> R<()> {
        match self.peek() {
            Some(Tok::Sym(x)) if *x == s => {
                self.pos += 1;
                Ok(())
            }
            other => self.fail(format!("expected `{s}`, found {other:?}")),
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(x)) if *x == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> R<String> {
        match self.next()? {
            Tok::Ident(s) => Ok(s),
            other => {
                self.pos -= 1;
                self.fail(format!("expected identifier, found {other:?}"))
            }
        }
    }

    fn quoted(&mut self, expected: Option<&str>) -> R<String> {
        match self.next()? {
            Tok::Quoted(s) if expected.is_none_or(|e| e == s) => Ok(s),
            other => {
                self.pos -= 1;
                self.fail(format!("expected {}, found {other:?}", expected.map_or("keyword".into(), |e| format!("'{e}'"))))
            }
        }
    }

    fn at_quoted(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Quoted(q)) if q == s)
    }

    fn at_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(q)) if q == s)
    }

    /// `member=Value` or `member+=Value`; returns (member, repeatable).
    fn assignment(&mut self) -> R<(String, bool)> {
        let member = self.ident()?;
        let many = if self.eat_sym("+=") {
            true
        } else {
            self.sym("=")?;
            false
        };
        Ok((member, many))
    }

    fn rule(&mut self) -> R<ProductionRule> {
        let class_name = self.ident()?;
        if !self.at_ident("returns") {
            return self.fail("expected `returns`");
        }
        self.pos += 1;
        let returned = self.ident()?;
        if returned != class_name {
            return self.fail(format!("rule `{class_name}` returns `{returned}`"));
        }
        self.sym(":")?;
        let keyword = self.quoted(None)?;
        let mut name_inline = false;
        if matches!(self.peek(), Some(Tok::Ident(_))) {
            let (member, many) = self.assignment()?;
            let kind = self.ident()?;
            if member != SHORT_NAME || many || kind != PrimitiveKind::Identifier.rule_name() {
                return self.fail("only `shortName=Identifier` may follow the rule keyword");
            }
            name_inline = true;
        }
        let body_optional = self.eat_sym("(");
        self.quoted(Some("{"))?;
        let mut entries = Vec::new();
        while !self.at_quoted("}") {
            entries.push(self.entry()?);
        }
        self.quoted(Some("}"))?;
        if body_optional {
            self.sym(")")?;
            self.sym("?")?;
        }
        self.sym(";")?;
        Ok(ProductionRule { class_name, keyword, name_inline, body_optional, entries })
    }

    fn entry(&mut self) -> R<MemberEntry> {
        if self.eat_sym("(") {
            let mut entry = self.entry_core()?;
            self.sym(")")?;
            let wrapped = matches!(entry.form, EntryForm::Wrapped { .. });
            match self.next()? {
                Tok::Sym("?") => entry.optional = true,
                Tok::Sym("*") if !wrapped => {
                    entry.optional = true;
                    entry.repeatable = true;
                }
                Tok::Sym("+") if !wrapped => entry.repeatable = true,
                other => {
                    self.pos -= 1;
                    return self.fail(format!("unexpected multiplicity {other:?}"));
                }
            }
            Ok(entry)
        } else {
            self.entry_core()
        }
    }

    fn entry_core(&mut self) -> R<MemberEntry> {
        let keyword = match self.peek() {
            Some(Tok::Quoted(_)) => Some(self.quoted(None)?),
            _ => None,
        };
        if let Some(k) = &keyword {
            if self.at_quoted("{") || self.eat_sym("(") {
                return self.wrapped(k.clone());
            }
        }
        let (member, repeatable) = self.assignment()?;
        let form = if self.eat_sym("[") {
            let target = self.ident()?;
            self.sym("|")?;
            if !self.at_ident("QualifiedName") {
                return self.fail("expected `QualifiedName`");
            }
            self.pos += 1;
            self.sym("]")?;
            let Some(keyword) = keyword else {
                return self.fail("cross-reference without keyword");
            };
            EntryForm::CrossRef { keyword, target }
        } else {
            let value = self.ident()?;
            match (PrimitiveKind::from_rule_name(&value), keyword) {
                (Some(kind), keyword) => EntryForm::Attribute { keyword, kind },
                (None, None) => EntryForm::Inline { target: value },
                (None, Some(keyword)) => {
                    // `'kw' member+=T ( "," member+=T)*` without braces.
                    if repeatable {
                        self.comma_tail(&member, &value)?;
                    }
                    EntryForm::Wrapped { keyword, braces: false, comma_separated: repeatable, target: value }
                }
            }
        };
        Ok(MemberEntry { member, form, optional: false, repeatable })
    }

    fn comma_tail(&mut self, member: &str, target: &str) -> R<()> {
        self.sym("(")?;
        self.quoted(Some(","))?;
        let (m, many) = self.assignment()?;
        let t = self.ident()?;
        if m != member || !many || t != target {
            return self.fail("inconsistent comma-separated list");
        }
        self.sym(")")?;
        self.sym("*")
    }

    /// After `'kw'`, with the reader at `'{'` or just past a `(`.
    fn wrapped(&mut self, keyword: String) -> R<MemberEntry> {
        // A `(` right after the keyword means `(m+=T)+` without braces.
        if self.toks[self.pos - 1].0 == Tok::Sym("(") {
            let (member, _) = self.assignment()?;
            let target = self.ident()?;
            self.sym(")")?;
            self.sym("+")?;
            return Ok(MemberEntry {
                member,
                form: EntryForm::Wrapped { keyword, braces: false, comma_separated: false, target },
                optional: false,
                repeatable: true,
            });
        }
        self.quoted(Some("{"))?;
        let (member, target, repeatable, comma_separated) = if self.eat_sym("(") {
            let (member, _) = self.assignment()?;
            let target = self.ident()?;
            self.sym(")")?;
            self.sym("+")?;
            (member, target, true, false)
        } else {
            let (member, many) = self.assignment()?;
            let target = self.ident()?;
            if many {
                self.comma_tail(&member, &target)?;
            }
            (member, target, many, many)
        };
        self.quoted(Some("}"))?;
        Ok(MemberEntry {
            member,
            form: EntryForm::Wrapped { keyword, braces: true, comma_separated, target },
            optional: false,
            repeatable,
        })
    }

    fn terminal(&mut self) -> R<TerminalRule> {
        self.pos += 1;
        let name = self.ident()?;
        let Some(kind) = PrimitiveKind::from_rule_name(&name) else {
            return self.fail(format!("unknown terminal `{name}`"));
        };
        self.sym(":")?;
        let pattern = match self.next()? {
            Tok::Regex(p) => p,
            other => {
                self.pos -= 1;
                return self.fail(format!("expected /pattern/, found {other:?}"));
            }
        };
        self.sym(";")?;
        Ok(TerminalRule { kind, pattern })
    }
}

/// Parses emitted grammar text. The first rule is the root rule.
pub fn read_grammar(text: &str) -> Result<Grammar, GrammarError> {
    let index = LineIndex::new(text);
    let lexed = tokenize(text).map_err(|(offset, message)| {
        let p = index.position(offset);
        GrammarError::Syntax { line: p.line, column: p.column, message }
    })?;
    let mut r = Reader { toks: lexed.toks, pos: 0, index, end: text.len() };
    let mut rules = IndexMap::new();
    let mut terminals = Vec::new();
    while r.peek().is_some() {
        if r.at_ident("terminal") && matches!(r.peek_at(1), Some(Tok::Ident(_))) {
            terminals.push(r.terminal()?);
        } else {
            let rule = r.rule()?;
            if rules.contains_key(&rule.class_name) {
                return r.fail(format!("duplicate rule `{}`", rule.class_name));
            }
            rules.insert(rule.class_name.clone(), rule);
        }
    }
    let root_rule = rules.keys().next().cloned().unwrap_or_default();
    Ok(Grammar { rules, terminals, root_rule })
}
