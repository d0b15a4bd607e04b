use regex::Regex;
use thiserror::Error;

use crate::diagnostic::{Diagnostic, LineIndex, Span};
use crate::grammar::TerminalRule;
use crate::metamodel::PrimitiveKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// Only produced by [`promote_keywords`]; the lexer emits identifiers.
    Keyword(String),
    TerminalValue(PrimitiveKind, String),
    Punct(char),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

impl Token {
    pub fn lexeme(&self) -> String {
        match &self.kind {
            TokenKind::Keyword(s) | TokenKind::TerminalValue(_, s) => s.clone(),
            TokenKind::Punct(c) => c.to_string(),
        }
    }

    pub fn is_punct(&self, c: char) -> bool {
        self.kind == TokenKind::Punct(c)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexConfigError {
    #[error("no terminal defined for {0}")]
    MissingTerminal(PrimitiveKind),
    #[error("terminal {kind}: {message}")]
    BadPattern { kind: PrimitiveKind, message: String },
}

/// Ties on match length go to the earlier kind.
const PRIORITY: [PrimitiveKind; 5] = [
    PrimitiveKind::Uuid,
    PrimitiveKind::Numerical,
    PrimitiveKind::Boolean,
    PrimitiveKind::Identifier,
    PrimitiveKind::String,
];

const PUNCT: [char; 4] = ['{', '}', ',', '.'];

/// Longest-match tokenizer compiled from a grammar's terminal rules.
#[derive(Debug, Clone)]
pub struct Lexer {
    /// Anchored at the start, in [`PRIORITY`] order.
    prefix: Vec<(PrimitiveKind, Regex)>,
    whole: Vec<(PrimitiveKind, Regex)>,
}

impl Lexer {
    pub fn new(terminals: &[TerminalRule]) -> Result<Self, LexConfigError> {
        let mut prefix = Vec::new();
        let mut whole = Vec::new();
        for kind in PRIORITY {
            let t = terminals
                .iter()
                .find(|t| t.kind == kind)
                .ok_or(LexConfigError::MissingTerminal(kind))?;
            let compile = |src: String| {
                Regex::new(&src).map_err(|e| LexConfigError::BadPattern { kind, message: e.to_string() })
            };
            prefix.push((kind, compile(format!("^(?:{})", t.pattern))?));
            whole.push((kind, compile(format!("^(?:{})$", t.pattern))?));
        }
        Ok(Lexer { prefix, whole })
    }

    /// Whether the whole lexeme matches the terminal pattern of `kind`.
    pub fn accepts(&self, kind: PrimitiveKind, lexeme: &str) -> bool {
        self.whole.iter().any(|(k, re)| *k == kind && re.is_match(lexeme))
    }

    pub fn lex(&self, text: &str) -> (Vec<Token>, Vec<Diagnostic>) {
        let index = LineIndex::new(text);
        let mut tokens = Vec::new();
        let mut diagnostics = Vec::new();
        let mut i = 0;
        while i < text.len() {
            let rest = &text[i..];
            let c = rest.chars().next().unwrap();
            if c.is_whitespace() {
                i += c.len_utf8();
                continue;
            }
            if rest.starts_with("//") {
                i += rest.find('\n').unwrap_or(rest.len());
                continue;
            }

            let mut best: Option<(PrimitiveKind, usize)> = None;
            for (kind, re) in &self.prefix {
                if let Some(m) = re.find(rest) {
                    if m.end() > best.map_or(0, |(_, len)| len) {
                        best = Some((*kind, m.end()));
                    }
                }
            }
            // A punctuation character only wins when no terminal matches
            // something longer; `.5` is not a number, `.` is.
            if PUNCT.contains(&c) && best.is_none_or(|(_, len)| len <= 1) {
                tokens.push(Token { kind: TokenKind::Punct(c), span: index.span(i, i + 1) });
                i += 1;
                continue;
            }
            match best {
                Some((kind, len)) => {
                    tokens.push(Token {
                        kind: TokenKind::TerminalValue(kind, rest[..len].to_string()),
                        span: index.span(i, i + len),
                    });
                    i += len;
                }
                None => {
                    let skip = rest.find(char::is_whitespace).unwrap_or(rest.len());
                    diagnostics.push(Diagnostic::error(
                        format!("unexpected character `{c}`"),
                        Some(index.span(i, i + c.len_utf8())),
                    ));
                    i += skip;
                }
            }
        }
        (tokens, diagnostics)
    }
}

/// Tokenizes `text` with the given terminals. Fails unless all five
/// primitive kinds have a terminal.
pub fn lex(text: &str, terminals: &[TerminalRule]) -> Result<(Vec<Token>, Vec<Diagnostic>), LexConfigError> {
    Ok(Lexer::new(terminals)?.lex(text))
}

/// Turns identifier tokens spelled like a grammar keyword into keywords.
pub fn promote_keywords(tokens: &mut [Token], is_keyword: impl Fn(&str) -> bool) {
    for t in tokens {
        if let TokenKind::TerminalValue(PrimitiveKind::Identifier, s) = &t.kind {
            if is_keyword(s) {
                t.kind = TokenKind::Keyword(s.clone());
            }
        }
    }
}
