//! Lexing, parsing and canonical printing of textual models against an
//! adapted grammar.

mod format;
mod lexer;
mod parser;

use std::collections::{HashMap, HashSet};

use crate::diagnostic::{LineIndex, Span};
use crate::grammar::{Grammar, ProductionRule};
use crate::metamodel::Metamodel;
use crate::model::ModelElement;

pub use format::{format_model, FormatError};
pub use lexer::{lex, promote_keywords, LexConfigError, Lexer, Token, TokenKind};
pub use parser::{ElementLayout, Layout, ParsedModel, WrapperLayout};

/// A grammar and metamodel prepared for repeated parsing.
#[derive(Debug)]
pub struct Syntax<'a> {
    pub(crate) grammar: &'a Grammar,
    pub(crate) mm: &'a Metamodel,
    pub(crate) lexer: Lexer,
    keywords: HashSet<String>,
    class_rules: HashMap<String, &'a ProductionRule>,
}

impl<'a> Syntax<'a> {
    pub fn new(grammar: &'a Grammar, mm: &'a Metamodel) -> Result<Self, LexConfigError> {
        let lexer = Lexer::new(&grammar.terminals)?;
        let mut keywords = HashSet::new();
        let mut class_rules = HashMap::new();
        for rule in grammar.rules.values() {
            keywords.insert(rule.keyword.clone());
            class_rules.insert(rule.keyword.clone(), rule);
            keywords.extend(rule.entries.iter().filter_map(|e| e.keyword()).map(str::to_string));
        }
        Ok(Syntax { grammar, mm, lexer, keywords, class_rules })
    }

    pub fn grammar(&self) -> &'a Grammar {
        self.grammar
    }

    pub fn metamodel(&self) -> &'a Metamodel {
        self.mm
    }

    pub fn lexer(&self) -> &Lexer {
        &self.lexer
    }

    /// Keywords are reserved: they never lex as identifier values.
    pub fn is_keyword(&self, word: &str) -> bool {
        self.keywords.contains(word)
    }

    pub fn rule_for_keyword(&self, keyword: &str) -> Option<&'a ProductionRule> {
        self.class_rules.get(keyword).copied()
    }

    pub(crate) fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        self.mm.is_subtype(sub, sup).unwrap_or(false)
    }

    /// Keywords of rules whose class fits `target`, alphabetically.
    pub fn class_keywords(&self, target: &str) -> Vec<&'a str> {
        let mut out: Vec<&'a str> = self
            .grammar
            .rules
            .values()
            .filter(|r| self.is_subtype(&r.class_name, target))
            .map(|r| r.keyword.as_str())
            .collect();
        out.sort_unstable();
        out
    }

    pub fn parse(&self, text: &str) -> ParsedModel {
        let (mut tokens, diagnostics) = self.lexer.lex(text);
        promote_keywords(&mut tokens, |w| self.is_keyword(w));
        let end = LineIndex::new(text).position(text.len());
        parser::Parser::new(self, tokens, Span::new(end, end), diagnostics).document()
    }

    pub fn format(&self, m: &ModelElement) -> Result<String, FormatError> {
        format_model(m, self.grammar)
    }
}

/// Parses a model file. Fails only when the grammar's terminals are
/// incomplete; syntax problems are reported as diagnostics.
pub fn parse_model(text: &str, g: &Grammar, mm: &Metamodel) -> Result<ParsedModel, LexConfigError> {
    Ok(Syntax::new(g, mm)?.parse(text))
}

/// Inner text of a string literal lexeme.
pub(crate) fn unquote(lexeme: &str) -> &str {
    lexeme
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(lexeme)
}

/// Decodes the escapes of a string literal's inner text.
pub fn unescape_string(inner: &str) -> String {
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('t') => out.push('\t'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

/// Inverse of [`unescape_string`] producing the canonical escapes.
pub fn escape_string(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostic::has_errors;
    use crate::grammar::{adapt_grammar, generate_grammar, parse_config};
    use crate::metamodel::load_metamodel;

    fn setup(cfg: &str) -> (Grammar, Metamodel) {
        let mm = load_metamodel(crate::MINI_EASTADL).unwrap();
        let g = generate_grammar(&mm).unwrap();
        let (g, _) = adapt_grammar(&g, &parse_config(cfg).unwrap()).unwrap();
        (g, mm)
    }

    fn default_setup() -> (Grammar, Metamodel) {
        setup(crate::DEFAULT_CONFIG)
    }

    const WIPER: &str = "EAPackage CoreFcnHw
{
    EAPackage Datatypes
    {
        EABoolean Boolean
    }
    DesignFunctionType WiperCtrlBasic
    {
        isElementary true
        FunctionFlowPort bWiperParkStatus
        {
            direction in
            type CoreFcnHw.Datatypes.Boolean
        }
    }
}
";

    #[test]
    fn parses_wiper_excerpt() {
        let (g, mm) = default_setup();
        let parsed = parse_model(WIPER, &g, &mm).unwrap();
        assert!(parsed.diagnostics.is_empty(), "{:?}", parsed.diagnostics);
        let root = parsed.root.unwrap();
        let f = root.children_of("element").next().unwrap();
        assert_eq!(f.class_name, "DesignFunctionType");
        assert_eq!(f.attribute("isElementary"), Some("true"));
        let port = f.children_of("port").next().unwrap();
        assert_eq!(port.cross_ref("type").unwrap().target.to_string(), "CoreFcnHw.Datatypes.Boolean");
        let ids: Vec<usize> = root.iter().map(|e| e.id.0).collect();
        assert_eq!(ids, [0, 1, 2, 3, 4]);
        assert_eq!(format_model(&root, &g).unwrap(), WIPER);
    }

    #[test]
    fn bodyless_package_and_hoisted_name() {
        let (g, mm) = default_setup();
        let parsed = parse_model("EAPackage DesignPkg", &g, &mm).unwrap();
        assert!(parsed.diagnostics.is_empty());
        let root = parsed.root.unwrap();
        assert_eq!(root.short_name.as_deref(), Some("DesignPkg"));
        assert_eq!(format_model(&root, &g).unwrap(), "EAPackage DesignPkg\n");

        let parsed = parse_model("EAPackage { }", &g, &mm).unwrap();
        assert!(parsed.diagnostics[0].message.contains("expected Identifier after keyword"));
    }

    #[test]
    fn generated_grammar_accepts_wrapped_form() {
        let (g, mm) = setup("define-terminal *");
        let text = "EAPackage
{
    shortName P
    element
    {
        EABoolean
        {
            shortName B
        },
        EAString
        {
            shortName S
            name \"s\"
        }
    }
}
";
        let parsed = parse_model(text, &g, &mm).unwrap();
        assert!(parsed.diagnostics.is_empty(), "{:?}", parsed.diagnostics);
        let root = parsed.root.unwrap();
        assert_eq!(root.children.len(), 2);
        assert_eq!(root.children[1].1.attribute("name"), Some("s"));
        assert_eq!(format_model(&root, &g).unwrap(), text);
        assert_eq!(parsed.layout.wrappers.len(), 1);
    }

    #[test]
    fn error_reporting() {
        let (g, mm) = default_setup();
        let diags = |t: &str| parse_model(t, &g, &mm).unwrap().diagnostics;

        let d = diags("EAPackage P { frobnicate }");
        assert!(d[0].message.contains("unknown keyword `frobnicate`") && d[0].message.contains("EAPackage"));
        assert!(d[0].span.is_some());

        let d = diags("EAPackage P { FunctionFlowPort q { direction in } }");
        assert_eq!(d.len(), 1, "{d:?}");
        assert!(d[0].message.contains("cannot be contained in `EAPackage`"));

        let d = diags("EAPackage P { DesignFunctionType F { FunctionFlowPort q { direction in } } }");
        assert!(d.iter().any(|d| d.message.contains("missing mandatory member `type`")));

        let d = diags("EAPackage P { category a category b }");
        assert!(d[0].message.contains("duplicate member `category`"));

        let d = diags("EAPackage P { EAPackage Q {");
        assert!(d.iter().all(|d| d.message.contains("unclosed")) && d.len() == 2);

        assert!(diags("")[0].message.contains("empty document"));
        assert!(has_errors(&diags("EAPackage P EAPackage Q")));
    }

    #[test]
    fn skipped_subtree_leaves_no_trace() {
        let (g, mm) = default_setup();
        let parsed =
            parse_model("EAPackage P { FunctionFlowPort q { direction in } EAString S }", &g, &mm).unwrap();
        let root = parsed.root.unwrap();
        assert_eq!(root.children.len(), 1);
        assert_eq!(root.children[0].1.id.0, 1);
    }

    #[test]
    fn empty_string_attributes_are_not_printed() {
        let (g, mm) = default_setup();
        let root = parse_model("EAPackage P { name \"\" category c }", &g, &mm).unwrap().root.unwrap();
        assert_eq!(root.attribute("name"), Some(""));
        assert_eq!(format_model(&root, &g).unwrap(), "EAPackage P\n{\n    category c\n}\n");
    }

    #[test]
    fn lexemes_are_kept_verbatim() {
        let (g, mm) = default_setup();
        let text = "EAPackage P\n{\n    EANumerical N\n    {\n        min 0b101\n        max -3.5e2\n    }\n}\n";
        let root = parse_model(text, &g, &mm).unwrap().root.unwrap();
        assert_eq!(format_model(&root, &g).unwrap(), text);
    }

    #[test]
    fn string_escapes_roundtrip() {
        for raw in ["plain", "a\"b", "back\\slash", "two\nlines\ttab"] {
            assert_eq!(unescape_string(&escape_string(raw)), raw);
        }
    }

    #[test]
    fn formatting_requires_rules() {
        let (g, _) = default_setup();
        let e = ModelElement::new(crate::model::ElementId(0), "EAElement");
        assert_eq!(format_model(&e, &g), Err(FormatError::NoRule("EAElement".into())));
    }
}
