use std::fmt::Write;

use super::{EntryForm, Grammar, MemberEntry, ProductionRule};
use crate::metamodel::{PrimitiveKind, SHORT_NAME};

/// Renders the grammar as text: the root rule first, then the remaining
/// rules in order, then terminal definitions. Kinds used by rules but not
/// defined get a placeholder comment.
pub fn emit_grammar(g: &Grammar) -> String {
    let mut blocks: Vec<String> = Vec::new();
    let root = g.rules.get(&g.root_rule);
    for rule in root.into_iter().chain(g.rules.values().filter(|r| r.class_name != g.root_rule)) {
        blocks.push(emit_rule(rule));
    }

    let mut terminals = String::new();
    for kind in g.used_kinds() {
        if g.terminal(kind).is_none() {
            writeln!(terminals, "// terminal {} is not defined", kind.rule_name()).unwrap();
        }
    }
    for t in &g.terminals {
        writeln!(terminals, "terminal {}: /{}/;", t.kind.rule_name(), t.pattern.replace('/', "\\/")).unwrap();
    }
    if !terminals.is_empty() {
        blocks.push(terminals);
    }
    blocks.join("\n")
}

fn emit_rule(rule: &ProductionRule) -> String {
    let mut out = String::new();
    writeln!(out, "{0} returns {0}:", rule.class_name).unwrap();
    write!(out, "    '{}'", rule.keyword).unwrap();
    if rule.name_inline {
        write!(out, " {SHORT_NAME}={}", PrimitiveKind::Identifier.rule_name()).unwrap();
    }
    out.push('\n');
    out.push_str(if rule.body_optional { "    ('{'\n" } else { "    '{'\n" });
    for entry in &rule.entries {
        writeln!(out, "        {}", emit_entry(entry)).unwrap();
    }
    out.push_str(if rule.body_optional { "    '}')?;\n" } else { "    '}';\n" });
    out
}

fn assign(entry: &MemberEntry, value: &str) -> String {
    let op = if entry.repeatable { "+=" } else { "=" };
    format!("{}{op}{value}", entry.member)
}

pub(super) fn emit_entry(entry: &MemberEntry) -> String {
    let core = match &entry.form {
        EntryForm::Attribute { keyword, kind } => {
            let value = assign(entry, kind.rule_name());
            match keyword {
                Some(k) => format!("'{k}' {value}"),
                None => value,
            }
        }
        EntryForm::CrossRef { keyword, target } => {
            format!("'{keyword}' {}", assign(entry, &format!("[{target}|QualifiedName]")))
        }
        EntryForm::Inline { target } => assign(entry, target),
        EntryForm::Wrapped { keyword, braces, comma_separated, target } => {
            let m = &entry.member;
            let inner = match (entry.repeatable, comma_separated) {
                (false, _) => format!("{m}={target}"),
                (true, true) => format!("{m}+={target} ( \",\" {m}+={target})*"),
                (true, false) => format!("({m}+={target})+"),
            };
            let body = if *braces { format!("'{{' {inner} '}}'") } else { inner };
            let text = format!("'{keyword}' {body}");
            return if entry.optional { format!("({text} )?") } else { text };
        }
    };
    match (entry.optional, entry.repeatable) {
        (false, false) => core,
        (true, false) => format!("({core})?"),
        (true, true) => format!("({core})*"),
        (false, true) => format!("({core})+"),
    }
}
