use std::fmt;

use super::{AdaptationConfig, AdaptationDirective, EntryForm, Grammar, GrammarError, TerminalRule};
use crate::metamodel::{PrimitiveKind, SHORT_NAME};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectiveOutcome {
    pub directive: AdaptationDirective,
    /// Rules, members or terminal kinds the directive applied to.
    pub matches: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AdaptationReport {
    pub outcomes: Vec<DirectiveOutcome>,
}

impl AdaptationReport {
    pub fn warnings(&self) -> Vec<String> {
        self.outcomes
            .iter()
            .filter(|o| o.matches == 0)
            .map(|o| format!("`{}` matched nothing", o.directive))
            .collect()
    }
}

impl fmt::Display for AdaptationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            writeln!(f, "applied: {} ({} match{})", o.directive, o.matches, if o.matches == 1 { "" } else { "es" })?;
        }
        for w in self.warnings() {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// Applies the directives in order and returns the rewritten grammar with a
/// per-directive match report. No directive touches a rule's own braces.
pub fn adapt_grammar(
    grammar: &Grammar,
    config: &AdaptationConfig,
) -> Result<(Grammar, AdaptationReport), GrammarError> {
    let mut g = grammar.clone();
    let mut report = AdaptationReport::default();
    for directive in &config.directives {
        let matches = apply(&mut g, directive);
        report.outcomes.push(DirectiveOutcome { directive: directive.clone(), matches });
    }
    for rule in g.rules.values() {
        let positional = rule
            .entries
            .iter()
            .filter(|e| matches!(e.form, EntryForm::Attribute { keyword: None, .. }))
            .count();
        if positional > 1 {
            return Err(GrammarError::Adaptation(format!(
                "rule `{}` would have {positional} positional attributes; at most one is allowed",
                rule.class_name
            )));
        }
    }
    Ok((g, report))
}

fn apply(g: &mut Grammar, directive: &AdaptationDirective) -> usize {
    match directive {
        AdaptationDirective::DefineTerminal { kinds, pattern } => {
            let mut count = 0;
            for kind in PrimitiveKind::ALL.into_iter().filter(|k| kinds.matches(k.name())) {
                let pattern = pattern.clone().unwrap_or_else(|| kind.default_pattern().to_string());
                match g.terminals.iter_mut().find(|t| t.kind == kind) {
                    Some(t) => t.pattern = pattern,
                    None => g.terminals.push(TerminalRule { kind, pattern }),
                }
                count += 1;
            }
            count
        }
        AdaptationDirective::HoistShortName { classes } => {
            let mut count = 0;
            for rule in g.rules.values_mut().filter(|r| classes.matches(&r.class_name)) {
                let slot = rule.entries.iter().position(|e| {
                    e.member == SHORT_NAME
                        && matches!(e.form, EntryForm::Attribute { kind: PrimitiveKind::Identifier, .. })
                });
                if let Some(i) = slot {
                    rule.entries.remove(i);
                    rule.name_inline = true;
                }
                if rule.name_inline {
                    count += 1;
                }
            }
            count
        }
        AdaptationDirective::UnfoldContainment { classes, members } => {
            let mut count = 0;
            for rule in g.rules.values_mut().filter(|r| classes.matches(&r.class_name)) {
                for entry in rule.entries.iter_mut().filter(|e| members.matches(&e.member)) {
                    match &entry.form {
                        EntryForm::Wrapped { target, .. } => {
                            entry.form = EntryForm::Inline { target: target.clone() };
                            count += 1;
                        }
                        EntryForm::Inline { .. } => count += 1,
                        _ => {}
                    }
                }
            }
            count
        }
        AdaptationDirective::OptionalBody { classes } => {
            let mut count = 0;
            for rule in g.rules.values_mut().filter(|r| classes.matches(&r.class_name)) {
                rule.body_optional = true;
                count += 1;
            }
            count
        }
        AdaptationDirective::RemoveAttributeKeyword { classes, members } => {
            let mut count = 0;
            for rule in g.rules.values_mut().filter(|r| classes.matches(&r.class_name)) {
                for entry in rule.entries.iter_mut().filter(|e| members.matches(&e.member)) {
                    if let EntryForm::Attribute { keyword, .. } = &mut entry.form {
                        *keyword = None;
                        count += 1;
                    }
                }
            }
            count
        }
    }
}
