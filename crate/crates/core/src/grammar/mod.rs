//! Grammar IR, generation from a metamodel, adaptation and text emission.

mod adapt;
mod config;
mod emit;
mod reader;

use indexmap::IndexMap;
use thiserror::Error;

use crate::metamodel::{MemberKind, Metamodel, MetamodelError, PrimitiveKind};

pub use adapt::{adapt_grammar, AdaptationReport, DirectiveOutcome};
pub use config::{parse_config, AdaptationConfig, AdaptationDirective, ConfigError, Glob};
pub use emit::emit_grammar;
pub use reader::read_grammar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerminalRule {
    pub kind: PrimitiveKind,
    pub pattern: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EntryForm {
    /// `'kw' member=Kind`; without a keyword the value is positional.
    Attribute { keyword: Option<String>, kind: PrimitiveKind },
    /// `'kw' member=[Target|QualifiedName]`
    CrossRef { keyword: String, target: String },
    /// `'kw' '{' member+=Target ("," member+=Target)* '}'`
    Wrapped { keyword: String, braces: bool, comma_separated: bool, target: String },
    /// Children written directly in the container body.
    Inline { target: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MemberEntry {
    pub member: String,
    pub form: EntryForm,
    pub optional: bool,
    pub repeatable: bool,
}

impl MemberEntry {
    pub fn keyword(&self) -> Option<&str> {
        match &self.form {
            EntryForm::Attribute { keyword, .. } => keyword.as_deref(),
            EntryForm::CrossRef { keyword, .. } | EntryForm::Wrapped { keyword, .. } => Some(keyword),
            EntryForm::Inline { .. } => None,
        }
    }

    /// Target class of containment entries.
    pub fn containment_target(&self) -> Option<&str> {
        match &self.form {
            EntryForm::Wrapped { target, .. } | EntryForm::Inline { target } => Some(target),
            _ => None,
        }
    }

    pub fn is_inline(&self) -> bool {
        matches!(self.form, EntryForm::Inline { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductionRule {
    pub class_name: String,
    pub keyword: String,
    /// Name written right after the keyword instead of as a `shortName` member.
    pub name_inline: bool,
    /// The braced body may be left out entirely.
    pub body_optional: bool,
    pub entries: Vec<MemberEntry>,
}

impl ProductionRule {
    pub fn entry(&self, member: &str) -> Option<&MemberEntry> {
        self.entries.iter().find(|e| e.member == member)
    }

    pub fn entry_by_keyword(&self, keyword: &str) -> Option<&MemberEntry> {
        self.entries.iter().find(|e| e.keyword() == Some(keyword))
    }

    pub fn positional_attribute(&self) -> Option<&MemberEntry> {
        self.entries.iter().find(|e| {
            matches!(e.form, EntryForm::Attribute { keyword: None, .. })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Grammar {
    /// Rules keyed by class name; the root rule is emitted first.
    pub rules: IndexMap<String, ProductionRule>,
    pub terminals: Vec<TerminalRule>,
    pub root_rule: String,
}

impl Grammar {
    pub fn rule(&self, class: &str) -> Option<&ProductionRule> {
        self.rules.get(class)
    }

    pub fn terminal(&self, kind: PrimitiveKind) -> Option<&TerminalRule> {
        self.terminals.iter().find(|t| t.kind == kind)
    }

    /// Primitive kinds referenced by any rule, in canonical order.
    pub fn used_kinds(&self) -> Vec<PrimitiveKind> {
        PrimitiveKind::ALL
            .into_iter()
            .filter(|k| {
                self.rules.values().any(|r| {
                    r.name_inline && *k == PrimitiveKind::Identifier
                        || r.entries.iter().any(|e| {
                            matches!(e.form, EntryForm::Attribute { kind, .. } if kind == *k)
                        })
                })
            })
            .collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrammarError {
    #[error(transparent)]
    Metamodel(#[from] MetamodelError),
    #[error("cannot generate grammar: {0}")]
    Generation(String),
    #[error("adaptation rejected: {0}")]
    Adaptation(String),
    #[error("grammar text {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
}

/// Generates the default grammar: one rule per concrete class, every member
/// keyword-prefixed, containments wrapped in braces and comma-separated, no
/// terminal definitions.
pub fn generate_grammar(mm: &Metamodel) -> Result<Grammar, GrammarError> {
    let root = mm.class(mm.root_class())?;
    if root.is_abstract {
        return Err(GrammarError::Generation(format!("root class `{}` is abstract", root.name)));
    }

    let mut rules = IndexMap::new();
    let concrete = mm.classes().filter(|c| !c.is_abstract);
    let (roots, others): (Vec<_>, Vec<_>) = concrete.partition(|c| c.name == root.name);
    for class in roots.into_iter().chain(others) {
        if PrimitiveKind::from_rule_name(&class.name).is_some() {
            return Err(GrammarError::Generation(format!(
                "class `{}` collides with a primitive type name",
                class.name
            )));
        }
        let mut entries = Vec::new();
        for m in mm.flatten_members(&class.name)? {
            let form = match &m.kind {
                MemberKind::Attribute(kind) => {
                    EntryForm::Attribute { keyword: Some(m.name.clone()), kind: *kind }
                }
                MemberKind::CrossRef(target) => {
                    EntryForm::CrossRef { keyword: m.name.clone(), target: target.clone() }
                }
                MemberKind::Containment(target) => {
                    if mm.concrete_subtypes(target)?.is_empty() {
                        return Err(GrammarError::Generation(format!(
                            "{}.{} contains `{target}`, which has no concrete subclass",
                            class.name, m.name
                        )));
                    }
                    EntryForm::Wrapped {
                        keyword: m.name.clone(),
                        braces: true,
                        comma_separated: true,
                        target: target.clone(),
                    }
                }
            };
            entries.push(MemberEntry {
                member: m.name.clone(),
                form,
                optional: m.lower_bound == 0,
                repeatable: m.is_many(),
            });
        }
        rules.insert(
            class.name.clone(),
            ProductionRule {
                class_name: class.name.clone(),
                keyword: class.name.clone(),
                name_inline: false,
                body_optional: false,
                entries,
            },
        );
    }

    Ok(Grammar { rules, terminals: Vec::new(), root_rule: root.name.clone() })
}
