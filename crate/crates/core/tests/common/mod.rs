//! Shared helpers for the integration tests: the bundled language, the
//! fixture corpus, random conforming models and brute-force oracles.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use blendtext::assist::{complete, AssistDocument, CursorContext, Proposal, ProposalKind, Scope};
use blendtext::grammar::{EntryForm, ProductionRule};
use blendtext::metamodel::{MemberKind, SHORT_NAME};
use blendtext::model::{CrossRef, Origin, ReferenceLookup};
use blendtext::textsyntax::{escape_string, Syntax};
use blendtext::{
    adapt_grammar, generate_grammar, load_metamodel, parse_config, ElementId, Grammar, Metamodel, ModelElement,
    PrimitiveKind, QualifiedName,
};
use proptest::prelude::*;
use proptest::sample::Index;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

pub struct Lang {
    pub mm: Metamodel,
    pub generated: Grammar,
    pub g: Grammar,
}

impl Lang {
    pub fn new() -> Self {
        let mm = load_metamodel(blendtext::MINI_EASTADL).unwrap();
        let generated = generate_grammar(&mm).unwrap();
        let cfg = parse_config(blendtext::DEFAULT_CONFIG).unwrap();
        let (g, _) = adapt_grammar(&generated, &cfg).unwrap();
        Lang { mm, generated, g }
    }

    pub fn syntax(&self) -> Syntax<'_> {
        Syntax::new(&self.g, &self.mm).unwrap()
    }
}

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn metamodel_path() -> PathBuf {
    crate_dir().join("assets/mini_eastadl.ecore")
}

pub fn fixture_dir() -> PathBuf {
    crate_dir().join("tests/fixtures/models")
}

pub fn golden(name: &str) -> String {
    fs::read_to_string(crate_dir().join("tests/golden").join(name)).unwrap()
}

/// `(file name, text)` of every fixture model, sorted by name.
pub fn fixtures() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "eatxt"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

pub fn keywords(g: &Grammar) -> HashSet<String> {
    let mut out = HashSet::new();
    for rule in g.rules.values() {
        out.insert(rule.keyword.clone());
        out.extend(rule.entries.iter().filter_map(|e| e.keyword()).map(str::to_string));
    }
    out
}

/// Draws `n` values from `strategy` with a fixed seed.
pub fn sample<S: Strategy>(strategy: &S, n: usize) -> Vec<S::Value> {
    let mut runner = TestRunner::deterministic();
    (0..n).map(|_| strategy.new_tree(&mut runner).unwrap().current()).collect()
}

// ---------------------------------------------------------------------------
// Random conforming models

/// One random node: where it attaches and a value of every terminal kind.
/// Members of the same kind draw from the pair by member position.
#[derive(Debug, Clone)]
pub struct NodePlan {
    parent: Index,
    slot: Index,
    name: String,
    present: [bool; 8],
    idents: [String; 2],
    texts: [String; 2],
    nums: [String; 2],
    flag: bool,
    uuid: String,
    qns: [Vec<String>; 2],
}

/// Compiled once; a bare `&str` strategy re-parses its pattern per draw.
fn pattern(re: &str) -> impl Strategy<Value = String> + Clone {
    Arc::new(proptest::string::string_regex(re).unwrap())
}

pub fn identifier(reserved: HashSet<String>) -> impl Strategy<Value = String> + Clone {
    pattern("[A-Za-z_][A-Za-z0-9_]{0,8}").prop_filter("reserved word", move |s| !reserved.contains(s))
}

pub fn numerical_lexeme() -> impl Strategy<Value = String> + Clone {
    prop_oneof![
        pattern("0b[01]{1,8}"),
        pattern("0o[0-7]{1,4}"),
        pattern("0x[0-9a-fA-F]{1,6}"),
        pattern("[+-]?[0-9]{1,5}"),
        pattern("[+-]?[0-9]{1,3}\\.[0-9]{1,3}"),
        pattern("[+-]?[0-9]{1,3}(\\.[0-9]{1,2})?[eE][+-]?[0-9]{1,2}"),
    ]
}

/// Raw (unescaped) string contents: printable text plus quotes,
/// backslashes, tabs and line breaks.
pub fn raw_string() -> impl Strategy<Value = String> + Clone {
    pattern("[ -~\t\n\r\u{e9}\u{3bb}\u{4e2d}]{1,16}")
}

pub fn uuid_lexeme() -> impl Strategy<Value = String> + Clone {
    pattern("[0-9a-f]{8}-[0-9a-f]{4}-[0-9A-F]{4}-[0-9a-f]{4}-[0-9a-fA-F]{12}")
}

fn node_plan(ident: impl Strategy<Value = String> + Clone) -> impl Strategy<Value = NodePlan> + Clone {
    let qn = prop::collection::vec(ident.clone(), 1..4);
    (
        (any::<Index>(), any::<Index>(), ident.clone(), any::<[bool; 8]>()),
        [ident.clone(), ident],
        [raw_string(), raw_string()],
        [numerical_lexeme(), numerical_lexeme()],
        (any::<bool>(), uuid_lexeme()),
        [qn.clone(), qn],
    )
        .prop_map(|((parent, slot, name, present), idents, texts, nums, (flag, uuid), qns)| NodePlan {
            parent,
            slot,
            name,
            present,
            idents,
            texts,
            nums,
            flag,
            uuid,
            qns,
        })
}

/// Conforming models of 1 to `max_elements` elements rooted at the root
/// class. Values cover every terminal shape; cross-references name
/// arbitrary qualified names.
pub fn arb_model(lang: &Lang, max_elements: usize) -> impl Strategy<Value = ModelElement> {
    let ident = identifier(keywords(&lang.g));
    let mm = lang.mm.clone();
    (node_plan(ident.clone()), prop::collection::vec(node_plan(ident), 0..max_elements))
        .prop_map(move |(root, nodes)| build_model(&mm, &root, &nodes))
}

fn containment_slots(mm: &Metamodel, class: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for m in mm.flatten_members(class).unwrap() {
        if let MemberKind::Containment(target) = &m.kind {
            for sub in mm.concrete_subtypes(target).unwrap() {
                out.push((m.name.clone(), sub.to_string()));
            }
        }
    }
    out
}

fn build_model(mm: &Metamodel, root: &NodePlan, nodes: &[NodePlan]) -> ModelElement {
    // (class, parent arena index, member)
    let mut arena: Vec<(String, Option<usize>, String)> = vec![(mm.root_class().to_string(), None, String::new())];
    let mut slots: HashMap<String, Vec<(String, String)>> = HashMap::new();
    for plan in nodes {
        let hosts: Vec<usize> = (0..arena.len())
            .filter(|&i| {
                let class = arena[i].0.clone();
                !slots.entry(class.clone()).or_insert_with(|| containment_slots(mm, &class)).is_empty()
            })
            .collect();
        let parent = hosts[plan.parent.index(hosts.len())];
        let options = &slots[&arena[parent].0];
        let (member, class) = options[plan.slot.index(options.len())].clone();
        arena.push((class, Some(parent), member));
    }

    let plans: Vec<&NodePlan> = std::iter::once(root).chain(nodes).collect();
    fn assemble(
        i: usize,
        mm: &Metamodel,
        arena: &[(String, Option<usize>, String)],
        plans: &[&NodePlan],
    ) -> ModelElement {
        let mut e = element_from_plan(mm, &arena[i].0, plans[i]);
        for (j, (_, parent, member)) in arena.iter().enumerate() {
            if *parent == Some(i) {
                e.children.push((member.clone(), assemble(j, mm, arena, plans)));
            }
        }
        e
    }
    let mut model = assemble(0, mm, &arena, &plans);
    model.renumber();
    model
}

fn element_from_plan(mm: &Metamodel, class: &str, plan: &NodePlan) -> ModelElement {
    let mut e = if mm.has_name_slot(class).unwrap() {
        ModelElement::named(ElementId(0), class, &plan.name)
    } else {
        ModelElement::new(ElementId(0), class)
    };
    for (i, m) in mm.flatten_members(class).unwrap().iter().filter(|m| m.name != SHORT_NAME).enumerate() {
        let (v, alt) = (plan, i % 2);
        if !(m.is_mandatory() || plan.present[i % plan.present.len()]) {
            continue;
        }
        match &m.kind {
            MemberKind::Attribute(kind) => {
                let lexeme = match kind {
                    PrimitiveKind::Identifier => v.idents[alt].clone(),
                    PrimitiveKind::String => escape_string(&v.texts[alt]),
                    PrimitiveKind::Boolean => v.flag.to_string(),
                    PrimitiveKind::Numerical => v.nums[alt].clone(),
                    PrimitiveKind::Uuid => v.uuid.clone(),
                };
                e.attributes.push((m.name.clone(), lexeme));
            }
            MemberKind::CrossRef(_) => e.cross_refs.push(CrossRef {
                member: m.name.clone(),
                target: QualifiedName::new(v.qns[alt].clone()).unwrap(),
                resolved: None,
                origin: Origin::default(),
            }),
            MemberKind::Containment(_) => {}
        }
    }
    e
}

/// Applies swaps to the children of every element, visiting in pre-order.
pub fn permute_children(e: &mut ModelElement, swaps: &[(Index, Index)]) {
    fn walk(e: &mut ModelElement, swaps: &[(Index, Index)], k: &mut usize) {
        let n = e.children.len();
        if n > 1 && !swaps.is_empty() {
            for _ in 0..n {
                let (a, b) = swaps[*k % swaps.len()];
                *k += 1;
                e.children.swap(a.index(n), b.index(n));
            }
        }
        for (_, c) in &mut e.children {
            walk(c, swaps, k);
        }
    }
    walk(e, swaps, &mut 0);
    e.renumber();
}

// ---------------------------------------------------------------------------
// Naive reference oracle

/// Qualified names of every element fitting each class, by direct tree
/// walk; elements below an anonymous element have no qualified name.
pub fn naive_index(root: &ModelElement, mm: &Metamodel) -> HashMap<String, Vec<(QualifiedName, ElementId)>> {
    let mut named: Vec<(Vec<String>, &ModelElement)> = Vec::new();
    fn walk<'a>(e: &'a ModelElement, path: &[String], out: &mut Vec<(Vec<String>, &'a ModelElement)>) {
        let Some(name) = &e.short_name else { return };
        let mut path = path.to_vec();
        path.push(name.clone());
        out.push((path.clone(), e));
        for (_, c) in &e.children {
            walk(c, &path, out);
        }
    }
    walk(root, &[], &mut named);

    let mut out = HashMap::new();
    for class in mm.classes() {
        let hits: Vec<(QualifiedName, ElementId)> = named
            .iter()
            .filter(|(_, e)| mm.is_subtype(&e.class_name, &class.name).unwrap())
            .map(|(p, e)| (QualifiedName::new(p.clone()).unwrap(), e.id))
            .collect();
        if !hits.is_empty() {
            out.insert(class.name.clone(), hits);
        }
    }
    out
}

/// Lookup that walks the tree on every query.
pub struct NaiveLookup<'a> {
    pub root: &'a ModelElement,
    pub mm: &'a Metamodel,
}

impl ReferenceLookup for NaiveLookup<'_> {
    fn first_fitting(&self, class: &str) -> Option<QualifiedName> {
        naive_index(self.root, self.mm).remove(class).and_then(|v| v.into_iter().next()).map(|(q, _)| q)
    }
}

// ---------------------------------------------------------------------------
// Assist oracles

pub const DUMMY_UUID: &str = "123e4567-e89b-12d3-a456-426614174000";

fn dummy_for(hint: &str, fresh: &mut usize) -> String {
    match PrimitiveKind::from_name(hint) {
        Some(PrimitiveKind::Identifier) => "x1".into(),
        Some(PrimitiveKind::String) => "s".into(),
        Some(PrimitiveKind::Boolean) => "true".into(),
        Some(PrimitiveKind::Numerical) => "1".into(),
        Some(PrimitiveKind::Uuid) => DUMMY_UUID.into(),
        None if hint == "name" => {
            *fresh += 1;
            format!("zzFresh{fresh}")
        }
        None => "x1.y1".into(),
    }
}

/// Replaces every `${n:hint}` blank with a value of the hinted kind.
pub fn fill_placeholders(snippet: &str) -> String {
    let re = regex::Regex::new(r"\$\{\d+:([A-Za-z]+)\}").unwrap();
    let mut fresh = 0;
    re.replace_all(snippet, |c: &regex::Captures| dummy_for(&c[1], &mut fresh)).into_owned()
}

fn value_for(kind: PrimitiveKind) -> String {
    let v = dummy_for(kind.name(), &mut 0);
    if kind == PrimitiveKind::String {
        format!("\"{v}\"")
    } else {
        v
    }
}

/// Smallest text that instantiates a keyword: a filled template for class
/// keywords, `keyword value` for member keywords.
pub fn minimal_completion(syntax: &Syntax<'_>, keyword: &str) -> Option<String> {
    let g = syntax.grammar();
    if let Some(rule) = syntax.rule_for_keyword(keyword) {
        return Some(filled_template(syntax, rule));
    }
    let entry = g.rules.values().find_map(|r| r.entry_by_keyword(keyword))?;
    Some(match &entry.form {
        EntryForm::Attribute { kind, .. } => format!("{keyword} {}", value_for(*kind)),
        EntryForm::CrossRef { .. } => format!("{keyword} x1.y1"),
        EntryForm::Wrapped { braces, target, .. } => {
            let rule = g.rules.values().find(|r| syntax.metamodel().is_subtype(&r.class_name, target).unwrap())?;
            let inner = filled_template(syntax, rule);
            if *braces {
                format!("{keyword}\n{{\n{inner}\n}}")
            } else {
                format!("{keyword} {inner}")
            }
        }
        EntryForm::Inline { .. } => return None,
    })
}

fn filled_template(syntax: &Syntax<'_>, rule: &ProductionRule) -> String {
    struct NoLookup;
    impl ReferenceLookup for NoLookup {
        fn first_fitting(&self, _: &str) -> Option<QualifiedName> {
            None
        }
    }
    let _ = syntax;
    fill_placeholders(&blendtext::assist::template(rule, &NoLookup))
}

fn error_count(syntax: &Syntax<'_>, text: &str) -> usize {
    syntax.parse(text).diagnostics.iter().filter(|d| d.is_error()).count()
}

fn insert(text: &str, offset: usize, snippet: &str) -> String {
    format!("{}\n{}\n{}", &text[..offset], snippet, &text[offset..])
}

/// Outcome of checking the assist properties over one document.
#[derive(Debug, Default)]
pub struct AssistReport {
    pub positions: usize,
    pub contexts: usize,
    pub insertions: usize,
}

/// Checks soundness, completeness, minimality and cache consistency of
/// completion at every cursor offset of `text`. Offsets inside the same
/// whitespace run must yield the same context; insertions are tried once
/// per run.
pub fn check_assist(syntax: &Syntax<'_>, text: &str) -> Result<AssistReport, String> {
    let doc = AssistDocument::new(text, syntax);
    let baseline = doc.parsed.diagnostics.iter().filter(|d| d.is_error()).count();
    let root = doc.parsed.root.clone();
    let cache = root.as_ref().map(|r| blendtext::model::build_cache(r, syntax.metamodel())).unwrap_or_default();
    let naive_root = root.clone().unwrap_or_else(|| ModelElement::new(ElementId(0), syntax.grammar().root_rule.as_str()));
    let naive = NaiveLookup { root: &naive_root, mm: syntax.metamodel() };
    let g = syntax.grammar();
    let mm = syntax.metamodel();
    let mut report = AssistReport::default();

    let mut candidates: Vec<String> = keywords(g).into_iter().collect();
    candidates.sort();
    let completions: BTreeMap<String, Option<String>> =
        candidates.iter().map(|k| (k.clone(), minimal_completion(syntax, k))).collect();

    let mut previous: Option<(Option<CursorContext>, usize)> = None;
    for offset in 0..=text.len() {
        if !text.is_char_boundary(offset) {
            continue;
        }
        report.positions += 1;
        let ctx = doc.context_at_offset(offset);
        // Offsets separated only by whitespace share a run.
        let run_start = text[..offset].trim_end().len();
        if let Some((prev_ctx, prev_run)) = &previous {
            if *prev_run == run_start {
                if *prev_ctx != ctx {
                    return Err(format!("context changes inside whitespace at offset {offset}"));
                }
                continue;
            }
        }
        previous = Some((ctx.clone(), run_start));
        let Some(ctx) = ctx else { continue };
        report.contexts += 1;

        let proposals = complete(&ctx, g, mm, &cache);
        if proposals != complete(&ctx, g, mm, &naive) {
            return Err(format!("cache and naive lookup disagree at offset {offset}"));
        }
        check_order(&proposals).map_err(|m| format!("offset {offset}: {m}"))?;
        check_minimality(syntax, &proposals).map_err(|m| format!("offset {offset}: {m}"))?;

        // Soundness.
        for p in &proposals {
            let snippet = match p.kind {
                ProposalKind::Keyword => match completions.get(&p.insert_text) {
                    Some(Some(s)) => s.clone(),
                    _ => return Err(format!("offset {offset}: no completion for keyword `{}`", p.insert_text)),
                },
                ProposalKind::Template => fill_placeholders(&p.insert_text),
            };
            report.insertions += 1;
            let n = error_count(syntax, &insert(text, offset, &snippet));
            if n > baseline {
                return Err(format!("offset {offset}: inserting {:?} proposal `{}` adds errors", p.kind, p.label));
            }
        }

        // Completeness: any keyword whose minimal instance is accepted here
        // must be proposed.
        if !matches!(ctx.scope, Scope::Wrapper { .. }) {
            for (keyword, snippet) in &completions {
                let Some(snippet) = snippet else { continue };
                report.insertions += 1;
                if error_count(syntax, &insert(text, offset, snippet)) > baseline {
                    continue;
                }
                let proposed = proposals.iter().any(|p| p.kind == ProposalKind::Keyword && &p.insert_text == keyword);
                if !proposed {
                    return Err(format!("offset {offset}: `{keyword}` fits but is not proposed"));
                }
            }
        }
    }
    Ok(report)
}

fn check_order(proposals: &[Proposal]) -> Result<(), String> {
    let first_template = proposals.iter().position(|p| p.kind == ProposalKind::Template).unwrap_or(proposals.len());
    if proposals[first_template..].iter().any(|p| p.kind == ProposalKind::Keyword) {
        return Err("keyword proposal after a template".into());
    }
    Ok(())
}

/// Template bodies name exactly the mandatory members of their class.
pub fn check_minimality(syntax: &Syntax<'_>, proposals: &[Proposal]) -> Result<(), String> {
    for p in proposals.iter().filter(|p| p.kind == ProposalKind::Template) {
        let Some(rule) = syntax.rule_for_keyword(&p.label) else { continue };
        // Wrapped templates carry the member keyword around the element.
        let body_keywords: Vec<String> = template_body_keywords(&p.insert_text, &rule.keyword);
        let mut expected: Vec<String> = syntax
            .metamodel()
            .mandatory_members(&rule.class_name)
            .unwrap()
            .iter()
            .filter_map(|m| rule.entry(&m.name).and_then(|e| e.keyword()).map(str::to_string))
            .collect();
        expected.sort();
        let mut got = body_keywords;
        got.sort();
        if got != expected {
            return Err(format!("template for `{}` has members {got:?}, expected {expected:?}", p.label));
        }
    }
    Ok(())
}

fn template_body_keywords(snippet: &str, class_keyword: &str) -> Vec<String> {
    let lines: Vec<&str> = snippet.lines().collect();
    let start = lines.iter().position(|l| l.trim_start().starts_with(class_keyword)).unwrap_or(0);
    lines[start + 1..]
        .iter()
        .map(|l| l.trim())
        .filter(|l| !matches!(*l, "{" | "}" | "},"))
        .filter_map(|l| l.split_whitespace().next())
        .map(str::to_string)
        .collect()
}
