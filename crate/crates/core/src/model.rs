//! In-memory instance model: element trees, qualified names, reference
//! resolution and the cross-reference lookup cache.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::diagnostic::{Diagnostic, Span};
use crate::metamodel::{MemberKind, Metamodel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementId(pub usize);

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Dot-separated path of short names, never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QualifiedName {
    segments: Vec<String>,
}

impl QualifiedName {
    pub fn new(segments: Vec<String>) -> Option<Self> {
        if segments.is_empty() || segments.iter().any(String::is_empty) {
            None
        } else {
            Some(QualifiedName { segments })
        }
    }

    pub fn parse(dotted: &str) -> Option<Self> {
        Self::new(dotted.split('.').map(str::to_string).collect())
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn child(&self, name: &str) -> Self {
        let mut segments = self.segments.clone();
        segments.push(name.to_string());
        QualifiedName { segments }
    }
}

impl fmt::Display for QualifiedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join("."))
    }
}

/// Source location of a model part. Ignored by equality so that trees read
/// from different notations compare structurally.
#[derive(Debug, Clone, Copy, Default)]
pub struct Origin(pub Option<Span>);

impl PartialEq for Origin {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Origin {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossRef {
    pub member: String,
    pub target: QualifiedName,
    pub resolved: Option<ElementId>,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelElement {
    pub id: ElementId,
    pub class_name: String,
    pub short_name: Option<String>,
    /// `(member, lexeme)` pairs. String lexemes are stored without quotes.
    pub attributes: Vec<(String, String)>,
    pub cross_refs: Vec<CrossRef>,
    /// Contained elements in document order.
    pub children: Vec<(String, ModelElement)>,
    pub origin: Origin,
}

impl ModelElement {
    pub fn new(id: ElementId, class_name: &str) -> Self {
        ModelElement {
            id,
            class_name: class_name.to_string(),
            short_name: None,
            attributes: Vec::new(),
            cross_refs: Vec::new(),
            children: Vec::new(),
            origin: Origin::default(),
        }
    }

    pub fn named(id: ElementId, class_name: &str, short_name: &str) -> Self {
        let mut e = Self::new(id, class_name);
        e.short_name = Some(short_name.to_string());
        e
    }

    pub fn attribute(&self, member: &str) -> Option<&str> {
        self.attributes.iter().find(|(m, _)| m == member).map(|(_, v)| v.as_str())
    }

    pub fn cross_ref(&self, member: &str) -> Option<&CrossRef> {
        self.cross_refs.iter().find(|r| r.member == member)
    }

    pub fn children_of<'a>(&'a self, member: &'a str) -> impl Iterator<Item = &'a ModelElement> + 'a {
        self.children.iter().filter(move |(m, _)| m == member).map(|(_, c)| c)
    }

    /// Whether the member holds at least one value. `shortName` counts when
    /// the element is named.
    pub fn has_member(&self, member: &str) -> bool {
        (member == crate::metamodel::SHORT_NAME && self.short_name.is_some())
            || self.attributes.iter().any(|(m, _)| m == member)
            || self.cross_refs.iter().any(|r| r.member == member)
            || self.children.iter().any(|(m, _)| m == member)
    }

    /// Reorders attributes and cross-references by the class's member
    /// order. Values of the same member keep their relative order.
    pub fn sort_members(&mut self, mm: &Metamodel) {
        let Ok(members) = mm.flatten_members(&self.class_name) else { return };
        let rank = |name: &str| members.iter().position(|m| m.name == name).unwrap_or(usize::MAX);
        self.attributes.sort_by_key(|(m, _)| rank(m));
        self.cross_refs.sort_by_key(|r| rank(&r.member));
    }

    /// Pre-order traversal, self first.
    pub fn iter(&self) -> PreOrder<'_> {
        PreOrder { stack: vec![self] }
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn find(&self, id: ElementId) -> Option<&ModelElement> {
        self.iter().find(|e| e.id == id)
    }

    /// Reassigns ids in document pre-order starting at 0. Resolved
    /// references are cleared since they would point at stale ids.
    pub fn renumber(&mut self) {
        fn walk(e: &mut ModelElement, next: &mut usize) {
            e.id = ElementId(*next);
            *next += 1;
            for r in &mut e.cross_refs {
                r.resolved = None;
            }
            for (_, c) in &mut e.children {
                walk(c, next);
            }
        }
        walk(self, &mut 0);
    }

    /// Removes attributes whose value is the empty string, in the whole tree.
    pub fn erase_empty_attributes(&mut self) {
        self.attributes.retain(|(_, v)| !v.is_empty());
        for (_, c) in &mut self.children {
            c.erase_empty_attributes();
        }
    }
}

pub struct PreOrder<'a> {
    stack: Vec<&'a ModelElement>,
}

impl<'a> Iterator for PreOrder<'a> {
    type Item = &'a ModelElement;

    fn next(&mut self) -> Option<Self::Item> {
        let e = self.stack.pop()?;
        self.stack.extend(e.children.iter().rev().map(|(_, c)| c));
        Some(e)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("element {0} not found")]
    NotFound(ElementId),
    #[error("element {target} has no qualified name: an ancestor below `{nearest}` is anonymous")]
    AnonymousAncestor { target: ElementId, nearest: String },
    #[error("element {target} has no qualified name: the root element is anonymous")]
    AnonymousRoot { target: ElementId },
}

/// Dot-joined short names from the root to `target`, both inclusive.
pub fn fqn_of(root: &ModelElement, target: ElementId) -> Result<QualifiedName, ModelError> {
    fn path<'a>(e: &'a ModelElement, target: ElementId, acc: &mut Vec<&'a ModelElement>) -> bool {
        acc.push(e);
        if e.id == target || e.children.iter().any(|(_, c)| path(c, target, acc)) {
            return true;
        }
        acc.pop();
        false
    }
    let mut chain = Vec::new();
    if !path(root, target, &mut chain) {
        return Err(ModelError::NotFound(target));
    }
    let mut segments = Vec::with_capacity(chain.len());
    for e in &chain {
        match &e.short_name {
            Some(n) => segments.push(n.clone()),
            None if segments.is_empty() => return Err(ModelError::AnonymousRoot { target }),
            None => {
                return Err(ModelError::AnonymousAncestor { target, nearest: segments.join(".") });
            }
        }
    }
    Ok(QualifiedName { segments })
}

/// Calls `f` for every element that has a qualified name, in pre-order.
pub fn for_each_named<'a>(root: &'a ModelElement, mut f: impl FnMut(&QualifiedName, &'a ModelElement)) {
    fn walk<'a>(
        e: &'a ModelElement,
        parent: Option<&QualifiedName>,
        f: &mut impl FnMut(&QualifiedName, &'a ModelElement),
    ) {
        let Some(name) = &e.short_name else { return };
        let fqn = match parent {
            Some(p) => p.child(name),
            None => QualifiedName { segments: vec![name.clone()] },
        };
        f(&fqn, e);
        for (_, c) in &e.children {
            walk(c, Some(&fqn), f);
        }
    }
    walk(root, None, &mut f);
}

fn location(origin: Origin) -> String {
    origin.0.map_or(String::new(), |s| format!(" at {}:{}", s.start.line, s.start.column))
}

/// Resolves every cross-reference by qualified name. Earlier resolutions are
/// discarded first, so calling this repeatedly gives the same result.
pub fn resolve(root: &mut ModelElement, mm: &Metamodel) -> Vec<Diagnostic> {
    let mut diagnostics = Vec::new();
    let mut census: HashMap<QualifiedName, Vec<(ElementId, String, Origin)>> = HashMap::new();
    let mut order = Vec::new();
    for_each_named(root, |fqn, e| {
        let slot = census.entry(fqn.clone()).or_default();
        if slot.is_empty() {
            order.push(fqn.clone());
        }
        slot.push((e.id, e.class_name.clone(), e.origin));
    });
    for fqn in &order {
        let holders = &census[fqn];
        if holders.len() > 1 {
            let listed: Vec<String> = holders.iter().map(|(id, _, o)| format!("{id}{}", location(*o))).collect();
            diagnostics.push(Diagnostic::error(
                format!("duplicate qualified name `{fqn}` ({})", listed.join(", ")),
                holders[1].2 .0,
            ));
        }
    }

    fn walk(
        e: &mut ModelElement,
        mm: &Metamodel,
        census: &HashMap<QualifiedName, Vec<(ElementId, String, Origin)>>,
        out: &mut Vec<Diagnostic>,
    ) {
        let class = e.class_name.clone();
        for r in &mut e.cross_refs {
            r.resolved = None;
            let expected = match mm.member(&class, &r.member) {
                Ok(Some(m)) => match &m.kind {
                    MemberKind::CrossRef(t) => t.clone(),
                    _ => continue,
                },
                _ => continue,
            };
            match census.get(&r.target).map(Vec::as_slice) {
                None | Some([]) => out.push(Diagnostic::error(
                    format!("unresolved reference `{}` for `{}`", r.target, r.member),
                    r.origin.0,
                )),
                Some([(id, actual, _)]) => {
                    if mm.is_subtype(actual, &expected).unwrap_or(false) {
                        r.resolved = Some(*id);
                    } else {
                        out.push(Diagnostic::error(
                            format!(
                                "reference `{}` expects a `{expected}` but `{}` is a `{actual}`",
                                r.member, r.target
                            ),
                            r.origin.0,
                        ));
                    }
                }
                Some(_) => out.push(Diagnostic::error(
                    format!("ambiguous reference `{}`: the qualified name is not unique", r.target),
                    r.origin.0,
                )),
            }
        }
        for (_, c) in &mut e.children {
            walk(c, mm, census, out);
        }
    }
    walk(root, mm, &census, &mut diagnostics);
    diagnostics
}

/// Source of "first fitting element" answers for completion.
pub trait ReferenceLookup {
    fn first_fitting(&self, class: &str) -> Option<QualifiedName>;
}

/// Class name to the qualified names of its instances, in document
/// pre-order. Every element is listed under its own class and all
/// supertypes. Anonymous elements and their subtrees are absent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReferenceCache {
    pub by_class: HashMap<String, Vec<(QualifiedName, ElementId)>>,
}

impl ReferenceCache {
    pub fn build(root: &ModelElement, mm: &Metamodel) -> Self {
        let mut by_class: HashMap<String, Vec<(QualifiedName, ElementId)>> = HashMap::new();
        for_each_named(root, |fqn, e| {
            let Ok(ancestors) = mm.supertypes_of(&e.class_name) else { return };
            for class in ancestors {
                by_class.entry(class.clone()).or_default().push((fqn.clone(), e.id));
            }
        });
        ReferenceCache { by_class }
    }

    pub fn entries(&self, class: &str) -> &[(QualifiedName, ElementId)] {
        self.by_class.get(class).map_or(&[], Vec::as_slice)
    }

    pub fn lookup_first_fitting(&self, class: &str) -> Option<&QualifiedName> {
        self.entries(class).first().map(|(q, _)| q)
    }
}

impl ReferenceLookup for ReferenceCache {
    fn first_fitting(&self, class: &str) -> Option<QualifiedName> {
        self.lookup_first_fitting(class).cloned()
    }
}

pub fn build_cache(root: &ModelElement, mm: &Metamodel) -> ReferenceCache {
    ReferenceCache::build(root, mm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metamodel::load_metamodel;

    fn mm() -> Metamodel {
        load_metamodel(crate::MINI_EASTADL).unwrap()
    }

    fn push(parent: &mut ModelElement, member: &str, child: ModelElement) {
        parent.children.push((member.into(), child));
    }

    /// P { F { q } }, plus an anonymous comment holding `hidden`.
    fn sample() -> ModelElement {
        let mut p = ModelElement::named(ElementId(0), "EAPackage", "P");
        let mut f = ModelElement::named(ElementId(1), "DesignFunctionType", "F");
        let mut q = ModelElement::named(ElementId(2), "FunctionFlowPort", "q");
        q.attributes.push(("direction".into(), "in".into()));
        q.cross_refs.push(CrossRef {
            member: "type".into(),
            target: QualifiedName::parse("P.B").unwrap(),
            resolved: None,
            origin: Origin::default(),
        });
        push(&mut f, "port", q);
        push(&mut p, "element", f);
        let mut c = ModelElement::new(ElementId(3), "Comment");
        c.attributes.push(("body".into(), "x".into()));
        push(&mut c, "ownedComment", ModelElement::named(ElementId(4), "Comment", "hidden"));
        push(&mut p, "ownedComment", c);
        push(&mut p, "element", ModelElement::named(ElementId(5), "EABoolean", "B"));
        p
    }

    #[test]
    fn fqn_walks_from_root() {
        let p = sample();
        assert_eq!(fqn_of(&p, ElementId(2)).unwrap().to_string(), "P.F.q");
        assert_eq!(fqn_of(&p, ElementId(0)).unwrap().segments().len(), 1);
        let err = fqn_of(&p, ElementId(4)).unwrap_err();
        assert_eq!(err, ModelError::AnonymousAncestor { target: ElementId(4), nearest: "P".into() });
        assert!(err.to_string().contains("`P`"));
        assert_eq!(fqn_of(&p, ElementId(99)), Err(ModelError::NotFound(ElementId(99))));
    }

    #[test]
    fn resolve_links_and_is_idempotent() {
        let mm = mm();
        let mut p = sample();
        assert!(resolve(&mut p, &mm).is_empty());
        let q = p.find(ElementId(2)).unwrap();
        assert_eq!(q.cross_refs[0].resolved, Some(ElementId(5)));
        let snapshot = p.clone();
        assert!(resolve(&mut p, &mm).is_empty());
        assert_eq!(p, snapshot);
        assert_eq!(p.find(ElementId(2)).unwrap().cross_refs[0].resolved, Some(ElementId(5)));
    }

    #[test]
    fn resolve_reports_dangling_mistyped_and_duplicate() {
        let mm = mm();
        let mut p = sample();
        if let Some((_, f)) = p.children.first_mut() {
            f.children[0].1.cross_refs[0].target = QualifiedName::parse("P.Nope").unwrap();
        }
        let d = resolve(&mut p, &mm);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("unresolved"));

        let mut p = sample();
        p.children[0].1.children[0].1.cross_refs[0].target = QualifiedName::parse("P.F").unwrap();
        let d = resolve(&mut p, &mm);
        assert!(d[0].message.contains("expects a `EADatatype`") && d[0].message.contains("`DesignFunctionType`"));

        let mut p = sample();
        push(&mut p, "element", ModelElement::named(ElementId(6), "EAString", "B"));
        let d = resolve(&mut p, &mm);
        assert_eq!(d.len(), 2, "{d:?}");
        assert!(d[0].message.contains("duplicate qualified name `P.B`") && d[0].message.contains("#5"));
        assert!(d[1].message.contains("ambiguous"));
        assert_eq!(p.find(ElementId(2)).unwrap().cross_refs[0].resolved, None);
    }

    #[test]
    fn cache_fans_out_to_supertypes_in_preorder() {
        let mm = mm();
        let p = sample();
        let cache = build_cache(&p, &mm);
        assert_eq!(cache.entries("EADatatype").len(), 1);
        assert_eq!(cache.lookup_first_fitting("FunctionPort").unwrap().to_string(), "P.F.q");
        let elements: Vec<String> = cache.entries("EAElement").iter().map(|(q, _)| q.to_string()).collect();
        assert_eq!(elements, ["P", "P.F", "P.F.q", "P.B"]);
        assert!(cache.entries("Comment").is_empty());
        assert_eq!(cache.lookup_first_fitting("NoSuchClass"), None);
    }

    #[test]
    fn cache_for_root_only() {
        let mm = mm();
        let p = ModelElement::named(ElementId(0), "EAPackage", "Only");
        let cache = build_cache(&p, &mm);
        for class in ["EAPackage", "EAElement"] {
            assert_eq!(cache.entries(class), &[(QualifiedName::parse("Only").unwrap(), ElementId(0))]);
        }
    }

    #[test]
    fn renumber_is_preorder() {
        let mut p = sample();
        p.children.swap(0, 2);
        p.renumber();
        let ids: Vec<usize> = p.iter().map(|e| e.id.0).collect();
        assert_eq!(ids, (0..6).collect::<Vec<_>>());
        assert_eq!(p.children[0].1.short_name.as_deref(), Some("B"));
    }

    #[test]
    fn sort_members_uses_metamodel_order() {
        let mm = mm();
        let mut e = ModelElement::named(ElementId(0), "EAPackage", "P");
        e.attributes = vec![("name".into(), "n".into()), ("category".into(), "c".into())];
        e.sort_members(&mm);
        assert_eq!(e.attributes[0].0, "category");
    }
}
