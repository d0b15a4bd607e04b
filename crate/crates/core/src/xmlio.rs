//! Order-preserving XML persistence of model trees.
//!
//! ```xml
//! <EAXML version="2.1.12">
//!   <EA-PACKAGE>
//!     <SHORT-NAME>P</SHORT-NAME>
//!     <CATEGORY>c</CATEGORY>
//!     <ELEMENT>
//!       <FUNCTION-FLOW-PORT>...</FUNCTION-FLOW-PORT>
//!     </ELEMENT>
//!   </EA-PACKAGE>
//! </EAXML>
//! ```

use std::collections::HashMap;
use std::fmt::Write;

use thiserror::Error;

use crate::diagnostic::{Diagnostic, Span};
use crate::metamodel::{MemberKind, Metamodel, PrimitiveKind};
use crate::model::{CrossRef, ElementId, ModelElement, Origin, QualifiedName};
use crate::textsyntax::{escape_string, unescape_string};
use crate::xmldom::{parse_document, XmlNode};

pub const EAXML_VERSION: &str = "2.1.12";
const ROOT_TAG: &str = "EAXML";
const SHORT_NAME_TAG: &str = "SHORT-NAME";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum XmlError {
    #[error("`{0}` cannot be mapped to an XML tag")]
    Unmappable(String),
    #[error("tag {tag} is used by both `{first}` and `{second}`")]
    TagCollision { tag: String, first: String, second: String },
    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{0}")]
    Structure(String),
}

/// Upper-case, hyphen-separated tag for a camelCase or PascalCase name.
/// A run of capitals is one word; its last capital starts the next word
/// when followed by a lowercase letter (`EAPackage` gives `EA-PACKAGE`).
pub fn to_tag(name: &str) -> Result<String, XmlError> {
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(XmlError::Unmappable(name.to_string()));
    }
    let chars: Vec<char> = name.chars().collect();
    let mut out = String::with_capacity(name.len() + 4);
    for (i, &c) in chars.iter().enumerate() {
        if i > 0 && c.is_ascii_uppercase() {
            let prev = chars[i - 1];
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_ascii_lowercase());
            if prev.is_ascii_lowercase() || prev.is_ascii_digit() || (prev.is_ascii_uppercase() && next_lower) {
                out.push('-');
            }
        }
        out.push(c.to_ascii_uppercase());
    }
    Ok(out)
}

/// Tag tables for one metamodel; reverse lookups never guess.
#[derive(Debug, Clone)]
pub struct XmlNameMap {
    class_tags: HashMap<String, String>,
    classes_by_tag: HashMap<String, String>,
    member_tags: HashMap<(String, String), String>,
    members_by_tag: HashMap<(String, String), String>,
}

impl XmlNameMap {
    pub fn new(mm: &Metamodel) -> Result<Self, XmlError> {
        let mut map = XmlNameMap {
            class_tags: HashMap::new(),
            classes_by_tag: HashMap::new(),
            member_tags: HashMap::new(),
            members_by_tag: HashMap::new(),
        };
        for class in mm.classes() {
            let tag = to_tag(&class.name)?;
            if tag == ROOT_TAG {
                return Err(XmlError::TagCollision { tag, first: ROOT_TAG.into(), second: class.name.clone() });
            }
            if let Some(first) = map.classes_by_tag.insert(tag.clone(), class.name.clone()) {
                return Err(XmlError::TagCollision { tag, first, second: class.name.clone() });
            }
            map.class_tags.insert(class.name.clone(), tag);
            for m in mm.flatten_members(&class.name).map_err(|e| XmlError::Structure(e.to_string()))? {
                let tag = to_tag(&m.name)?;
                let key = (class.name.clone(), tag.clone());
                if let Some(first) = map.members_by_tag.insert(key, m.name.clone()) {
                    return Err(XmlError::TagCollision { tag, first, second: m.name.clone() });
                }
                map.member_tags.insert((class.name.clone(), m.name.clone()), tag);
            }
        }
        Ok(map)
    }

    pub fn class_tag(&self, class: &str) -> Result<&str, XmlError> {
        self.class_tags.get(class).map(String::as_str).ok_or_else(|| XmlError::Unmappable(class.into()))
    }

    pub fn member_tag(&self, class: &str, member: &str) -> Result<&str, XmlError> {
        self.member_tags
            .get(&(class.to_string(), member.to_string()))
            .map(String::as_str)
            .ok_or_else(|| XmlError::Unmappable(format!("{class}.{member}")))
    }

    pub fn class_for_tag(&self, tag: &str) -> Option<&str> {
        self.classes_by_tag.get(tag).map(String::as_str)
    }

    pub fn member_for_tag(&self, class: &str, tag: &str) -> Option<&str> {
        self.members_by_tag.get(&(class.to_string(), tag.to_string())).map(String::as_str)
    }
}

fn escape_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn leaf(out: &mut String, depth: usize, tag: &str, attrs: &str, text: &str) {
    indent(out, depth);
    writeln!(out, "<{tag}{attrs}>{}</{tag}>", escape_text(text)).unwrap();
}

fn attribute_kind(mm: &Metamodel, class: &str, member: &str) -> Option<PrimitiveKind> {
    match mm.member(class, member).ok()??.kind {
        MemberKind::Attribute(k) => Some(k),
        _ => None,
    }
}

/// Serializes a tree. Output depends only on the tree, so equal trees give
/// equal bytes.
pub fn to_eaxml(root: &ModelElement, mm: &Metamodel) -> Result<String, XmlError> {
    let names = XmlNameMap::new(mm)?;
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    writeln!(out, "<{ROOT_TAG} version=\"{EAXML_VERSION}\">").unwrap();
    write_element(root, mm, &names, 1, &mut out)?;
    writeln!(out, "</{ROOT_TAG}>").unwrap();
    Ok(out)
}

fn write_element(
    e: &ModelElement,
    mm: &Metamodel,
    names: &XmlNameMap,
    depth: usize,
    out: &mut String,
) -> Result<(), XmlError> {
    let tag = names.class_tag(&e.class_name)?;
    if e.short_name.is_none() && e.attributes.is_empty() && e.cross_refs.is_empty() && e.children.is_empty() {
        indent(out, depth);
        writeln!(out, "<{tag}/>").unwrap();
        return Ok(());
    }
    indent(out, depth);
    writeln!(out, "<{tag}>").unwrap();
    if let Some(name) = &e.short_name {
        leaf(out, depth + 1, SHORT_NAME_TAG, "", name);
    }
    for (member, value) in &e.attributes {
        let mtag = names.member_tag(&e.class_name, member)?;
        let text = match attribute_kind(mm, &e.class_name, member) {
            Some(PrimitiveKind::String) => unescape_string(value),
            _ => value.clone(),
        };
        leaf(out, depth + 1, mtag, "", &text);
    }
    for r in &e.cross_refs {
        let mtag = names.member_tag(&e.class_name, &r.member)?;
        let target = match mm.member(&e.class_name, &r.member) {
            Ok(Some(m)) => m.kind.target().unwrap_or(&e.class_name).to_string(),
            _ => return Err(XmlError::Unmappable(format!("{}.{}", e.class_name, r.member))),
        };
        let dest = format!(" DEST=\"{}\"", names.class_tag(&target)?);
        leaf(out, depth + 1, mtag, &dest, &format!("/{}", r.target.segments().join("/")));
    }
    let mut i = 0;
    while i < e.children.len() {
        let member = &e.children[i].0;
        let run = e.children[i..].iter().take_while(|(m, _)| m == member).count();
        let mtag = names.member_tag(&e.class_name, member)?;
        indent(out, depth + 1);
        writeln!(out, "<{mtag}>").unwrap();
        for (_, child) in &e.children[i..i + run] {
            write_element(child, mm, names, depth + 2, out)?;
        }
        indent(out, depth + 1);
        writeln!(out, "</{mtag}>").unwrap();
        i += run;
    }
    indent(out, depth);
    writeln!(out, "</{tag}>").unwrap();
    Ok(())
}

struct Reader<'a> {
    mm: &'a Metamodel,
    names: XmlNameMap,
    next_id: usize,
    diagnostics: Vec<Diagnostic>,
}

fn at(node: &XmlNode) -> Option<Span> {
    Some(Span::new(node.position, node.position))
}

impl Reader<'_> {
    fn warn(&mut self, node: &XmlNode, message: String) {
        self.diagnostics.push(Diagnostic::warning(message, at(node)));
    }

    fn element(&mut self, node: &XmlNode, class: &str) -> ModelElement {
        let mut e = ModelElement::new(ElementId(self.next_id), class);
        self.next_id += 1;
        e.origin = Origin(at(node));
        let has_name = self.mm.has_name_slot(class).unwrap_or(false);
        for child in &node.children {
            if child.name == SHORT_NAME_TAG && has_name {
                if !child.text.is_empty() {
                    e.short_name = Some(child.text.clone());
                }
                continue;
            }
            let Some(member) = self.names.member_for_tag(class, &child.name).map(str::to_string) else {
                self.warn(child, format!("unknown tag <{}> in <{}>; skipped", child.name, node.name));
                continue;
            };
            let kind = self.mm.member(class, &member).ok().flatten().map(|m| m.kind.clone());
            match kind {
                Some(MemberKind::Attribute(k)) => {
                    if child.text.is_empty() {
                        continue;
                    }
                    let value = if k == PrimitiveKind::String { escape_string(&child.text) } else { child.text.clone() };
                    e.attributes.push((member, value));
                }
                Some(MemberKind::CrossRef(_)) => {
                    let segments: Vec<String> =
                        child.text.trim().trim_start_matches('/').split('/').map(str::to_string).collect();
                    match QualifiedName::new(segments) {
                        Some(target) => e.cross_refs.push(CrossRef {
                            member,
                            target,
                            resolved: None,
                            origin: Origin(at(child)),
                        }),
                        None => self.warn(child, format!("malformed reference path `{}`", child.text)),
                    }
                }
                Some(MemberKind::Containment(target)) => {
                    for grand in &child.children {
                        match self.names.class_for_tag(&grand.name).map(str::to_string) {
                            Some(c) if self.fits(&c, &target) => {
                                let el = self.element(grand, &c);
                                e.children.push((member.clone(), el));
                            }
                            Some(c) => {
                                self.warn(grand, format!("`{c}` cannot be contained in `{class}.{member}`; skipped"))
                            }
                            None => self.warn(grand, format!("unknown tag <{}> in <{}>; skipped", grand.name, child.name)),
                        }
                    }
                }
                None => {}
            }
        }
        e.sort_members(self.mm);
        e
    }

    fn fits(&self, class: &str, target: &str) -> bool {
        self.mm.is_subtype(class, target).unwrap_or(false)
            && self.mm.class(class).is_ok_and(|c| !c.is_abstract)
    }
}

/// Reads a tree back. Attributes with empty text are dropped; unknown tags
/// produce warnings and their subtrees are skipped.
pub fn from_eaxml(xml: &str, mm: &Metamodel) -> Result<(ModelElement, Vec<Diagnostic>), XmlError> {
    let doc = parse_document(xml).map_err(|e| XmlError::Syntax {
        line: e.position.line,
        column: e.position.column,
        message: e.message,
    })?;
    let Some(doc) = doc else {
        return Err(XmlError::Structure("missing root element".into()));
    };
    if doc.name != ROOT_TAG {
        return Err(XmlError::Structure(format!("expected <{ROOT_TAG}>, found <{}>", doc.name)));
    }
    let mut reader = Reader { mm, names: XmlNameMap::new(mm)?, next_id: 0, diagnostics: Vec::new() };
    match doc.attribute("version") {
        Some(EAXML_VERSION) => {}
        Some(v) => reader.warn(&doc, format!("EAXML version {v} differs from supported {EAXML_VERSION}")),
        None => reader.warn(&doc, "EAXML version missing".into()),
    }
    let node = match doc.children.as_slice() {
        [] => return Err(XmlError::Structure("missing root element".into())),
        [node] => node,
        [_, second, ..] => {
            return Err(XmlError::Structure(format!(
                "{}:{}: more than one root element",
                second.position.line, second.position.column
            )))
        }
    };
    let class = reader
        .names
        .class_for_tag(&node.name)
        .filter(|c| reader.fits(c, mm.root_class()))
        .map(str::to_string)
        .ok_or_else(|| XmlError::Structure(format!("<{}> is not a valid root element", node.name)))?;
    let root = reader.element(node, &class);
    Ok((root, reader.diagnostics))
}
