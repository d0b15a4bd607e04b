//! Class-based metamodels loaded from an Ecore-style XMI subset.
//!
//! A metamodel is immutable after loading. Inheritance closures and
//! flattened member lists are computed once at construction so queries are
//! plain lookups.

use std::collections::{HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::xmldom::{self, XmlNode};

/// Name of the attribute that acts as an element's name slot.
pub const SHORT_NAME: &str = "shortName";

const ECORE_URI: &str = "http://www.eclipse.org/emf/2002/Ecore";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrimitiveKind {
    Identifier,
    String,
    Boolean,
    Numerical,
    Uuid,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 5] = [
        PrimitiveKind::Identifier,
        PrimitiveKind::String,
        PrimitiveKind::Boolean,
        PrimitiveKind::Numerical,
        PrimitiveKind::Uuid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::Identifier => "Identifier",
            PrimitiveKind::String => "String",
            PrimitiveKind::Boolean => "Boolean",
            PrimitiveKind::Numerical => "Numerical",
            PrimitiveKind::Uuid => "UUID",
        }
    }

    /// Rule name used in emitted grammar text. `String` is renamed so it
    /// cannot clash with the builtin string terminal of grammar tooling.
    pub fn rule_name(self) -> &'static str {
        match self {
            PrimitiveKind::String => "String0",
            other => other.name(),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        PrimitiveKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn from_rule_name(name: &str) -> Option<Self> {
        PrimitiveKind::ALL.into_iter().find(|k| k.rule_name() == name)
    }

    /// Maps a metamodel datatype name onto a primitive kind, ignoring case.
    pub fn from_datatype(name: &str) -> Option<Self> {
        let kind = match name.to_ascii_lowercase().as_str() {
            "estring" | "string" => PrimitiveKind::String,
            "eboolean" | "boolean" => PrimitiveKind::Boolean,
            "identifier" => PrimitiveKind::Identifier,
            "numerical" | "eint" | "efloat" => PrimitiveKind::Numerical,
            "uuid" => PrimitiveKind::Uuid,
            _ => return None,
        };
        Some(kind)
    }

    /// Built-in terminal pattern for this kind.
    pub fn default_pattern(self) -> &'static str {
        match self {
            PrimitiveKind::Identifier => r"[A-Za-z_][A-Za-z0-9_]*",
            PrimitiveKind::String => r#""(?:[^"\\\n]|\\["\\nrt])*""#,
            PrimitiveKind::Boolean => r"true|false",
            PrimitiveKind::Numerical => {
                r"0b[01]+|0o[0-7]+|0x[0-9a-fA-F]+|[+-]?[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?"
            }
            PrimitiveKind::Uuid => {
                r"[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}"
            }
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MemberKind {
    Attribute(PrimitiveKind),
    Containment(String),
    CrossRef(String),
}

impl MemberKind {
    /// Target class of a containment or cross-reference.
    pub fn target(&self) -> Option<&str> {
        match self {
            MemberKind::Attribute(_) => None,
            MemberKind::Containment(t) | MemberKind::CrossRef(t) => Some(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Member {
    pub name: String,
    pub kind: MemberKind,
    pub lower_bound: u32,
    /// `None` means unbounded.
    pub upper_bound: Option<u32>,
    pub ordered: bool,
}

impl Member {
    pub fn attribute(name: &str, kind: PrimitiveKind, lower: u32, upper: Option<u32>) -> Self {
        Member::new(name, MemberKind::Attribute(kind), lower, upper)
    }

    pub fn containment(name: &str, target: &str, lower: u32, upper: Option<u32>) -> Self {
        Member::new(name, MemberKind::Containment(target.into()), lower, upper)
    }

    pub fn cross_ref(name: &str, target: &str, lower: u32, upper: Option<u32>) -> Self {
        Member::new(name, MemberKind::CrossRef(target.into()), lower, upper)
    }

    fn new(name: &str, kind: MemberKind, lower_bound: u32, upper_bound: Option<u32>) -> Self {
        Member { name: name.into(), kind, lower_bound, upper_bound, ordered: true }
    }

    pub fn is_mandatory(&self) -> bool {
        self.lower_bound >= 1
    }

    pub fn is_many(&self) -> bool {
        self.upper_bound.is_none_or(|u| u > 1)
    }

    pub fn is_name_slot(&self) -> bool {
        self.name == SHORT_NAME && self.kind == MemberKind::Attribute(PrimitiveKind::Identifier)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaClass {
    pub name: String,
    pub is_abstract: bool,
    pub supertypes: Vec<String>,
    pub members: Vec<Member>,
}

impl MetaClass {
    pub fn new(name: &str) -> Self {
        MetaClass { name: name.into(), is_abstract: false, supertypes: Vec::new(), members: Vec::new() }
    }

    pub fn abstract_class(mut self) -> Self {
        self.is_abstract = true;
        self
    }

    pub fn extends(mut self, sup: &str) -> Self {
        self.supertypes.push(sup.into());
        self
    }

    pub fn member(mut self, member: Member) -> Self {
        self.members.push(member);
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetamodelError {
    #[error("{line}:{column}: malformed XML: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unsupported metamodel: {0}")]
    Unsupported(String),
    #[error("invalid metamodel: {0}")]
    Invalid(String),
    #[error("dangling class reference: {0}")]
    Dangling(String),
    #[error("inheritance cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metamodel {
    name: String,
    classes: IndexMap<String, MetaClass>,
    root_class: String,
    flattened: HashMap<String, Vec<Member>>,
    /// Reflexive-transitive supertypes, the class itself first.
    ancestors: HashMap<String, Vec<String>>,
}

impl Metamodel {
    /// Builds and validates a metamodel. Classes keep the given order.
    pub fn new(name: &str, classes: Vec<MetaClass>, root_class: &str) -> Result<Self, MetamodelError> {
        let mut map = IndexMap::new();
        for class in classes {
            if map.contains_key(&class.name) {
                return Err(MetamodelError::Invalid(format!("duplicate class `{}`", class.name)));
            }
            map.insert(class.name.clone(), class);
        }

        for class in map.values() {
            for sup in &class.supertypes {
                if !map.contains_key(sup) {
                    return Err(MetamodelError::Dangling(format!("{} extends {}", class.name, sup)));
                }
            }
            for m in &class.members {
                if let Some(target) = m.kind.target() {
                    if !map.contains_key(target) {
                        return Err(MetamodelError::Dangling(format!(
                            "{}.{} -> {}",
                            class.name, m.name, target
                        )));
                    }
                }
                if let Some(upper) = m.upper_bound {
                    if upper == 0 || m.lower_bound > upper {
                        return Err(MetamodelError::Invalid(format!(
                            "{}.{} has bounds [{}..{}]",
                            class.name, m.name, m.lower_bound, upper
                        )));
                    }
                }
            }
        }

        check_acyclic(&map)?;

        let mut ancestors = HashMap::new();
        let mut flattened = HashMap::new();
        for name in map.keys() {
            let order = ancestor_order(&map, name);
            let mut flat: Vec<Member> = Vec::new();
            for cls in member_order(&map, name) {
                for m in &map[cls].members {
                    if flat.iter().any(|f| f.name == m.name) {
                        return Err(MetamodelError::Invalid(format!(
                            "member `{}` of `{}` clashes with an inherited member",
                            m.name, name
                        )));
                    }
                    flat.push(m.clone());
                }
            }
            flattened.insert(name.clone(), flat);
            ancestors.insert(name.clone(), order);
        }

        match map.get(root_class) {
            None => return Err(MetamodelError::UnknownClass(root_class.into())),
            Some(c) if c.is_abstract => {
                return Err(MetamodelError::Invalid(format!("root class `{root_class}` is abstract")))
            }
            Some(_) => {}
        }

        Ok(Metamodel {
            name: name.into(),
            classes: map,
            root_class: root_class.into(),
            flattened,
            ancestors,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn root_class(&self) -> &str {
        &self.root_class
    }

    pub fn classes(&self) -> impl Iterator<Item = &MetaClass> {
        self.classes.values()
    }

    pub fn class(&self, name: &str) -> Result<&MetaClass, MetamodelError> {
        self.classes
            .get(name)
            .ok_or_else(|| MetamodelError::UnknownClass(name.into()))
    }

    pub fn contains_class(&self, name: &str) -> bool {
        self.classes.contains_key(name)
    }

    pub fn is_subtype(&self, sub: &str, sup: &str) -> Result<bool, MetamodelError> {
        self.class(sup)?;
        Ok(self.supertypes_of(sub)?.iter().any(|a| a == sup))
    }

    /// The class followed by all its transitive supertypes, depth-first in
    /// declaration order.
    pub fn supertypes_of(&self, class: &str) -> Result<&[String], MetamodelError> {
        self.ancestors
            .get(class)
            .map(Vec::as_slice)
            .ok_or_else(|| MetamodelError::UnknownClass(class.into()))
    }

    /// Inherited members first (deepest supertypes first), then own members.
    pub fn flatten_members(&self, class: &str) -> Result<&[Member], MetamodelError> {
        self.flattened
            .get(class)
            .map(Vec::as_slice)
            .ok_or_else(|| MetamodelError::UnknownClass(class.into()))
    }

    pub fn member(&self, class: &str, member: &str) -> Result<Option<&Member>, MetamodelError> {
        Ok(self.flatten_members(class)?.iter().find(|m| m.name == member))
    }

    /// Members with a lower bound of at least one. The name slot is not a
    /// member in this sense and is never listed.
    pub fn mandatory_members(&self, class: &str) -> Result<Vec<&Member>, MetamodelError> {
        Ok(self
            .flatten_members(class)?
            .iter()
            .filter(|m| m.is_mandatory() && !m.is_name_slot())
            .collect())
    }

    pub fn has_name_slot(&self, class: &str) -> Result<bool, MetamodelError> {
        Ok(self.flatten_members(class)?.iter().any(Member::is_name_slot))
    }

    /// Concrete classes assignable to `target`, in declaration order.
    pub fn concrete_subtypes(&self, target: &str) -> Result<Vec<&str>, MetamodelError> {
        self.class(target)?;
        Ok(self
            .classes
            .values()
            .filter(|c| !c.is_abstract && self.ancestors[&c.name].iter().any(|a| a == target))
            .map(|c| c.name.as_str())
            .collect())
    }
}

fn ancestor_order(map: &IndexMap<String, MetaClass>, class: &str) -> Vec<String> {
    fn visit(map: &IndexMap<String, MetaClass>, class: &str, out: &mut Vec<String>) {
        if out.iter().any(|c| c == class) {
            return;
        }
        out.push(class.to_string());
        for sup in &map[class].supertypes {
            visit(map, sup, out);
        }
    }
    let mut out = Vec::new();
    visit(map, class, &mut out);
    out
}

/// Post-order walk: each supertype (in declaration order) before the class
/// itself, every class once.
fn member_order<'a>(map: &'a IndexMap<String, MetaClass>, class: &'a str) -> Vec<&'a str> {
    fn visit<'a>(map: &'a IndexMap<String, MetaClass>, class: &'a str, out: &mut Vec<&'a str>) {
        if out.contains(&class) {
            return;
        }
        for sup in &map[class].supertypes {
            visit(map, sup, out);
        }
        out.push(class);
    }
    let mut out = Vec::new();
    visit(map, class, &mut out);
    out
}

fn check_acyclic(map: &IndexMap<String, MetaClass>) -> Result<(), MetamodelError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Active,
        Done,
    }
    fn dfs<'a>(
        map: &'a IndexMap<String, MetaClass>,
        class: &'a str,
        marks: &mut HashMap<&'a str, Mark>,
        path: &mut Vec<&'a str>,
    ) -> Result<(), MetamodelError> {
        marks.insert(class, Mark::Active);
        path.push(class);
        for sup in &map[class].supertypes {
            match marks.get(sup.as_str()).copied().unwrap_or(Mark::Fresh) {
                Mark::Active => {
                    let start = path.iter().position(|c| *c == sup).unwrap_or(0);
                    let mut cycle: Vec<String> = path[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(sup.clone());
                    return Err(MetamodelError::Cycle(cycle));
                }
                Mark::Fresh => dfs(map, sup, marks, path)?,
                Mark::Done => {}
            }
        }
        path.pop();
        marks.insert(class, Mark::Done);
        Ok(())
    }
    let mut marks = HashMap::new();
    for name in map.keys() {
        if marks.get(name.as_str()).copied().unwrap_or(Mark::Fresh) == Mark::Fresh {
            dfs(map, name, &mut marks, &mut Vec::new())?;
        }
    }
    Ok(())
}

/// Loads a metamodel from Ecore-style XMI text.
///
/// The document holds a single `ecore:EPackage` whose `eClassifiers` are
/// `ecore:EClass` or `ecore:EDataType` elements. The optional `rootClass`
/// attribute on the package names the root class; without it the first
/// concrete class is the root.
pub fn load_metamodel(document: &str) -> Result<Metamodel, MetamodelError> {
    let root = xmldom::parse_document(document)
        .map_err(|e| MetamodelError::Syntax {
            line: e.position.line,
            column: e.position.column,
            message: e.message,
        })?
        .ok_or_else(|| MetamodelError::Invalid("document has no root element".into()))?;

    let package = match local_name(&root.name) {
        "EPackage" => &root,
        "XMI" => {
            let packages: Vec<_> = root
                .children
                .iter()
                .filter(|c| local_name(&c.name) == "EPackage")
                .collect();
            match packages.as_slice() {
                [single] => *single,
                [] => return Err(MetamodelError::Invalid("no EPackage element".into())),
                _ => {
                    return Err(MetamodelError::Unsupported(
                        "multiple packages; only single-package metamodels are supported".into(),
                    ))
                }
            }
        }
        other => return Err(MetamodelError::Invalid(format!("unexpected root element <{other}>"))),
    };

    let mut datatypes = HashSet::new();
    let mut class_nodes = Vec::new();
    for child in &package.children {
        match child.name.as_str() {
            "eClassifiers" => match child.attribute("xsi:type").map(local_name) {
                Some("EClass") => class_nodes.push(child),
                Some("EDataType") => {
                    datatypes.insert(required(child, "name")?.to_string());
                }
                other => {
                    return Err(MetamodelError::Unsupported(format!(
                        "classifier `{}` of kind {}",
                        child.attribute("name").unwrap_or("?"),
                        other.unwrap_or("<none>")
                    )))
                }
            },
            "eSubpackages" => {
                return Err(MetamodelError::Unsupported(
                    "nested packages; only single-package metamodels are supported".into(),
                ))
            }
            _ => {}
        }
    }

    let class_names: HashSet<&str> =
        class_nodes.iter().filter_map(|n| n.attribute("name")).collect();

    let mut classes = Vec::new();
    for node in &class_nodes {
        classes.push(read_class(node, &class_names, &datatypes)?);
    }

    let root_class = match package.attribute("rootClass") {
        Some(r) => r.to_string(),
        None => classes
            .iter()
            .find(|c| !c.is_abstract)
            .map(|c| c.name.clone())
            .ok_or_else(|| MetamodelError::Invalid("no concrete class".into()))?,
    };
    let name = package.attribute("name").unwrap_or("metamodel");
    Metamodel::new(name, classes, &root_class)
}

fn read_class(
    node: &XmlNode,
    class_names: &HashSet<&str>,
    datatypes: &HashSet<String>,
) -> Result<MetaClass, MetamodelError> {
    let name = required(node, "name")?;
    let mut class = MetaClass::new(name);
    class.is_abstract = parse_bool(node, "abstract", false)?;
    if let Some(sups) = node.attribute("eSuperTypes") {
        for sup in sups.split_whitespace() {
            class.supertypes.push(type_reference(sup)?.0);
        }
    }
    for feature in node.children.iter().filter(|c| c.name == "eStructuralFeatures") {
        let fname = required(feature, "name")?;
        let (etype, builtin) = type_reference(required(feature, "eType")?)?;
        let lower = parse_bound(feature, "lowerBound", 0)?;
        let upper = match parse_bound(feature, "upperBound", 1)? {
            -1 => None,
            n if n >= 1 => Some(n as u32),
            n => {
                return Err(MetamodelError::Invalid(format!("{name}.{fname}: upperBound {n}")))
            }
        };
        if lower < 0 {
            return Err(MetamodelError::Invalid(format!("{name}.{fname}: lowerBound {lower}")));
        }
        let kind = match feature.attribute("xsi:type").map(local_name) {
            Some("EAttribute") => {
                if class_names.contains(etype.as_str()) {
                    return Err(MetamodelError::Invalid(format!(
                        "attribute {name}.{fname} is typed by class `{etype}`"
                    )));
                }
                if !builtin && !datatypes.contains(&etype) {
                    return Err(MetamodelError::Dangling(format!("{name}.{fname} -> {etype}")));
                }
                let kind = PrimitiveKind::from_datatype(&etype).ok_or_else(|| {
                    MetamodelError::Invalid(format!("{name}.{fname}: unknown datatype `{etype}`"))
                })?;
                MemberKind::Attribute(kind)
            }
            Some("EReference") => {
                if parse_bool(feature, "containment", false)? {
                    MemberKind::Containment(etype)
                } else {
                    MemberKind::CrossRef(etype)
                }
            }
            other => {
                return Err(MetamodelError::Unsupported(format!(
                    "feature {name}.{fname} of kind {}",
                    other.unwrap_or("<none>")
                )))
            }
        };
        class.members.push(Member {
            name: fname.into(),
            kind,
            lower_bound: lower as u32,
            upper_bound: upper,
            ordered: parse_bool(feature, "ordered", true)?,
        });
    }
    Ok(class)
}

fn local_name(qualified: &str) -> &str {
    qualified.rsplit(':').next().unwrap_or(qualified)
}

fn required<'a>(node: &'a XmlNode, attr: &str) -> Result<&'a str, MetamodelError> {
    node.attribute(attr).ok_or_else(|| {
        MetamodelError::Invalid(format!(
            "<{}> at line {} lacks `{attr}`",
            node.name, node.position.line
        ))
    })
}

fn parse_bool(node: &XmlNode, attr: &str, default: bool) -> Result<bool, MetamodelError> {
    match node.attribute(attr) {
        None => Ok(default),
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(v) => Err(MetamodelError::Invalid(format!("`{attr}` must be true or false, got `{v}`"))),
    }
}

fn parse_bound(node: &XmlNode, attr: &str, default: i64) -> Result<i64, MetamodelError> {
    match node.attribute(attr) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| MetamodelError::Invalid(format!("`{attr}` is not an integer: `{v}`"))),
    }
}

/// Resolves `#//Name`, `Name` and builtin `ecore:EDataType <uri>#//EString`
/// references to a bare classifier name, flagging builtin Ecore types.
fn type_reference(raw: &str) -> Result<(String, bool), MetamodelError> {
    let Some((prefix, fragment)) = raw.rsplit_once('#') else {
        return Ok((raw.trim().to_string(), false));
    };
    let prefix = prefix.trim();
    let builtin = prefix.ends_with(ECORE_URI);
    if !(prefix.is_empty() || builtin) {
        return Err(MetamodelError::Unsupported(format!(
            "reference `{raw}` points outside the package"
        )));
    }
    let path = fragment.trim_start_matches('/');
    if path.contains('/') {
        return Err(MetamodelError::Unsupported(format!("reference `{raw}` into a nested package")));
    }
    Ok((path.to_string(), builtin))
}
