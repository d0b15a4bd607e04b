//! Minimal element tree over quick-xml events, shared by the metamodel
//! loader and the model XML reader.

use quick_xml::escape::resolve_predefined_entity;
use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};

use crate::diagnostic::{LineIndex, Position};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct XmlNode {
    pub name: String,
    pub attributes: Vec<(String, String)>,
    pub children: Vec<XmlNode>,
    /// Concatenated character data directly inside this element.
    pub text: String,
    pub position: Position,
}

impl XmlNode {
    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct XmlSyntaxError {
    pub position: Position,
    pub message: String,
}

/// Parses a document and returns its root element, or `None` for a document
/// without any element.
pub(crate) fn parse_document(text: &str) -> Result<Option<XmlNode>, XmlSyntaxError> {
    let index = LineIndex::new(text);
    let mut reader = Reader::from_str(text);
    let mut stack: Vec<XmlNode> = Vec::new();
    let mut root: Option<XmlNode> = None;

    let fail = |offset: u64, message: String| XmlSyntaxError {
        position: index.position(offset as usize),
        message,
    };

    loop {
        let before = reader.buffer_position();
        let event = reader
            .read_event()
            .map_err(|e| fail(reader.error_position(), e.to_string()))?;
        match event {
            Event::Start(start) => {
                let node = open_node(&start, index.position(before as usize))
                    .map_err(|m| fail(before, m))?;
                if root.is_some() && stack.is_empty() {
                    return Err(fail(before, "multiple root elements".into()));
                }
                stack.push(node);
            }
            Event::Empty(start) => {
                let node = open_node(&start, index.position(before as usize))
                    .map_err(|m| fail(before, m))?;
                attach(&mut stack, &mut root, node).map_err(|m| fail(before, m))?;
            }
            Event::End(_) => {
                let node = stack.pop().ok_or_else(|| fail(before, "unexpected end tag".into()))?;
                attach(&mut stack, &mut root, node).map_err(|m| fail(before, m))?;
            }
            Event::Text(t) => {
                let content = t.xml10_content();
                match stack.last_mut() {
                    Some(node) => node.text.push_str(&content),
                    None if content.trim().is_empty() => {}
                    None => return Err(fail(before, "text outside of root element".into())),
                }
            }
            Event::CData(c) => {
                if let Some(node) = stack.last_mut() {
                    node.text.push_str(&c.xml10_content());
                }
            }
            Event::GeneralRef(r) => {
                let resolved = match r.resolve_char_ref() {
                    Ok(Some(ch)) => ch.to_string(),
                    Ok(None) => resolve_predefined_entity(&r)
                        .ok_or_else(|| fail(before, format!("unknown entity `&{};`", &*r)))?
                        .to_string(),
                    Err(e) => return Err(fail(before, e.to_string())),
                };
                if let Some(node) = stack.last_mut() {
                    node.text.push_str(&resolved);
                }
            }
            Event::Eof => {
                if let Some(open) = stack.last() {
                    return Err(fail(
                        reader.buffer_position(),
                        format!("unclosed element <{}>", open.name),
                    ));
                }
                return Ok(root);
            }
            Event::Comment(_) | Event::Decl(_) | Event::PI(_) | Event::DocType(_) => {}
        }
    }
}

fn open_node(start: &BytesStart<'_>, position: Position) -> Result<XmlNode, String> {
    let name = start.name().as_ref().to_owned();
    let mut attributes = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| e.to_string())?;
        let key = attr.key.as_ref().to_owned();
        let value = attr
            .normalized_value(XmlVersion::Implicit1_0)
            .map_err(|e| e.to_string())?
            .into_owned();
        attributes.push((key, value));
    }
    Ok(XmlNode { name, attributes, children: Vec::new(), text: String::new(), position })
}

fn attach(stack: &mut [XmlNode], root: &mut Option<XmlNode>, node: XmlNode) -> Result<(), String> {
    match stack.last_mut() {
        Some(parent) => parent.children.push(node),
        None if root.is_some() => return Err("multiple root elements".into()),
        None => *root = Some(node),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_tree_with_text_and_entities() {
        let doc = parse_document("<?xml version=\"1.0\"?>\n<a x=\"1\"><b>t &amp; &#65;</b><c/></a>")
            .unwrap()
            .unwrap();
        assert_eq!(doc.name, "a");
        assert_eq!(doc.attribute("x"), Some("1"));
        assert_eq!(doc.children[0].text, "t & A");
        assert_eq!(doc.children[1].name, "c");
        assert_eq!(doc.position.line, 2);
    }

    #[test]
    fn reports_positions_for_malformed_input() {
        let err = parse_document("<a>\n  <b></c>\n</a>").unwrap_err();
        assert_eq!(err.position.line, 2);
        assert!(parse_document("<a>").is_err());
        assert!(parse_document("<a/><b/>").is_err());
    }

    #[test]
    fn empty_document_has_no_root() {
        assert_eq!(parse_document("<?xml version=\"1.0\"?>\n").unwrap(), None);
    }
}
