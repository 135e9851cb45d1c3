//! Strict element walking over a parsed document and a small writer.

use roxmltree::{Node, NodeType};

use super::CredentialError;

pub(crate) const DECLARATION: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\" ?>";

/// Decodes the document and checks its prolog: an optional XML 1.0
/// declaration naming UTF-8, and no processing instructions anywhere.
pub(crate) fn parse_document(bytes: &[u8]) -> Result<String, CredentialError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CredentialError::Encoding(e.to_string()))?;
    let body = text.strip_prefix('\u{feff}').unwrap_or(text);
    if let Some(rest) = body.strip_prefix("<?") {
        let end = rest.find("?>").ok_or_else(|| CredentialError::Xml("unterminated declaration".into()))?;
        check_declaration(&rest[..end])?;
    }
    Ok(text.to_string())
}

fn check_declaration(decl: &str) -> Result<(), CredentialError> {
    let bad = |why: &str| CredentialError::Xml(format!("bad XML declaration: {why}"));
    let rest = decl.strip_prefix("xml").filter(|r| r.starts_with(char::is_whitespace)).ok_or_else(|| bad("not `xml`"))?;
    let mut attrs = Vec::new();
    let mut rest = rest.trim_start();
    while !rest.is_empty() {
        let (name, after) = rest.split_once('=').ok_or_else(|| bad("expected `=`"))?;
        let after = after.trim_start();
        let quote = after.chars().next().filter(|c| *c == '"' || *c == '\'').ok_or_else(|| bad("unquoted value"))?;
        let close = after[1..].find(quote).ok_or_else(|| bad("unterminated value"))?;
        attrs.push((name.trim(), &after[1..1 + close]));
        let tail = &after[close + 2..];
        if !tail.is_empty() && !tail.starts_with(char::is_whitespace) {
            return Err(bad("missing space between attributes"));
        }
        rest = tail.trim_start();
    }
    let names: Vec<&str> = attrs.iter().map(|(n, _)| *n).collect();
    if !matches!(names.as_slice(), ["version"] | ["version", "encoding"] | ["version", "encoding", "standalone"] | ["version", "standalone"]) {
        return Err(bad("unexpected attributes"));
    }
    for (name, value) in attrs {
        let ok = match name {
            "version" => value == "1.0",
            "encoding" => value.eq_ignore_ascii_case("UTF-8"),
            _ => value == "yes" || value == "no",
        };
        if !ok {
            return Err(bad(&format!("{name}=\"{value}\"")));
        }
    }
    Ok(())
}

/// Parses the decoded text, rejecting processing instructions.
pub(crate) fn parse_tree(text: &str) -> Result<roxmltree::Document<'_>, CredentialError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| CredentialError::Xml(e.to_string()))?;
    if doc.descendants().any(|n| n.is_pi()) {
        return Err(CredentialError::Xml("processing instructions are not allowed".into()));
    }
    Ok(doc)
}

pub(crate) fn schema(path: &str, detail: impl Into<String>) -> CredentialError {
    CredentialError::Schema { path: path.to_string(), detail: detail.into() }
}

/// Iterates the element children of a node in order, rejecting
/// non-whitespace text and processing instructions between them.
pub(crate) struct Children<'a, 'input> {
    nodes: Vec<Node<'a, 'input>>,
    at: usize,
    path: String,
}

impl<'a, 'input> Children<'a, 'input> {
    pub(crate) fn of(node: Node<'a, 'input>, path: &str) -> Result<Self, CredentialError> {
        let mut nodes = Vec::new();
        for child in node.children() {
            match child.node_type() {
                NodeType::Element => nodes.push(child),
                NodeType::Text => {
                    if !child.text().unwrap_or("").trim().is_empty() {
                        return Err(schema(path, "unexpected text content"));
                    }
                }
                NodeType::Comment => {}
                _ => return Err(schema(path, "unexpected node")),
            }
        }
        Ok(Children { nodes, at: 0, path: path.to_string() })
    }

    pub(crate) fn peek_is(&self, name: &str) -> bool {
        self.nodes.get(self.at).is_some_and(|n| n.tag_name().name() == name)
    }

    pub(crate) fn expect(&mut self, name: &str) -> Result<Node<'a, 'input>, CredentialError> {
        match self.nodes.get(self.at) {
            Some(n) if n.tag_name().name() == name => {
                self.at += 1;
                no_attributes(*n, &format!("{}/{}", self.path, name))?;
                Ok(*n)
            }
            Some(n) => Err(schema(
                &format!("{}/{}", self.path, n.tag_name().name()),
                format!("unexpected element, expected <{name}>"),
            )),
            None => Err(schema(&self.path, format!("missing <{name}>"))),
        }
    }

    /// Like `expect` but allows the element to carry attributes; the caller
    /// checks them.
    pub(crate) fn expect_with_attributes(&mut self, name: &str) -> Result<Node<'a, 'input>, CredentialError> {
        match self.nodes.get(self.at) {
            Some(n) if n.tag_name().name() == name => {
                self.at += 1;
                Ok(*n)
            }
            _ => {
                let saved = self.at;
                let r = self.expect(name);
                self.at = saved;
                r
            }
        }
    }

    pub(crate) fn optional(&mut self, name: &str) -> Result<Option<Node<'a, 'input>>, CredentialError> {
        if self.peek_is(name) {
            self.expect(name).map(Some)
        } else {
            Ok(None)
        }
    }

    pub(crate) fn text_of(&mut self, name: &str) -> Result<String, CredentialError> {
        let node = self.expect(name)?;
        leaf_text(node, &format!("{}/{}", self.path, name))
    }

    pub(crate) fn finish(self) -> Result<(), CredentialError> {
        match self.nodes.get(self.at) {
            None => Ok(()),
            Some(n) => Err(schema(
                &format!("{}/{}", self.path, n.tag_name().name()),
                "unknown element",
            )),
        }
    }
}

pub(crate) fn no_attributes(node: Node<'_, '_>, path: &str) -> Result<(), CredentialError> {
    match node.attributes().next() {
        Some(a) => Err(schema(path, format!("unknown attribute `{}`", a.name()))),
        None => Ok(()),
    }
}

/// Trimmed text of an element that must not contain child elements.
pub(crate) fn leaf_text(node: Node<'_, '_>, path: &str) -> Result<String, CredentialError> {
    let mut text = String::new();
    for child in node.children() {
        match child.node_type() {
            NodeType::Text => text.push_str(child.text().unwrap_or("")),
            NodeType::Comment => {}
            NodeType::Element => {
                return Err(schema(&format!("{}/{}", path, child.tag_name().name()), "unknown element"))
            }
            _ => return Err(schema(path, "unexpected node")),
        }
    }
    Ok(text.trim().to_string())
}

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
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

pub(crate) fn escape_attr(text: &str) -> String {
    escape(text).replace('"', "&quot;")
}

/// Pretty or compact element writer.
pub(crate) struct Writer {
    out: String,
    indent: Option<&'static str>,
    depth: usize,
}

impl Writer {
    pub(crate) fn pretty(indent: &'static str) -> Self {
        let mut out = String::from(DECLARATION);
        out.push('\n');
        Writer { out, indent: Some(indent), depth: 0 }
    }

    pub(crate) fn compact() -> Self {
        Writer { out: String::new(), indent: None, depth: 0 }
    }

    fn pad(&mut self) {
        if let Some(indent) = self.indent {
            for _ in 0..self.depth {
                self.out.push_str(indent);
            }
        }
    }

    fn newline(&mut self) {
        if self.indent.is_some() {
            self.out.push('\n');
        }
    }

    pub(crate) fn open(&mut self, name: &str) {
        self.open_with(name, &[]);
    }

    pub(crate) fn open_with(&mut self, name: &str, attrs: &[(&str, String)]) {
        self.pad();
        self.out.push('<');
        self.out.push_str(name);
        push_attrs(&mut self.out, attrs);
        self.out.push('>');
        self.newline();
        self.depth += 1;
    }

    pub(crate) fn close(&mut self, name: &str) {
        self.depth -= 1;
        self.pad();
        self.out.push_str("</");
        self.out.push_str(name);
        self.out.push('>');
        self.newline();
    }

    pub(crate) fn leaf(&mut self, name: &str, text: &str) {
        self.leaf_with(name, &[], text);
    }

    pub(crate) fn leaf_with(&mut self, name: &str, attrs: &[(&str, String)], text: &str) {
        self.pad();
        self.out.push('<');
        self.out.push_str(name);
        push_attrs(&mut self.out, attrs);
        self.out.push('>');
        self.out.push_str(&escape(text));
        self.out.push_str("</");
        self.out.push_str(name);
        self.out.push('>');
        self.newline();
    }

    /// `<outer>text<inner>value</inner></outer>` on one line.
    pub(crate) fn mixed(&mut self, outer: &str, text: &str, inner: &str, value: &str) {
        self.pad();
        self.out.push_str(&format!(
            "<{outer}>{}<{inner}>{}</{inner}></{outer}>",
            escape(text),
            escape(value)
        ));
        self.newline();
    }

    pub(crate) fn empty(&mut self, name: &str) {
        self.pad();
        self.out.push_str(&format!("<{name}/>"));
        self.newline();
    }

    pub(crate) fn finish(self) -> String {
        self.out
    }
}

fn push_attrs(out: &mut String, attrs: &[(&str, String)]) {
    for (k, v) in attrs {
        out.push(' ');
        out.push_str(k);
        out.push_str("=\"");
        out.push_str(&escape_attr(v));
        out.push('"');
    }
}
