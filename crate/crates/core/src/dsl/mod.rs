//! Text form of behavior-tree plans (`.bt` files).
//!
//! ```text
//! plan pick
//! sequence {
//!   perception.DetectObjects()
//!   repeat 2 strict {
//!     arm.Move(goal=@home, speed=0.2)
//!   }
//! }
//! ```
//!
//! `->` and `?` are accepted for `sequence` and `selector`. Serialization is
//! canonical: two-space indent, parameters in key order, strings quoted.

mod lexer;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::btree::{child_id, NodeKind, NodeSpec, OpBinding, ParamValue};
pub use lexer::{is_ident, Span};
use lexer::{quote, tokenize, Tok};

/// Id given to the top node of a plan, matching the engine's numbering.
pub const TOP_ID: &str = "root.0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{}:{}: {message}", span.line, span.column)]
pub struct SyntaxError {
    pub message: String,
    pub span: Span,
}

impl SyntaxError {
    /// Clamps `span` to lie within `src`.
    fn new(message: String, mut span: Span, src: &str) -> Self {
        if src.is_empty() {
            span.offset = 0;
            span.len = 0;
        } else {
            if span.offset >= src.len() {
                let last = src.char_indices().last().map_or(0, |(i, _)| i);
                span = position_of(src, last);
            }
            span.len = span.len.clamp(1, src.len() - span.offset);
        }
        Self { message, span }
    }
}

fn position_of(src: &str, offset: usize) -> Span {
    let before = &src[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    Span {
        line,
        column,
        offset,
        len: 1,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub root: NodeSpec,
    /// Source location of each node, keyed by node id. Empty for documents
    /// not parsed from text.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub spans: BTreeMap<String, Span>,
}

/// Structural equality; spans are ignored.
impl PartialEq for PlanDocument {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.root == other.root
    }
}

impl PlanDocument {
    pub fn new(name: Option<&str>, root: NodeSpec) -> Self {
        Self {
            name: name.map(str::to_string),
            root,
            spans: BTreeMap::new(),
        }
    }

    /// Leaf bindings keyed by node id.
    pub fn bindings(&self) -> BTreeMap<String, OpBinding> {
        let mut out = BTreeMap::new();
        self.root.walk(TOP_ID, &mut |id, n| {
            if let NodeKind::Leaf(b) = &n.kind {
                out.insert(id.to_string(), b.clone());
            }
        });
        out
    }

    pub fn span_of(&self, node_id: &str) -> Option<Span> {
        self.spans.get(node_id).copied()
    }

    /// Parses the JSON mirror of the AST and checks that it can be written
    /// back as text.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let doc: PlanDocument = serde_json::from_str(text).map_err(|e| e.to_string())?;
        doc.check_names()?;
        Ok(doc)
    }

    /// Component, operation and parameter names must be identifiers and
    /// numbers finite for the text form to exist.
    pub fn check_names(&self) -> Result<(), String> {
        let mut problem = None;
        self.root.walk(TOP_ID, &mut |id, n| {
            if problem.is_some() {
                return;
            }
            if n.kind == NodeKind::Root {
                problem = Some(format!("{id}: Root cannot appear in a plan body"));
            }
            if let NodeKind::Leaf(b) = &n.kind {
                for name in [&b.component, &b.operation] {
                    if !is_ident(name) {
                        problem = Some(format!("{id}: `{name}` is not an identifier"));
                    }
                }
                for (k, v) in &b.params {
                    if !is_ident(k) {
                        problem = Some(format!("{id}: parameter `{k}` is not an identifier"));
                    }
                    match v {
                        ParamValue::Number(x) if !x.is_finite() => {
                            problem = Some(format!("{id}: parameter `{k}` is not finite"));
                        }
                        ParamValue::Symbol { symbol } if !is_ident(symbol) => {
                            problem = Some(format!("{id}: symbol `{symbol}` is not an identifier"));
                        }
                        _ => {}
                    }
                }
            }
        });
        problem.map_or(Ok(()), Err)
    }
}

impl fmt::Display for PlanDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(Tok, Span)>,
    pos: usize,
    spans: BTreeMap<String, Span>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn next(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: String) -> SyntaxError {
        SyntaxError::new(message, self.span(), self.src)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Span, SyntaxError> {
        if *self.peek() == want {
            Ok(self.next().1)
        } else {
            Err(self.error_here(format!("expected {what}, found {}", self.peek().describe())))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => Err(self.error_here(format!("expected {what}, found {}", other.describe()))),
        }
    }

    fn count(&mut self, keyword: &str) -> Result<u32, SyntaxError> {
        match self.peek().clone() {
            Tok::Number(_, raw) if raw.bytes().all(|b| b.is_ascii_digit()) => match raw.parse::<u32>() {
                Ok(n) => {
                    self.next();
                    Ok(n)
                }
                Err(_) => Err(self.error_here(format!("{keyword} count `{raw}` is too large"))),
            },
            other => Err(self.error_here(format!(
                "expected a non-negative integer count after `{keyword}`, found {}",
                other.describe()
            ))),
        }
    }

    fn document(&mut self) -> Result<PlanDocument, SyntaxError> {
        let mut name = None;
        if matches!(self.peek(), Tok::Ident(s) if s == "plan")
            && matches!(self.peek_at(1), Tok::Ident(_) | Tok::Str(_))
        {
            self.next();
            name = Some(match self.next().0 {
                Tok::Ident(s) | Tok::Str(s) => s,
                _ => unreachable!(),
            });
        }
        if *self.peek() == Tok::Eof {
            return Err(self.error_here("expected a node".into()));
        }
        let root = self.node(TOP_ID)?;
        if *self.peek() != Tok::Eof {
            return Err(self.error_here(format!(
                "expected end of input after the top node, found {}",
                self.peek().describe()
            )));
        }
        Ok(PlanDocument {
            name,
            root,
            spans: std::mem::take(&mut self.spans),
        })
    }

    fn node(&mut self, id: &str) -> Result<NodeSpec, SyntaxError> {
        let start = self.span();
        let kind = match self.peek().clone() {
            Tok::Arrow => {
                self.next();
                NodeKind::Sequence
            }
            Tok::Question => {
                self.next();
                NodeKind::Selector
            }
            Tok::Ident(_) if *self.peek_at(1) == Tok::Dot => {
                let leaf = self.leaf()?;
                self.spans.insert(id.to_string(), self.cover(start));
                return Ok(NodeSpec::leaf(leaf));
            }
            Tok::Ident(word) => {
                self.next();
                match word.to_ascii_lowercase().as_str() {
                    "sequence" => NodeKind::Sequence,
                    "selector" => NodeKind::Selector,
                    "repeat" => {
                        let n = self.count("repeat")?;
                        let strict = matches!(self.peek(), Tok::Ident(s) if s == "strict");
                        if strict {
                            self.next();
                        }
                        NodeKind::Repeat { n, strict }
                    }
                    "reset" => NodeKind::Reset {
                        n: self.count("reset")?,
                    },
                    _ => {
                        return Err(SyntaxError::new(
                            format!("unknown node keyword `{word}`"),
                            start,
                            self.src,
                        ))
                    }
                }
            }
            other => return Err(self.error_here(format!("expected a node, found {}", other.describe()))),
        };
        self.expect(Tok::LBrace, "`{`")?;
        let mut children = Vec::new();
        while !matches!(self.peek(), Tok::RBrace | Tok::Eof) {
            let cid = child_id(id, children.len());
            children.push(self.node(&cid)?);
        }
        if *self.peek() == Tok::Eof {
            return Err(SyntaxError::new(
                format!("unclosed `{{` of {} opened here", kind.label().to_lowercase()),
                start,
                self.src,
            ));
        }
        self.next();
        self.spans.insert(id.to_string(), self.cover(start));
        Ok(NodeSpec::new(kind, children))
    }

    /// Span from `start` to the end of the previous token.
    fn cover(&self, start: Span) -> Span {
        let prev = self.toks[self.pos.saturating_sub(1)].1;
        Span {
            len: (prev.offset + prev.len).saturating_sub(start.offset),
            ..start
        }
    }

    fn leaf(&mut self) -> Result<OpBinding, SyntaxError> {
        let component = self.ident("a component name")?;
        self.expect(Tok::Dot, "`.`")?;
        let operation = self.ident("an operation name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut binding = OpBinding::new(&component, &operation);
        while *self.peek() != Tok::RParen {
            let key_span = self.span();
            let key = self.ident("a parameter name or `)`")?;
            self.expect(Tok::Eq, "`=`")?;
            let value = match self.next() {
                (Tok::Str(s), _) => ParamValue::Text(s),
                (Tok::Number(v, _), _) => ParamValue::Number(v),
                (Tok::Symbol(s), _) => ParamValue::Symbol { symbol: s },
                (Tok::Ident(s), _) if s == "true" => ParamValue::Bool(true),
                (Tok::Ident(s), _) if s == "false" => ParamValue::Bool(false),
                (Tok::Ident(s), _) => ParamValue::Text(s),
                (other, span) => {
                    return Err(SyntaxError::new(
                        format!("expected a value for `{key}`, found {}", other.describe()),
                        span,
                        self.src,
                    ))
                }
            };
            if binding.params.insert(key.clone(), value).is_some() {
                return Err(SyntaxError::new(format!("duplicate parameter `{key}`"), key_span, self.src));
            }
            if *self.peek() == Tok::Comma {
                self.next();
            } else if *self.peek() != Tok::RParen {
                return Err(self.error_here(format!("expected `,` or `)`, found {}", self.peek().describe())));
            }
        }
        self.next();
        Ok(binding)
    }
}

pub fn parse(src: &str) -> Result<PlanDocument, SyntaxError> {
    let toks = tokenize(src)?;
    Parser {
        src,
        toks,
        pos: 0,
        spans: BTreeMap::new(),
    }
    .document()
}

/// Canonical text of a document.
pub fn serialize(doc: &PlanDocument) -> String {
    let mut out = String::new();
    if let Some(name) = &doc.name {
        out.push_str("plan ");
        out.push_str(&if is_ident(name) && name != "plan" { name.clone() } else { quote(name) });
        out.push('\n');
    }
    write_node(&doc.root, 0, &mut out);
    out
}

fn write_value(v: &ParamValue, out: &mut String) {
    match v {
        ParamValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ParamValue::Number(x) => out.push_str(&format!("{x}")),
        ParamValue::Text(s) => out.push_str(&quote(s)),
        ParamValue::Symbol { symbol } => {
            out.push('@');
            out.push_str(symbol);
        }
    }
}

fn write_node(node: &NodeSpec, depth: usize, out: &mut String) {
    let indent = "  ".repeat(depth);
    out.push_str(&indent);
    let head = match &node.kind {
        NodeKind::Leaf(b) => {
            out.push_str(&format!("{}.{}(", b.component, b.operation));
            for (k, (key, v)) in b.params.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                out.push_str(key);
                out.push('=');
                write_value(v, out);
            }
            out.push_str(")\n");
            return;
        }
        NodeKind::Sequence | NodeKind::Root => "sequence".to_string(),
        NodeKind::Selector => "selector".to_string(),
        NodeKind::Repeat { n, strict: false } => format!("repeat {n}"),
        NodeKind::Repeat { n, strict: true } => format!("repeat {n} strict"),
        NodeKind::Reset { n } => format!("reset {n}"),
    };
    out.push_str(&head);
    if node.children.is_empty() {
        out.push_str(" { }\n");
        return;
    }
    out.push_str(" {\n");
    for c in &node.children {
        write_node(c, depth + 1, out);
    }
    out.push_str(&indent);
    out.push_str("}\n");
}
