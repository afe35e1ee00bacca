//! Plain tree description shared by the engine, the plan language and the
//! HTTP API.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const ROOT_ID: &str = "root";

/// Id of the `index`-th child of `parent`. Ids are dotted paths from the root.
pub fn child_id(parent: &str, index: usize) -> String {
    format!("{parent}.{index}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Number(f64),
    Text(String),
    Symbol { symbol: String },
}

impl ParamValue {
    pub fn symbol(name: &str) -> Self {
        ParamValue::Symbol {
            symbol: name.to_string(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Number(v) => Some(*v),
            ParamValue::Text(s) => s.parse().ok(),
            _ => None,
        }
    }

    /// Name carried by a text or symbol value.
    pub fn as_name(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) | ParamValue::Symbol { symbol: s } => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            ParamValue::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::Text(s) => write!(f, "{s:?}"),
            ParamValue::Symbol { symbol } => write!(f, "@{symbol}"),
        }
    }
}

/// A leaf's target: `component.Operation(params)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpBinding {
    pub component: String,
    pub operation: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

impl OpBinding {
    pub fn new(component: &str, operation: &str) -> Self {
        Self {
            component: component.to_string(),
            operation: operation.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: ParamValue) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn qualified_name(&self) -> String {
        format!("{}.{}", self.component, self.operation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeKind {
    Root,
    Sequence,
    Selector,
    Repeat {
        n: u32,
        #[serde(default)]
        strict: bool,
    },
    Reset {
        n: u32,
    },
    Leaf(OpBinding),
}

impl NodeKind {
    pub fn label(&self) -> &'static str {
        match self {
            NodeKind::Root => "Root",
            NodeKind::Sequence => "Sequence",
            NodeKind::Selector => "Selector",
            NodeKind::Repeat { .. } => "Repeat",
            NodeKind::Reset { .. } => "Reset",
            NodeKind::Leaf(_) => "Leaf",
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, NodeKind::Leaf(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    #[serde(flatten)]
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<NodeSpec>,
}

impl NodeSpec {
    pub fn new(kind: NodeKind, children: Vec<NodeSpec>) -> Self {
        Self { kind, children }
    }

    pub fn sequence(children: Vec<NodeSpec>) -> Self {
        Self::new(NodeKind::Sequence, children)
    }

    pub fn selector(children: Vec<NodeSpec>) -> Self {
        Self::new(NodeKind::Selector, children)
    }

    pub fn repeat(n: u32, child: NodeSpec) -> Self {
        Self::new(NodeKind::Repeat { n, strict: false }, vec![child])
    }

    pub fn reset(n: u32, child: NodeSpec) -> Self {
        Self::new(NodeKind::Reset { n }, vec![child])
    }

    pub fn leaf(binding: OpBinding) -> Self {
        Self::new(NodeKind::Leaf(binding), Vec::new())
    }

    /// Number of nodes in this subtree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(NodeSpec::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(NodeSpec::depth).max().unwrap_or(0)
    }

    /// Pre-order walk with the dotted id of each node, `id` naming `self`.
    pub fn walk<'a>(&'a self, id: &str, visit: &mut dyn FnMut(&str, &'a NodeSpec)) {
        visit(id, self);
        for (i, c) in self.children.iter().enumerate() {
            c.walk(&child_id(id, i), visit);
        }
    }

    pub fn leaves(&self) -> Vec<&OpBinding> {
        let mut out = Vec::new();
        self.walk(ROOT_ID, &mut |_, n| {
            if let NodeKind::Leaf(b) = &n.kind {
                out.push(b);
            }
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let spec = NodeSpec::repeat(
            3,
            NodeSpec::leaf(OpBinding::new("gripper", "Close").with("force", ParamValue::Number(0.5))),
        );
        let json = serde_json::to_value(&spec).unwrap();
        assert_eq!(json["type"], "repeat");
        assert_eq!(json["n"], 3);
        assert_eq!(json["children"][0]["type"], "leaf");
        assert_eq!(json["children"][0]["component"], "gripper");
        let back: NodeSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn param_values_round_trip_json() {
        for v in [
            ParamValue::Bool(true),
            ParamValue::Number(0.25),
            ParamValue::Text("home".into()),
            ParamValue::symbol("node_1"),
        ] {
            let text = serde_json::to_string(&v).unwrap();
            assert_eq!(serde_json::from_str::<ParamValue>(&text).unwrap(), v);
        }
    }

    #[test]
    fn walk_assigns_dotted_ids() {
        let spec = NodeSpec::sequence(vec![
            NodeSpec::leaf(OpBinding::new("a", "X")),
            NodeSpec::selector(vec![NodeSpec::leaf(OpBinding::new("b", "Y"))]),
        ]);
        let mut ids = Vec::new();
        spec.walk("root.0", &mut |id, _| ids.push(id.to_string()));
        assert_eq!(ids, ["root.0", "root.0.0", "root.0.1", "root.0.1.0"]);
    }
}
