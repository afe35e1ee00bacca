//! Static checks on a tree description.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{NodeKind, NodeSpec, ROOT_ID};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Arity,
    ZeroCount,
    MisplacedRoot,
    UnboundOperation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub node_id: String,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.node_id, self.message)
    }
}

/// Answers whether `component.operation` can be invoked.
pub trait OperationCatalog {
    fn has_operation(&self, component: &str, operation: &str) -> bool;
}

impl<F: Fn(&str, &str) -> bool> OperationCatalog for F {
    fn has_operation(&self, component: &str, operation: &str) -> bool {
        self(component, operation)
    }
}

/// Ids are assigned as in the engine: a non-root top node is `root.0`.
fn top_id(spec: &NodeSpec) -> &'static str {
    if spec.kind == NodeKind::Root {
        ROOT_ID
    } else {
        "root.0"
    }
}

/// Arity and count problems that make a tree unexecutable.
pub fn structural_diagnostics(spec: &NodeSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let top = top_id(spec);
    spec.walk(top, &mut |id, node| {
        let n = node.children.len();
        let mut push = |kind, message: String| {
            out.push(Diagnostic {
                node_id: id.to_string(),
                kind,
                message,
            })
        };
        match &node.kind {
            NodeKind::Root => {
                if id != ROOT_ID {
                    push(DiagnosticKind::MisplacedRoot, "Root may only appear at the top".into());
                }
                if n != 1 {
                    push(DiagnosticKind::Arity, format!("Root requires exactly one child, found {n}"));
                }
            }
            NodeKind::Repeat { n: count, .. } | NodeKind::Reset { n: count } => {
                let label = node.kind.label();
                if n != 1 {
                    push(DiagnosticKind::Arity, format!("{label} requires exactly one child, found {n}"));
                }
                if *count == 0 {
                    push(DiagnosticKind::ZeroCount, format!("{label} count must be at least 1"));
                }
            }
            NodeKind::Leaf(b) => {
                if n != 0 {
                    push(
                        DiagnosticKind::Arity,
                        format!("leaf {} cannot have children", b.qualified_name()),
                    );
                }
            }
            NodeKind::Sequence | NodeKind::Selector => {}
        }
    });
    out
}

/// Every problem with the tree. When `catalog` is given, leaves whose
/// operation it does not know are reported too. Empty iff executable.
pub fn validate(spec: &NodeSpec, catalog: Option<&dyn OperationCatalog>) -> Vec<Diagnostic> {
    let mut out = structural_diagnostics(spec);
    if let Some(catalog) = catalog {
        spec.walk(top_id(spec), &mut |id, node| {
            if let NodeKind::Leaf(b) = &node.kind {
                if !catalog.has_operation(&b.component, &b.operation) {
                    out.push(Diagnostic {
                        node_id: id.to_string(),
                        kind: DiagnosticKind::UnboundOperation,
                        message: format!("no operation {}", b.qualified_name()),
                    });
                }
            }
        });
    }
    out.sort_by(|a, b| a.node_id.cmp(&b.node_id));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btree::ast::OpBinding;

    fn leaf(c: &str, o: &str) -> NodeSpec {
        NodeSpec::leaf(OpBinding::new(c, o))
    }

    #[test]
    fn repeat_with_two_children() {
        let spec = NodeSpec::new(
            NodeKind::Repeat { n: 2, strict: false },
            vec![leaf("arm", "Move"), leaf("arm", "Move")],
        );
        let d = validate(&spec, None);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].message, "Repeat requires exactly one child, found 2");
    }

    #[test]
    fn unbound_operation() {
        let spec = NodeSpec::sequence(vec![leaf("arm", "FlyToMoon")]);
        let known = |c: &str, o: &str| c == "arm" && o == "Move";
        let d = validate(&spec, Some(&known));
        assert_eq!(d[0].kind, DiagnosticKind::UnboundOperation);
        assert_eq!(d[0].node_id, "root.0.0");
    }

    #[test]
    fn zero_count_and_nested_root() {
        let spec = NodeSpec::sequence(vec![
            NodeSpec::reset(0, leaf("a", "b")),
            NodeSpec::new(NodeKind::Root, vec![leaf("a", "b")]),
        ]);
        let kinds: Vec<DiagnosticKind> = validate(&spec, None).iter().map(|d| d.kind).collect();
        assert_eq!(kinds, [DiagnosticKind::ZeroCount, DiagnosticKind::MisplacedRoot]);
    }
}
