//! Tick-driven executor over an arena of nodes.
//!
//! Sequence and Selector keep the index of a BUSY child and resume there on
//! the next tick. Within one tick they move on through siblings that finish.
//! A node that finishes latches its status and is not ticked again until its
//! subtree is reset. Root is the exception: it always forwards the tick.
//!
//! Repeat returns BUSY after each terminal child result below `n`, so its
//! child is ticked at most once per root tick. Reset returns FAILURE without
//! latching when it spends one of its resets, letting a later tick retry.

use serde::{Deserialize, Serialize};

use super::ast::{child_id, NodeKind, NodeSpec, OpBinding, ROOT_ID};
use super::validate::{structural_diagnostics, Diagnostic};
use super::{NodeStatus, TickStatus, TransitionEvent};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum BtError {
    #[error("malformed tree: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    MalformedTree(Vec<Diagnostic>),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

/// What a leaf sees when it is ticked.
#[derive(Debug)]
pub struct LeafTick<'a> {
    pub node_id: &'a str,
    pub binding: &'a OpBinding,
    /// First tick since the leaf was created or reset.
    pub fresh: bool,
    pub tick_index: u64,
}

pub trait LeafExecutor {
    fn tick(&mut self, leaf: &LeafTick<'_>) -> TickStatus;

    /// The leaf was reset while BUSY; any operation it started is abandoned.
    fn halt(&mut self, _node_id: &str) {}
}

#[derive(Clone, Debug)]
struct Node {
    id: String,
    kind: NodeKind,
    children: Vec<usize>,
    status: NodeStatus,
    latched: Option<TickStatus>,
    cursor: usize,
    count: u32,
    resets: u32,
}

/// Read-only view of one node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeView {
    pub id: String,
    pub kind: NodeKind,
    pub children: Vec<String>,
    pub status: NodeStatus,
    pub counter: u32,
    pub resets_used: u32,
}

#[derive(Clone, Debug)]
pub struct BehaviorTree {
    nodes: Vec<Node>,
    tick_index: u64,
    events: Vec<TransitionEvent>,
}

impl BehaviorTree {
    /// Builds the arena. A spec whose top node is not `Root` is wrapped in one.
    pub fn new(spec: &NodeSpec) -> Result<Self, BtError> {
        let wrapped;
        let spec = if spec.kind == NodeKind::Root {
            spec
        } else {
            wrapped = NodeSpec::new(NodeKind::Root, vec![spec.clone()]);
            &wrapped
        };
        let diags = structural_diagnostics(spec);
        if !diags.is_empty() {
            return Err(BtError::MalformedTree(diags));
        }
        let mut tree = Self {
            nodes: Vec::with_capacity(spec.size()),
            tick_index: 0,
            events: Vec::new(),
        };
        tree.push(spec, ROOT_ID.to_string());
        Ok(tree)
    }

    fn push(&mut self, spec: &NodeSpec, id: String) -> usize {
        let index = self.nodes.len();
        self.nodes.push(Node {
            id: id.clone(),
            kind: spec.kind.clone(),
            children: Vec::with_capacity(spec.children.len()),
            status: NodeStatus::Idle,
            latched: None,
            cursor: 0,
            count: 0,
            resets: 0,
        });
        for (k, c) in spec.children.iter().enumerate() {
            let ci = self.push(c, child_id(&id, k));
            self.nodes[index].children.push(ci);
        }
        index
    }

    /// Number of root ticks dispatched so far.
    pub fn tick_count(&self) -> u64 {
        self.tick_index
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root_status(&self) -> NodeStatus {
        self.nodes[0].status
    }

    fn index_of(&self, id: &str) -> Result<usize, BtError> {
        self.nodes
            .iter()
            .position(|n| n.id == id)
            .ok_or_else(|| BtError::UnknownNode(id.to_string()))
    }

    pub fn node(&self, id: &str) -> Result<NodeView, BtError> {
        Ok(self.view(self.index_of(id)?))
    }

    fn view(&self, i: usize) -> NodeView {
        let n = &self.nodes[i];
        NodeView {
            id: n.id.clone(),
            kind: n.kind.clone(),
            children: n.children.iter().map(|&c| self.nodes[c].id.clone()).collect(),
            status: n.status,
            counter: n.count,
            resets_used: n.resets,
        }
    }

    /// All nodes in pre-order.
    pub fn nodes(&self) -> Vec<NodeView> {
        (0..self.nodes.len()).map(|i| self.view(i)).collect()
    }

    /// Transition events recorded since the last drain.
    pub fn drain_events(&mut self) -> Vec<TransitionEvent> {
        std::mem::take(&mut self.events)
    }

    /// Dispatches one tick from the root.
    pub fn tick(&mut self, exec: &mut dyn LeafExecutor) -> TickStatus {
        let status = self.tick_node(0, exec);
        self.tick_index += 1;
        status
    }

    /// Returns the subtree at `id` to its fresh state. The ids of leaves that
    /// were BUSY are returned so the caller can halt their operations.
    pub fn reset_subtree(&mut self, id: &str) -> Result<Vec<String>, BtError> {
        let i = self.index_of(id)?;
        let mut busy = Vec::new();
        self.reset_index(i, &mut busy);
        Ok(busy)
    }

    pub fn reset(&mut self) -> Vec<String> {
        let mut busy = Vec::new();
        self.reset_index(0, &mut busy);
        busy
    }

    fn reset_index(&mut self, i: usize, busy: &mut Vec<String>) {
        let n = &mut self.nodes[i];
        if n.kind.is_leaf() && n.status == NodeStatus::Busy {
            busy.push(n.id.clone());
        }
        n.latched = None;
        n.cursor = 0;
        n.count = 0;
        n.resets = 0;
        self.set_status(i, NodeStatus::Idle);
        for k in 0..self.nodes[i].children.len() {
            let c = self.nodes[i].children[k];
            self.reset_index(c, busy);
        }
    }

    fn set_status(&mut self, i: usize, status: NodeStatus) {
        let n = &mut self.nodes[i];
        if n.status != status {
            n.status = status;
            self.events.push(TransitionEvent {
                node_id: n.id.clone(),
                status,
                tick_index: self.tick_index,
            });
        }
    }

    fn finish(&mut self, i: usize, status: TickStatus) -> TickStatus {
        self.set_status(i, status.into());
        if status != TickStatus::Busy {
            self.nodes[i].latched = Some(status);
        }
        status
    }

    fn tick_node(&mut self, i: usize, exec: &mut dyn LeafExecutor) -> TickStatus {
        if let Some(done) = self.nodes[i].latched {
            return done;
        }
        match self.nodes[i].kind {
            NodeKind::Root => {
                let s = self.tick_node(self.nodes[i].children[0], exec);
                self.set_status(i, s.into());
                s
            }
            NodeKind::Leaf(ref binding) => {
                let n = &self.nodes[i];
                let s = exec.tick(&LeafTick {
                    node_id: &n.id,
                    binding,
                    fresh: n.status == NodeStatus::Idle,
                    tick_index: self.tick_index,
                });
                self.finish(i, s)
            }
            NodeKind::Sequence => self.tick_composite(i, exec, TickStatus::Success),
            NodeKind::Selector => self.tick_composite(i, exec, TickStatus::Failure),
            NodeKind::Repeat { n, strict } => {
                if self.nodes[i].count >= n {
                    return self.finish(i, TickStatus::Success);
                }
                let child = self.nodes[i].children[0];
                match self.tick_node(child, exec) {
                    TickStatus::Busy => self.finish(i, TickStatus::Busy),
                    TickStatus::Failure if strict => self.finish(i, TickStatus::Failure),
                    _ => {
                        self.nodes[i].count += 1;
                        if self.nodes[i].count >= n {
                            return self.finish(i, TickStatus::Success);
                        }
                        self.reset_index(child, &mut Vec::new());
                        self.finish(i, TickStatus::Busy)
                    }
                }
            }
            NodeKind::Reset { n } => {
                let child = self.nodes[i].children[0];
                let s = self.tick_node(child, exec);
                if s == TickStatus::Failure && self.nodes[i].resets < n {
                    self.nodes[i].resets += 1;
                    self.reset_index(child, &mut Vec::new());
                    self.set_status(i, NodeStatus::Failure);
                    return TickStatus::Failure;
                }
                self.finish(i, s)
            }
        }
    }

    /// Sequence when `continue_on` is SUCCESS, Selector when it is FAILURE.
    fn tick_composite(&mut self, i: usize, exec: &mut dyn LeafExecutor, continue_on: TickStatus) -> TickStatus {
        while self.nodes[i].cursor < self.nodes[i].children.len() {
            let child = self.nodes[i].children[self.nodes[i].cursor];
            let s = self.tick_node(child, exec);
            if s == continue_on {
                self.nodes[i].cursor += 1;
                continue;
            }
            return self.finish(i, s);
        }
        self.finish(i, continue_on)
    }
}

/// Leaf executor that replays fixed outcome scripts; the last outcome of a
/// script repeats once it is exhausted. Unscripted leaves succeed.
#[derive(Clone, Debug, Default)]
pub struct ScriptedLeaves {
    scripts: std::collections::BTreeMap<String, Vec<TickStatus>>,
    calls: std::collections::BTreeMap<String, usize>,
    /// (tick index, leaf id) for every leaf tick, in order.
    pub log: Vec<(u64, String)>,
}

impl ScriptedLeaves {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn script(mut self, leaf_id: &str, outcomes: Vec<TickStatus>) -> Self {
        self.scripts.insert(leaf_id.to_string(), outcomes);
        self
    }
}

impl LeafExecutor for ScriptedLeaves {
    fn tick(&mut self, leaf: &LeafTick<'_>) -> TickStatus {
        self.log.push((leaf.tick_index, leaf.node_id.to_string()));
        let k = self.calls.entry(leaf.node_id.to_string()).or_insert(0);
        let out = match self.scripts.get(leaf.node_id) {
            Some(s) if !s.is_empty() => s[(*k).min(s.len() - 1)],
            _ => TickStatus::Success,
        };
        *k += 1;
        out
    }
}
