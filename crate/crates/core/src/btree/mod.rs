//! Behavior trees: node descriptions, the tick engine and static validation.

pub mod ast;
mod engine;
mod validate;

use serde::{Deserialize, Serialize};

pub use ast::{child_id, NodeKind, NodeSpec, OpBinding, ParamValue, ROOT_ID};
pub use engine::{BehaviorTree, BtError, LeafExecutor, LeafTick, NodeView, ScriptedLeaves};
pub use validate::{structural_diagnostics, validate, Diagnostic, DiagnosticKind, OperationCatalog};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TickStatus {
    Success,
    Busy,
    Failure,
}

impl TickStatus {
    pub fn is_terminal(self) -> bool {
        self != TickStatus::Busy
    }
}

/// Status shown for a node between ticks. `Idle` means fresh or reset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeStatus {
    Idle,
    Busy,
    Success,
    Failure,
}

impl From<TickStatus> for NodeStatus {
    fn from(s: TickStatus) -> Self {
        match s {
            TickStatus::Success => NodeStatus::Success,
            TickStatus::Busy => NodeStatus::Busy,
            TickStatus::Failure => NodeStatus::Failure,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TransitionEvent {
    pub node_id: String,
    pub status: NodeStatus,
    pub tick_index: u64,
}
