use serde_json::json;

use super::{
    unknown_op, Component, ComponentClass, ComponentDescriptor, OpError, OpOutcome, OperationSignature, Params, World,
};
use crate::predicator::{Symbol, SymbolKind};

/// Tool power switch shared by every tool in the scene, plus the tool frames
/// and their `in_position` / `powered` signals.
#[derive(Debug)]
pub struct PowerTool {
    name: String,
}

impl PowerTool {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string() }
    }
}

impl Component for PowerTool {
    fn descriptor(&self) -> ComponentDescriptor {
        ComponentDescriptor {
            name: self.name.clone(),
            class: ComponentClass::PowerTool,
            operations: vec![
                OperationSignature::new("ToolOn", vec![]),
                OperationSignature::new("ToolOff", vec![]),
            ],
            predicates: vec!["ToolInPosition".into(), "ToolPowered".into()],
            symbol_kinds: vec![SymbolKind::Frame],
            input_topics: vec!["tool_status".into()],
            output_topics: vec!["tool_power".into()],
        }
    }

    fn start(&mut self, op: &str, _params: &Params, world: &mut World) -> Result<OpOutcome, OpError> {
        let on = match op {
            "ToolOn" => true,
            "ToolOff" => false,
            other => return Err(unknown_op(&self.name, other)),
        };
        world.sim.set_tool_power(on);
        self.publish(world);
        Ok(OpOutcome::Success(json!({ "powered": on })))
    }

    fn publish(&mut self, world: &mut World) {
        let tools: Vec<(String, bool, bool)> = world
            .sim
            .tools()
            .iter()
            .map(|(n, t)| (n.clone(), t.in_position, t.powered))
            .collect();
        for (tool, in_position, powered) in tools {
            if !world.predicator.kb().symbols.contains_key(&tool) {
                world.predicator.upsert_symbol(Symbol {
                    name: tool.clone(),
                    kind: SymbolKind::Frame,
                    pose: None,
                    class_label: None,
                    source: self.name.clone(),
                });
            }
            world.predicator.set_signal(&format!("{tool}.in_position"), in_position);
            world.predicator.set_signal(&format!("{tool}.powered"), powered);
        }
    }
}
