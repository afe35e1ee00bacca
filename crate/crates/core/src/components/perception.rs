use serde_json::json;

use super::{
    unknown_op, Component, ComponentClass, ComponentDescriptor, OpError, OpOutcome, OperationSignature, Params, World,
};
use crate::predicator::SymbolKind;

/// Object detection with persistent identities. Object symbols change only
/// when `DetectObjects` runs.
#[derive(Debug)]
pub struct Perception {
    name: String,
}

impl Perception {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string() }
    }
}

impl Component for Perception {
    fn descriptor(&self) -> ComponentDescriptor {
        ComponentDescriptor {
            name: self.name.clone(),
            class: ComponentClass::Perception,
            operations: vec![OperationSignature::new("DetectObjects", vec![]).knowledge()],
            predicates: vec!["IsClass".into()],
            symbol_kinds: vec![SymbolKind::Object],
            input_topics: vec!["camera/points".into()],
            output_topics: vec!["objects".into()],
        }
    }

    fn start(&mut self, op: &str, _params: &Params, world: &mut World) -> Result<OpOutcome, OpError> {
        if op != "DetectObjects" {
            return Err(unknown_op(&self.name, op));
        }
        let detections = world.sim.simulate_detection();
        let classes = world.sim.classes().clone();
        let objects = world.tracker.update(detections, &classes);
        world.predicator.replace_objects(&objects, &self.name);
        let ids: Vec<&str> = objects.iter().map(|o| o.id.as_str()).collect();
        let detail = json!({ "objects": ids });
        world.objects = objects;
        Ok(OpOutcome::Success(detail))
    }
}
