use serde_json::json;

use super::{
    required_name, unknown_op, Component, ComponentClass, ComponentDescriptor, OpError, OpOutcome,
    OperationSignature, ParamKind, ParamSpec, Params, World,
};
use crate::predicator::{Symbol, SymbolKind};
use crate::sim::{GripperKind, GripperMode, SimError, GRIPPER_NAME};

/// Gripper on the arm flange. A parallel gripper only supports pinch mode.
#[derive(Debug)]
pub struct Gripper {
    name: String,
    kind: GripperKind,
}

impl Gripper {
    pub fn new(name: &str, kind: GripperKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
        }
    }

    pub fn supported_modes(&self) -> &'static [GripperMode] {
        match self.kind {
            GripperKind::Parallel => &[GripperMode::PinchMode],
            GripperKind::ThreeFinger => &GripperMode::ALL,
        }
    }

    fn default_mode(&self) -> GripperMode {
        match self.kind {
            GripperKind::Parallel => GripperMode::PinchMode,
            GripperKind::ThreeFinger => GripperMode::BasicMode,
        }
    }

    fn state(&self, world: &World) -> serde_json::Value {
        let g = world.sim.robot().gripper;
        json!({
            "closed": g.closed,
            "mode": g.mode,
            "graspRadius": g.mode.grasp_radius(),
            "holding": world.sim.held_object(),
        })
    }
}

impl Component for Gripper {
    fn descriptor(&self) -> ComponentDescriptor {
        ComponentDescriptor {
            name: self.name.clone(),
            class: ComponentClass::Gripper,
            operations: vec![
                OperationSignature::new("Open", vec![]),
                OperationSignature::new("Close", vec![]),
                OperationSignature::new(
                    "SetMode",
                    vec![ParamSpec::new("mode", ParamKind::Text, true, "BasicMode, PinchMode, WideMode or ScissorMode")],
                ),
                OperationSignature::new("GetState", vec![]).knowledge(),
                OperationSignature::new("Reset", vec![]),
            ],
            predicates: vec!["GripperClosed".into()],
            symbol_kinds: vec![SymbolKind::Frame],
            input_topics: vec!["gripper_status".into()],
            output_topics: vec!["gripper_command".into()],
        }
    }

    fn start(&mut self, op: &str, params: &Params, world: &mut World) -> Result<OpOutcome, OpError> {
        match op {
            "Open" => {
                let released = world.sim.execute_release();
                Ok(OpOutcome::Success(json!({ "released": released })))
            }
            "Close" => {
                let radius = world.sim.robot().gripper.mode.grasp_radius();
                match world.sim.execute_grasp(radius) {
                    Ok(id) => Ok(OpOutcome::Success(json!({ "grasped": id }))),
                    Err(e @ (SimError::NothingToGrasp { .. } | SimError::GripperOccupied(_))) => {
                        Ok(OpOutcome::Failure(e.to_string()))
                    }
                    Err(e) => Err(e.into()),
                }
            }
            "SetMode" => {
                let text = required_name(params, "mode")?;
                let mode = GripperMode::parse(text).ok_or_else(|| OpError::InvalidParam {
                    name: "mode".into(),
                    reason: format!("unknown mode `{text}`"),
                })?;
                if !self.supported_modes().contains(&mode) {
                    return Err(OpError::UnsupportedMode(format!("{mode:?}")));
                }
                world.sim.set_gripper_mode(mode);
                Ok(OpOutcome::Success(self.state(world)))
            }
            "GetState" => Ok(OpOutcome::Success(self.state(world))),
            "Reset" => {
                world.sim.execute_release();
                world.sim.set_gripper_mode(self.default_mode());
                Ok(OpOutcome::Success(self.state(world)))
            }
            other => Err(unknown_op(&self.name, other)),
        }
    }

    fn publish(&mut self, world: &mut World) {
        let endpoint = world.sim.robot().endpoint;
        world
            .predicator
            .upsert_symbol(Symbol::frame(GRIPPER_NAME, endpoint, &self.name));
        let closed = world.sim.robot().gripper.closed;
        world.predicator.set_signal(&format!("{GRIPPER_NAME}.closed"), closed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btree::ParamValue;
    use crate::components::ComponentRegistry;
    use crate::geometry::Pose;
    use crate::object::{ClassRegistry, ObjectInstance};
    use crate::predicator::PredicateStatement;
    use crate::sim::Scene;

    fn world(kind: GripperKind) -> (World, ComponentRegistry) {
        let mut scene = Scene::empty("g");
        scene.robot.gripper = kind;
        let mut w = World::new(scene, ClassRegistry::default(), 0);
        let r = ComponentRegistry::standard(&mut w);
        (w, r)
    }

    fn mode(m: &str) -> Params {
        Params::from([("mode".to_string(), ParamValue::Text(m.into()))])
    }

    #[test]
    fn parallel_gripper_is_pinch_only() {
        let (mut w, mut r) = world(GripperKind::Parallel);
        assert!(matches!(r.invoke("gripper", "SetMode", &mode("PinchMode"), &mut w), Ok(OpOutcome::Success(_))));
        assert_eq!(
            r.invoke("gripper", "SetMode", &mode("ScissorMode"), &mut w),
            Err(OpError::UnsupportedMode("ScissorMode".into()))
        );
    }

    #[test]
    fn wide_mode_widens_grasp() {
        let (mut w, mut r) = world(GripperKind::ThreeFinger);
        let e = w.sim.robot().endpoint;
        w.sim.spawn(ObjectInstance::new("node_1", "node", e.compose(&Pose::from_translation(0.025, 0.0, 0.0))));
        assert!(matches!(r.invoke("gripper", "Close", &Params::new(), &mut w), Ok(OpOutcome::Failure(_))));
        r.invoke("gripper", "Open", &Params::new(), &mut w).unwrap();
        r.invoke("gripper", "SetMode", &mode("WideMode"), &mut w).unwrap();
        let out = r.invoke("gripper", "Close", &Params::new(), &mut w).unwrap();
        assert_eq!(out, OpOutcome::Success(json!({ "grasped": "node_1" })));
    }

    #[test]
    fn closed_signal_reaches_predicates() {
        let (mut w, mut r) = world(GripperKind::ThreeFinger);
        let closed = PredicateStatement::new("GripperClosed", ["gripper"]);
        assert!(!w.predicator.evaluate(&closed).unwrap());
        let _ = r.invoke("gripper", "Close", &Params::new(), &mut w);
        r.publish_all(&mut w);
        assert!(w.predicator.evaluate(&closed).unwrap());
    }
}
