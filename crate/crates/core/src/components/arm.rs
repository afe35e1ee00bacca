use nalgebra::{UnitQuaternion, Vector3};
use serde_json::json;

use super::smart_move::{select_goal, SmartMoveSpec};
use super::{
    param_f64, param_name, unknown_op, Component, ComponentClass, ComponentDescriptor, OpError, OpOutcome,
    OperationSignature, ParamKind, ParamSpec, Params, World,
};
use crate::geometry::Pose;
use crate::predicator::{Symbol, SymbolKind};

pub const ENDPOINT_SYMBOL: &str = "endpoint";
pub const HOME_SYMBOL: &str = "home";

/// Simulated manipulator. Publishes its endpoint as a frame symbol.
#[derive(Debug)]
pub struct Arm {
    name: String,
    taught: usize,
    moving: Option<serde_json::Value>,
}

impl Arm {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            taught: 0,
            moving: None,
        }
    }

    /// Goal from `goal` (a symbol) or from `x`, `y`, `z` with optional
    /// `roll`, `pitch`, `yaw`; missing angles keep the current orientation.
    fn resolve_goal(params: &Params, world: &World) -> Result<Pose, OpError> {
        if let Some(name) = param_name(params, "goal")? {
            return world.symbol_pose(name);
        }
        let coord = |k: &str| param_f64(params, k);
        let (Some(x), Some(y), Some(z)) = (coord("x")?, coord("y")?, coord("z")?) else {
            return Err(OpError::MissingParam("goal".into()));
        };
        let current = world.sim.robot().endpoint.orientation;
        let orientation = match (coord("roll")?, coord("pitch")?, coord("yaw")?) {
            (None, None, None) => current,
            (r, p, yw) => UnitQuaternion::from_euler_angles(r.unwrap_or(0.0), p.unwrap_or(0.0), yw.unwrap_or(0.0)),
        };
        Ok(Pose::new(Vector3::new(x, y, z), orientation))
    }

    fn dispatch(&mut self, goal: &Pose, speed: Option<f64>, world: &mut World, detail: serde_json::Value) -> Result<OpOutcome, OpError> {
        let ticks = world.sim.execute_move(goal, speed).map_err(|_| OpError::Unreachable)?;
        if ticks == 0 {
            return Ok(OpOutcome::Success(detail));
        }
        self.moving = Some(detail);
        Ok(OpOutcome::Running)
    }

    fn teach(&mut self, params: &Params, world: &mut World) -> Result<OpOutcome, OpError> {
        let name = match param_name(params, "name")? {
            Some(n) => n.to_string(),
            None => loop {
                self.taught += 1;
                let candidate = format!("waypoint_{}", self.taught);
                if !world.predicator.kb().symbols.contains_key(&candidate) {
                    break candidate;
                }
            },
        };
        let pose = world.sim.robot().endpoint;
        world.predicator.upsert_symbol(Symbol::waypoint(&name, pose, &self.name));
        Ok(OpOutcome::Success(json!({ "symbol": name, "pose": pose })))
    }
}

impl Component for Arm {
    fn descriptor(&self) -> ComponentDescriptor {
        use ParamKind::*;
        let speed = ParamSpec::new("speed", Number, false, "Cartesian speed, m/s");
        ComponentDescriptor {
            name: self.name.clone(),
            class: ComponentClass::Arm,
            operations: vec![
                OperationSignature::new(
                    "Move",
                    vec![
                        ParamSpec::new("goal", Symbol, false, "waypoint or frame symbol"),
                        ParamSpec::new("x", Number, false, "goal position when no symbol is given"),
                        ParamSpec::new("y", Number, false, ""),
                        ParamSpec::new("z", Number, false, ""),
                        ParamSpec::new("roll", Number, false, "goal orientation, radians"),
                        ParamSpec::new("pitch", Number, false, ""),
                        ParamSpec::new("yaw", Number, false, ""),
                        speed.clone(),
                    ],
                ),
                OperationSignature::new("Teach", vec![ParamSpec::new("name", Text, false, "waypoint name")]).knowledge(),
                OperationSignature::new(
                    "SmartMove",
                    vec![
                        ParamSpec::new("class", Text, false, "object class to pick from"),
                        ParamSpec::new("relation", Text, false, "relational predicate, e.g. RightOf"),
                        ParamSpec::new("ref", Symbol, false, "reference frame of the relation"),
                        ParamSpec::new("where", Text, false, "extra templates over ?X, `;`-separated"),
                        ParamSpec::new("approach", Number, false, "stand-off along the tool axis, m"),
                        ParamSpec::new("lambda", Number, false, "rotation weight of the cost, m/rad"),
                        speed,
                    ],
                ),
            ],
            predicates: vec![],
            symbol_kinds: vec![SymbolKind::Frame, SymbolKind::Waypoint],
            input_topics: vec!["joint_states".into()],
            output_topics: vec!["endpoint".into()],
        }
    }

    fn start(&mut self, op: &str, params: &Params, world: &mut World) -> Result<OpOutcome, OpError> {
        match op {
            "Move" => {
                let goal = Self::resolve_goal(params, world)?;
                let speed = param_f64(params, "speed")?;
                self.dispatch(&goal, speed, world, json!({ "goal": goal }))
            }
            "Teach" => self.teach(params, world),
            "SmartMove" => {
                let spec = SmartMoveSpec::from_params(params)?;
                let (choice, generated) = select_goal(world, &spec)?;
                let detail = json!({
                    "object": choice.object,
                    "element": choice.element,
                    "goal": choice.goal,
                    "cost": choice.cost,
                    "candidates": generated,
                });
                self.dispatch(&choice.goal, spec.speed, world, detail)
            }
            other => Err(unknown_op(&self.name, other)),
        }
    }

    fn poll(&mut self, world: &mut World) -> Result<OpOutcome, OpError> {
        if world.sim.in_transit() {
            return Ok(OpOutcome::Running);
        }
        Ok(OpOutcome::Success(self.moving.take().unwrap_or_default()))
    }

    fn halt(&mut self, world: &mut World) {
        self.moving = None;
        world.sim.cancel_motion();
    }

    fn publish(&mut self, world: &mut World) {
        let endpoint = world.sim.robot().endpoint;
        world
            .predicator
            .upsert_symbol(Symbol::frame(ENDPOINT_SYMBOL, endpoint, &self.name));
        if !world.predicator.kb().symbols.contains_key(HOME_SYMBOL) {
            let home = world.sim.scene().robot.home;
            world.predicator.upsert_symbol(Symbol::waypoint(HOME_SYMBOL, home, &self.name));
        }
    }
}
