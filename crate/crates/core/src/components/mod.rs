//! Components expose operations, predicates and symbols over the shared
//! world. Each component runs at most one operation at a time; starting a new
//! one abandons the previous.

mod arm;
mod calibrate;
mod gripper;
mod knowledge;
mod perception;
mod power_tool;
mod smart_move;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use arm::Arm;
pub use gripper::Gripper;
pub use calibrate::CalibrationComponent;
pub use knowledge::Knowledge;
pub use perception::Perception;
pub use power_tool::PowerTool;
pub use smart_move::{select_goal, Candidate, SmartMoveSpec, DEFAULT_LAMBDA};

use crate::btree::{OperationCatalog, ParamValue};
use crate::calibration::CalibrationError;
use crate::geometry::Pose;
use crate::object::{ClassRegistry, ObjectInstance};
use crate::predicator::{PredicateDef, PredicateError, Predicator, Symbol, SymbolKind};
use crate::sim::{Scene, SimError, Simulation};
use crate::spatial::{PersistenceConfig, PersistenceTracker};

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpError {
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("component `{component}` has no operation `{operation}`")]
    UnknownOperation { component: String, operation: String },
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("goal is unreachable")]
    Unreachable,
    #[error("unsupported gripper mode {0}")]
    UnsupportedMode(String),
    #[error("no feasible goal among {candidates} candidates")]
    NoFeasibleGoal { candidates: usize },
    #[error("timed out after {0} ticks")]
    Timeout(u64),
    #[error("component `{component}` lacks required operation `{operation}`")]
    MissingRequirement { component: String, operation: String },
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("calibration failed: {0}")]
    Calibration(String),
}

impl From<CalibrationError> for OpError {
    fn from(e: CalibrationError) -> Self {
        OpError::Calibration(e.to_string())
    }
}

/// Result of starting or polling an operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", content = "detail", rename_all = "snake_case")]
pub enum OpOutcome {
    Running,
    Success(Value),
    /// Completed normally with a false answer, e.g. a predicate check.
    Failure(String),
}

/// Everything operations act on.
#[derive(Clone, Debug)]
pub struct World {
    pub sim: Simulation,
    pub predicator: Predicator,
    pub tracker: PersistenceTracker,
    /// Persistent object set from the last detection.
    pub objects: Vec<ObjectInstance>,
}

impl World {
    pub fn new(scene: Scene, classes: ClassRegistry, seed: u64) -> Self {
        let mut predicator = Predicator::new();
        for (name, pose) in &scene.frames {
            predicator.upsert_symbol(Symbol::frame(name, *pose, "scene"));
        }
        for (name, pose) in &scene.waypoints {
            predicator.upsert_symbol(Symbol::waypoint(name, *pose, "scene"));
        }
        for (name, region) in &scene.regions {
            let c = region.center();
            predicator.upsert_symbol(Symbol::posed(
                name,
                SymbolKind::Region,
                Pose::from_translation(c[0], c[1], c[2]),
                "scene",
            ));
        }
        Self {
            sim: Simulation::new(scene, classes, seed),
            predicator,
            tracker: PersistenceTracker::new(PersistenceConfig::default()),
            objects: Vec::new(),
        }
    }

    pub fn classes(&self) -> &ClassRegistry {
        self.sim.classes()
    }

    /// Pose of a named symbol.
    pub fn symbol_pose(&self, name: &str) -> Result<Pose, OpError> {
        Ok(self.predicator.kb().pose(name)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Symbol,
    Text,
    Number,
    Bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub required: bool,
    pub description: String,
}

impl ParamSpec {
    pub fn new(name: &str, kind: ParamKind, required: bool, description: &str) -> Self {
        Self {
            name: name.to_string(),
            kind,
            required,
            description: description.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OperationSignature {
    pub name: String,
    pub params: Vec<ParamSpec>,
    /// Knowledge operations update or query symbols rather than move the robot.
    pub knowledge: bool,
}

impl OperationSignature {
    pub fn new(name: &str, params: Vec<ParamSpec>) -> Self {
        Self {
            name: name.to_string(),
            params,
            knowledge: false,
        }
    }

    pub fn knowledge(mut self) -> Self {
        self.knowledge = true;
        self
    }
}

/// Abstract component classes and the operations every instance must provide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentClass {
    Arm,
    Gripper,
    PowerTool,
    Perception,
    Knowledge,
    Calibration,
}

impl ComponentClass {
    pub fn required_operations(self) -> &'static [&'static str] {
        match self {
            ComponentClass::Arm => &["Move", "Teach"],
            ComponentClass::Gripper => &["Open", "Close"],
            ComponentClass::PowerTool => &["ToolOn", "ToolOff"],
            ComponentClass::Perception => &["DetectObjects"],
            ComponentClass::Knowledge => &["Check"],
            ComponentClass::Calibration => &["Calibrate"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComponentDescriptor {
    pub name: String,
    pub class: ComponentClass,
    pub operations: Vec<OperationSignature>,
    pub predicates: Vec<String>,
    pub symbol_kinds: Vec<SymbolKind>,
    pub input_topics: Vec<String>,
    pub output_topics: Vec<String>,
}

pub trait Component: Send {
    fn descriptor(&self) -> ComponentDescriptor;

    /// Predicates this component contributes to the predicator.
    fn predicate_defs(&self) -> Vec<PredicateDef> {
        Vec::new()
    }

    fn start(&mut self, op: &str, params: &Params, world: &mut World) -> Result<OpOutcome, OpError>;

    /// Progress of the running operation; components without long-running
    /// operations never see a poll.
    fn poll(&mut self, _world: &mut World) -> Result<OpOutcome, OpError> {
        Ok(OpOutcome::Success(Value::Null))
    }

    fn halt(&mut self, _world: &mut World) {}

    /// Refreshes the symbols and signals this component owns.
    fn publish(&mut self, _world: &mut World) {}
}

pub(crate) fn unknown_op(component: &str, op: &str) -> OpError {
    OpError::UnknownOperation {
        component: component.to_string(),
        operation: op.to_string(),
    }
}

pub(crate) fn param_f64(params: &Params, name: &str) -> Result<Option<f64>, OpError> {
    match params.get(name) {
        None => Ok(None),
        Some(v) => v.as_f64().filter(|x| x.is_finite()).map(Some).ok_or_else(|| OpError::InvalidParam {
            name: name.to_string(),
            reason: format!("expected a number, got {v}"),
        }),
    }
}

pub(crate) fn param_name<'a>(params: &'a Params, name: &str) -> Result<Option<&'a str>, OpError> {
    match params.get(name) {
        None => Ok(None),
        Some(v) => v.as_name().map(Some).ok_or_else(|| OpError::InvalidParam {
            name: name.to_string(),
            reason: format!("expected a name, got {v}"),
        }),
    }
}

pub(crate) fn required_name<'a>(params: &'a Params, name: &str) -> Result<&'a str, OpError> {
    param_name(params, name)?.ok_or_else(|| OpError::MissingParam(name.to_string()))
}

/// Components by name, with at most one running operation per component.
pub struct ComponentRegistry {
    components: BTreeMap<String, Box<dyn Component>>,
    running: BTreeMap<String, String>,
}

impl std::fmt::Debug for ComponentRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ComponentRegistry")
            .field("components", &self.components.keys().collect::<Vec<_>>())
            .field("running", &self.running)
            .finish()
    }
}

impl Default for ComponentRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl ComponentRegistry {
    pub fn new() -> Self {
        Self {
            components: BTreeMap::new(),
            running: BTreeMap::new(),
        }
    }

    /// The stock workcell: arm, gripper, power tool, perception, predicator
    /// and calibration. The gripper kind comes from the scene.
    pub fn standard(world: &mut World) -> Self {
        let mut r = Self::new();
        let kind = world.sim.scene().robot.gripper;
        let parts: Vec<Box<dyn Component>> = vec![
            Box::new(Arm::new("arm")),
            Box::new(Gripper::new("gripper", kind)),
            Box::new(PowerTool::new("power_tool")),
            Box::new(Perception::new("perception")),
            Box::new(Knowledge::new("predicator")),
            Box::new(CalibrationComponent::new("calibration")),
        ];
        for c in parts {
            r.register(c, world).expect("stock components satisfy their class");
        }
        r
    }

    /// Adds a component after checking its class requirements, registering
    /// its predicates and publishing its initial symbols.
    pub fn register(&mut self, mut component: Box<dyn Component>, world: &mut World) -> Result<(), OpError> {
        let d = component.descriptor();
        for req in d.class.required_operations() {
            if !d.operations.iter().any(|o| o.name == *req) {
                return Err(OpError::MissingRequirement {
                    component: d.name.clone(),
                    operation: req.to_string(),
                });
            }
        }
        for def in component.predicate_defs() {
            world.predicator.register(def);
        }
        component.publish(world);
        self.components.insert(d.name, component);
        Ok(())
    }

    pub fn descriptors(&self) -> Vec<ComponentDescriptor> {
        self.components.values().map(|c| c.descriptor()).collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.components.keys().map(String::as_str)
    }

    fn get(&mut self, name: &str) -> Result<&mut Box<dyn Component>, OpError> {
        self.components
            .get_mut(name)
            .ok_or_else(|| OpError::UnknownComponent(name.to_string()))
    }

    /// Starts `op`. A still-running operation on the same component is halted
    /// first.
    pub fn invoke(&mut self, component: &str, op: &str, params: &Params, world: &mut World) -> Result<OpOutcome, OpError> {
        let c = self.components.get_mut(component).ok_or_else(|| OpError::UnknownComponent(component.to_string()))?;
        if !c.descriptor().operations.iter().any(|o| o.name == op) {
            return Err(unknown_op(component, op));
        }
        if self.running.remove(component).is_some() {
            c.halt(world);
        }
        let out = c.start(op, params, world);
        if matches!(out, Ok(OpOutcome::Running)) {
            self.running.insert(component.to_string(), op.to_string());
        }
        out
    }

    pub fn poll(&mut self, component: &str, world: &mut World) -> Result<OpOutcome, OpError> {
        let out = self.get(component)?.poll(world);
        if !matches!(out, Ok(OpOutcome::Running)) {
            self.running.remove(component);
        }
        out
    }

    pub fn halt(&mut self, component: &str, world: &mut World) {
        if self.running.remove(component).is_some() {
            if let Some(c) = self.components.get_mut(component) {
                c.halt(world);
            }
        }
    }

    pub fn halt_all(&mut self, world: &mut World) {
        let names: Vec<String> = self.running.keys().cloned().collect();
        for n in names {
            self.halt(&n, world);
        }
    }

    pub fn publish_all(&mut self, world: &mut World) {
        for c in self.components.values_mut() {
            c.publish(world);
        }
    }
}

/// Operation names known at registration time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog(pub BTreeMap<String, Vec<String>>);

impl Catalog {
    pub fn of(registry: &ComponentRegistry) -> Self {
        Catalog(
            registry
                .descriptors()
                .into_iter()
                .map(|d| (d.name, d.operations.into_iter().map(|o| o.name).collect()))
                .collect(),
        )
    }
}

impl OperationCatalog for Catalog {
    fn has_operation(&self, component: &str, operation: &str) -> bool {
        self.0.get(component).is_some_and(|ops| ops.iter().any(|o| o == operation))
    }
}
