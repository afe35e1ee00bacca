//! Plan execution: trials, batches, the live session and the bus they
//! report on.

mod assets;
mod bus;
mod store;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub use assets::{bundled_plan, bundled_scene, BUNDLED_PLANS, BUNDLED_SCENES};
pub use bus::{Bus, BusError, BusMessage, Subscription, TOPIC_RUNS, TOPIC_SIM, TOPIC_SYMBOLS, TOPIC_TRANSITIONS};
pub use store::{plan_id, PlanEntry, PlanStore, StoreError};

use crate::btree::{validate, BehaviorTree, Diagnostic, LeafExecutor, LeafTick, NodeKind, NodeStatus, TickStatus, TransitionEvent};
use crate::components::{Catalog, ComponentRegistry, OpOutcome, World};
use crate::dsl::PlanDocument;
use crate::object::ClassRegistry;
use crate::predicator::Symbol;
use crate::sim::Scene;

pub const DEFAULT_TICK_BUDGET: u64 = 10_000;
pub const DEFAULT_SNAPSHOT_EVERY: u64 = 10;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("validation failed: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    ValidationFailed(Vec<Diagnostic>),
    #[error("a batch needs at least one trial")]
    NoTrials,
}

/// Replaces scene noise parameters that are set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct NoiseOverrides {
    pub pos_sigma: Option<f64>,
    pub rot_sigma: Option<f64>,
    pub dropout_prob: Option<f64>,
}

impl NoiseOverrides {
    pub fn apply(&self, scene: &mut Scene) {
        let n = &mut scene.noise;
        if let Some(v) = self.pos_sigma {
            n.pos_sigma = v;
        }
        if let Some(v) = self.rot_sigma {
            n.rot_sigma = v;
        }
        if let Some(v) = self.dropout_prob {
            n.dropout_prob = v;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct RunConfig {
    pub tick_budget: u64,
    pub noise: NoiseOverrides,
    /// Sim snapshots go to the bus every this many ticks; 0 disables them.
    pub snapshot_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tick_budget: DEFAULT_TICK_BUDGET,
            noise: NoiseOverrides::default(),
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrialStatus {
    Success,
    Failure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialResult {
    pub seed: u64,
    pub status: TrialStatus,
    pub tick_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Aggregate over a batch; `per_trial` is in seed order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialReport {
    pub plan_id: String,
    pub trials: usize,
    pub successes: usize,
    pub per_trial: Vec<TrialResult>,
}

impl TrialReport {
    fn new(plan_id: String, per_trial: Vec<TrialResult>) -> Self {
        Self {
            plan_id,
            trials: per_trial.len(),
            successes: per_trial.iter().filter(|t| t.status == TrialStatus::Success).count(),
            per_trial,
        }
    }

    pub fn all_succeeded(&self) -> bool {
        self.successes == self.trials
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// One finished run: its result, the full transition trace and the world as
/// the run left it.
#[derive(Debug)]
pub struct Trial {
    pub result: TrialResult,
    pub events: Vec<TransitionEvent>,
    pub world: World,
    pub registry: ComponentRegistry,
}

/// Operation names offered by the stock components for `scene`.
pub fn standard_catalog(scene: &Scene, classes: &ClassRegistry) -> Catalog {
    let mut world = World::new(scene.clone(), classes.clone(), 0);
    Catalog::of(&ComponentRegistry::standard(&mut world))
}

/// Structural and binding diagnostics against the stock components.
pub fn validate_plan(doc: &PlanDocument, scene: &Scene, classes: &ClassRegistry) -> Vec<Diagnostic> {
    validate(&doc.root, Some(&standard_catalog(scene, classes)))
}

/// Routes leaf ticks to component operations.
struct LeafBridge<'a> {
    world: &'a mut World,
    registry: &'a mut ComponentRegistry,
    leaf_components: &'a BTreeMap<String, String>,
    last_failure: Option<(String, String)>,
}

impl LeafExecutor for LeafBridge<'_> {
    fn tick(&mut self, leaf: &LeafTick<'_>) -> TickStatus {
        let b = leaf.binding;
        let out = if leaf.fresh {
            self.registry.invoke(&b.component, &b.operation, &b.params, self.world)
        } else {
            self.registry.poll(&b.component, self.world)
        };
        let message = match out {
            Ok(OpOutcome::Running) => return TickStatus::Busy,
            Ok(OpOutcome::Success(_)) => return TickStatus::Success,
            Ok(OpOutcome::Failure(m)) => m,
            Err(e) => e.to_string(),
        };
        self.last_failure = Some((leaf.node_id.to_string(), message));
        TickStatus::Failure
    }

    fn halt(&mut self, node_id: &str) {
        if let Some(c) = self.leaf_components.get(node_id) {
            self.registry.halt(c, self.world);
        }
    }
}

fn changed_symbols(before: &BTreeMap<String, Symbol>, world: &World) -> (Vec<Symbol>, Vec<String>) {
    let now = &world.predicator.kb().symbols;
    let upserted = now
        .iter()
        .filter(|(k, s)| before.get(*k) != Some(*s))
        .map(|(_, s)| s.clone())
        .collect();
    let removed = before.keys().filter(|k| !now.contains_key(*k)).cloned().collect();
    (upserted, removed)
}

fn publish_transitions(bus: Option<&Bus>, run: &str, seed: u64, events: &[TransitionEvent]) {
    if let Some(bus) = bus {
        for e in events {
            bus.publish(
                TOPIC_TRANSITIONS,
                json!({ "run": run, "seed": seed, "nodeId": e.node_id, "status": e.status, "tickIndex": e.tick_index }),
            );
        }
    }
}

/// Ticks `tree` against `world` until the root is terminal or the budget is
/// spent. The sim advances one step between ticks.
pub fn execute(
    tree: &mut BehaviorTree,
    world: &mut World,
    registry: &mut ComponentRegistry,
    seed: u64,
    config: &RunConfig,
    bus: Option<(&Bus, &str)>,
) -> (TrialResult, Vec<TransitionEvent>) {
    let leaf_components: BTreeMap<String, String> = tree
        .nodes()
        .into_iter()
        .filter_map(|n| match n.kind {
            NodeKind::Leaf(b) => Some((n.id, b.component)),
            _ => None,
        })
        .collect();
    let (bus, run) = match bus {
        Some((b, r)) => (Some(b), r),
        None => (None, ""),
    };
    let mut trace = Vec::new();
    let mut last_failure = None;
    let mut symbols = world.predicator.kb().symbols.clone();
    let status = loop {
        let mut bridge = LeafBridge {
            world: &mut *world,
            registry: &mut *registry,
            leaf_components: &leaf_components,
            last_failure: None,
        };
        let status = tree.tick(&mut bridge);
        if let Some(f) = bridge.last_failure.take() {
            last_failure = Some(f);
        }
        let events = tree.drain_events();
        publish_transitions(bus, run, seed, &events);
        trace.extend(events);
        if status.is_terminal() {
            break Some(status);
        }
        if tree.tick_count() >= config.tick_budget {
            break None;
        }
        world.sim.step();
        registry.publish_all(world);
        if let Some(bus) = bus {
            let (upserted, removed) = changed_symbols(&symbols, world);
            if !upserted.is_empty() || !removed.is_empty() {
                bus.publish(TOPIC_SYMBOLS, json!({ "run": run, "upserted": upserted, "removed": removed }));
                symbols = world.predicator.kb().symbols.clone();
            }
            let tick = world.sim.tick();
            if config.snapshot_every > 0 && tick % config.snapshot_every == 0 {
                bus.publish(TOPIC_SIM, json!({ "run": run, "snapshot": world.sim.snapshot() }));
            }
        }
    };
    let tick_count = tree.tick_count();
    let result = match status {
        Some(TickStatus::Success) => TrialResult {
            seed,
            status: TrialStatus::Success,
            tick_count,
            failure_node: None,
            message: None,
        },
        Some(_) => {
            let (node, message) = last_failure.unwrap_or_else(|| (deepest_failure(tree), "plan failed".into()));
            TrialResult {
                seed,
                status: TrialStatus::Failure,
                tick_count,
                failure_node: Some(node),
                message: Some(message),
            }
        }
        None => {
            let busy = tree
                .nodes()
                .into_iter()
                .filter(|n| n.kind.is_leaf() && n.status == NodeStatus::Busy)
                .map(|n| n.id)
                .next_back();
            let halted = tree.reset();
            let mut bridge = LeafBridge {
                world: &mut *world,
                registry: &mut *registry,
                leaf_components: &leaf_components,
                last_failure: None,
            };
            for id in &halted {
                bridge.halt(id);
            }
            let events = tree.drain_events();
            publish_transitions(bus, run, seed, &events);
            trace.extend(events);
            TrialResult {
                seed,
                status: TrialStatus::Failure,
                tick_count,
                failure_node: busy,
                message: Some(format!("tick budget of {} exceeded", config.tick_budget)),
            }
        }
    };
    (result, trace)
}

fn deepest_failure(tree: &BehaviorTree) -> String {
    tree.nodes()
        .into_iter()
        .filter(|n| n.status == NodeStatus::Failure)
        .max_by_key(|n| n.id.matches('.').count())
        .map_or_else(|| crate::btree::ROOT_ID.to_string(), |n| n.id)
}

/// Resets the world from `scene` with `seed` and runs the plan once.
pub fn run_plan(
    doc: &PlanDocument,
    scene: &Scene,
    classes: &ClassRegistry,
    seed: u64,
    config: &RunConfig,
    bus: Option<&Bus>,
) -> Result<Trial, RunError> {
    let diagnostics = validate_plan(doc, scene, classes);
    if !diagnostics.is_empty() {
        return Err(RunError::ValidationFailed(diagnostics));
    }
    Ok(run_validated(doc, scene, classes, seed, config, bus))
}

fn run_validated(
    doc: &PlanDocument,
    scene: &Scene,
    classes: &ClassRegistry,
    seed: u64,
    config: &RunConfig,
    bus: Option<&Bus>,
) -> Trial {
    let mut scene = scene.clone();
    config.noise.apply(&mut scene);
    let mut world = World::new(scene, classes.clone(), seed);
    let mut registry = ComponentRegistry::standard(&mut world);
    let mut tree = BehaviorTree::new(&doc.root).expect("validated plan builds");
    let id = plan_id(doc);
    if let Some(bus) = bus {
        bus.publish(TOPIC_RUNS, json!({ "run": id, "seed": seed, "state": "started" }));
    }
    let (result, events) = execute(&mut tree, &mut world, &mut registry, seed, config, bus.map(|b| (b, id.as_str())));
    if let Some(bus) = bus {
        bus.publish(TOPIC_RUNS, json!({ "run": id, "seed": seed, "state": "finished", "result": result }));
    }
    Trial {
        result,
        events,
        world,
        registry,
    }
}

/// Independent trials with seeds `seed_base..seed_base + trials`.
pub fn run_batch(
    doc: &PlanDocument,
    scene: &Scene,
    classes: &ClassRegistry,
    trials: usize,
    seed_base: u64,
    config: &RunConfig,
    bus: Option<&Bus>,
) -> Result<TrialReport, RunError> {
    if trials == 0 {
        return Err(RunError::NoTrials);
    }
    let diagnostics = validate_plan(doc, scene, classes);
    if !diagnostics.is_empty() {
        return Err(RunError::ValidationFailed(diagnostics));
    }
    let per_trial = (0..trials as u64)
        .map(|k| run_validated(doc, scene, classes, seed_base + k, config, bus).result)
        .collect();
    Ok(TrialReport::new(plan_id(doc), per_trial))
}

/// Report for a single run.
pub fn single_report(doc: &PlanDocument, trial: &Trial) -> TrialReport {
    TrialReport::new(plan_id(doc), vec![trial.result.clone()])
}

/// A plan advanced one tick per call, for interactive front ends. The sim
/// steps after every busy tick; once the root is terminal further steps
/// repeat the final status without ticking.
#[derive(Debug)]
pub struct Stepper {
    pub tree: BehaviorTree,
    pub world: World,
    pub registry: ComponentRegistry,
    leaf_components: BTreeMap<String, String>,
    last_failure: Option<(String, String)>,
    finished: Option<TickStatus>,
}

impl Stepper {
    pub fn new(doc: &PlanDocument, scene: &Scene, classes: &ClassRegistry, seed: u64) -> Result<Self, RunError> {
        let diagnostics = validate_plan(doc, scene, classes);
        if !diagnostics.is_empty() {
            return Err(RunError::ValidationFailed(diagnostics));
        }
        let mut world = World::new(scene.clone(), classes.clone(), seed);
        let registry = ComponentRegistry::standard(&mut world);
        let tree = BehaviorTree::new(&doc.root).expect("validated plan builds");
        let leaf_components = tree
            .nodes()
            .into_iter()
            .filter_map(|n| match n.kind {
                NodeKind::Leaf(b) => Some((n.id, b.component)),
                _ => None,
            })
            .collect();
        Ok(Self {
            tree,
            world,
            registry,
            leaf_components,
            last_failure: None,
            finished: None,
        })
    }

    pub fn step(&mut self) -> (TickStatus, Vec<TransitionEvent>) {
        if let Some(s) = self.finished {
            return (s, Vec::new());
        }
        let mut bridge = LeafBridge {
            world: &mut self.world,
            registry: &mut self.registry,
            leaf_components: &self.leaf_components,
            last_failure: None,
        };
        let status = self.tree.tick(&mut bridge);
        if let Some(f) = bridge.last_failure.take() {
            self.last_failure = Some(f);
        }
        if status.is_terminal() {
            self.finished = Some(status);
        } else {
            self.world.sim.step();
            self.registry.publish_all(&mut self.world);
        }
        (status, self.tree.drain_events())
    }

    pub fn finished(&self) -> Option<TickStatus> {
        self.finished
    }

    /// Leaf id and message of the most recent leaf failure.
    pub fn last_failure(&self) -> Option<&(String, String)> {
        self.last_failure.as_ref()
    }
}

/// A world that operators poke at directly, outside any plan run.
#[derive(Debug)]
pub struct Session {
    pub scene: Scene,
    pub world: World,
    pub registry: ComponentRegistry,
}

impl Session {
    pub fn new(scene: Scene, classes: ClassRegistry, seed: u64) -> Self {
        let mut world = World::new(scene.clone(), classes, seed);
        let registry = ComponentRegistry::standard(&mut world);
        Self { scene, world, registry }
    }

    /// Runs one operation to completion, stepping the sim while it is busy.
    pub fn call(
        &mut self,
        component: &str,
        op: &str,
        params: &crate::components::Params,
        tick_budget: u64,
    ) -> Result<Value, crate::components::OpError> {
        let mut out = self.registry.invoke(component, op, params, &mut self.world)?;
        let mut ticks = 0;
        while out == OpOutcome::Running {
            if ticks >= tick_budget {
                self.registry.halt(component, &mut self.world);
                return Err(crate::components::OpError::Timeout(ticks));
            }
            self.world.sim.step();
            self.registry.publish_all(&mut self.world);
            ticks += 1;
            out = self.registry.poll(component, &mut self.world)?;
        }
        self.registry.publish_all(&mut self.world);
        match out {
            OpOutcome::Success(v) => Ok(json!({ "status": "SUCCESS", "detail": v, "ticks": ticks })),
            OpOutcome::Failure(m) => Ok(json!({ "status": "FAILURE", "message": m, "ticks": ticks })),
            OpOutcome::Running => unreachable!(),
        }
    }

    pub fn adopt(&mut self, trial: Trial) {
        self.world = trial.world;
        self.registry = trial.registry;
    }
}
