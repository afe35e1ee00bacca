//! Browser bindings. Every export takes plain values and returns a JSON
//! string; the page parses it.

use costar_core::btree::{NodeKind, NodeStatus};
use costar_core::dsl;
use costar_core::geometry::{angle_from_identity, canonicalize, AxisPriority, Pose};
use costar_core::object::{ClassRegistry, ObjectInstance};
use costar_core::runtime::{bundled_plan, bundled_scene, RunError, Stepper};
use costar_core::sim::Scene;
use costar_core::spatial::{PersistenceConfig, PersistenceTracker};
use nalgebra::{UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn axes(q: &UnitQuaternion<f64>) -> Value {
    let m = q.to_rotation_matrix();
    let c = |k: usize| [m[(0, k)], m[(1, k)], m[(2, k)]];
    json!({ "x": c(0), "y": c(1), "z": c(2) })
}

/// Canonical orientation of an object of `class` given in roll, pitch, yaw
/// degrees.
pub fn canonical_json(class: &str, roll: f64, pitch: f64, yaw: f64) -> Result<Value, String> {
    let classes = ClassRegistry::default();
    let spec = classes.class(class).ok_or_else(|| format!("unknown class `{class}`"))?;
    let group = classes.group(&spec.symmetry);
    let q = UnitQuaternion::from_euler_angles(roll.to_radians(), pitch.to_radians(), yaw.to_radians());
    let c = canonicalize(&Pose::from_rotation(q), &group, AxisPriority::default());
    let (r, p, y) = c.pose.orientation.euler_angles();
    Ok(json!({
        "group": group.name,
        "groupSize": group.len(),
        "element": c.element,
        "input": { "angleDeg": angle_from_identity(&q).to_degrees(), "axes": axes(&q) },
        "canonical": {
            "angleDeg": angle_from_identity(&c.pose.orientation).to_degrees(),
            "axes": axes(&c.pose.orientation),
            "rpyDeg": [r.to_degrees(), p.to_degrees(), y.to_degrees()],
        },
    }))
}

/// Two perception frames: `count` objects, then the same objects moved by
/// `motion` meters in random directions and listed in shuffled order.
pub fn persistence_json(seed: u64, count: usize, motion: f64, max_distance: f64) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = ClassRegistry::default();
    let first: Vec<(String, [f64; 2])> = (0..count)
        .map(|_| {
            let class = if rng.random_bool(0.5) { "node" } else { "link" };
            (class.to_string(), [rng.random_range(0.2..0.7), rng.random_range(-0.3..0.3)])
        })
        .collect();
    let mut second: Vec<(String, [f64; 2], usize)> = first
        .iter()
        .enumerate()
        .map(|(k, (c, p))| {
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            (c.clone(), [p[0] + motion * a.cos(), p[1] + motion * a.sin()], k)
        })
        .collect();
    second.shuffle(&mut rng);
    let config = PersistenceConfig {
        max_distance,
        ..Default::default()
    };
    let mut tracker = PersistenceTracker::new(config);
    let detect = |objs: Vec<(&String, &[f64; 2])>| -> Vec<ObjectInstance> {
        objs.into_iter()
            .enumerate()
            .map(|(k, (c, p))| {
                let sym = classes.class(c).map(|s| s.symmetry.clone()).unwrap_or_default();
                ObjectInstance::new(format!("det_{k}"), c.clone(), Pose::new(Vector3::new(p[0], p[1], 0.02), UnitQuaternion::identity()))
                    .with_symmetry(sym)
            })
            .collect()
    };
    let a = tracker.update(detect(first.iter().map(|(c, p)| (c, p)).collect()), &classes);
    let b = tracker.update(detect(second.iter().map(|(c, p, _)| (c, p)).collect()), &classes);
    let frame_a: Vec<Value> = a
        .iter()
        .map(|o| json!({ "id": o.id, "class": o.class_label, "x": o.pose.position.x, "y": o.pose.position.y }))
        .collect();
    let frame_b: Vec<Value> = b
        .iter()
        .zip(&second)
        .map(|(o, (_, _, origin))| {
            json!({
                "id": o.id,
                "class": o.class_label,
                "x": o.pose.position.x,
                "y": o.pose.position.y,
                "from": [a[*origin].pose.position.x, a[*origin].pose.position.y],
                "kept": o.id == a[*origin].id,
            })
        })
        .collect();
    let kept = frame_b.iter().filter(|v| v["kept"] == true).count();
    json!({ "first": frame_a, "second": frame_b, "kept": kept })
}

fn status_name(s: NodeStatus) -> &'static str {
    match s {
        NodeStatus::Idle => "IDLE",
        NodeStatus::Busy => "BUSY",
        NodeStatus::Success => "SUCCESS",
        NodeStatus::Failure => "FAILURE",
    }
}

/// Scene a bundled plan runs against by default.
pub fn scene_for_plan(plan: &str) -> &str {
    match plan {
        "pick_node" | "move_right_to_left" => "assembly",
        _ if bundled_scene(plan).is_some() => plan,
        _ => "assembly",
    }
}

/// Plan text stepped against a bundled scene.
pub struct PlanRun {
    stepper: Stepper,
}

impl PlanRun {
    pub fn start(text: &str, scene: &str, seed: u64) -> Result<Self, String> {
        let doc = dsl::parse(text).map_err(|e| e.to_string())?;
        let yaml = bundled_scene(scene).ok_or_else(|| format!("unknown scene `{scene}`"))?;
        let scene = Scene::from_yaml(yaml).map_err(|e| e.to_string())?;
        let stepper = Stepper::new(&doc, &scene, &ClassRegistry::default(), seed).map_err(|e| match e {
            RunError::ValidationFailed(d) => d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"),
            other => other.to_string(),
        })?;
        Ok(Self { stepper })
    }

    /// Advances up to `n` ticks, stopping early at a terminal status. Zero
    /// ticks only reports the current state.
    pub fn step(&mut self, n: u32) -> Value {
        let mut events = 0;
        for _ in 0..n {
            let (s, e) = self.stepper.step();
            events += e.len();
            if s.is_terminal() {
                break;
            }
        }
        self.snapshot(events)
    }

    fn snapshot(&self, events: usize) -> Value {
        let nodes: Vec<Value> = self
            .stepper
            .tree
            .nodes()
            .into_iter()
            .map(|n| {
                let label = match &n.kind {
                    NodeKind::Leaf(b) => b.qualified_name(),
                    NodeKind::Repeat { n: k, .. } | NodeKind::Reset { n: k } => format!("{} {k}", n.kind.label()),
                    other => other.label().to_string(),
                };
                json!({ "id": n.id, "depth": n.id.matches('.').count(), "label": label, "status": status_name(n.status) })
            })
            .collect();
        let sim = &self.stepper.world.sim;
        let objects: Vec<Value> = sim
            .objects()
            .iter()
            .map(|o| {
                let p = o.pose.position;
                json!({ "id": o.id, "class": o.class_label, "x": p.x, "y": p.y, "z": p.z, "held": o.grasped_by.is_some() })
            })
            .collect();
        let e = sim.robot().endpoint.position;
        json!({
            "status": status_name(self.stepper.tree.root_status()),
            "finished": self.stepper.finished().is_some(),
            "tick": self.stepper.tree.tick_count(),
            "events": events,
            "nodes": nodes,
            "endpoint": [e.x, e.y, e.z],
            "objects": objects,
            "failure": self.stepper.last_failure().map(|(id, m)| json!({ "node": id, "message": m })),
        })
    }
}

#[wasm_bindgen]
pub fn canonical_orientation(class: &str, roll_deg: f64, pitch_deg: f64, yaw_deg: f64) -> Result<String, JsError> {
    canonical_json(class, roll_deg, pitch_deg, yaw_deg)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn persistence_frames(seed: u32, count: u32, motion_mm: f64, max_distance_mm: f64) -> String {
    persistence_json(seed.into(), count.min(40) as usize, motion_mm / 1000.0, max_distance_mm / 1000.0).to_string()
}

#[wasm_bindgen]
pub fn bundled_plan_text(name: &str) -> Option<String> {
    bundled_plan(name).map(str::to_string)
}

#[wasm_bindgen]
pub fn default_scene(plan: &str) -> String {
    scene_for_plan(plan).to_string()
}

#[wasm_bindgen]
pub struct PlanDemo(PlanRun);

#[wasm_bindgen]
impl PlanDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(text: &str, scene: &str, seed: u32) -> Result<PlanDemo, JsError> {
        PlanRun::start(text, scene, seed.into()).map(PlanDemo).map_err(|e| JsError::new(&e))
    }

    pub fn step(&mut self, ticks: u32) -> String {
        self.0.step(ticks).to_string()
    }
}
