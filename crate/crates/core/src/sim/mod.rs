//! Deterministic simulated workcell standing in for the sensor stack and the
//! robot hardware.
//!
//! All randomness flows from one seeded ChaCha stream, so a given scene and
//! seed always produce the same detections, motion durations and grasp
//! outcomes. Noise is applied when detecting, never to ground truth.

mod kinematics;
mod scene;

use std::collections::BTreeMap;

use nalgebra::{Unit, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kinematics::{joint_delta, ArmKinematics, Joints};
pub use scene::{
    CameraConfig, GripperKind, NoiseModel, ObjectSpec, Region, RobotConfig, Scene, SceneError,
    SceneEvent, ToolSpec,
};

use crate::geometry::Pose;
use crate::object::{ClassRegistry, ObjectInstance};

/// Arrival tolerance for moves, meters (and radians for the wrist).
pub const ARRIVAL_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_GRASP_RADIUS: f64 = 0.02;
pub const GRIPPER_NAME: &str = "gripper";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("goal is outside the reachable workspace")]
    Unreachable,
    #[error("no object within {radius} m of the gripper")]
    NothingToGrasp { radius: f64 },
    #[error("gripper already holds `{0}`")]
    GripperOccupied(String),
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("calibration marker is not visible")]
    MarkerNotVisible,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GripperMode {
    #[default]
    BasicMode,
    PinchMode,
    WideMode,
    ScissorMode,
}

impl GripperMode {
    pub const ALL: [GripperMode; 4] = [
        GripperMode::BasicMode,
        GripperMode::PinchMode,
        GripperMode::WideMode,
        GripperMode::ScissorMode,
    ];

    /// Capture radius of a closing gripper in this mode.
    pub fn grasp_radius(self) -> f64 {
        match self {
            GripperMode::PinchMode => 0.015,
            GripperMode::BasicMode => 0.02,
            GripperMode::WideMode => 0.03,
            GripperMode::ScissorMode => 0.01,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim_end_matches("Mode").to_ascii_lowercase();
        match s.as_str() {
            "basic" => Some(Self::BasicMode),
            "pinch" => Some(Self::PinchMode),
            "wide" => Some(Self::WideMode),
            "scissor" => Some(Self::ScissorMode),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GripperState {
    pub closed: bool,
    pub mode: GripperMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub endpoint: Pose,
    pub joint_positions: Joints,
    pub gripper: GripperState,
    pub tool_powered: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolState {
    pub powered: bool,
    pub in_position: bool,
}

#[derive(Clone, Debug)]
struct Motion {
    start: Joints,
    delta: Joints,
    goal: Joints,
    total: u32,
    elapsed: u32,
}

#[derive(Clone, Debug)]
struct Held {
    object: String,
    relative: Pose,
}

/// Immutable view of the simulation for observers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSnapshot {
    pub tick: u64,
    pub robot: RobotState,
    pub objects: Vec<ObjectInstance>,
    pub tools: BTreeMap<String, ToolState>,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    scene: Scene,
    classes: ClassRegistry,
    objects: Vec<ObjectInstance>,
    rng: ChaCha8Rng,
    robot: RobotState,
    motion: Option<Motion>,
    held: Option<Held>,
    tools: BTreeMap<String, ToolState>,
    tick: u64,
}

impl Simulation {
    /// Resets the world from `scene`, seeding the noise stream with `seed`.
    pub fn new(scene: Scene, classes: ClassRegistry, seed: u64) -> Self {
        let kin = scene.robot.kinematics;
        let home = scene.robot.home;
        let joints = kin
            .inverse(&home, &[0.0; 6])
            .unwrap_or([0.0, 0.5, 1.0, 0.0, 0.0, 0.0]);
        let mode = match scene.robot.gripper {
            GripperKind::Parallel => GripperMode::PinchMode,
            GripperKind::ThreeFinger => GripperMode::BasicMode,
        };
        let tools = scene
            .tools
            .iter()
            .map(|t| {
                (
                    t.name.clone(),
                    ToolState {
                        powered: false,
                        in_position: t.in_position,
                    },
                )
            })
            .collect();
        let objects = scene.instances(&classes);
        let mut sim = Self {
            objects,
            rng: ChaCha8Rng::seed_from_u64(seed),
            robot: RobotState {
                endpoint: kin.forward(&joints),
                joint_positions: joints,
                gripper: GripperState {
                    closed: false,
                    mode,
                },
                tool_powered: false,
            },
            motion: None,
            held: None,
            tools,
            tick: 0,
            scene,
            classes,
        };
        sim.apply_events();
        sim
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn classes(&self) -> &ClassRegistry {
        &self.classes
    }

    pub fn kinematics(&self) -> &ArmKinematics {
        &self.scene.robot.kinematics
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn objects(&self) -> &[ObjectInstance] {
        &self.objects
    }

    pub fn object(&self, id: &str) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn tools(&self) -> &BTreeMap<String, ToolState> {
        &self.tools
    }

    pub fn held_object(&self) -> Option<&str> {
        self.held.as_ref().map(|h| h.object.as_str())
    }

    pub fn snapshot(&self) -> SimSnapshot {
        SimSnapshot {
            tick: self.tick,
            robot: self.robot.clone(),
            objects: self.objects.clone(),
            tools: self.tools.clone(),
        }
    }

    /// Adds a ground-truth object (e.g. an operator placing a part).
    pub fn spawn(&mut self, object: ObjectInstance) {
        self.objects.retain(|o| o.id != object.id);
        self.objects.push(object);
        self.objects.sort_by(|a, b| a.id.cmp(&b.id));
    }

    pub fn set_noise(&mut self, noise: NoiseModel) {
        self.scene.noise = noise;
    }

    pub fn reachable(&self, goal: &Pose) -> bool {
        self.kinematics().reachable(goal)
    }

    /// Noisy, anonymous detections of every visible object, in ground-truth
    /// id order. Held objects are occluded by the gripper.
    pub fn simulate_detection(&mut self) -> Vec<ObjectInstance> {
        let noise = self.scene.noise;
        let correction = self
            .scene
            .camera
            .calibrated
            .map(|cal| cal.compose(&self.scene.camera.pose.inverse()));
        let pos_noise = Normal::new(0.0, noise.pos_sigma).expect("validated sigma");
        let rot_noise = Normal::new(0.0, noise.rot_sigma).expect("validated sigma");
        let mut out = Vec::new();
        for o in &self.objects {
            if o.grasped_by.is_some() {
                continue;
            }
            if noise.dropout_prob > 0.0 && self.rng.random::<f64>() < noise.dropout_prob {
                continue;
            }
            let mut pose = o.pose;
            if noise.pos_sigma > 0.0 {
                let d = Vector3::new(
                    pos_noise.sample(&mut self.rng),
                    pos_noise.sample(&mut self.rng),
                    pos_noise.sample(&mut self.rng),
                );
                pose = Pose::new(pose.position + d, pose.orientation);
            }
            if noise.rot_sigma > 0.0 {
                let axis = random_axis(&mut self.rng);
                let angle = rot_noise.sample(&mut self.rng);
                let q = UnitQuaternion::from_axis_angle(&axis, angle);
                pose = pose.compose(&Pose::from_rotation(q));
            }
            if let Some(c) = &correction {
                pose = c.compose(&pose);
            }
            let mut det = o.clone();
            det.id = format!("det_{}", out.len());
            det.pose = pose;
            out.push(det);
        }
        out
    }

    /// Starts a joint-space move toward `goal`. Returns the number of ticks the
    /// move will take; 0 means the arm is already there.
    pub fn execute_move(&mut self, goal: &Pose, speed: Option<f64>) -> Result<u32, SimError> {
        if !self.reachable(goal) {
            return Err(SimError::Unreachable);
        }
        let kin = *self.kinematics();
        let target = kin
            .inverse(goal, &self.robot.joint_positions)
            .ok_or(SimError::Unreachable)?;
        let distance = self.robot.endpoint.distance(goal);
        let angle = self.robot.endpoint.rotation_angle_to(goal);
        if distance <= ARRIVAL_TOLERANCE && angle <= ARRIVAL_TOLERANCE {
            self.motion = None;
            self.set_joints_internal(target);
            return Ok(0);
        }
        let robot = &self.scene.robot;
        let step = speed.unwrap_or(robot.speed).max(1e-6) * robot.tick_period;
        let angular_step = robot.angular_speed.max(1e-6) * robot.tick_period;
        let total = (distance / step).ceil().max((angle / angular_step).ceil()).max(1.0) as u32;
        self.motion = Some(Motion {
            start: self.robot.joint_positions,
            delta: joint_delta(&self.robot.joint_positions, &target),
            goal: target,
            total,
            elapsed: 0,
        });
        Ok(total)
    }

    pub fn in_transit(&self) -> bool {
        self.motion.is_some()
    }

    pub fn cancel_motion(&mut self) {
        self.motion = None;
    }

    /// Advances the world by one tick.
    pub fn step(&mut self) {
        if let Some(m) = &mut self.motion {
            m.elapsed += 1;
            let joints = if m.elapsed >= m.total {
                m.goal
            } else {
                let f = m.elapsed as f64 / m.total as f64;
                std::array::from_fn(|k| m.start[k] + m.delta[k] * f)
            };
            if m.elapsed >= m.total {
                self.motion = None;
            }
            self.set_joints_internal(joints);
        }
        self.tick += 1;
        self.apply_events();
    }

    /// Teleports the arm to a joint configuration.
    pub fn set_joints(&mut self, joints: Joints) {
        self.motion = None;
        self.set_joints_internal(joints);
    }

    fn set_joints_internal(&mut self, joints: Joints) {
        self.robot.joint_positions = joints;
        self.robot.endpoint = self.kinematics().forward(&joints);
        if let Some(h) = &self.held {
            let pose = self.robot.endpoint.compose(&h.relative);
            let id = h.object.clone();
            if let Some(o) = self.objects.iter_mut().find(|o| o.id == id) {
                o.pose = pose;
            }
        }
    }

    /// Closes the gripper. The nearest free object within `radius` of the
    /// endpoint is captured and its position snaps onto the grasp frame.
    pub fn execute_grasp(&mut self, radius: f64) -> Result<String, SimError> {
        if let Some(h) = &self.held {
            return Err(SimError::GripperOccupied(h.object.clone()));
        }
        self.robot.gripper.closed = true;
        let endpoint = self.robot.endpoint;
        let nearest = self
            .objects
            .iter()
            .filter(|o| o.grasped_by.is_none())
            .map(|o| (endpoint.distance(&o.pose), o.id.clone()))
            .filter(|(d, _)| *d <= radius)
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let Some((_, id)) = nearest else {
            return Err(SimError::NothingToGrasp { radius });
        };
        let obj = self.objects.iter_mut().find(|o| o.id == id).expect("present");
        let mut relative = endpoint.inverse().compose(&obj.pose);
        relative.position = Vector3::zeros();
        obj.grasped_by = Some(GRIPPER_NAME.to_string());
        obj.pose = endpoint.compose(&relative);
        self.held = Some(Held {
            object: id.clone(),
            relative,
        });
        Ok(id)
    }

    /// Opens the gripper, dropping any held object where it is.
    pub fn execute_release(&mut self) -> Option<String> {
        self.robot.gripper.closed = false;
        let held = self.held.take()?;
        if let Some(o) = self.objects.iter_mut().find(|o| o.id == held.object) {
            o.grasped_by = None;
        }
        Some(held.object)
    }

    pub fn set_gripper_mode(&mut self, mode: GripperMode) {
        self.robot.gripper.mode = mode;
    }

    pub fn set_tool_power(&mut self, on: bool) {
        self.robot.tool_powered = on;
        for t in self.tools.values_mut() {
            t.powered = on;
        }
    }

    pub fn set_tool_in_position(&mut self, tool: &str, in_position: bool) -> Result<(), SimError> {
        let t = self
            .tools
            .get_mut(tool)
            .ok_or_else(|| SimError::UnknownTool(tool.to_string()))?;
        t.in_position = in_position;
        Ok(())
    }

    /// Marker pose seen by the camera (true camera frame, no noise).
    pub fn marker_observation(&self) -> Result<Pose, SimError> {
        let cam = &self.scene.camera;
        if !cam.marker_visible {
            return Err(SimError::MarkerNotVisible);
        }
        Ok(cam
            .pose
            .inverse()
            .compose(&self.robot.endpoint)
            .compose(&cam.marker_offset))
    }

    pub fn set_marker_visible(&mut self, visible: bool) {
        self.scene.camera.marker_visible = visible;
    }

    /// Replaces the camera pose perception believes in.
    pub fn set_calibrated_camera(&mut self, pose: Option<Pose>) {
        self.scene.camera.calibrated = pose;
    }

    fn apply_events(&mut self) {
        let now = self.tick;
        let due: Vec<SceneEvent> = self
            .scene
            .events
            .iter()
            .filter(|e| e.tick == now)
            .cloned()
            .collect();
        for e in due {
            if let Some(t) = self.tools.get_mut(&e.tool) {
                t.in_position = e.in_position;
            }
        }
    }
}

pub(crate) fn random_axis<R: Rng>(rng: &mut R) -> Unit<Vector3<f64>> {
    loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        if v.norm() > 1e-9 {
            return Unit::new_normalize(v);
        }
    }
}
