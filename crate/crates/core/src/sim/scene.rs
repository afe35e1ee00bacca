//! Scene file schema (YAML or JSON).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::kinematics::ArmKinematics;
use crate::geometry::Pose;
use crate::object::{ClassRegistry, ObjectInstance};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scene: {0}")]
    Parse(String),
    #[error("duplicate object id `{0}`")]
    DuplicateObject(String),
    #[error("region `{0}` must have positive extent on every axis")]
    InvalidRegion(String),
    #[error("noise parameter `{0}` out of range")]
    InvalidNoise(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Per-axis position standard deviation, meters.
    pub pos_sigma: f64,
    /// Rotation noise standard deviation about a random axis, radians.
    pub rot_sigma: f64,
    pub dropout_prob: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            pos_sigma: 0.005,
            rot_sigma: 0.0,
            dropout_prob: 0.0,
        }
    }
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self {
            pos_sigma: 0.0,
            rot_sigma: 0.0,
            dropout_prob: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Region {
    pub fn center(&self) -> [f64; 3] {
        std::array::from_fn(|k| 0.5 * (self.min[k] + self.max[k]))
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperKind {
    /// Two-jaw gripper; pinch mode only.
    Parallel,
    /// Adaptive gripper supporting every mode.
    #[default]
    ThreeFinger,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotConfig {
    pub home: Pose,
    pub gripper: GripperKind,
    /// Cartesian speed, m/s.
    pub speed: f64,
    /// Wrist angular speed, rad/s.
    pub angular_speed: f64,
    /// Simulated seconds per tick.
    pub tick_period: f64,
    pub kinematics: ArmKinematics,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            home: Pose::new(
                nalgebra::Vector3::new(0.4, 0.0, 0.35),
                crate::object::top_down_grasp().orientation,
            ),
            gripper: GripperKind::default(),
            speed: 0.25,
            angular_speed: 1.5,
            tick_period: 0.05,
            kinematics: ArmKinematics::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    /// True camera pose in the world frame.
    pub pose: Pose,
    /// Camera pose believed by perception (from calibration). Defaults to the
    /// true pose.
    pub calibrated: Option<Pose>,
    pub marker_visible: bool,
    /// Marker pose relative to the arm endpoint.
    pub marker_offset: Pose,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            pose: Pose::new(
                nalgebra::Vector3::new(1.2, 0.0, 0.9),
                nalgebra::UnitQuaternion::from_euler_angles(0.0, 2.4, std::f64::consts::PI),
            ),
            calibrated: None,
            marker_visible: true,
            marker_offset: Pose::from_translation(0.0, 0.0, 0.05),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    #[serde(default)]
    pub in_position: bool,
}

/// Scripted change of the world at a given tick (an operator stands in for
/// the real world, e.g. by placing the tool).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneEvent {
    pub tick: u64,
    pub tool: String,
    pub in_position: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    #[serde(rename = "class")]
    pub class_label: String,
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub robot: RobotConfig,
    #[serde(default)]
    pub camera: CameraConfig,
    #[serde(default)]
    pub frames: BTreeMap<String, Pose>,
    #[serde(default)]
    pub waypoints: BTreeMap<String, Pose>,
    #[serde(default)]
    pub regions: BTreeMap<String, Region>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub tools: Vec<ToolSpec>,
    #[serde(default)]
    pub events: Vec<SceneEvent>,
}

impl Scene {
    pub fn empty(name: &str) -> Self {
        Self {
            name: name.to_string(),
            seed: 0,
            noise: NoiseModel::zero(),
            robot: RobotConfig::default(),
            camera: CameraConfig::default(),
            frames: BTreeMap::new(),
            waypoints: BTreeMap::new(),
            regions: BTreeMap::new(),
            objects: Vec::new(),
            tools: Vec::new(),
            events: Vec::new(),
        }
    }

    /// Parses YAML; JSON documents are accepted too.
    pub fn from_yaml(text: &str) -> Result<Self, SceneError> {
        let scene: Scene = serde_yaml::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn from_path(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_yaml(&text),
        }
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("scene serializes")
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let mut seen = BTreeSet::new();
        for o in &self.objects {
            if !seen.insert(o.id.as_str()) {
                return Err(SceneError::DuplicateObject(o.id.clone()));
            }
        }
        for (name, r) in &self.regions {
            if (0..3).any(|k| r.max[k] <= r.min[k]) {
                return Err(SceneError::InvalidRegion(name.clone()));
            }
        }
        let n = &self.noise;
        if !(n.pos_sigma >= 0.0 && n.pos_sigma.is_finite()) {
            return Err(SceneError::InvalidNoise("pos_sigma"));
        }
        if !(n.rot_sigma >= 0.0 && n.rot_sigma.is_finite()) {
            return Err(SceneError::InvalidNoise("rot_sigma"));
        }
        if !(0.0..=1.0).contains(&n.dropout_prob) {
            return Err(SceneError::InvalidNoise("dropout_prob"));
        }
        Ok(())
    }

    /// Ground-truth objects sorted by id, with symmetry groups filled in from
    /// the class registry where the scene does not name one.
    pub fn instances(&self, classes: &ClassRegistry) -> Vec<ObjectInstance> {
        let mut out: Vec<ObjectInstance> = self
            .objects
            .iter()
            .map(|o| {
                let symmetry = o.symmetry.clone().unwrap_or_else(|| {
                    classes
                        .class(&o.class_label)
                        .map(|c| c.symmetry.clone())
                        .unwrap_or_else(|| "trivial".into())
                });
                ObjectInstance::new(o.id.clone(), o.class_label.clone(), o.pose).with_symmetry(symmetry)
            })
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }
}
