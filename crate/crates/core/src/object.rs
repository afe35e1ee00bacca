//! Object instances and the per-class registry of symmetry groups and grasp
//! frames.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, SymmetryGroup};

/// A detected or ground-truth object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: String,
    #[serde(rename = "class")]
    pub class_label: String,
    pub pose: Pose,
    /// Name of the symmetry group in the [`ClassRegistry`].
    #[serde(default = "default_symmetry")]
    pub symmetry: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasped_by: Option<String>,
}

fn default_symmetry() -> String {
    "trivial".into()
}

impl ObjectInstance {
    pub fn new(id: impl Into<String>, class_label: impl Into<String>, pose: Pose) -> Self {
        Self {
            id: id.into(),
            class_label: class_label.into(),
            pose,
            symmetry: default_symmetry(),
            grasped_by: None,
        }
    }

    pub fn with_symmetry(mut self, symmetry: impl Into<String>) -> Self {
        self.symmetry = symmetry.into();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectClass {
    pub name: String,
    pub symmetry: String,
    /// Gripper frame relative to the object frame when grasping (the `T` of a
    /// pick motion).
    pub grasp: Pose,
}

/// Gripper pointing straight down onto the object's top face.
pub fn top_down_grasp() -> Pose {
    Pose::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI))
}

#[derive(Clone, Debug)]
pub struct ClassRegistry {
    classes: BTreeMap<String, ObjectClass>,
    groups: BTreeMap<String, SymmetryGroup>,
}

impl Default for ClassRegistry {
    fn default() -> Self {
        let mut r = ClassRegistry {
            classes: BTreeMap::new(),
            groups: BTreeMap::new(),
        };
        for g in [
            SymmetryGroup::trivial(),
            SymmetryGroup::cube(),
            SymmetryGroup::cylinder(4),
        ] {
            r.groups.insert(g.name.clone(), g);
        }
        r.insert_class("node", "cube", top_down_grasp());
        r.insert_class("link", "cylinder4", top_down_grasp());
        r.insert_class("tool", "trivial", top_down_grasp());
        r
    }
}

impl ClassRegistry {
    pub fn insert_class(&mut self, name: &str, symmetry: &str, grasp: Pose) {
        self.classes.insert(
            name.to_string(),
            ObjectClass {
                name: name.to_string(),
                symmetry: symmetry.to_string(),
                grasp,
            },
        );
    }

    pub fn insert_group(&mut self, group: SymmetryGroup) {
        self.groups.insert(group.name.clone(), group);
    }

    pub fn class(&self, name: &str) -> Option<&ObjectClass> {
        self.classes.get(name)
    }

    /// Resolves a group by name. `cylinderN` names are generated on demand;
    /// unknown names fall back to the trivial group.
    pub fn group(&self, name: &str) -> SymmetryGroup {
        if let Some(g) = self.groups.get(name) {
            return g.clone();
        }
        if let Some(n) = name
            .strip_prefix("cylinder")
            .and_then(|n| n.parse::<usize>().ok())
        {
            return SymmetryGroup::cylinder(n);
        }
        SymmetryGroup::trivial()
    }

    /// Symmetry group for a class label, via the class entry.
    pub fn group_for_class(&self, class: &str) -> SymmetryGroup {
        match self.classes.get(class) {
            Some(c) => self.group(&c.symmetry),
            None => SymmetryGroup::trivial(),
        }
    }

    pub fn grasp_for_class(&self, class: &str) -> Pose {
        self.classes
            .get(class)
            .map(|c| c.grasp)
            .unwrap_or_else(top_down_grasp)
    }

    pub fn class_names(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }
}
