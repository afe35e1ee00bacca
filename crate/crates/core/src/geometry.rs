//! Rigid transforms, discrete rotation symmetry groups and canonical
//! orientation of symmetric objects.
//!
//! Orientations are unit quaternions kept in the `w >= 0` hemisphere, so `q`
//! and `-q` never appear as two different values for the same rotation.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Two candidate orientations whose geodesic distance to identity differs by
/// less than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// A 6-DOF rigid transform: position in meters plus a unit quaternion.
#[derive(Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl fmt::Debug for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [x, y, z, qw, qx, qy, qz] = self.to_array();
        write!(
            f,
            "Pose([{x:.6}, {y:.6}, {z:.6}], [{qw:.6}, {qx:.6}, {qy:.6}, {qz:.6}])"
        )
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation: canonical_sign(orientation),
        }
    }

    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    pub fn from_rotation(orientation: UnitQuaternion<f64>) -> Self {
        Self::new(Vector3::zeros(), orientation)
    }

    /// Rotation about the world z axis by `angle` radians.
    pub fn rot_z(angle: f64) -> Self {
        Self::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle))
    }

    /// Builds a pose from `[x, y, z, qw, qx, qy, qz]`. The quaternion is
    /// normalized; a zero quaternion is rejected.
    pub fn from_array(v: [f64; 7]) -> Option<Self> {
        let q = Quaternion::new(v[3], v[4], v[5], v[6]);
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 || v[..3].iter().any(|c| !c.is_finite()) {
            return None;
        }
        Some(Self::new(
            Vector3::new(v[0], v[1], v[2]),
            UnitQuaternion::new_normalize(q),
        ))
    }

    pub fn to_array(&self) -> [f64; 7] {
        let q = self.orientation.quaternion();
        [
            self.position.x,
            self.position.y,
            self.position.z,
            q.w,
            q.i,
            q.j,
            q.k,
        ]
    }

    /// `self · other`: apply `other` in the frame of `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let position = self.position + self.orientation * other.position;
        let orientation = renormalize(self.orientation * other.orientation);
        Pose::new(position, orientation)
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose::new(-(inv * self.position), inv)
    }

    /// Expresses a world point in this pose's frame.
    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.inverse() * (p - self.position)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * p
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.position - other.position).norm()
    }

    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        geodesic(&self.orientation, &other.orientation)
    }

    pub fn is_unit(&self) -> bool {
        (self.orientation.quaternion().norm() - 1.0).abs() < 1e-9
    }
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = <[f64; 7]>::deserialize(d)?;
        Pose::from_array(v).ok_or_else(|| D::Error::custom("pose quaternion must be non-zero"))
    }
}

/// Flips `q` into the `w >= 0` hemisphere.
pub fn canonical_sign(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.w < 0.0 {
        Unit::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    canonical_sign(UnitQuaternion::new_normalize(q.into_inner()))
}

/// Rotation angle of `q` away from identity, `2·acos(|w|)`.
pub fn angle_from_identity(q: &UnitQuaternion<f64>) -> f64 {
    2.0 * q.w.abs().min(1.0).acos()
}

/// Geodesic angle between two rotations, treating `q` and `-q` as equal.
pub fn geodesic(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    angle_from_identity(&(a.inverse() * b))
}

/// A finite rotation group of an object model. Element 0 is always identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryGroup {
    pub name: String,
    pub elements: Vec<UnitQuaternion<f64>>,
}

impl SymmetryGroup {
    pub fn trivial() -> Self {
        Self {
            name: "trivial".into(),
            elements: vec![UnitQuaternion::identity()],
        }
    }

    /// The 24 proper rotations of an axis-aligned cube.
    pub fn cube() -> Self {
        let quarter = |axis| UnitQuaternion::from_axis_angle(&axis, FRAC_PI_2);
        let generators = [
            quarter(Vector3::x_axis()),
            quarter(Vector3::y_axis()),
            quarter(Vector3::z_axis()),
        ];
        Self {
            name: "cube".into(),
            elements: close_under_composition(&generators),
        }
    }

    /// `n` rotations about the body z axis, each with and without a half turn
    /// about the body x axis (the dihedral group of order `2n`).
    pub fn cylinder(n: usize) -> Self {
        let n = n.max(1);
        let flip = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI);
        let spins: Vec<_> = (0..n)
            .map(|k| {
                UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 2.0 * PI * k as f64 / n as f64)
            })
            .collect();
        let elements = spins
            .iter()
            .copied()
            .chain(spins.iter().map(|s| flip * s))
            .map(renormalize)
            .collect();
        Self {
            name: format!("cylinder{n}"),
            elements,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Index of the element equal to `q` (up to sign) within `tol` radians.
    pub fn position_of(&self, q: &UnitQuaternion<f64>, tol: f64) -> Option<usize> {
        self.elements.iter().position(|e| geodesic(e, q) <= tol)
    }

    /// Checks that the composition of any two elements is again an element.
    pub fn is_closed(&self, tol: f64) -> bool {
        self.elements.iter().all(|a| {
            self.elements
                .iter()
                .all(|b| self.position_of(&(a * b), tol).is_some())
        })
    }
}

fn close_under_composition(generators: &[UnitQuaternion<f64>]) -> Vec<UnitQuaternion<f64>> {
    let mut elements = vec![UnitQuaternion::identity()];
    let mut frontier = 0;
    while frontier < elements.len() {
        let current = elements[frontier];
        for g in generators {
            let candidate = renormalize(current * g);
            if !elements.iter().any(|e| geodesic(e, &candidate) < 1e-6) {
                elements.push(candidate);
            }
        }
        frontier += 1;
    }
    elements
}

/// A body axis used to break ties between equally canonical orientations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Order in which body axes are compared against their world counterparts
/// when two candidates are equally close to identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisPriority(pub [Axis; 3]);

impl Default for AxisPriority {
    fn default() -> Self {
        AxisPriority([Axis::Z, Axis::X, Axis::Y])
    }
}

/// Result of canonicalizing an orientation against a symmetry group.
#[derive(Clone, Copy, Debug)]
pub struct Canonical {
    pub pose: Pose,
    /// Index of the group element `s` with `pose = input · s`.
    pub element: usize,
}

/// Picks, among the symmetry-equivalent poses `p·s`, the one whose rotation
/// is closest to identity. Ties go to the candidate whose prioritized body
/// axes best align with the matching world axes.
pub fn canonicalize(p: &Pose, group: &SymmetryGroup, priority: AxisPriority) -> Canonical {
    assert!(!group.is_empty(), "symmetry group must be non-empty");
    let mut best: Option<(usize, Pose, f64)> = None;
    for (i, s) in group.elements.iter().enumerate() {
        let candidate = p.compose(&Pose::from_rotation(*s));
        let angle = angle_from_identity(&candidate.orientation);
        let better = match &best {
            None => true,
            Some((_, incumbent, best_angle)) => {
                if angle < best_angle - TIE_TOLERANCE {
                    true
                } else if angle > best_angle + TIE_TOLERANCE {
                    false
                } else {
                    prefers(&candidate.orientation, &incumbent.orientation, priority)
                }
            }
        };
        if better {
            best = Some((i, candidate, angle));
        }
    }
    let (element, pose, _) = best.expect("non-empty group");
    Canonical { pose, element }
}

/// Convenience wrapper returning only the canonical pose.
pub fn set_canonical_orientation(p: &Pose, group: &SymmetryGroup, priority: AxisPriority) -> Pose {
    canonicalize(p, group, priority).pose
}

fn axis_alignment(q: &UnitQuaternion<f64>, axis: Axis) -> f64 {
    let m = q.to_rotation_matrix();
    let m = m.matrix();
    match axis {
        Axis::X => m[(0, 0)],
        Axis::Y => m[(1, 1)],
        Axis::Z => m[(2, 2)],
    }
}

// Strictly better on the first axis that differs beyond tolerance.
fn prefers(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, priority: AxisPriority) -> bool {
    for axis in priority.0 {
        let (da, db) = (axis_alignment(a, axis), axis_alignment(b, axis));
        if da > db + TIE_TOLERANCE {
            return true;
        }
        if da < db - TIE_TOLERANCE {
            return false;
        }
    }
    false
}
