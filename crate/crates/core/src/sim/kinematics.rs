//! Simplified 6-DOF arm: base yaw, a two-link shoulder/elbow in the vertical
//! plane, and a spherical wrist whose roll/pitch/yaw set the tool orientation
//! directly in the world frame.
//!
//! With link lengths `upper` and `fore`, the reachable shell around the base is
//! `|upper - fore| <= r <= upper + fore`.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::Pose;

pub type Joints = [f64; 6];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmKinematics {
    pub upper: f64,
    pub fore: f64,
    pub table_z: f64,
}

impl Default for ArmKinematics {
    /// Shell radii 0.2 m and 0.85 m, table at z = 0.
    fn default() -> Self {
        Self {
            upper: 0.525,
            fore: 0.325,
            table_z: 0.0,
        }
    }
}

impl ArmKinematics {
    pub fn r_min(&self) -> f64 {
        (self.upper - self.fore).abs()
    }

    pub fn r_max(&self) -> f64 {
        self.upper + self.fore
    }

    /// Goal inside the reachable shell and not below the table plane.
    pub fn reachable(&self, goal: &Pose) -> bool {
        let r = goal.position.norm();
        r >= self.r_min() && r <= self.r_max() && goal.position.z >= self.table_z
    }

    pub fn forward(&self, q: &Joints) -> Pose {
        let rho = self.upper * q[1].cos() + self.fore * (q[1] + q[2]).cos();
        let z = self.upper * q[1].sin() + self.fore * (q[1] + q[2]).sin();
        let position = Vector3::new(rho * q[0].cos(), rho * q[0].sin(), z);
        Pose::new(position, UnitQuaternion::from_euler_angles(q[3], q[4], q[5]))
    }

    /// Elbow-up inverse kinematics. `hint` supplies the base yaw when the goal
    /// lies on the base axis. Returns `None` outside the shell radii.
    pub fn inverse(&self, goal: &Pose, hint: &Joints) -> Option<Joints> {
        let p = goal.position;
        let rho = p.x.hypot(p.y);
        let r2 = rho * rho + p.z * p.z;
        let r = r2.sqrt();
        let eps = 1e-12;
        if r < self.r_min() - eps || r > self.r_max() + eps {
            return None;
        }
        let yaw = if rho < 1e-12 { hint[0] } else { p.y.atan2(p.x) };
        let cos_elbow = ((r2 - self.upper * self.upper - self.fore * self.fore)
            / (2.0 * self.upper * self.fore))
            .clamp(-1.0, 1.0);
        let elbow = cos_elbow.acos();
        let shoulder =
            p.z.atan2(rho) - (self.fore * elbow.sin()).atan2(self.upper + self.fore * elbow.cos());
        let (roll, pitch, wrist_yaw) = goal.orientation.euler_angles();
        Some([yaw, shoulder, elbow, roll, pitch, wrist_yaw])
    }
}

/// Shortest signed difference `b - a` for revolute joints.
pub fn joint_delta(a: &Joints, b: &Joints) -> Joints {
    std::array::from_fn(|k| {
        let raw = b[k] - a[k];
        raw.sin().atan2(raw.cos())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn shell_radii() {
        let k = ArmKinematics::default();
        assert!((k.r_min() - 0.2).abs() < 1e-12);
        assert!((k.r_max() - 0.85).abs() < 1e-12);
    }

    #[test]
    fn reachability_cases() {
        let k = ArmKinematics::default();
        assert!(!k.reachable(&Pose::identity()));
        let mid = (k.r_min() + k.r_max()) / 2.0;
        assert!(k.reachable(&Pose::from_translation(mid, 0.0, 0.01)));
        assert!(!k.reachable(&Pose::from_translation(0.5, 0.0, -0.01)));
        assert!(!k.reachable(&Pose::from_translation(0.9, 0.0, 0.1)));
    }

    #[test]
    fn inverse_then_forward_round_trips() {
        let k = ArmKinematics::default();
        let goals = [
            Pose::new(
                Vector3::new(0.5, 0.2, 0.1),
                UnitQuaternion::from_euler_angles(PI, 0.1, 0.4),
            ),
            Pose::new(
                Vector3::new(-0.3, 0.4, 0.3),
                UnitQuaternion::from_euler_angles(0.2, -0.3, -2.0),
            ),
            Pose::from_translation(0.0, 0.0, 0.5),
        ];
        for g in goals {
            let q = k.inverse(&g, &[0.3, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
            let back = k.forward(&q);
            assert!(back.distance(&g) < 1e-9, "{back:?} vs {g:?}");
            assert!(back.rotation_angle_to(&g) < 1e-9);
        }
        assert!(k.inverse(&Pose::from_translation(0.05, 0.0, 0.0), &[0.0; 6]).is_none());
    }
}
