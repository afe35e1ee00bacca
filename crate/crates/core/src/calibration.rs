//! Dual-quaternion hand-eye calibration solving `A X = X B`.
//!
//! With the camera fixed in the world and a marker carried by the arm,
//! `E_i` is the marker pose in the base frame and `C_i` the marker pose seen
//! by the camera. Then `E_i = X C_i`, so consecutive stations give
//! `A = E_{i+1} E_i⁻¹`, `B = C_{i+1} C_i⁻¹` and `X` is the camera pose in the
//! base frame.
//!
//! Quaternions are laid out `[w, x, y, z]` and the rotation part of every dual
//! quaternion is sign-normalized to `w ≥ 0`.

use nalgebra::{DMatrix, Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;
use crate::sim::{random_axis, Joints, SimError, Simulation};

/// Minimum angle between two motion axes for the problem to be well posed.
pub const PARALLEL_AXIS_TOLERANCE_DEG: f64 = 1.0;
pub const DEFAULT_CONSISTENCY_DEG: f64 = 5.0;
/// Rotations smaller than this carry no usable axis.
const MIN_ROTATION: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("degenerate motions: {0}")]
    DegenerateMotions(String),
    #[error("pair {index}: rotation angles differ by {mismatch_deg:.3} deg")]
    InconsistentPair { index: usize, mismatch_deg: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionPair {
    pub a: Pose,
    pub b: Pose,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CalibrationResult {
    pub x: Pose,
    pub residual: f64,
    pub pair_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Largest allowed difference between the rotation angles of A and B.
    pub consistency_deg: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            consistency_deg: DEFAULT_CONSISTENCY_DEG,
        }
    }
}

/// Real and dual parts of a unit dual quaternion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualQuat {
    pub real: Quaternion<f64>,
    pub dual: Quaternion<f64>,
}

impl DualQuat {
    pub fn from_pose(p: &Pose) -> Self {
        let mut real = *p.orientation.quaternion();
        if real.w < 0.0 {
            real = -real;
        }
        let t = Quaternion::from_parts(0.0, p.position);
        Self {
            real,
            dual: t * real * 0.5,
        }
    }

    pub fn to_pose(&self) -> Pose {
        let n = self.real.norm();
        let real = self.real / n;
        let dual = self.dual / n;
        let t = (dual * real.conjugate() * 2.0).imag();
        Pose::new(t, UnitQuaternion::new_unchecked(real))
    }

    pub fn mul(&self, o: &DualQuat) -> DualQuat {
        DualQuat {
            real: self.real * o.real,
            dual: self.real * o.dual + self.dual * o.real,
        }
    }

    pub fn to_array(&self) -> [f64; 8] {
        let (r, d) = (self.real, self.dual);
        [r.w, r.i, r.j, r.k, d.w, d.i, d.j, d.k]
    }

    fn from_slice(v: &[f64]) -> Self {
        Self {
            real: Quaternion::new(v[0], v[1], v[2], v[3]),
            dual: Quaternion::new(v[4], v[5], v[6], v[7]),
        }
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    v.cross_matrix()
}

/// Mean of `|a x - x b|` over the pairs.
pub fn alignment_residual(x: &Pose, pairs: &[MotionPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let xq = DualQuat::from_pose(x);
    let total: f64 = pairs
        .iter()
        .map(|p| {
            let l = DualQuat::from_pose(&p.a).mul(&xq).to_array();
            let r = xq.mul(&DualQuat::from_pose(&p.b)).to_array();
            l.iter().zip(&r).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
        })
        .sum();
    total / pairs.len() as f64
}

fn rotation_axis(p: &Pose) -> Option<Vector3<f64>> {
    p.orientation.axis_angle().and_then(|(axis, angle)| (angle > MIN_ROTATION).then_some(axis.into_inner()))
}

fn check_pairs(pairs: &[MotionPair], opts: &SolveOptions) -> Result<(), CalibrationError> {
    if pairs.len() < 2 {
        return Err(CalibrationError::DegenerateMotions(format!(
            "need at least 2 motion pairs, got {}",
            pairs.len()
        )));
    }
    for (index, p) in pairs.iter().enumerate() {
        let mismatch = (p.a.orientation.angle() - p.b.orientation.angle()).abs().to_degrees();
        if mismatch > opts.consistency_deg {
            return Err(CalibrationError::InconsistentPair {
                index,
                mismatch_deg: mismatch,
            });
        }
    }
    let axes: Vec<Vector3<f64>> = pairs.iter().filter_map(|p| rotation_axis(&p.a)).collect();
    let parallel = PARALLEL_AXIS_TOLERANCE_DEG.to_radians().cos();
    let spread = axes
        .iter()
        .enumerate()
        .any(|(i, u)| axes[i + 1..].iter().any(|v| u.dot(v).abs() < parallel));
    if !spread {
        return Err(CalibrationError::DegenerateMotions(format!(
            "rotation axes are parallel within {PARALLEL_AXIS_TOLERANCE_DEG} deg"
        )));
    }
    Ok(())
}

/// Stacked linear constraints, six rows per pair, on `[q; q']` of X.
pub fn constraint_matrix(pairs: &[MotionPair]) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(6 * pairs.len(), 8);
    for (k, p) in pairs.iter().enumerate() {
        let a = DualQuat::from_pose(&p.a);
        let b = DualQuat::from_pose(&p.b);
        let (av, bv) = (a.real.imag(), b.real.imag());
        let (adv, bdv) = (a.dual.imag(), b.dual.imag());
        let r = 6 * k;
        t.view_mut((r, 0), (3, 1)).copy_from(&(av - bv));
        t.view_mut((r, 1), (3, 3)).copy_from(&skew(&(av + bv)));
        t.view_mut((r + 3, 0), (3, 1)).copy_from(&(adv - bdv));
        t.view_mut((r + 3, 1), (3, 3)).copy_from(&skew(&(adv + bdv)));
        t.view_mut((r + 3, 4), (3, 1)).copy_from(&(av - bv));
        t.view_mut((r + 3, 5), (3, 3)).copy_from(&skew(&(av + bv)));
    }
    t
}

/// Real roots of `a s² + b s + c = 0` for the better-conditioned of the two
/// homogeneous parametrizations, as directions `(λ1, λ2)`.
fn mixing_directions(a: f64, b: f64, c: f64) -> Vec<(f64, f64)> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return vec![(1.0, 0.0), (0.0, 1.0)];
    }
    let (a, b, c) = (a / scale, b / scale, c / scale);
    let roots = |p: f64, q: f64, r: f64| -> Vec<f64> {
        let disc = (q * q - 4.0 * p * r).max(0.0).sqrt();
        vec![(-q + disc) / (2.0 * p), (-q - disc) / (2.0 * p)]
    };
    if a.abs() >= c.abs() && a.abs() > 1e-12 {
        // λ1 = s λ2
        roots(a, b, c).into_iter().map(|s| (s, 1.0)).collect()
    } else if c.abs() > 1e-12 {
        // λ2 = s λ1
        roots(c, b, a).into_iter().map(|s| (1.0, s)).collect()
    } else {
        vec![(1.0, 0.0), (0.0, 1.0)]
    }
}

pub fn solve_hand_eye(pairs: &[MotionPair]) -> Result<CalibrationResult, CalibrationError> {
    solve_hand_eye_with(pairs, &SolveOptions::default())
}

pub fn solve_hand_eye_with(pairs: &[MotionPair], opts: &SolveOptions) -> Result<CalibrationResult, CalibrationError> {
    check_pairs(pairs, opts)?;
    let t = constraint_matrix(pairs);
    let svd = t.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let v1: Vec<f64> = v_t.row(order[0]).iter().copied().collect();
    let v2: Vec<f64> = v_t.row(order[1]).iter().copied().collect();
    let (u1, w1) = (&v1[..4], &v1[4..]);
    let (u2, w2) = (&v2[..4], &v2[4..]);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();

    // q·q' = 0 fixes the ratio; q·q = 1 the scale.
    let a = dot(u1, w1);
    let b = dot(u1, w2) + dot(u2, w1);
    let c = dot(u2, w2);
    let norm_sq = |l1: f64, l2: f64| l1 * l1 * dot(u1, u1) + 2.0 * l1 * l2 * dot(u1, u2) + l2 * l2 * dot(u2, u2);
    let (l1, l2) = mixing_directions(a, b, c)
        .into_iter()
        .map(|(l1, l2)| {
            let n = (l1 * l1 + l2 * l2).sqrt();
            (l1 / n, l2 / n)
        })
        .max_by(|x, y| norm_sq(x.0, x.1).total_cmp(&norm_sq(y.0, y.1)))
        .expect("at least one direction");
    let scale = norm_sq(l1, l2).sqrt();
    let mut x: Vec<f64> = v1.iter().zip(&v2).map(|(p, q)| (l1 * p + l2 * q) / scale).collect();
    if x[0] < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let pose = DualQuat::from_slice(&x).to_pose();
    Ok(CalibrationResult {
        x: pose,
        residual: alignment_residual(&pose, pairs),
        pair_count: pairs.len(),
    })
}

/// Distance between two estimates: position error in meters and rotation
/// error in radians.
pub fn pose_error(estimate: &Pose, truth: &Pose) -> (f64, f64) {
    (estimate.distance(truth), estimate.rotation_angle_to(truth))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StationOptions {
    /// Standard deviation of the rotation error added to each marker
    /// observation, radians.
    pub rot_sigma: f64,
    /// Per-axis position error of each marker observation, meters.
    pub pos_sigma: f64,
    /// Pair every two stations instead of consecutive ones.
    pub all_pairs: bool,
    pub seed: u64,
}

impl Default for StationOptions {
    fn default() -> Self {
        Self {
            rot_sigma: 0.0,
            pos_sigma: 0.0,
            all_pairs: false,
            seed: 0,
        }
    }
}

/// Joint configuration of the `k`-th calibration station.
pub fn station_joints(k: usize) -> Joints {
    let t = k as f64;
    [
        0.6 * (0.9 * t).sin(),
        0.55 + 0.2 * (1.3 * t).cos(),
        1.1 + 0.25 * (0.7 * t).sin(),
        std::f64::consts::PI + 0.5 * (1.1 * t).sin(),
        0.45 * (0.8 * t + 0.3).cos(),
        0.9 * (1.7 * t).sin(),
    ]
}

/// Moves the arm through `n` stations and differences the recorded marker
/// poses into motion pairs.
pub fn collect_stations(sim: &mut Simulation, n: usize, opts: &StationOptions) -> Result<Vec<MotionPair>, CalibrationError> {
    sim.marker_observation()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let rot = Normal::new(0.0, opts.rot_sigma.max(0.0)).expect("finite sigma");
    let pos = Normal::new(0.0, opts.pos_sigma.max(0.0)).expect("finite sigma");
    let offset = sim.scene().camera.marker_offset;
    let mut stations = Vec::with_capacity(n);
    for k in 0..n {
        let target = sim.kinematics().forward(&station_joints(k));
        match sim.execute_move(&target, None) {
            Ok(_) => {
                while sim.in_transit() {
                    sim.step();
                }
            }
            Err(_) => sim.set_joints(station_joints(k)),
        }
        let e = sim.robot().endpoint.compose(&offset);
        let mut c = sim.marker_observation()?;
        if opts.rot_sigma > 0.0 {
            let q = UnitQuaternion::from_axis_angle(&random_axis(&mut rng), rot.sample(&mut rng));
            c = c.compose(&Pose::from_rotation(q));
        }
        if opts.pos_sigma > 0.0 {
            let d = Vector3::new(pos.sample(&mut rng), pos.sample(&mut rng), pos.sample(&mut rng));
            c = Pose::new(c.position + d, c.orientation);
        }
        stations.push((e, c));
    }
    Ok(pair_stations(&stations, opts.all_pairs))
}

/// Relative motions between stations `(E_i, C_i)`.
pub fn pair_stations(stations: &[(Pose, Pose)], all_pairs: bool) -> Vec<MotionPair> {
    let mut out = Vec::new();
    for i in 0..stations.len() {
        let js: Vec<usize> = if all_pairs {
            (i + 1..stations.len()).collect()
        } else {
            (i + 1..stations.len().min(i + 2)).collect()
        };
        for j in js {
            let (ei, ci) = stations[i];
            let (ej, cj) = stations[j];
            out.push(MotionPair {
                a: ej.compose(&ei.inverse()),
                b: cj.compose(&ci.inverse()),
            });
        }
    }
    out
}
