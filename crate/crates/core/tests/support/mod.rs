//! Independent reference implementations and random generators shared by the
//! integration tests and the acceptance run.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;

use costar_core::btree::{NodeKind, NodeSpec, NodeStatus, OpBinding, ParamValue, TickStatus, TransitionEvent};
use costar_core::components::World;
use costar_core::dsl::PlanDocument;
use costar_core::geometry::Pose;
use costar_core::spatial::IndexEntry;
use nalgebra::{Matrix3, Matrix4, Quaternion, Rotation3, UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- geometry

/// Uniform random rotation (Shoemake's method).
pub fn random_rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    UnitQuaternion::from_quaternion(Quaternion::new(
        b * (2.0 * PI * u3).cos(),
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
    ))
}

pub fn random_pose(rng: &mut impl Rng, half_extent: f64) -> Pose {
    let p = Vector3::from_fn(|_, _| rng.random_range(-half_extent..half_extent));
    Pose::new(p, random_rotation(rng))
}

/// Homogeneous matrix of a pose, built from its rotation matrix.
pub fn matrix(p: &Pose) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&quaternion_matrix(&p.orientation));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&p.position);
    m
}

pub fn inverse_matrix(m: &Matrix4<f64>) -> Matrix4<f64> {
    let rt = rotation_of(m).transpose();
    let mut out = Matrix4::identity();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
    out.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-rt * translation_of(m)));
    out
}

pub fn pose_of(m: &Matrix4<f64>) -> Pose {
    Pose::new(translation_of(m), matrix_quaternion(&rotation_of(m)))
}

pub fn rotation_of(m: &Matrix4<f64>) -> Matrix3<f64> {
    m.fixed_view::<3, 3>(0, 0).into_owned()
}

pub fn translation_of(m: &Matrix4<f64>) -> Vector3<f64> {
    m.fixed_view::<3, 1>(0, 3).into_owned()
}

/// Rotation angle of a rotation matrix: cosine from the trace, sine from the
/// skew part, so small angles keep full precision.
pub fn matrix_angle(r: &Matrix3<f64>) -> f64 {
    let skew = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    (skew.norm() / 2.0).atan2((r.trace() - 1.0) / 2.0)
}

/// Angle between two rotation matrices.
pub fn matrix_geodesic(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    matrix_angle(&(a.transpose() * b))
}

pub fn quaternion_matrix(q: &UnitQuaternion<f64>) -> Matrix3<f64> {
    *q.to_rotation_matrix().matrix()
}

pub fn matrix_quaternion(m: &Matrix3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*m))
}

/// The 24 rotations of a cube as signed permutation matrices with
/// determinant +1.
pub fn cube_rotation_matrices() -> Vec<Matrix3<f64>> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::new();
    for p in perms {
        for signs in 0..8u8 {
            let mut m = Matrix3::<f64>::zeros();
            for (row, col) in p.iter().enumerate() {
                m[(row, *col)] = if signs >> row & 1 == 1 { -1.0 } else { 1.0 };
            }
            if (m.determinant() - 1.0).abs() < 1e-12 {
                out.push(m);
            }
        }
    }
    out
}

/// Brute-force canonical orientation: among `R·S` for every `S`, the one with
/// the smallest rotation angle; near-ties (1e-9) go to the larger diagonal
/// entry, compared z then x then y.
pub fn brute_canonical(r: &Matrix3<f64>, group: &[Matrix3<f64>]) -> Matrix3<f64> {
    const TOL: f64 = 1e-9;
    let candidates: Vec<(f64, Matrix3<f64>)> = group.iter().map(|s| (matrix_angle(&(r * s)), r * s)).collect();
    let min = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let mut tied: Vec<Matrix3<f64>> = candidates.into_iter().filter(|c| c.0 <= min + TOL).map(|c| c.1).collect();
    for k in [2, 0, 1] {
        let best = tied.iter().map(|m| m[(k, k)]).fold(f64::NEG_INFINITY, f64::max);
        tied.retain(|m| m[(k, k)] >= best - TOL);
    }
    tied[0]
}

// ---------------------------------------------------------------- spatial

/// Linear scan nearest neighbor with the same filters and tie rule as the
/// index: distance `<=` limit, class equality, smaller id on equal distance.
pub fn linear_nearest(entries: &[IndexEntry], p: &[f64; 3], max_distance: Option<f64>, class: Option<&str>) -> Option<String> {
    let mut best: Option<(f64, &str)> = None;
    for e in entries {
        let d = ((e.position[0] - p[0]).powi(2) + (e.position[1] - p[1]).powi(2) + (e.position[2] - p[2]).powi(2)).sqrt();
        if max_distance.is_some_and(|m| d > m) || class.is_some_and(|c| c != e.class_label) {
            continue;
        }
        let better = match best {
            None => true,
            Some((bd, bid)) => d < bd || (d == bd && e.id.as_str() < bid),
        };
        if better {
            best = Some((d, &e.id));
        }
    }
    best.map(|(_, id)| id.to_string())
}

/// One detection: class and position.
#[derive(Clone, Debug)]
pub struct Detection {
    pub class: String,
    pub position: [f64; 3],
    pub orientation: UnitQuaternion<f64>,
}

/// Literal greedy matcher: each detection in order takes the nearest
/// remaining prior of its class within `d_max`, which is then removed; the
/// rest get `<class>_<n>` from a per-class counter that skips names in use.
#[derive(Debug, Default)]
pub struct GreedyMatcher {
    prior: Vec<(String, String, [f64; 3])>,
    used: BTreeSet<String>,
    counters: BTreeMap<String, u64>,
}

impl GreedyMatcher {
    pub fn update(&mut self, detections: &[Detection], d_max: f64) -> Vec<String> {
        for (id, _, _) in &self.prior {
            self.used.insert(id.clone());
        }
        let mut remaining = std::mem::take(&mut self.prior);
        let mut out = Vec::new();
        for det in detections {
            let mut best: Option<(usize, f64)> = None;
            for (k, (id, class, p)) in remaining.iter().enumerate() {
                if *class != det.class {
                    continue;
                }
                let d = (0..3).map(|i| (p[i] - det.position[i]).powi(2)).sum::<f64>().sqrt();
                if d > d_max {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bk, bd)) => d < bd || (d == bd && *id < remaining[bk].0),
                };
                if better {
                    best = Some((k, d));
                }
            }
            let id = match best {
                Some((k, _)) => remaining.remove(k).0,
                None => loop {
                    let c = self.counters.entry(det.class.clone()).or_insert(0);
                    *c += 1;
                    let name = format!("{}_{}", det.class, c);
                    if self.used.insert(name.clone()) {
                        break name;
                    }
                },
            };
            out.push(id);
        }
        self.prior = out
            .iter()
            .zip(detections)
            .map(|(id, d)| (id.clone(), d.class.clone(), d.position))
            .collect();
        out
    }
}

/// Two perception frames: objects scattered on a table, then moved by
/// displacements drawn on both sides of `d_max`, partly removed, with new
/// arrivals, in shuffled order.
pub fn two_frame_scene(rng: &mut impl Rng, d_max: f64) -> (Vec<Detection>, Vec<Detection>) {
    let classes = ["node", "link"];
    let n = rng.random_range(1..=20);
    let first: Vec<Detection> = (0..n)
        .map(|_| Detection {
            class: classes[rng.random_range(0..2)].to_string(),
            position: [rng.random_range(0.0..0.6), rng.random_range(-0.3..0.3), 0.02],
            orientation: random_rotation(rng),
        })
        .collect();
    let kept: Vec<&Detection> = first.iter().filter(|_| rng.random_bool(0.85)).collect();
    let mut second: Vec<Detection> = kept
        .into_iter()
        .map(|d| {
            let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0).normalize();
            let step = d_max * rng.random_range(0.0..2.0);
            Detection {
                class: d.class.clone(),
                position: [d.position[0] + dir.x * step, d.position[1] + dir.y * step, d.position[2]],
                orientation: random_rotation(rng),
            }
        })
        .collect();
    let arrivals = rng.random_range(0..=(20 - second.len()).min(4));
    for _ in 0..arrivals {
        second.push(Detection {
            class: classes[rng.random_range(0..2)].to_string(),
            position: [rng.random_range(0.0..0.6), rng.random_range(-0.3..0.3), 0.02],
            orientation: random_rotation(rng),
        });
    }
    second.shuffle(rng);
    (first, second)
}

// ---------------------------------------------------------------- SmartMove

#[derive(Clone, Debug, PartialEq)]
pub struct BruteChoice {
    pub object: String,
    pub element: usize,
    pub goal: Matrix4<f64>,
    pub cost: f64,
}

/// Predicate-filtered full enumeration of `o · s · T` followed by an argmin
/// of `|Δp| + λ·angle` over the reachable candidates above the table.
/// Returns the choice (if any) and the size of the unfiltered set.
pub fn brute_smart_move(
    world: &World,
    class: &str,
    relation: Option<(&str, &Pose)>,
    approach: f64,
    lambda: f64,
) -> (Option<BruteChoice>, usize) {
    let kin = world.sim.kinematics();
    let (r_min, r_max, table) = ((kin.upper - kin.fore).abs(), kin.upper + kin.fore, kin.table_z);
    let e = matrix(&world.sim.robot().endpoint);
    let mut all = 0;
    let mut best: Option<BruteChoice> = None;
    for o in &world.objects {
        if o.class_label != class {
            continue;
        }
        if let Some((rel, reference)) = relation {
            let rm = matrix(reference);
            let local = rotation_of(&rm).transpose() * (o.pose.position - translation_of(&rm));
            let holds = match rel {
                "RightOf" => local.y < 0.0,
                "LeftOf" => local.y > 0.0,
                "InFrontOf" => local.x > 0.0,
                other => panic!("unsupported relation {other}"),
            };
            if !holds {
                continue;
            }
        }
        let grasp = matrix(&world.classes().grasp_for_class(&o.class_label));
        let mut back_off = Matrix4::identity();
        back_off[(2, 3)] = -approach;
        let group = world.classes().group(&o.symmetry);
        for (k, s) in group.elements.iter().enumerate() {
            all += 1;
            let mut sm = Matrix4::identity();
            sm.fixed_view_mut::<3, 3>(0, 0).copy_from(&quaternion_matrix(s));
            let g = matrix(&o.pose) * sm * grasp * back_off;
            let p = translation_of(&g);
            let r = p.norm();
            if r < r_min || r > r_max || p.z <= table {
                continue;
            }
            let cost = (p - translation_of(&e)).norm() + lambda * matrix_geodesic(&rotation_of(&e), &rotation_of(&g));
            let better = match &best {
                None => true,
                Some(b) => cost < b.cost || (cost == b.cost && (o.id.as_str(), k) < (b.object.as_str(), b.element)),
            };
            if better {
                best = Some(BruteChoice {
                    object: o.id.clone(),
                    element: k,
                    goal: g,
                    cost,
                });
            }
        }
    }
    (best, all)
}

// ---------------------------------------------------------------- calibration

/// Synthetic hand-eye problem with camera pose `x`: stations `E_i` and
/// observations `C_i = X⁻¹ E_i`, each observation rotated by an angle drawn
/// from `N(0, sigma)` about a uniform axis. Pairs are consecutive, or every
/// pair when `all_pairs` is set, as `(E_j E_i⁻¹, C_j C_i⁻¹)`.
pub fn synthetic_hand_eye(
    rng: &mut impl Rng,
    x: &Pose,
    stations: usize,
    sigma: f64,
    all_pairs: bool,
) -> Vec<(Pose, Pose)> {
    let xm = matrix(x);
    let obs: Vec<(Matrix4<f64>, Matrix4<f64>)> = (0..stations)
        .map(|_| {
            let e = matrix(&random_pose(rng, 0.5));
            let mut c = inverse_matrix(&xm) * e;
            if sigma > 0.0 {
                let axis = nalgebra::Unit::new_normalize(Vector3::from_fn(|_, _| gaussian(rng)));
                let noise = *Rotation3::from_axis_angle(&axis, sigma * gaussian(rng)).matrix();
                let r = rotation_of(&c) * noise;
                c.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
            }
            (e, c)
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..stations {
        let last = if all_pairs { stations } else { (i + 2).min(stations) };
        for j in i + 1..last {
            let a = obs[j].0 * inverse_matrix(&obs[i].0);
            let b = obs[j].1 * inverse_matrix(&obs[i].1);
            pairs.push((pose_of(&a), pose_of(&b)));
        }
    }
    pairs
}

/// Standard normal sample by Box-Muller.
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Position error and rotation error (radians) between two poses, from
/// their matrices.
pub fn matrix_pose_error(estimate: &Pose, truth: &Pose) -> (f64, f64) {
    let (a, b) = (matrix(estimate), matrix(truth));
    (
        (translation_of(&a) - translation_of(&b)).norm(),
        matrix_geodesic(&rotation_of(&a), &rotation_of(&b)),
    )
}

// ---------------------------------------------------------------- behavior trees

#[derive(Clone, Debug, Default)]
struct RefState {
    status: Option<TickStatus>,
    done: Option<TickStatus>,
    cursor: usize,
    count: u32,
    resets: u32,
}

/// Naive recursive interpreter over the node tree, with state in a map keyed by
/// node id. Leaves replay scripts: the k-th tick of a leaf yields entry k,
/// the last entry repeating; unscripted leaves succeed.
#[derive(Debug, Default)]
pub struct ReferenceBt {
    state: HashMap<String, RefState>,
    scripts: HashMap<String, Vec<TickStatus>>,
    calls: HashMap<String, usize>,
    tick: u64,
    pub events: Vec<TransitionEvent>,
    pub log: Vec<(u64, String)>,
}

fn node_status(s: Option<TickStatus>) -> NodeStatus {
    s.map_or(NodeStatus::Idle, NodeStatus::from)
}

impl ReferenceBt {
    pub fn new(scripts: &BTreeMap<String, Vec<TickStatus>>) -> Self {
        Self {
            scripts: scripts.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
            ..Default::default()
        }
    }

    /// One tick from the implicit root above `top`.
    pub fn tick(&mut self, top: &NodeSpec) -> TickStatus {
        let s = self.eval(top, "root.0");
        self.set("root", Some(s));
        self.tick += 1;
        s
    }

    fn set(&mut self, id: &str, s: Option<TickStatus>) {
        let st = self.state.entry(id.to_string()).or_default();
        if node_status(st.status) != node_status(s) {
            self.events.push(TransitionEvent {
                node_id: id.to_string(),
                status: node_status(s),
                tick_index: self.tick,
            });
        }
        st.status = s;
    }

    fn finish(&mut self, id: &str, s: TickStatus) -> TickStatus {
        self.set(id, Some(s));
        if s != TickStatus::Busy {
            self.state.get_mut(id).unwrap().done = Some(s);
        }
        s
    }

    fn clear(&mut self, spec: &NodeSpec, id: &str) {
        self.set(id, None);
        let st = self.state.get_mut(id).unwrap();
        st.done = None;
        st.cursor = 0;
        st.count = 0;
        st.resets = 0;
        for (k, c) in spec.children.iter().enumerate() {
            self.clear(c, &format!("{id}.{k}"));
        }
    }

    fn eval(&mut self, spec: &NodeSpec, id: &str) -> TickStatus {
        let st = self.state.entry(id.to_string()).or_default().clone();
        if let Some(d) = st.done {
            return d;
        }
        let child = |k: usize| format!("{id}.{k}");
        match &spec.kind {
            NodeKind::Leaf(_) => {
                self.log.push((self.tick, id.to_string()));
                let k = self.calls.entry(id.to_string()).or_insert(0);
                let s = match self.scripts.get(id) {
                    Some(v) if !v.is_empty() => v[(*k).min(v.len() - 1)],
                    _ => TickStatus::Success,
                };
                *k += 1;
                self.finish(id, s)
            }
            NodeKind::Sequence | NodeKind::Selector => {
                let keep_going = if spec.kind == NodeKind::Sequence { TickStatus::Success } else { TickStatus::Failure };
                let mut i = st.cursor;
                while i < spec.children.len() {
                    let s = self.eval(&spec.children[i], &child(i));
                    if s != keep_going {
                        self.state.get_mut(id).unwrap().cursor = i;
                        return self.finish(id, s);
                    }
                    i += 1;
                }
                self.state.get_mut(id).unwrap().cursor = i;
                self.finish(id, keep_going)
            }
            NodeKind::Repeat { n, strict } => {
                if st.count >= *n {
                    return self.finish(id, TickStatus::Success);
                }
                match self.eval(&spec.children[0], &child(0)) {
                    TickStatus::Busy => self.finish(id, TickStatus::Busy),
                    TickStatus::Failure if *strict => self.finish(id, TickStatus::Failure),
                    _ => {
                        let count = st.count + 1;
                        self.state.get_mut(id).unwrap().count = count;
                        if count >= *n {
                            return self.finish(id, TickStatus::Success);
                        }
                        self.clear(&spec.children[0], &child(0));
                        self.finish(id, TickStatus::Busy)
                    }
                }
            }
            NodeKind::Reset { n } => {
                let s = self.eval(&spec.children[0], &child(0));
                if s == TickStatus::Failure && st.resets < *n {
                    self.state.get_mut(id).unwrap().resets = st.resets + 1;
                    self.clear(&spec.children[0], &child(0));
                    self.set(id, Some(TickStatus::Failure));
                    return TickStatus::Failure;
                }
                self.finish(id, s)
            }
            NodeKind::Root => panic!("root inside a plan"),
        }
    }
}

/// Random well-formed tree of depth at most `max_depth` and at most
/// `max_children` children per composite, with every leaf id scripted.
pub fn random_tree(rng: &mut impl Rng, max_depth: usize, max_children: usize) -> (NodeSpec, BTreeMap<String, Vec<TickStatus>>) {
    fn build(rng: &mut impl Rng, id: &str, depth: usize, max_depth: usize, max_children: usize, scripts: &mut BTreeMap<String, Vec<TickStatus>>) -> NodeSpec {
        let leaf = depth + 1 >= max_depth || (depth > 0 && rng.random_bool(0.15 * depth as f64));
        if leaf {
            let outcomes = [TickStatus::Success, TickStatus::Busy, TickStatus::Failure];
            let len = rng.random_range(1..=4);
            scripts.insert(id.to_string(), (0..len).map(|_| outcomes[rng.random_range(0..3)]).collect());
            return NodeSpec::leaf(OpBinding::new("t", "op"));
        }
        let kind = match rng.random_range(0..4) {
            0 => NodeKind::Sequence,
            1 => NodeKind::Selector,
            2 => NodeKind::Repeat {
                n: rng.random_range(1..4),
                strict: rng.random_bool(0.5),
            },
            _ => NodeKind::Reset { n: rng.random_range(1..4) },
        };
        let count = match kind {
            NodeKind::Repeat { .. } | NodeKind::Reset { .. } => 1,
            _ if rng.random_bool(0.05) => 0,
            _ => rng.random_range(1..=max_children),
        };
        let children = (0..count)
            .map(|k| build(rng, &format!("{id}.{k}"), depth + 1, max_depth, max_children, scripts))
            .collect();
        NodeSpec::new(kind, children)
    }
    let mut scripts = BTreeMap::new();
    let spec = build(rng, "root.0", 0, max_depth, max_children, &mut scripts);
    (spec, scripts)
}

// ---------------------------------------------------------------- DSL

const NAME_POOL: &[&str] = &["arm", "gripper", "sequence", "Repeat", "plan", "x_1", "_hidden", "SmartMove", "true", "strict"];
const TEXT_POOL: &[&str] = &["", "node", "a \"quoted\" word", "back\\slash", "tab\tand\nnewline", "ünïcödé ✓", "#not a comment", "{ } ( ) , = ->"];

fn random_ident(rng: &mut impl Rng) -> String {
    if rng.random_bool(0.6) {
        return NAME_POOL[rng.random_range(0..NAME_POOL.len())].to_string();
    }
    let first = b"abcXYZ_"[rng.random_range(0..7)] as char;
    let rest: String = (0..rng.random_range(0..6)).map(|_| b"az09_Q"[rng.random_range(0..6)] as char).collect();
    format!("{first}{rest}")
}

fn random_value(rng: &mut impl Rng) -> ParamValue {
    match rng.random_range(0..5) {
        0 => ParamValue::Bool(rng.random_bool(0.5)),
        1 => ParamValue::Number(match rng.random_range(0..4) {
            0 => rng.random_range(-1000..1000) as f64,
            1 => rng.random_range(-1.0..1.0),
            2 => rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-300..300)),
            _ => f64::from_bits(rng.random::<u64>() & !(0x7ffu64 << 52) | ((rng.random_range(1..2046u64)) << 52)),
        }),
        2 => ParamValue::Text(TEXT_POOL[rng.random_range(0..TEXT_POOL.len())].to_string()),
        3 => ParamValue::Text(random_ident(rng)),
        _ => ParamValue::symbol(&random_ident(rng)),
    }
}

/// Random plan, not necessarily valid as a behavior tree (counts and arity
/// are arbitrary) but always expressible in the text form.
pub fn random_plan(rng: &mut impl Rng) -> PlanDocument {
    fn node(rng: &mut impl Rng, depth: usize) -> NodeSpec {
        if depth >= 4 || rng.random_bool(0.35) {
            let mut b = OpBinding::new(&random_ident(rng), &random_ident(rng));
            for _ in 0..rng.random_range(0..4) {
                b = b.with(&random_ident(rng), random_value(rng));
            }
            return NodeSpec::leaf(b);
        }
        let kind = match rng.random_range(0..4) {
            0 => NodeKind::Sequence,
            1 => NodeKind::Selector,
            2 => NodeKind::Repeat {
                n: rng.random_range(0..1000),
                strict: rng.random_bool(0.5),
            },
            _ => NodeKind::Reset { n: rng.random::<u32>() },
        };
        let children = (0..rng.random_range(0..4)).map(|_| node(rng, depth + 1)).collect();
        NodeSpec::new(kind, children)
    }
    let name = match rng.random_range(0..3) {
        0 => None,
        1 => Some(random_ident(rng)),
        _ => Some(TEXT_POOL[rng.random_range(0..TEXT_POOL.len())].to_string()),
    };
    PlanDocument::new(name.as_deref(), node(rng, 0))
}

/// Grammar-error fixtures: file name, source and expected `line:col`.
pub fn grammar_fixtures(dir: &std::path::Path) -> Vec<(String, String, (usize, usize))> {
    let mut out: Vec<(String, String, (usize, usize))> = std::fs::read_dir(dir)
        .expect("fixture dir")
        .map(|e| {
            let path = e.unwrap().path();
            let text = std::fs::read_to_string(&path).unwrap();
            let header = text.lines().next().unwrap_or_default();
            let at = header
                .strip_prefix("# error at ")
                .unwrap_or_else(|| panic!("{}: missing `# error at L:C` header", path.display()));
            let (l, c) = at.trim().split_once(':').unwrap();
            (
                path.file_name().unwrap().to_string_lossy().into_owned(),
                text.clone(),
                (l.parse().unwrap(), c.parse().unwrap()),
            )
        })
        .collect();
    out.sort();
    out
}

// ---------------------------------------------------------------- checks
//
// Each check builds one random case from `seed` and compares the library
// against the reference above. `Err` carries a description of the mismatch.

use costar_core::btree::{BehaviorTree, ScriptedLeaves};
use costar_core::components::{select_goal, SmartMoveSpec};
use costar_core::geometry::{canonicalize, AxisPriority, SymmetryGroup};
use costar_core::object::{ClassRegistry, ObjectInstance};
use costar_core::predicator::PredicateStatement;
use costar_core::sim::Scene;
use costar_core::spatial::{NearestQuery, PersistenceConfig, PersistenceTracker, RStarTree};

/// Random index entries, half of them snapped to a 1 cm grid so that equal
/// distances occur.
pub fn random_entries(rng: &mut impl Rng, n: usize) -> Vec<IndexEntry> {
    let classes = ["node", "link", "tool"];
    (0..n)
        .map(|k| {
            let mut p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            if rng.random_bool(0.5) {
                p = p.map(|v| (v * 100.0).round() / 100.0);
            }
            IndexEntry::new(format!("e{k:04}"), classes[rng.random_range(0..3)], p)
        })
        .collect()
}

pub fn random_query(rng: &mut impl Rng) -> ([f64; 3], Option<f64>, Option<&'static str>) {
    let mut p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.1..1.1));
    if rng.random_bool(0.5) {
        p = p.map(|v| (v * 100.0).round() / 100.0);
    }
    let max = rng.random_bool(0.5).then(|| rng.random_range(0.0..0.3));
    let class = match rng.random_range(0..4) {
        0 => Some("node"),
        1 => Some("link"),
        2 => Some("absent"),
        _ => None,
    };
    (p, max, class)
}

pub fn check_nearest(tree: &RStarTree, entries: &[IndexEntry], rng: &mut impl Rng) -> Result<(), String> {
    let (p, max, class) = random_query(rng);
    let mut q = NearestQuery::new();
    if let Some(m) = max {
        q = q.within(m);
    }
    if let Some(c) = class {
        q = q.class(c);
    }
    let got = tree.query_nearest(&p, &q).map(|e| e.id.clone());
    let want = linear_nearest(entries, &p, max, class);
    if got != want {
        return Err(format!("query {p:?} max {max:?} class {class:?}: index {got:?}, scan {want:?}"));
    }
    Ok(())
}

fn detections_to_objects(classes: &ClassRegistry, dets: &[Detection]) -> Vec<ObjectInstance> {
    dets.iter()
        .enumerate()
        .map(|(k, d)| {
            let pose = Pose::new(Vector3::from(d.position), d.orientation);
            let sym = classes.class(&d.class).unwrap().symmetry.clone();
            ObjectInstance::new(format!("det_{k}"), d.class.clone(), pose).with_symmetry(sym)
        })
        .collect()
}

pub fn check_persistence(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let config = PersistenceConfig::default();
    let (first, second) = two_frame_scene(&mut rng, config.max_distance);
    let classes = ClassRegistry::default();
    let cube = cube_rotation_matrices();
    let mut tracker = PersistenceTracker::new(config);
    let mut oracle = GreedyMatcher::default();
    for (frame, dets) in [first, second].iter().enumerate() {
        let got = tracker.update(detections_to_objects(&classes, dets), &classes);
        let want = oracle.update(dets, config.max_distance);
        let got_ids: Vec<&str> = got.iter().map(|o| o.id.as_str()).collect();
        if got_ids != want {
            return Err(format!("frame {frame}: ids {got_ids:?}, oracle {want:?}"));
        }
        for (o, d) in got.iter().zip(dets) {
            if o.pose.position != Vector3::from(d.position) {
                return Err(format!("frame {frame}: {} moved", o.id));
            }
            if d.class == "node" {
                let want = brute_canonical(&quaternion_matrix(&d.orientation), &cube);
                let diff = (quaternion_matrix(&o.pose.orientation) - want).abs().max();
                if diff > 1e-9 {
                    return Err(format!("frame {frame}: {} orientation off by {diff:e}", o.id));
                }
            }
        }
    }
    Ok(())
}

pub fn check_canonical(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let pose = random_pose(&mut rng, 1.0);
    let group = SymmetryGroup::cube();
    let got = canonicalize(&pose, &group, AxisPriority::default()).pose;
    let want = brute_canonical(&quaternion_matrix(&pose.orientation), &cube_rotation_matrices());
    let diff = (quaternion_matrix(&got.orientation) - want).abs().max();
    if diff > 1e-9 || got.position != pose.position {
        return Err(format!("pose {:?}: off by {diff:e}", pose.to_array()));
    }
    let again = canonicalize(&got, &group, AxisPriority::default()).pose;
    let drift = matrix_geodesic(&quaternion_matrix(&again.orientation), &quaternion_matrix(&got.orientation));
    if drift > 1e-9 || (again.position - got.position).norm() > 1e-9 {
        return Err(format!("pose {:?}: not idempotent, drift {drift:e}", pose.to_array()));
    }
    Ok(())
}

pub fn check_smart_move(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let mut scene = Scene::empty("smart_move");
    let reference = Pose::new(
        Vector3::new(rng.random_range(0.3..0.6), rng.random_range(-0.2..0.2), 0.0),
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), rng.random_range(-PI..PI)),
    );
    scene.frames.insert("table_center".into(), reference);
    let mut world = World::new(scene, ClassRegistry::default(), seed);
    world.sim.set_joints([
        rng.random_range(-1.0..1.0),
        rng.random_range(0.3..1.0),
        rng.random_range(0.6..1.6),
        rng.random_range(-PI..PI),
        rng.random_range(-1.0..1.0),
        rng.random_range(-PI..PI),
    ]);
    let n = rng.random_range(3..=10);
    world.objects = (0..n)
        .map(|k| {
            let class = if rng.random_bool(0.5) { "node" } else { "link" };
            let pose = Pose::new(
                Vector3::new(rng.random_range(0.0..0.9), rng.random_range(-0.7..0.7), rng.random_range(0.01..0.15)),
                random_rotation(&mut rng),
            );
            let sym = world.classes().class(class).unwrap().symmetry.clone();
            ObjectInstance::new(format!("{class}_{k}"), class, pose).with_symmetry(sym)
        })
        .collect();
    let objects = world.objects.clone();
    world.predicator.replace_objects(&objects, "perception");
    let class = if rng.random_bool(0.5) { "node" } else { "link" };
    let relation = match rng.random_range(0..4) {
        0 => None,
        1 => Some("RightOf"),
        2 => Some("LeftOf"),
        _ => Some("InFrontOf"),
    };
    let mut templates = vec![PredicateStatement::new("IsClass", ["?X", class])];
    if let Some(rel) = relation {
        templates.push(PredicateStatement::new(rel, ["?X", "table_center"]));
    }
    let mut spec = SmartMoveSpec::new(templates);
    spec.approach = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..0.15) };
    spec.lambda = rng.random_range(0.0..0.5);
    let (want, all) = brute_smart_move(&world, class, relation.map(|r| (r, &reference)), spec.approach, spec.lambda);
    match (select_goal(&world, &spec), want) {
        (Ok((c, generated)), Some(w)) => {
            let g = matrix(&c.goal);
            let pos = (translation_of(&g) - translation_of(&w.goal)).norm();
            let rot = matrix_geodesic(&rotation_of(&g), &rotation_of(&w.goal));
            if c.object != w.object || c.element != w.element || generated != all || pos > 1e-9 || rot > 1e-9 {
                return Err(format!(
                    "chose {}#{} ({generated} candidates), oracle {}#{} ({all}); goal off by {pos:e} m, {rot:e} rad",
                    c.object, c.element, w.object, w.element
                ));
            }
            Ok(())
        }
        (Err(costar_core::components::OpError::NoFeasibleGoal { candidates }), None) if candidates == all => Ok(()),
        (got, want) => Err(format!("library {got:?}, oracle {want:?} over {all} candidates")),
    }
}

pub fn check_bt(seed: u64, ticks: usize) -> Result<(), String> {
    let mut rng = rng(seed);
    let (spec, scripts) = random_tree(&mut rng, 5, 4);
    if spec.depth() > 5 {
        return Err(format!("generator produced depth {}", spec.depth()));
    }
    let mut tree = BehaviorTree::new(&spec).map_err(|e| e.to_string())?;
    let mut exec = scripts
        .iter()
        .fold(ScriptedLeaves::new(), |ex, (id, s)| ex.script(id, s.clone()));
    let mut reference = ReferenceBt::new(&scripts);
    for t in 0..ticks {
        let (a, b) = (tree.tick(&mut exec), reference.tick(&spec));
        if a != b {
            return Err(format!("tick {t}: engine {a:?}, reference {b:?}\n{spec:#?}"));
        }
    }
    if tree.drain_events() != reference.events {
        return Err(format!("event traces differ\n{spec:#?}"));
    }
    if exec.log != reference.log {
        return Err(format!("leaf tick logs differ\n{spec:#?}"));
    }
    Ok(())
}

pub fn check_dsl_round_trip(seed: u64) -> Result<(), String> {
    let doc = random_plan(&mut rng(seed));
    let text = costar_core::dsl::serialize(&doc);
    let back = costar_core::dsl::parse(&text).map_err(|e| format!("{e}\n{text}"))?;
    if back != doc {
        return Err(format!("structure changed\n{text}"));
    }
    if costar_core::dsl::serialize(&back) != text {
        return Err(format!("text changed\n{text}"));
    }
    Ok(())
}

/// Each fixture must fail to parse with an error located at the line and
/// column in its header.
pub fn check_grammar_fixture(name: &str, text: &str, at: (usize, usize)) -> Result<(), String> {
    match costar_core::dsl::parse(text) {
        Ok(_) => Err(format!("{name}: parsed without error")),
        Err(e) if (e.span.line, e.span.column) == at && !e.message.is_empty() => Ok(()),
        Err(e) => Err(format!("{name}: error at {}:{} ({}), expected {}:{}", e.span.line, e.span.column, e.message, at.0, at.1)),
    }
}

/// Hand-eye errors `(position m, rotation rad)` on one synthetic problem.
pub fn hand_eye_error(seed: u64, stations: usize, sigma: f64, all_pairs: bool) -> Result<(f64, f64), String> {
    use costar_core::calibration::{solve_hand_eye_with, MotionPair, SolveOptions};
    let mut rng = rng(seed);
    let truth = random_pose(&mut rng, 0.8);
    let pairs: Vec<MotionPair> = synthetic_hand_eye(&mut rng, &truth, stations, sigma, all_pairs)
        .into_iter()
        .map(|(a, b)| MotionPair { a, b })
        .collect();
    let opts = SolveOptions { consistency_deg: 180.0 };
    let result = solve_hand_eye_with(&pairs, &opts).map_err(|e| e.to_string())?;
    Ok(matrix_pose_error(&result.x, &truth))
}

/// The four textbook node examples. Leaf ids are `root.0.<k>`.
pub fn node_examples() -> Vec<(&'static str, Result<(), String>)> {
    use TickStatus::*;
    fn leaf() -> NodeSpec {
        NodeSpec::leaf(OpBinding::new("test", "op"))
    }
    fn run(spec: NodeSpec, scripts: &[(&str, Vec<TickStatus>)], ticks: usize) -> (Vec<TickStatus>, Vec<String>) {
        let mut tree = BehaviorTree::new(&spec).unwrap();
        let mut ex = scripts.iter().fold(ScriptedLeaves::new(), |ex, (id, s)| ex.script(id, s.clone()));
        let statuses = (0..ticks).map(|_| tree.tick(&mut ex)).collect();
        (statuses, ex.log.into_iter().map(|(_, id)| id).collect())
    }
    fn expect(got: (Vec<TickStatus>, Vec<String>), statuses: &[TickStatus], log: &[&str]) -> Result<(), String> {
        if got.0 == statuses && got.1 == log {
            Ok(())
        } else {
            Err(format!("got {:?} via {:?}", got.0, got.1))
        }
    }
    vec![
        (
            // Runs children in order; busy and failure stop the walk.
            "sequence",
            expect(
                run(NodeSpec::sequence(vec![leaf(), leaf(), leaf()]), &[("root.0.1", vec![Busy, Success])], 2),
                &[Busy, Success],
                &["root.0.0", "root.0.1", "root.0.1", "root.0.2"],
            ),
        ),
        (
            // First child that does not fail decides.
            "selector",
            expect(
                run(NodeSpec::selector(vec![leaf(), leaf(), leaf()]), &[("root.0.0", vec![Failure]), ("root.0.1", vec![Busy, Success])], 2),
                &[Busy, Success],
                &["root.0.0", "root.0.1", "root.0.1"],
            ),
        ),
        (
            // Child runs to completion three times.
            "repeat",
            expect(
                run(NodeSpec::repeat(3, leaf()), &[("root.0.0", vec![Success, Failure, Success])], 4),
                &[Busy, Busy, Success, Success],
                &["root.0.0", "root.0.0", "root.0.0"],
            ),
        ),
        (
            // Two failures are absorbed by resets; the third attempt succeeds.
            "reset",
            expect(
                run(NodeSpec::reset(2, leaf()), &[("root.0.0", vec![Failure, Failure, Success])], 3),
                &[Failure, Failure, Success],
                &["root.0.0", "root.0.0", "root.0.0"],
            ),
        ),
    ]
}
