//! Goal selection for predicate-driven moves.
//!
//! Every object passing all templates contributes one candidate per element
//! `s` of its symmetry group: `o · s · T`, where `T` is the class grasp frame
//! backed off by `approach` along the tool axis. Candidates the arm cannot
//! reach, or that sit at or below the table, are dropped. The survivor with
//! the lowest `|Δp| + λ·geodesic` from the current endpoint wins; exact cost
//! ties go to the smaller object id, then the smaller element index.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{param_f64, param_name, OpError, Params, World};
use crate::geometry::{geodesic, Pose};
use crate::predicator::{parse_statements, PredicateStatement};

pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const QUERY_VARIABLE: &str = "?X";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmartMoveSpec {
    pub templates: Vec<PredicateStatement>,
    /// Stand-off along the tool axis, meters.
    pub approach: f64,
    /// Weight of rotation against translation, meters per radian.
    pub lambda: f64,
    pub speed: Option<f64>,
}

impl SmartMoveSpec {
    pub fn new(templates: Vec<PredicateStatement>) -> Self {
        Self {
            templates,
            approach: 0.0,
            lambda: DEFAULT_LAMBDA,
            speed: None,
        }
    }

    /// Builds the templates from `class`, `relation` with `ref`, and `where`
    /// (`;`-separated statements using `?X`).
    pub fn from_params(params: &Params) -> Result<Self, OpError> {
        let mut templates = Vec::new();
        if let Some(class) = param_name(params, "class")? {
            templates.push(PredicateStatement::new("IsClass", [QUERY_VARIABLE, class]));
        }
        match (param_name(params, "relation")?, param_name(params, "ref")?) {
            (Some(rel), Some(reference)) => {
                templates.push(PredicateStatement::new(rel, [QUERY_VARIABLE, reference]));
            }
            (Some(_), None) => return Err(OpError::MissingParam("ref".into())),
            (None, Some(_)) => return Err(OpError::MissingParam("relation".into())),
            (None, None) => {}
        }
        if let Some(text) = param_name(params, "where")? {
            templates.extend(parse_statements(text)?);
        }
        if templates.is_empty() {
            return Err(OpError::MissingParam("class, relation or where".into()));
        }
        let approach = param_f64(params, "approach")?.unwrap_or(0.0);
        let lambda = param_f64(params, "lambda")?.unwrap_or(DEFAULT_LAMBDA);
        if lambda < 0.0 {
            return Err(OpError::InvalidParam {
                name: "lambda".into(),
                reason: "must be non-negative".into(),
            });
        }
        let speed = param_f64(params, "speed")?;
        Ok(Self {
            templates,
            approach,
            lambda,
            speed,
        })
    }

    /// `T` for objects of `class`.
    pub fn relative(&self, world: &World, class: &str) -> Pose {
        world
            .classes()
            .grasp_for_class(class)
            .compose(&Pose::from_translation(0.0, 0.0, -self.approach))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub object: String,
    pub element: usize,
    pub goal: Pose,
    pub cost: f64,
}

fn order(a: &Candidate, b: &Candidate) -> Ordering {
    a.cost
        .total_cmp(&b.cost)
        .then_with(|| a.object.cmp(&b.object))
        .then_with(|| a.element.cmp(&b.element))
}

/// The chosen goal and the number of candidates generated before filtering.
pub fn select_goal(world: &World, spec: &SmartMoveSpec) -> Result<(Candidate, usize), OpError> {
    let matches = world.predicator.query_symbols(&spec.templates)?;
    let endpoint = world.sim.robot().endpoint;
    let table_z = world.sim.kinematics().table_z;
    let mut generated = 0;
    let mut best: Option<Candidate> = None;
    for o in world.objects.iter().filter(|o| matches.binary_search(&o.id).is_ok()) {
        let t = spec.relative(world, &o.class_label);
        let group = world.classes().group(&o.symmetry);
        for (element, s) in group.elements.iter().enumerate() {
            generated += 1;
            let goal = o.pose.compose(&Pose::from_rotation(*s)).compose(&t);
            if !world.sim.reachable(&goal) || goal.position.z <= table_z {
                continue;
            }
            let cost = (goal.position - endpoint.position).norm()
                + spec.lambda * geodesic(&goal.orientation, &endpoint.orientation);
            let c = Candidate {
                object: o.id.clone(),
                element,
                goal,
                cost,
            };
            if best.as_ref().is_none_or(|b| order(&c, b) == Ordering::Less) {
                best = Some(c);
            }
        }
    }
    best.map(|b| (b, generated))
        .ok_or(OpError::NoFeasibleGoal { candidates: generated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btree::ParamValue;
    use crate::object::{ClassRegistry, ObjectInstance};
    use crate::predicator::Symbol;
    use crate::sim::Scene;

    fn world_with(objects: &[(&str, &str, [f64; 3])]) -> World {
        let mut scene = Scene::empty("sm");
        scene.frames.insert("table_center".into(), Pose::from_translation(0.45, 0.0, 0.0));
        let mut w = World::new(scene, ClassRegistry::default(), 0);
        w.objects = objects
            .iter()
            .map(|(id, class, p)| {
                let sym = w.classes().class(class).map(|c| c.symmetry.clone()).unwrap_or_default();
                ObjectInstance::new(*id, *class, Pose::from_translation(p[0], p[1], p[2])).with_symmetry(sym)
            })
            .collect();
        for o in w.objects.clone() {
            w.predicator.upsert_symbol(Symbol::object(&o, "perception"));
        }
        w
    }

    fn params(pairs: &[(&str, ParamValue)]) -> Params {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn cube_on_the_right_yields_twenty_four_candidates() {
        let w = world_with(&[("node_1", "node", [0.45, -0.2, 0.02]), ("node_2", "node", [0.45, 0.2, 0.02])]);
        let spec = SmartMoveSpec::from_params(&params(&[
            ("class", ParamValue::Text("node".into())),
            ("relation", ParamValue::Text("RightOf".into())),
            ("ref", ParamValue::symbol("table_center")),
            ("approach", ParamValue::Number(0.1)),
        ]))
        .unwrap();
        let (choice, generated) = select_goal(&w, &spec).unwrap();
        assert_eq!(generated, 24);
        assert_eq!(choice.object, "node_1");
        // Top-down grasp 10 cm above the cube.
        assert!((choice.goal.position - nalgebra::Vector3::new(0.45, -0.2, 0.12)).norm() < 1e-9);
        let down = choice.goal.orientation * nalgebra::Vector3::z();
        assert!((down.z + 1.0).abs() < 1e-9);
    }

    #[test]
    fn nothing_matches() {
        let w = world_with(&[("link_1", "link", [0.45, -0.2, 0.02])]);
        let spec = SmartMoveSpec::new(vec![PredicateStatement::new("IsClass", ["?X", "node"])]);
        assert_eq!(select_goal(&w, &spec), Err(OpError::NoFeasibleGoal { candidates: 0 }));
    }

    #[test]
    fn unreachable_candidates_are_dropped() {
        let w = world_with(&[("node_1", "node", [1.5, 0.0, 0.02])]);
        let spec = SmartMoveSpec::new(vec![PredicateStatement::new("IsClass", ["?X", "node"])]);
        assert_eq!(select_goal(&w, &spec), Err(OpError::NoFeasibleGoal { candidates: 24 }));
    }

    #[test]
    fn equidistant_twins_pick_smaller_id() {
        let w = world_with(&[("node_b", "node", [0.4, 0.1, 0.02]), ("node_a", "node", [0.4, -0.1, 0.02])]);
        let spec = SmartMoveSpec::new(vec![PredicateStatement::new("IsClass", ["?X", "node"])]);
        assert_eq!(select_goal(&w, &spec).unwrap().0.object, "node_a");
    }

    #[test]
    fn templates_are_required() {
        assert!(matches!(SmartMoveSpec::from_params(&Params::new()), Err(OpError::MissingParam(_))));
        let half = params(&[("relation", ParamValue::Text("LeftOf".into()))]);
        assert_eq!(SmartMoveSpec::from_params(&half), Err(OpError::MissingParam("ref".into())));
    }
}
