//! Persistent object identities across perception updates.
//!
//! Each detection is matched to the nearest prior entry of the same class
//! within `max_distance`; a matched prior is removed before the next
//! detection is processed so no prior is claimed twice. Unmatched detections
//! get fresh `<class>_<n>` names. The index is rebuilt by bulk loading the
//! output set.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::rtree::{IndexEntry, NearestQuery, RStarTree};
use crate::geometry::{canonicalize, AxisPriority};
use crate::object::{ClassRegistry, ObjectInstance};

pub const DEFAULT_MAX_DISTANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistenceConfig {
    pub max_distance: f64,
    pub canonicalize: bool,
    #[serde(default)]
    pub priority: AxisPriority,
}

impl Default for PersistenceConfig {
    fn default() -> Self {
        Self {
            max_distance: DEFAULT_MAX_DISTANCE,
            canonicalize: true,
            priority: AxisPriority::default(),
        }
    }
}

/// Hands out `<class>_<n>` names with a monotonic per-class counter, never
/// repeating a name it has issued or been told about.
#[derive(Clone, Debug, Default)]
pub struct IdAllocator {
    counters: BTreeMap<String, u64>,
    taken: BTreeSet<String>,
}

impl IdAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reserve(&mut self, id: &str) {
        self.taken.insert(id.to_string());
    }

    pub fn fresh(&mut self, class: &str) -> String {
        let counter = self.counters.entry(class.to_string()).or_insert(0);
        loop {
            *counter += 1;
            let candidate = format!("{class}_{counter}");
            if self.taken.insert(candidate.clone()) {
                return candidate;
            }
        }
    }
}

pub fn entry_for(o: &ObjectInstance) -> IndexEntry {
    IndexEntry::new(
        o.id.clone(),
        o.class_label.clone(),
        [o.pose.position.x, o.pose.position.y, o.pose.position.z],
    )
}

/// One persistence pass. Returns the renamed detections, in input order, and
/// the index rebuilt over them.
pub fn persistence_update(
    mut prior: RStarTree,
    detected: Vec<ObjectInstance>,
    config: &PersistenceConfig,
    classes: &ClassRegistry,
    ids: &mut IdAllocator,
) -> (Vec<ObjectInstance>, RStarTree) {
    for id in prior.ids() {
        ids.reserve(id);
    }
    let max_distance = config.max_distance.max(0.0);
    let mut persistent = Vec::with_capacity(detected.len());
    for mut o in detected {
        if config.canonicalize {
            let group = classes.group(&o.symmetry);
            o.pose = canonicalize(&o.pose, &group, config.priority).pose;
        }
        let query = NearestQuery::new()
            .within(max_distance)
            .class(o.class_label.clone());
        let position = [o.pose.position.x, o.pose.position.y, o.pose.position.z];
        let matched = prior.query_nearest(&position, &query).map(|e| e.id.clone());
        match matched {
            Some(id) => {
                prior.remove(&id);
                o.id = id;
            }
            None => o.id = ids.fresh(&o.class_label),
        }
        persistent.push(o);
    }
    let tree = RStarTree::bulk_load(persistent.iter().map(entry_for).collect())
        .expect("persistent ids are unique");
    (persistent, tree)
}

/// Owns the index and id allocator between perception updates.
#[derive(Clone, Debug, Default)]
pub struct PersistenceTracker {
    tree: RStarTree,
    ids: IdAllocator,
    pub config: PersistenceConfig,
}

impl PersistenceTracker {
    pub fn new(config: PersistenceConfig) -> Self {
        Self {
            tree: RStarTree::new(),
            ids: IdAllocator::new(),
            config,
        }
    }

    pub fn update(
        &mut self,
        detected: Vec<ObjectInstance>,
        classes: &ClassRegistry,
    ) -> Vec<ObjectInstance> {
        let prior = std::mem::take(&mut self.tree);
        let (renamed, tree) =
            persistence_update(prior, detected, &self.config, classes, &mut self.ids);
        self.tree = tree;
        renamed
    }

    pub fn tree(&self) -> &RStarTree {
        &self.tree
    }
}
