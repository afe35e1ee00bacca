//! A three-dimensional R-tree over point entries.
//!
//! Trees are normally built in one shot with Sort-Tile-Recursive packing:
//! entries are sorted by x into slabs, each slab by y into runs, each run by z
//! into leaves of at most `max_children` entries, and the same tiling is
//! applied to node centers level by level until a single root remains.
//! Incremental `insert`/`remove` are supported for small edits; removal
//! re-inserts the contents of underfull nodes.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("duplicate entry id `{0}`")]
    DuplicateId(String),
    #[error("invalid fan-out: min {min}, max {max}")]
    InvalidFanOut { min: usize, max: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    #[serde(rename = "class")]
    pub class_label: String,
    pub position: [f64; 3],
}

impl IndexEntry {
    pub fn new(id: impl Into<String>, class_label: impl Into<String>, position: [f64; 3]) -> Self {
        Self {
            id: id.into(),
            class_label: class_label.into(),
            position,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FanOut {
    pub min: usize,
    pub max: usize,
}

impl Default for FanOut {
    fn default() -> Self {
        FanOut { min: 2, max: 8 }
    }
}

/// Filters for a nearest-neighbor query. Both are optional; an unset filter
/// accepts everything.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NearestQuery {
    pub max_distance: Option<f64>,
    pub class_label: Option<String>,
}

impl NearestQuery {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn within(mut self, max_distance: f64) -> Self {
        self.max_distance = Some(max_distance);
        self
    }

    pub fn class(mut self, label: impl Into<String>) -> Self {
        self.class_label = Some(label.into());
        self
    }

    fn accepts(&self, entry: &IndexEntry, distance: f64) -> bool {
        self.max_distance.is_none_or(|d| distance <= d)
            && self
                .class_label
                .as_deref()
                .is_none_or(|c| c == entry.class_label)
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    fn point(p: [f64; 3]) -> Self {
        Aabb { min: p, max: p }
    }

    fn empty() -> Self {
        Aabb {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        for k in 0..3 {
            out.min[k] = out.min[k].min(other.min[k]);
            out.max[k] = out.max[k].max(other.max[k]);
        }
        out
    }

    fn center(&self, axis: usize) -> f64 {
        0.5 * (self.min[axis] + self.max[axis])
    }

    pub fn contains_point(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.min[k] && other.max[k] <= self.max[k])
    }

    fn volume(&self) -> f64 {
        (0..3).map(|k| (self.max[k] - self.min[k]).max(0.0)).product()
    }

    fn margin(&self) -> f64 {
        (0..3).map(|k| (self.max[k] - self.min[k]).max(0.0)).sum()
    }

    fn overlap(&self, other: &Aabb) -> f64 {
        (0..3)
            .map(|k| (self.max[k].min(other.max[k]) - self.min[k].max(other.min[k])).max(0.0))
            .product()
    }

    /// Smallest Euclidean distance from `p` to any point of the box.
    pub fn min_distance(&self, p: &[f64; 3]) -> f64 {
        let mut sum = 0.0;
        for k in 0..3 {
            let d = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            sum += d * d;
        }
        sum.sqrt()
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        bbox: Aabb,
        entries: Vec<IndexEntry>,
    },
    Internal {
        bbox: Aabb,
        children: Vec<Node>,
    },
}

impl Node {
    fn bbox(&self) -> &Aabb {
        match self {
            Node::Leaf { bbox, .. } | Node::Internal { bbox, .. } => bbox,
        }
    }

    fn len(&self) -> usize {
        match self {
            Node::Leaf { entries, .. } => entries.len(),
            Node::Internal { children, .. } => children.len(),
        }
    }

    fn leaf(entries: Vec<IndexEntry>) -> Node {
        let bbox = entries
            .iter()
            .fold(Aabb::empty(), |b, e| b.union(&Aabb::point(e.position)));
        Node::Leaf { bbox, entries }
    }

    fn internal(children: Vec<Node>) -> Node {
        let bbox = children.iter().fold(Aabb::empty(), |b, c| b.union(c.bbox()));
        Node::Internal { bbox, children }
    }

    fn refresh_bbox(&mut self) {
        match self {
            Node::Leaf { bbox, entries } => {
                *bbox = entries
                    .iter()
                    .fold(Aabb::empty(), |b, e| b.union(&Aabb::point(e.position)));
            }
            Node::Internal { bbox, children } => {
                *bbox = children.iter().fold(Aabb::empty(), |b, c| b.union(c.bbox()));
            }
        }
    }

    fn height(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Internal { children, .. } => 1 + children.first().map_or(0, Node::height),
        }
    }
}

/// R-tree over [`IndexEntry`] points with unique ids.
#[derive(Clone, Debug)]
pub struct RStarTree {
    root: Option<Node>,
    fan_out: FanOut,
    ids: BTreeSet<String>,
}

impl Default for RStarTree {
    fn default() -> Self {
        Self::new()
    }
}

impl RStarTree {
    pub fn new() -> Self {
        Self {
            root: None,
            fan_out: FanOut::default(),
            ids: BTreeSet::new(),
        }
    }

    /// Sort-Tile-Recursive bulk load with the default fan-out.
    pub fn bulk_load(entries: Vec<IndexEntry>) -> Result<Self, IndexError> {
        Self::bulk_load_with(FanOut::default(), entries)
    }

    pub fn bulk_load_with(fan_out: FanOut, entries: Vec<IndexEntry>) -> Result<Self, IndexError> {
        if fan_out.max < 2 || fan_out.min < 1 || fan_out.min > fan_out.max / 2 {
            return Err(IndexError::InvalidFanOut {
                min: fan_out.min,
                max: fan_out.max,
            });
        }
        let mut ids = BTreeSet::new();
        for e in &entries {
            if !ids.insert(e.id.clone()) {
                return Err(IndexError::DuplicateId(e.id.clone()));
            }
        }
        let root = if entries.is_empty() {
            None
        } else {
            let leaves: Vec<Node> = str_tiles(entries, fan_out.max, |e, axis| e.position[axis])
                .into_iter()
                .map(Node::leaf)
                .collect();
            let mut level = leaves;
            while level.len() > 1 {
                level = str_tiles(level, fan_out.max, |n, axis| n.bbox().center(axis))
                    .into_iter()
                    .map(Node::internal)
                    .collect();
            }
            level.pop()
        };
        Ok(Self { root, fan_out, ids })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn fan_out(&self) -> FanOut {
        self.fan_out
    }

    /// Number of node levels, counting the leaf level; 0 for an empty tree.
    pub fn height(&self) -> usize {
        self.root.as_ref().map_or(0, Node::height)
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.ids.iter().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &IndexEntry> {
        let mut stack: Vec<&Node> = self.root.iter().collect();
        let mut pending: Vec<&IndexEntry> = Vec::new();
        std::iter::from_fn(move || loop {
            if let Some(e) = pending.pop() {
                return Some(e);
            }
            match stack.pop()? {
                Node::Leaf { entries, .. } => pending.extend(entries.iter().rev()),
                Node::Internal { children, .. } => stack.extend(children.iter().rev()),
            }
        })
    }

    /// All entries located exactly at `position`.
    pub fn query_point(&self, position: &[f64; 3]) -> Vec<&IndexEntry> {
        let mut out = Vec::new();
        let mut stack: Vec<&Node> = self.root.iter().collect();
        while let Some(node) = stack.pop() {
            if !node.bbox().contains_point(position) {
                continue;
            }
            match node {
                Node::Leaf { entries, .. } => {
                    out.extend(entries.iter().filter(|e| &e.position == position))
                }
                Node::Internal { children, .. } => stack.extend(children.iter()),
            }
        }
        out
    }

    /// Nearest entry to `position` passing the query filters. Equal distances
    /// resolve to the lexicographically smallest id.
    pub fn query_nearest(&self, position: &[f64; 3], query: &NearestQuery) -> Option<&IndexEntry> {
        let root = self.root.as_ref()?;
        let limit = query.max_distance.unwrap_or(f64::INFINITY);
        let mut heap = BinaryHeap::new();
        heap.push(Pending {
            distance: root.bbox().min_distance(position),
            node: root,
        });
        let mut best: Option<(f64, &IndexEntry)> = None;
        while let Some(Pending { distance: bound, node }) = heap.pop() {
            if bound > limit || best.is_some_and(|(d, _)| bound > d) {
                break;
            }
            match node {
                Node::Leaf { entries, .. } => {
                    for e in entries {
                        let d = distance(position, &e.position);
                        if !query.accepts(e, d) {
                            continue;
                        }
                        let replace = match best {
                            None => true,
                            Some((bd, be)) => d < bd || (d == bd && e.id < be.id),
                        };
                        if replace {
                            best = Some((d, e));
                        }
                    }
                }
                Node::Internal { children, .. } => {
                    for c in children {
                        heap.push(Pending {
                            distance: c.bbox().min_distance(position),
                            node: c,
                        });
                    }
                }
            }
        }
        best.map(|(_, e)| e)
    }

    pub fn insert(&mut self, entry: IndexEntry) -> Result<(), IndexError> {
        if self.ids.contains(&entry.id) {
            return Err(IndexError::DuplicateId(entry.id));
        }
        self.ids.insert(entry.id.clone());
        self.insert_unchecked(entry);
        Ok(())
    }

    fn insert_unchecked(&mut self, entry: IndexEntry) {
        let max = self.fan_out.max;
        let min = self.fan_out.min;
        match self.root.take() {
            None => self.root = Some(Node::leaf(vec![entry])),
            Some(mut root) => {
                if let Some(sibling) = insert_rec(&mut root, entry, min, max) {
                    root = Node::internal(vec![root, sibling]);
                }
                self.root = Some(root);
            }
        }
    }

    /// Removes the entry with `id`, returning it if present.
    pub fn remove(&mut self, id: &str) -> Option<IndexEntry> {
        if !self.ids.contains(id) {
            return None;
        }
        let mut root = self.root.take()?;
        let mut orphans = Vec::new();
        let removed = remove_rec(&mut root, id, self.fan_out.min, &mut orphans);
        self.root = match root {
            Node::Internal { mut children, .. } if children.len() == 1 => children.pop(),
            n if n.len() == 0 => None,
            n => Some(n),
        };
        // Collapse chains of single-child internal nodes left by condensing.
        while let Some(Node::Internal { children, .. }) = &mut self.root {
            if children.len() == 1 {
                self.root = children.pop();
            } else {
                break;
            }
        }
        self.ids.remove(id);
        for e in orphans {
            self.insert_unchecked(e);
        }
        removed
    }

    /// Checks structural invariants, returning a description of the first
    /// violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let Some(root) = &self.root else {
            return if self.ids.is_empty() {
                Ok(())
            } else {
                Err("empty root but ids present".into())
            };
        };
        let mut seen = BTreeSet::new();
        let mut leaf_depth = None;
        check_node(root, 1, self.fan_out.max, &mut seen, &mut leaf_depth)?;
        if seen != self.ids {
            return Err(format!(
                "reachable ids ({}) differ from id set ({})",
                seen.len(),
                self.ids.len()
            ));
        }
        Ok(())
    }
}

fn check_node(
    node: &Node,
    depth: usize,
    max: usize,
    seen: &mut BTreeSet<String>,
    leaf_depth: &mut Option<usize>,
) -> Result<(), String> {
    if node.len() > max {
        return Err(format!("node with {} children exceeds max {max}", node.len()));
    }
    match node {
        Node::Leaf { bbox, entries } => {
            match leaf_depth {
                Some(d) if *d != depth => return Err("leaves at different depths".into()),
                _ => *leaf_depth = Some(depth),
            }
            for e in entries {
                if !bbox.contains_point(&e.position) {
                    return Err(format!("leaf box does not contain `{}`", e.id));
                }
                if !seen.insert(e.id.clone()) {
                    return Err(format!("`{}` reachable twice", e.id));
                }
            }
        }
        Node::Internal { bbox, children } => {
            if children.is_empty() {
                return Err("empty internal node".into());
            }
            for c in children {
                if !bbox.contains(c.bbox()) {
                    return Err("internal box does not contain child".into());
                }
                check_node(c, depth + 1, max, seen, leaf_depth)?;
            }
        }
    }
    Ok(())
}

struct Pending<'a> {
    distance: f64,
    node: &'a Node,
}

impl PartialEq for Pending<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.distance.total_cmp(&other.distance) == Ordering::Equal
    }
}

impl Eq for Pending<'_> {}

impl PartialOrd for Pending<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending<'_> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.distance.total_cmp(&self.distance)
    }
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

fn ceil_cbrt(n: usize) -> usize {
    let mut s = 1;
    while s * s * s < n {
        s += 1;
    }
    s
}

fn ceil_sqrt(n: usize) -> usize {
    let mut s = 1;
    while s * s < n {
        s += 1;
    }
    s
}

/// Sort-Tile-Recursive grouping of `items` into groups of at most `max`.
fn str_tiles<T>(mut items: Vec<T>, max: usize, key: impl Fn(&T, usize) -> f64) -> Vec<Vec<T>> {
    let n = items.len();
    if n <= max {
        return vec![items];
    }
    let pages = ceil_div(n, max);
    let slabs = ceil_cbrt(pages);
    let slab_len = slabs * slabs * max;
    items.sort_by(|a, b| key(a, 0).total_cmp(&key(b, 0)));
    let mut groups = Vec::with_capacity(pages);
    for mut slab in chunk_owned(items, slab_len) {
        let slab_pages = ceil_div(slab.len(), max);
        let runs = ceil_sqrt(slab_pages);
        let run_len = ceil_div(slab_pages, runs) * max;
        slab.sort_by(|a, b| key(a, 1).total_cmp(&key(b, 1)));
        for mut run in chunk_owned(slab, run_len) {
            run.sort_by(|a, b| key(a, 2).total_cmp(&key(b, 2)));
            groups.extend(chunk_owned(run, max));
        }
    }
    groups
}

fn chunk_owned<T>(items: Vec<T>, size: usize) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(ceil_div(items.len(), size));
    let mut it = items.into_iter().peekable();
    while it.peek().is_some() {
        out.push(it.by_ref().take(size).collect());
    }
    out
}

fn insert_rec(node: &mut Node, entry: IndexEntry, min: usize, max: usize) -> Option<Node> {
    let split = match node {
        Node::Leaf { entries, .. } => {
            entries.push(entry);
            if entries.len() > max {
                let (a, b) = split_by_axis(std::mem::take(entries), min, |e| {
                    Aabb::point(e.position)
                });
                *node = Node::leaf(a);
                Some(Node::leaf(b))
            } else {
                None
            }
        }
        Node::Internal { children, .. } => {
            let target = Aabb::point(entry.position);
            let idx = choose_subtree(children, &target);
            if let Some(sibling) = insert_rec(&mut children[idx], entry, min, max) {
                children.push(sibling);
            }
            if children.len() > max {
                let (a, b) = split_by_axis(std::mem::take(children), min, |c| *c.bbox());
                *node = Node::internal(a);
                Some(Node::internal(b))
            } else {
                None
            }
        }
    };
    node.refresh_bbox();
    split
}

// Least volume enlargement, then smallest volume.
fn choose_subtree(children: &[Node], target: &Aabb) -> usize {
    let mut best = 0;
    let mut best_key = (f64::INFINITY, f64::INFINITY);
    for (i, c) in children.iter().enumerate() {
        let vol = c.bbox().volume();
        let grown = c.bbox().union(target).volume() - vol;
        if (grown, vol) < best_key {
            best_key = (grown, vol);
            best = i;
        }
    }
    best
}

/// Split along the axis with the smallest total margin, at the distribution
/// with least overlap.
fn split_by_axis<T>(mut items: Vec<T>, min: usize, bbox: impl Fn(&T) -> Aabb) -> (Vec<T>, Vec<T>) {
    let n = items.len();
    let min = min.max(1).min(n / 2);
    let splits = min..=(n - min);
    let mut best_axis = 0;
    let mut best_margin = f64::INFINITY;
    for axis in 0..3 {
        items.sort_by(|a, b| bbox(a).center(axis).total_cmp(&bbox(b).center(axis)));
        let margin: f64 = splits
            .clone()
            .map(|k| group_box(&items[..k], &bbox).margin() + group_box(&items[k..], &bbox).margin())
            .sum();
        if margin < best_margin {
            best_margin = margin;
            best_axis = axis;
        }
    }
    items.sort_by(|a, b| bbox(a).center(best_axis).total_cmp(&bbox(b).center(best_axis)));
    let mut best_k = min;
    let mut best_key = (f64::INFINITY, f64::INFINITY);
    for k in splits {
        let (a, b) = (group_box(&items[..k], &bbox), group_box(&items[k..], &bbox));
        let key = (a.overlap(&b), a.volume() + b.volume());
        if key < best_key {
            best_key = key;
            best_k = k;
        }
    }
    let tail = items.split_off(best_k);
    (items, tail)
}

fn group_box<T>(items: &[T], bbox: &impl Fn(&T) -> Aabb) -> Aabb {
    items.iter().fold(Aabb::empty(), |b, i| b.union(&bbox(i)))
}

fn remove_rec(node: &mut Node, id: &str, min: usize, orphans: &mut Vec<IndexEntry>) -> Option<IndexEntry> {
    let removed = match node {
        Node::Leaf { entries, .. } => {
            let pos = entries.iter().position(|e| e.id == id)?;
            Some(entries.remove(pos))
        }
        Node::Internal { children, .. } => {
            let mut found = None;
            for i in 0..children.len() {
                if let Some(e) = remove_rec(&mut children[i], id, min, orphans) {
                    if children[i].len() < min {
                        collect_entries(children.remove(i), orphans);
                    }
                    found = Some(e);
                    break;
                }
            }
            found
        }
    };
    if removed.is_some() {
        node.refresh_bbox();
    }
    removed
}

fn collect_entries(node: Node, out: &mut Vec<IndexEntry>) {
    match node {
        Node::Leaf { entries, .. } => out.extend(entries),
        Node::Internal { children, .. } => {
            for c in children {
                collect_entries(c, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<IndexEntry> {
        (0..n)
            .map(|i| {
                IndexEntry::new(
                    format!("e{i}"),
                    if i % 2 == 0 { "node" } else { "link" },
                    [(i % 7) as f64, ((i / 7) % 5) as f64, (i / 35) as f64],
                )
            })
            .collect()
    }

    #[test]
    fn empty_bulk_load() {
        let t = RStarTree::bulk_load(vec![]).unwrap();
        assert_eq!(t.len(), 0);
        assert_eq!(t.height(), 0);
        assert!(t.query_nearest(&[0.0; 3], &NearestQuery::new()).is_none());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let e = IndexEntry::new("a", "node", [0.0; 3]);
        let err = RStarTree::bulk_load(vec![e.clone(), e]).unwrap_err();
        assert_eq!(err, IndexError::DuplicateId("a".into()));
    }

    #[test]
    fn seventeen_entries_fan_out_four_is_three_levels() {
        let t = RStarTree::bulk_load_with(FanOut { min: 2, max: 4 }, grid(17)).unwrap();
        assert_eq!(t.height(), 3);
        t.check_invariants().unwrap();
    }

    #[test]
    fn class_filter_and_distance_filter() {
        let t = RStarTree::bulk_load(vec![
            IndexEntry::new("A", "node", [0.0, 0.0, 0.0]),
            IndexEntry::new("B", "link", [1.0, 0.0, 0.0]),
        ])
        .unwrap();
        let q = [0.1, 0.0, 0.0];
        let hit = t.query_nearest(&q, &NearestQuery::new().class("link").within(2.0));
        assert_eq!(hit.unwrap().id, "B");
        let miss = t.query_nearest(&q, &NearestQuery::new().class("node").within(0.05));
        assert!(miss.is_none());
    }

    #[test]
    fn ties_resolve_to_smallest_id() {
        let t = RStarTree::bulk_load(vec![
            IndexEntry::new("zeta", "node", [1.0, 0.0, 0.0]),
            IndexEntry::new("alpha", "node", [-1.0, 0.0, 0.0]),
            IndexEntry::new("mid", "node", [0.0, 1.0, 0.0]),
        ])
        .unwrap();
        let hit = t.query_nearest(&[0.0; 3], &NearestQuery::new()).unwrap();
        assert_eq!(hit.id, "alpha");
    }

    #[test]
    fn insert_and_remove_keep_invariants() {
        let mut t = RStarTree::new();
        for e in grid(120) {
            t.insert(e).unwrap();
        }
        t.check_invariants().unwrap();
        assert_eq!(t.len(), 120);
        for i in (0..120).step_by(3) {
            assert!(t.remove(&format!("e{i}")).is_some());
            t.check_invariants().unwrap();
        }
        assert_eq!(t.len(), 80);
        assert!(t.remove("e0").is_none());
        assert_eq!(t.iter().count(), 80);
        for i in 0..120 {
            let id = format!("e{i}");
            assert_eq!(t.contains_id(&id), i % 3 != 0);
        }
    }

    #[test]
    fn remove_everything_empties_tree() {
        let mut t = RStarTree::bulk_load(grid(30)).unwrap();
        for i in 0..30 {
            t.remove(&format!("e{i}")).unwrap();
        }
        assert!(t.is_empty());
        assert_eq!(t.height(), 0);
        t.check_invariants().unwrap();
    }

    #[test]
    fn exact_point_query() {
        let t = RStarTree::bulk_load(grid(50)).unwrap();
        for e in grid(50) {
            assert!(t.query_point(&e.position).iter().any(|h| h.id == e.id));
        }
    }
}
