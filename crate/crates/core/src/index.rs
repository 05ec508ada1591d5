//! Exact nearest-facility search, partitioned by state.
//!
//! Each partition is a k-d tree over unit-sphere embeddings of the site
//! coordinates. Boxes are pruned on Euclidean (chord) distance, which is
//! monotone in great-circle distance; candidates that survive pruning are
//! ranked by [`haversine_miles`] and then by id, the same ordering the linear
//! scan in [`nearest_bruteforce`] uses. Pruning keeps a small slack so that
//! rounding in the chord bound can never discard a candidate the scan would
//! pick.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::geo::{haversine_miles, miles_to_chord, Coordinate, Miles};
use crate::model::{Facility, StateCode};

const LEAF_SIZE: usize = 8;
const PRUNE_REL_SLACK: f64 = 1e-9;
const PRUNE_ABS_SLACK: f64 = 1e-12;

/// Result of a nearest-site query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Nearest<'a> {
    pub id: &'a str,
    pub miles: Miles,
}

impl<'a> Nearest<'a> {
    fn better_than(&self, other: &Nearest<'_>) -> bool {
        match self.miles.cmp(&other.miles) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.id < other.id,
        }
    }
}

fn keep_better<'a>(best: &mut Option<Nearest<'a>>, cand: Nearest<'a>) {
    match best {
        Some(b) if !cand.better_than(b) => {}
        _ => *best = Some(cand),
    }
}

/// Linear-scan reference: the site in one of `states` closest to `point`,
/// ties broken by the smallest id.
pub fn nearest_bruteforce<'a, I>(facilities: I, point: Coordinate, states: &BTreeSet<StateCode>) -> Option<Nearest<'a>>
where
    I: IntoIterator<Item = &'a Facility>,
{
    let mut best = None;
    for f in facilities {
        if states.contains(&f.state()) {
            keep_better(&mut best, Nearest { id: f.id(), miles: haversine_miles(point, f.coordinate()) });
        }
    }
    best
}

#[derive(Debug, Clone)]
struct Node {
    lo: [f64; 3],
    hi: [f64; 3],
    start: usize,
    end: usize,
    // child indices; both zero for a leaf (the root is never a child)
    left: usize,
    right: usize,
}

#[derive(Debug, Clone)]
struct SphereTree {
    ids: Vec<String>,
    coords: Vec<Coordinate>,
    points: Vec<[f64; 3]>,
    nodes: Vec<Node>,
}

impl SphereTree {
    fn build(mut sites: Vec<(String, Coordinate)>) -> Self {
        // content-ordered input makes the tree layout independent of input order
        sites.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.bits().cmp(&b.1.bits())));
        let mut items: Vec<(String, Coordinate, [f64; 3])> =
            sites.into_iter().map(|(id, c)| (id, c, c.to_unit_vector())).collect();
        let mut nodes = Vec::new();
        if !items.is_empty() {
            let n = items.len();
            Self::build_node(&mut items, 0, n, &mut nodes);
        }
        let mut ids = Vec::with_capacity(items.len());
        let mut coords = Vec::with_capacity(items.len());
        let mut points = Vec::with_capacity(items.len());
        for (id, c, p) in items {
            ids.push(id);
            coords.push(c);
            points.push(p);
        }
        SphereTree { ids, coords, points, nodes }
    }

    fn build_node(items: &mut [(String, Coordinate, [f64; 3])], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for (_, _, p) in &items[start..end] {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let me = nodes.len();
        nodes.push(Node { lo, hi, start, end, left: 0, right: 0 });
        if end - start > LEAF_SIZE {
            let axis = (0..3)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
                .unwrap_or(0);
            let mid = (end - start) / 2;
            items[start..end].select_nth_unstable_by(mid, |a, b| {
                a.2[axis].total_cmp(&b.2[axis]).then_with(|| a.0.cmp(&b.0))
            });
            let left = Self::build_node(items, start, start + mid, nodes);
            let right = Self::build_node(items, start + mid, end, nodes);
            nodes[me].left = left;
            nodes[me].right = right;
        }
        me
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    fn box_dist2(node: &Node, q: &[f64; 3]) -> f64 {
        let mut d2 = 0.0;
        for ((&x, &lo), &hi) in q.iter().zip(&node.lo).zip(&node.hi) {
            let d = if x < lo {
                lo - x
            } else if x > hi {
                x - hi
            } else {
                0.0
            };
            d2 += d * d;
        }
        d2
    }

    fn prune_radius(best: &Option<Nearest<'_>>) -> f64 {
        match best {
            Some(b) => miles_to_chord(b.miles) * (1.0 + PRUNE_REL_SLACK) + PRUNE_ABS_SLACK,
            None => f64::INFINITY,
        }
    }

    fn query<'a>(&'a self, point: Coordinate, q: &[f64; 3], best: &mut Option<Nearest<'a>>) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        stack.push((0, Self::box_dist2(&self.nodes[0], q)));
        while let Some((ni, d2)) = stack.pop() {
            let r = Self::prune_radius(best);
            if d2 > r * r {
                continue;
            }
            let node = &self.nodes[ni];
            if node.left == 0 && node.right == 0 {
                for i in node.start..node.end {
                    let p = &self.points[i];
                    let (dx, dy, dz) = (p[0] - q[0], p[1] - q[1], p[2] - q[2]);
                    let c2 = dx * dx + dy * dy + dz * dz;
                    let r = Self::prune_radius(best);
                    if c2 > r * r {
                        continue;
                    }
                    let cand = Nearest { id: &self.ids[i], miles: haversine_miles(point, self.coords[i]) };
                    keep_better(best, cand);
                }
                continue;
            }
            let dl = Self::box_dist2(&self.nodes[node.left], q);
            let dr = Self::box_dist2(&self.nodes[node.right], q);
            // push the farther child first so the nearer one is searched first
            if dl <= dr {
                stack.push((node.right, dr));
                stack.push((node.left, dl));
            } else {
                stack.push((node.left, dl));
                stack.push((node.right, dr));
            }
        }
    }
}

/// Immutable per-state spatial index over a set of sites.
#[derive(Debug, Clone, Default)]
pub struct FacilityIndex {
    partitions: BTreeMap<StateCode, SphereTree>,
}

impl FacilityIndex {
    /// Indexes every given facility under its own state.
    pub fn build<'a, I>(facilities: I) -> Self
    where
        I: IntoIterator<Item = &'a Facility>,
    {
        Self::from_sites(facilities.into_iter().map(|f| (f.state(), String::from(f.id()), f.coordinate())))
    }

    /// Indexes arbitrary `(state, id, coordinate)` sites.
    pub fn from_sites<I>(sites: I) -> Self
    where
        I: IntoIterator<Item = (StateCode, String, Coordinate)>,
    {
        let mut grouped: BTreeMap<StateCode, Vec<(String, Coordinate)>> = BTreeMap::new();
        for (state, id, c) in sites {
            grouped.entry(state).or_default().push((id, c));
        }
        let partitions = grouped.into_iter().map(|(s, v)| (s, SphereTree::build(v))).collect();
        FacilityIndex { partitions }
    }

    /// Number of sites per state, for states with at least one site.
    pub fn partition_sizes(&self) -> BTreeMap<StateCode, usize> {
        self.partitions.iter().map(|(s, t)| (*s, t.len())).collect()
    }

    pub fn len(&self) -> usize {
        self.partitions.values().map(SphereTree::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = StateCode> + '_ {
        self.partitions.keys().copied()
    }

    /// Closest site among the partitions of `states`; ties go to the smallest id.
    pub fn nearest(&self, point: Coordinate, states: &BTreeSet<StateCode>) -> Option<Nearest<'_>> {
        let q = point.to_unit_vector();
        let mut best = None;
        for s in states {
            if let Some(tree) = self.partitions.get(s) {
                tree.query(point, &q, &mut best);
            }
        }
        best
    }

    /// Closest site across every partition.
    pub fn nearest_any(&self, point: Coordinate) -> Option<Nearest<'_>> {
        let q = point.to_unit_vector();
        let mut best = None;
        for tree in self.partitions.values() {
            tree.query(point, &q, &mut best);
        }
        best
    }
}
