//! Immutable ball tree over planar points with k-NN and radius queries.
//!
//! Results are exact: the same ids and distances a linear scan would return.
//! Equal distances are ordered by ascending payload id.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geo::LocalPoint;

const LEAF_SIZE: usize = 16;
/// Slack on pruning bounds so rounding never drops an exact tie.
const PRUNE_SLACK: f64 = 1e-9;

/// One query hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

impl Neighbor {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.distance.total_cmp(&other.distance).then(self.id.cmp(&other.id))
    }
}

// Max-heap on (distance, id) for the bounded k-NN candidate set.
struct HeapEntry(Neighbor);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.key_cmp(&other.0)
    }
}

#[derive(Debug, Clone)]
struct Node {
    center: LocalPoint,
    radius: f64,
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<LocalPoint>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    /// Builds the tree. Ids are opaque to the index and only used for
    /// reporting and tie-breaking.
    pub fn build(items: impl IntoIterator<Item = (usize, LocalPoint)>) -> Result<Self> {
        let (ids, points): (Vec<usize>, Vec<LocalPoint>) = items.into_iter().unzip();
        if points.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::invalid("index points must be finite"));
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        build_node(&points, &mut order, 0, points.len(), &mut nodes);
        let points = order.iter().map(|&i| points[i]).collect();
        let ids = order.iter().map(|&i| ids[i]).collect();
        Ok(SpatialIndex { points, ids, nodes })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest points, ascending by (distance, id).
    pub fn knn(&self, q: &LocalPoint, k: usize) -> Vec<Neighbor> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::with_capacity(k + 1);
        self.knn_node(0, q, k, &mut heap);
        let mut out: Vec<Neighbor> = heap.into_iter().map(|e| e.0).collect();
        out.sort_by(Neighbor::key_cmp);
        out
    }

    pub fn nearest(&self, q: &LocalPoint) -> Neighbor {
        self.knn(q, 1)[0]
    }

    fn knn_node(&self, node: usize, q: &LocalPoint, k: usize, heap: &mut BinaryHeap<HeapEntry>) {
        let n = &self.nodes[node];
        if heap.len() == k {
            let worst = heap.peek().map(|e| e.0.distance).unwrap_or(f64::INFINITY);
            if q.distance(&n.center) - n.radius > worst + PRUNE_SLACK {
                return;
            }
        }
        match n.children {
            None => {
                for i in n.start..n.end {
                    let cand = Neighbor {
                        id: self.ids[i],
                        distance: q.distance(&self.points[i]),
                    };
                    if heap.len() < k {
                        heap.push(HeapEntry(cand));
                    } else if let Some(top) = heap.peek() {
                        if cand.key_cmp(&top.0) == Ordering::Less {
                            heap.pop();
                            heap.push(HeapEntry(cand));
                        }
                    }
                }
            }
            Some((a, b)) => {
                let da = q.distance(&self.nodes[a].center);
                let db = q.distance(&self.nodes[b].center);
                let (first, second) = if da <= db { (a, b) } else { (b, a) };
                self.knn_node(first, q, k, heap);
                self.knn_node(second, q, k, heap);
            }
        }
    }

    /// All points with distance `<= radius`, ascending by (distance, id).
    pub fn radius_query(&self, q: &LocalPoint, radius: f64) -> Result<Vec<Neighbor>> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidRadius(radius));
        }
        let mut out = Vec::new();
        let mut stack = alloc::vec![0usize];
        while let Some(node) = stack.pop() {
            let n = &self.nodes[node];
            if q.distance(&n.center) - n.radius > radius + PRUNE_SLACK {
                continue;
            }
            match n.children {
                None => {
                    for i in n.start..n.end {
                        let d = q.distance(&self.points[i]);
                        if d <= radius {
                            out.push(Neighbor {
                                id: self.ids[i],
                                distance: d,
                            });
                        }
                    }
                }
                Some((a, b)) => {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        out.sort_by(Neighbor::key_cmp);
        Ok(out)
    }

    /// Number of points within `radius`, without materializing them.
    pub fn count_within(&self, q: &LocalPoint, radius: f64) -> Result<usize> {
        Ok(self.radius_query(q, radius)?.len())
    }
}

fn build_node(points: &[LocalPoint], order: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let slice = &order[start..end];
    let n = slice.len() as f64;
    let (sx, sy) = slice
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &i| (sx + points[i].x, sy + points[i].y));
    let center = LocalPoint::new(sx / n, sy / n);
    let radius = slice
        .iter()
        .map(|&i| center.distance(&points[i]))
        .fold(0.0f64, f64::max);
    let idx = nodes.len();
    nodes.push(Node {
        center,
        radius,
        start,
        end,
        children: None,
    });
    if end - start <= LEAF_SIZE || radius == 0.0 {
        return idx;
    }

    let (mut min_x, mut max_x, mut min_y, mut max_y) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &i in slice {
        min_x = min_x.min(points[i].x);
        max_x = max_x.max(points[i].x);
        min_y = min_y.min(points[i].y);
        max_y = max_y.max(points[i].y);
    }
    let split_x = max_x - min_x >= max_y - min_y;
    let mid = (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid, |&a, &b| {
        if split_x {
            points[a].x.total_cmp(&points[b].x)
        } else {
            points[a].y.total_cmp(&points[b].y)
        }
    });
    let left = build_node(points, order, start, start + mid, nodes);
    let right = build_node(points, order, start + mid, end, nodes);
    nodes[idx].children = Some((left, right));
    idx
}
