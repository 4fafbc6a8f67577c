//! k-d tree over standardized points for exact k-nearest-neighbor search.
//!
//! Distances are compared as the Minkowski sum `sum |a_i - b_i|^p` without
//! the final root, which preserves order. Neighbors are ranked by
//! `(distance, training index)` so that ties resolve identically to an
//! exhaustive scan.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

#[inline]
pub(crate) fn coordinate_term(diff: f64, p: f64) -> f64 {
    let d = diff.abs();
    if p == 1.0 {
        d
    } else if p == 2.0 {
        d * d
    } else {
        d.powf(p)
    }
}

#[inline]
pub(crate) fn minkowski_sum(a: &[f64], b: &[f64], p: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| coordinate_term(x - y, p)).sum()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KdTree {
    nodes: Vec<Node>,
    /// Point indices; leaves reference contiguous ranges of this array.
    order: Vec<usize>,
    leaf_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub distance: f64,
    pub index: usize,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KdTree {
    /// Builds over `points` (row-major, `dim` columns).
    pub fn build(points: &[f64], dim: usize, leaf_size: usize) -> Self {
        let n = points.len().checked_div(dim).unwrap_or(0);
        let mut tree = KdTree {
            nodes: Vec::new(),
            order: (0..n).collect(),
            leaf_size: leaf_size.max(1),
        };
        if n > 0 {
            tree.build_node(points, dim, 0, n);
        }
        tree
    }

    fn build_node(&mut self, points: &[f64], dim: usize, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= self.leaf_size {
            return id;
        }
        let coord = |i: usize, d: usize| points[i * dim + d];
        let slice = &self.order[start..end];
        let (mut best_dim, mut best_spread) = (0, 0.0);
        for d in 0..dim {
            let (lo, hi) = slice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(coord(i, d)), hi.max(coord(i, d)))
            });
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = d;
            }
        }
        if best_spread == 0.0 {
            return id;
        }
        let mid = (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid, |&a, &b| {
            coord(a, best_dim)
                .total_cmp(&coord(b, best_dim))
                .then(a.cmp(&b))
        });
        let value = coord(self.order[start + mid], best_dim);
        let left = self.build_node(points, dim, start, start + mid);
        let right = self.build_node(points, dim, start + mid, end);
        self.nodes[id] = Node::Split {
            dim: best_dim,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `query`, closest first.
    pub fn nearest(&self, points: &[f64], dim: usize, query: &[f64], k: usize, p: f64) -> Vec<Neighbor> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, points, dim, query, k, p, &mut heap);
        }
        let mut out = heap.into_vec();
        out.sort_unstable();
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        node: usize,
        points: &[f64],
        dim: usize,
        query: &[f64],
        k: usize,
        p: f64,
        heap: &mut BinaryHeap<Neighbor>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor {
                        distance: minkowski_sum(query, &points[i * dim..(i + 1) * dim], p),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                dim: d,
                value,
                left,
                right,
            } => {
                let q = query[d];
                let (near, far) = if q <= value { (left, right) } else { (right, left) };
                self.search(near, points, dim, query, k, p, heap);
                let bound = coordinate_term(q - value, p);
                // Keep equal-distance subtrees: they may hold a smaller index.
                if heap.len() < k || bound <= heap.peek().expect("heap is full").distance {
                    self.search(far, points, dim, query, k, p, heap);
                }
            }
        }
    }
}
