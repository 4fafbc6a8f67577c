//! Regression trees grown on second-order gradient statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::FeatureBins;

/// Nodes with at least this many `rows x features` cells search features in
/// parallel. Results are merged in feature order either way.
const PARALLEL_CELLS: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub l2: f64,
    pub min_child_weight: f64,
    pub min_split_gain: f64,
    pub learning_rate: f64,
}

impl TreeParams {
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.l2;
        if denom > 0.0 {
            -g / denom * self.learning_rate
        } else {
            0.0
        }
    }

    fn score(&self, g: f64, h: f64) -> Option<f64> {
        let denom = h + self.l2;
        (denom > 0.0).then(|| g * g / denom)
    }
}

/// Training rows quantized to per-feature bins.
#[derive(Debug, Clone)]
pub(crate) struct BinnedMatrix {
    pub n_rows: usize,
    pub bins: Vec<FeatureBins>,
    /// `codes[f][r]` is the bin of row `r` on feature `f`.
    pub codes: Vec<Vec<u32>>,
    /// Exact mode only: rows of each feature ordered by `(code, row)`.
    pub presorted: Option<Vec<Vec<u32>>>,
}

impl BinnedMatrix {
    pub fn new(values: &[f64], n_rows: usize, n_features: usize, max_bins: Option<usize>) -> Self {
        let per_feature: Vec<(FeatureBins, Vec<u32>)> = (0..n_features)
            .into_par_iter()
            .map(|f| {
                let column: Vec<f64> = (0..n_rows).map(|r| values[r * n_features + f]).collect();
                let bins = FeatureBins::fit(&column, max_bins);
                let codes = column.iter().map(|&v| bins.bin_of(v) as u32).collect();
                (bins, codes)
            })
            .collect();
        let (bins, codes): (Vec<_>, Vec<_>) = per_feature.into_iter().unzip();
        let presorted = max_bins.is_none().then(|| {
            codes
                .par_iter()
                .map(|c: &Vec<u32>| {
                    let mut order: Vec<u32> = (0..n_rows as u32).collect();
                    order.sort_by_key(|&r| (c[r as usize], r));
                    order
                })
                .collect()
        });
        BinnedMatrix {
            n_rows,
            bins,
            codes,
            presorted,
        }
    }

    pub fn n_features(&self) -> usize {
        self.bins.len()
    }

    /// True when no feature has more than one distinct value.
    pub fn is_constant(&self) -> bool {
        self.bins.iter().all(|b| b.len() <= 1)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    left_code: u32,
    right_code: u32,
}

struct SplitScan<'a> {
    params: &'a TreeParams,
    g_total: f64,
    h_total: f64,
    parent: f64,
    feature: usize,
    gl: f64,
    hl: f64,
    prev: Option<u32>,
    best: Option<Candidate>,
}

impl<'a> SplitScan<'a> {
    fn new(params: &'a TreeParams, feature: usize, g_total: f64, h_total: f64) -> Self {
        Self {
            params,
            g_total,
            h_total,
            parent: params.score(g_total, h_total).unwrap_or(0.0),
            feature,
            gl: 0.0,
            hl: 0.0,
            prev: None,
            best: None,
        }
    }

    /// Feeds the next non-empty bin, in ascending code order.
    fn push_bin(&mut self, code: u32, g: f64, h: f64) {
        if let Some(prev) = self.prev {
            let gr = self.g_total - self.gl;
            let hr = self.h_total - self.hl;
            let mcw = self.params.min_child_weight;
            if self.hl >= mcw && hr >= mcw {
                if let (Some(l), Some(r)) =
                    (self.params.score(self.gl, self.hl), self.params.score(gr, hr))
                {
                    let gain = 0.5 * (l + r - self.parent);
                    if gain > self.params.min_split_gain
                        && self.best.is_none_or(|b| gain > b.gain)
                    {
                        self.best = Some(Candidate {
                            gain,
                            feature: self.feature,
                            left_code: prev,
                            right_code: code,
                        });
                    }
                }
            }
        }
        self.gl += g;
        self.hl += h;
        self.prev = Some(code);
    }
}

struct Grower<'a> {
    matrix: &'a BinnedMatrix,
    grad: &'a [f64],
    hess: &'a [f64],
    params: TreeParams,
    /// Node rows, ascending within each node's range.
    rows: Vec<u32>,
    /// Exact mode: per-feature `(code, row)` orders partitioned like `rows`.
    sorted: Option<Vec<Vec<u32>>>,
    go_left: Vec<bool>,
    scratch: Vec<u32>,
    nodes: Vec<TreeNode>,
    increments: Vec<f64>,
}

impl Grower<'_> {
    fn scan_sorted(&self, f: usize, start: usize, end: usize, g_total: f64, h_total: f64) -> Option<Candidate> {
        let order = &self.sorted.as_ref().expect("exact mode")[f][start..end];
        let codes = &self.matrix.codes[f];
        let mut scan = SplitScan::new(&self.params, f, g_total, h_total);
        let mut i = 0;
        while i < order.len() {
            let code = codes[order[i] as usize];
            let (mut g, mut h) = (0.0, 0.0);
            while i < order.len() && codes[order[i] as usize] == code {
                let r = order[i] as usize;
                g += self.grad[r];
                h += self.hess[r];
                i += 1;
            }
            scan.push_bin(code, g, h);
        }
        scan.best
    }

    fn scan_histogram(&self, f: usize, start: usize, end: usize, g_total: f64, h_total: f64) -> Option<Candidate> {
        let n_bins = self.matrix.bins[f].len();
        let codes = &self.matrix.codes[f];
        let mut hist_g = vec![0.0; n_bins];
        let mut hist_h = vec![0.0; n_bins];
        let mut hist_n = vec![0u32; n_bins];
        for &r in &self.rows[start..end] {
            let r = r as usize;
            let c = codes[r] as usize;
            hist_g[c] += self.grad[r];
            hist_h[c] += self.hess[r];
            hist_n[c] += 1;
        }
        let mut scan = SplitScan::new(&self.params, f, g_total, h_total);
        for b in 0..n_bins {
            if hist_n[b] > 0 {
                scan.push_bin(b as u32, hist_g[b], hist_h[b]);
            }
        }
        scan.best
    }

    fn best_split(&self, start: usize, end: usize, g_total: f64, h_total: f64) -> Option<Candidate> {
        let n_features = self.matrix.n_features();
        let scan = |f: usize| {
            if self.sorted.is_some() {
                self.scan_sorted(f, start, end, g_total, h_total)
            } else {
                self.scan_histogram(f, start, end, g_total, h_total)
            }
        };
        let per_feature: Vec<Option<Candidate>> = if (end - start) * n_features >= PARALLEL_CELLS {
            (0..n_features).into_par_iter().map(scan).collect()
        } else {
            (0..n_features).map(scan).collect()
        };
        let mut best: Option<Candidate> = None;
        for c in per_feature.into_iter().flatten() {
            if best.is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
        best
    }

    fn partition(&mut self, start: usize, end: usize, split: &Candidate) -> usize {
        let codes = &self.matrix.codes[split.feature];
        for &r in &self.rows[start..end] {
            self.go_left[r as usize] = codes[r as usize] <= split.left_code;
        }
        let go_left = &self.go_left;
        let mid = stable_partition(&mut self.rows[start..end], &mut self.scratch, go_left) + start;
        if let Some(sorted) = self.sorted.as_mut() {
            sorted.par_iter_mut().for_each_init(Vec::new, |buf, order| {
                stable_partition(&mut order[start..end], buf, go_left);
            });
        }
        mid
    }

    fn grow(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let (mut g_total, mut h_total) = (0.0, 0.0);
        for &r in &self.rows[start..end] {
            g_total += self.grad[r as usize];
            h_total += self.hess[r as usize];
        }
        let id = self.nodes.len();
        let leaf_value = self.params.leaf_value(g_total, h_total);
        self.nodes.push(TreeNode::Leaf { value: leaf_value });

        let can_split = depth < self.params.max_depth && end - start >= 2;
        let split = if can_split {
            self.best_split(start, end, g_total, h_total)
        } else {
            None
        };
        let Some(split) = split else {
            for &r in &self.rows[start..end] {
                self.increments[r as usize] = leaf_value;
            }
            return id;
        };

        let mid = self.partition(start, end, &split);
        let left = self.grow(start, mid, depth + 1);
        let right = self.grow(mid, end, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: self.matrix.bins[split.feature]
                .threshold(split.left_code as usize, split.right_code as usize),
            left,
            right,
        };
        id
    }
}

/// Moves rows flagged in `go_left` to the front, keeping relative order on
/// both sides. Returns the number of left rows.
fn stable_partition(slice: &mut [u32], buf: &mut Vec<u32>, go_left: &[bool]) -> usize {
    buf.clear();
    let mut write = 0;
    for i in 0..slice.len() {
        let r = slice[i];
        if go_left[r as usize] {
            slice[write] = r;
            write += 1;
        } else {
            buf.push(r);
        }
    }
    slice[write..].copy_from_slice(buf);
    write
}

/// Grows one tree and returns it with the per-row leaf value it assigns to
/// the training rows.
pub(crate) fn grow_tree(
    matrix: &BinnedMatrix,
    grad: &[f64],
    hess: &[f64],
    params: TreeParams,
) -> (Tree, Vec<f64>) {
    let n = matrix.n_rows;
    let mut grower = Grower {
        matrix,
        grad,
        hess,
        params,
        rows: (0..n as u32).collect(),
        sorted: matrix.presorted.clone(),
        go_left: vec![false; n],
        scratch: Vec::with_capacity(n),
        nodes: Vec::new(),
        increments: vec![0.0; n],
    };
    if n > 0 {
        grower.grow(0, n, 0);
    } else {
        grower.nodes.push(TreeNode::Leaf { value: 0.0 });
    }
    (Tree { nodes: grower.nodes }, grower.increments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(depth: usize) -> TreeParams {
        TreeParams {
            max_depth: depth,
            l2: 0.0,
            min_child_weight: 0.0,
            min_split_gain: 0.0,
            learning_rate: 1.0,
        }
    }

    #[test]
    fn stump_separates_step() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let g = [1.0, 1.0, -1.0, -1.0];
        let h = [1.0; 4];
        let m = BinnedMatrix::new(&x, 4, 1, None);
        let (tree, inc) = grow_tree(&m, &g, &h, params(1));
        assert_eq!(
            tree.nodes()[0],
            TreeNode::Split { feature: 0, threshold: 2.5, left: 1, right: 2 }
        );
        assert_eq!(inc, vec![-1.0, -1.0, 1.0, 1.0]);
        assert_eq!(tree.predict(&[0.0]), -1.0);
        assert_eq!(tree.predict(&[10.0]), 1.0);
    }

    #[test]
    fn zero_depth_is_single_leaf() {
        let m = BinnedMatrix::new(&[1.0, 2.0], 2, 1, None);
        let (tree, _) = grow_tree(&m, &[1.0, 3.0], &[1.0, 1.0], params(0));
        assert_eq!(tree.nodes(), &[TreeNode::Leaf { value: -2.0 }]);
    }

    #[test]
    fn constant_features_yield_leaf() {
        let m = BinnedMatrix::new(&[1.0, 1.0, 1.0], 3, 1, None);
        assert!(m.is_constant());
        let (tree, _) = grow_tree(&m, &[1.0, -1.0, 1.0], &[1.0; 3], params(3));
        assert_eq!(tree.n_leaves(), 1);
    }

    #[test]
    fn min_child_weight_blocks_small_children() {
        let m = BinnedMatrix::new(&[1.0, 2.0, 3.0], 3, 1, None);
        let p = TreeParams {
            min_child_weight: 2.0,
            ..params(2)
        };
        let (tree, _) = grow_tree(&m, &[5.0, -1.0, -1.0], &[1.0; 3], p);
        assert_eq!(tree.n_leaves(), 1);
    }

    #[test]
    fn stable_partition_keeps_order() {
        let mut rows = vec![5, 1, 4, 2, 3, 0];
        let go_left = [true, false, true, false, true, false];
        let mut buf = Vec::new();
        let mid = stable_partition(&mut rows, &mut buf, &go_left);
        assert_eq!(mid, 3);
        assert_eq!(rows, vec![4, 2, 0, 5, 1, 3]);
    }
}
