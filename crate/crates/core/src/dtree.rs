//! CART classification trees with the Gini criterion.
//!
//! Instances go left at an internal node iff `x[feature] <= threshold`.
//! Candidate thresholds are midpoints between consecutive distinct values.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::tensor::Tensor2;

pub type NodeId = usize;

pub const DEFAULT_MAX_DEPTH: usize = 10;
pub const DEFAULT_MIN_NUM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    Internal {
        feature: usize,
        threshold: f64,
        left: NodeId,
        right: NodeId,
    },
    Leaf {
        label: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: NodeId,
    /// Root depth is 0.
    pub depth: usize,
    /// Training instances that reached the node when it was last (re)allocated.
    pub samples: usize,
    pub kind: NodeKind,
}

impl TreeNode {
    #[inline]
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeConfig {
    /// Maximum number of edges on any root-to-leaf path.
    pub max_depth: usize,
    /// Nodes with fewer instances than this become leaves.
    pub min_num: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
            min_num: DEFAULT_MIN_NUM,
        }
    }
}

/// Binary decision tree stored as a node arena.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    root: NodeId,
    n_clusters: usize,
    feature_dim: usize,
}

impl DecisionTree {
    /// Validates and assembles a tree: ids equal arena positions, every node
    /// is reachable from `root` exactly once, depths increase by one per edge
    /// and leaf labels lie in `0..n_clusters`.
    pub fn from_nodes(
        nodes: Vec<TreeNode>,
        root: NodeId,
        n_clusters: usize,
        feature_dim: usize,
    ) -> Result<Self> {
        let invalid = |msg: alloc::string::String| Err(Error::InvalidTree(msg));
        if nodes.is_empty() {
            return invalid("no nodes".into());
        }
        if n_clusters == 0 || feature_dim == 0 {
            return invalid(format!(
                "n_clusters = {n_clusters}, feature_dim = {feature_dim}"
            ));
        }
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return invalid(format!("node at position {i} has id {}", n.id));
            }
        }
        if root >= nodes.len() || nodes[root].depth != 0 {
            return invalid(format!("bad root {root}"));
        }
        let mut seen = alloc::vec![false; nodes.len()];
        let mut stack = alloc::vec![root];
        seen[root] = true;
        while let Some(id) = stack.pop() {
            let node = &nodes[id];
            match node.kind {
                NodeKind::Leaf { label } => {
                    if label >= n_clusters {
                        return invalid(format!("leaf {id} label {label} >= {n_clusters}"));
                    }
                }
                NodeKind::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= feature_dim || !threshold.is_finite() {
                        return invalid(format!("node {id} has split ({feature}, {threshold})"));
                    }
                    for child in [left, right] {
                        if child >= nodes.len() || seen[child] {
                            return invalid(format!(
                                "node {id} has invalid or shared child {child}"
                            ));
                        }
                        if nodes[child].depth != node.depth + 1 {
                            return invalid(format!(
                                "child {child} depth inconsistent with parent {id}"
                            ));
                        }
                        seen[child] = true;
                        stack.push(child);
                    }
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return invalid(format!("node {orphan} unreachable from root"));
        }
        Ok(Self {
            nodes,
            root,
            n_clusters,
            feature_dim,
        })
    }

    /// A tree consisting of one leaf.
    pub fn single_leaf(label: usize, n_clusters: usize, feature_dim: usize) -> Result<Self> {
        Self::from_nodes(
            alloc::vec![TreeNode {
                id: 0,
                depth: 0,
                samples: 0,
                kind: NodeKind::Leaf { label },
            }],
            0,
            n_clusters,
            feature_dim,
        )
    }

    #[inline]
    pub fn root(&self) -> NodeId {
        self.root
    }

    #[inline]
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut TreeNode {
        &mut self.nodes[id]
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    #[inline]
    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    #[inline]
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Leaf reached from `start` by following the routing rule.
    pub(crate) fn descend(&self, start: NodeId, x: &[f64]) -> NodeId {
        let mut id = start;
        loop {
            match self.nodes[id].kind {
                NodeKind::Leaf { .. } => return id,
                NodeKind::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub(crate) fn leaf_label(&self, id: NodeId) -> usize {
        match self.nodes[id].kind {
            NodeKind::Leaf { label } => label,
            NodeKind::Internal { .. } => unreachable!("node {id} is not a leaf"),
        }
    }

    /// Root-to-leaf node ids visited by `x`.
    pub fn decision_path(&self, x: &[f64]) -> Result<Vec<NodeId>> {
        check_dim("instance width", self.feature_dim, x.len())?;
        let mut path = alloc::vec![self.root];
        let mut id = self.root;
        while let NodeKind::Internal {
            feature,
            threshold,
            left,
            right,
        } = self.nodes[id].kind
        {
            id = if x[feature] <= threshold { left } else { right };
            path.push(id);
        }
        Ok(path)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        check_dim("instance width", self.feature_dim, x.len())?;
        Ok(self.leaf_label(self.descend(self.root, x)))
    }

    pub fn predict_batch(&self, x: &Tensor2) -> Result<Vec<usize>> {
        check_dim("instance width", self.feature_dim, x.cols())?;
        Ok(x.iter_rows()
            .map(|r| self.leaf_label(self.descend(self.root, r)))
            .collect())
    }

    /// Node ids grouped by depth, root level first, ids ascending within a level.
    pub fn levels(&self) -> Vec<Vec<NodeId>> {
        let mut levels: Vec<Vec<NodeId>> = alloc::vec![Vec::new(); self.depth() + 1];
        for n in &self.nodes {
            levels[n.depth].push(n.id);
        }
        levels
    }

    /// Replaces the arena with the subtree reachable from `root`, renumbering
    /// nodes breadth-first and recomputing depths.
    pub(crate) fn compact(&mut self, root: NodeId) {
        let mut new_nodes = Vec::with_capacity(self.nodes.len());
        let mut queue = VecDeque::from([(root, 0usize)]);
        // Placeholder parents are patched once children receive new ids.
        let mut pending: Vec<(usize, NodeId, NodeId)> = Vec::new();
        let mut new_id_of = alloc::vec![usize::MAX; self.nodes.len()];
        while let Some((old, depth)) = queue.pop_front() {
            let id = new_nodes.len();
            new_id_of[old] = id;
            let node = &self.nodes[old];
            if let NodeKind::Internal { left, right, .. } = node.kind {
                pending.push((id, left, right));
                queue.push_back((left, depth + 1));
                queue.push_back((right, depth + 1));
            }
            new_nodes.push(TreeNode {
                id,
                depth,
                samples: node.samples,
                kind: node.kind,
            });
        }
        for (id, old_left, old_right) in pending {
            if let NodeKind::Internal { left, right, .. } = &mut new_nodes[id].kind {
                *left = new_id_of[old_left];
                *right = new_id_of[old_right];
            }
        }
        self.nodes = new_nodes;
        self.root = 0;
    }
}

/// `1 − Σ p_c²` over the label multiset.
pub fn gini(labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("gini of an empty set"));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = alloc::vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    Ok(gini_from_counts(&counts, labels.len()))
}

fn gini_from_counts(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| (c as f64 / n) * (c as f64 / n))
        .sum::<f64>()
}

/// Size-weighted Gini of the two children produced by `(feature, threshold)`.
/// An empty child contributes nothing.
pub fn split_gini(x: &Tensor2, labels: &[usize], feature: usize, threshold: f64) -> Result<f64> {
    check_dim("label count", x.rows(), labels.len())?;
    if feature >= x.cols() {
        return Err(Error::Dimension {
            context: "split feature",
            expected: x.cols(),
            actual: feature,
        });
    }
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (row, &l) in x.iter_rows().zip(labels) {
        if row[feature] <= threshold {
            left.push(l);
        } else {
            right.push(l);
        }
    }
    let n = labels.len() as f64;
    let side = |s: &[usize]| -> f64 {
        if s.is_empty() {
            0.0
        } else {
            s.len() as f64 / n * gini(s).unwrap_or(0.0)
        }
    };
    Ok(side(&left) + side(&right))
}

/// Threshold strictly between `a < b`; `a` itself if the midpoint rounds onto `b`.
#[inline]
pub fn midpoint(a: f64, b: f64) -> f64 {
    let m = 0.5 * a + 0.5 * b;
    if m >= a && m < b {
        m
    } else {
        a
    }
}

/// Midpoints between consecutive distinct values, ascending.
pub fn candidate_thresholds(values: &mut Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values.dedup();
    values.windows(2).map(|w| midpoint(w[0], w[1])).collect()
}

/// Exhaustive Gini split search over all rows.
///
/// Ties resolve to the lowest feature index, then the lowest threshold.
pub fn best_split(x: &Tensor2, labels: &[usize]) -> Result<Option<Split>> {
    check_dim("label count", x.rows(), labels.len())?;
    let rows: Vec<usize> = (0..x.rows()).collect();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    Ok(best_split_rows(x, labels, &rows, k))
}

/// Split quality `Σ_L c²/n_L + Σ_R c²/n_R` kept as an exact fraction; larger
/// is better (equivalent to smaller weighted Gini).
#[derive(Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn new(sq_left: u64, n_left: u64, sq_right: u64, n_right: u64) -> Self {
        Self {
            num: sq_left as u128 * n_right as u128 + sq_right as u128 * n_left as u128,
            den: n_left as u128 * n_right as u128,
        }
    }

    fn beats(&self, other: &Self) -> bool {
        self.num * other.den > other.num * self.den
    }
}

pub(crate) fn best_split_rows(
    x: &Tensor2,
    labels: &[usize],
    rows: &[usize],
    k: usize,
) -> Option<Split> {
    let n = rows.len();
    if n < 2 {
        return None;
    }
    let mut total = alloc::vec![0u64; k];
    for &r in rows {
        total[labels[r]] += 1;
    }
    let total_sq: u64 = total.iter().map(|c| c * c).sum();

    let mut best: Option<(Purity, Split)> = None;
    let mut order: Vec<usize> = rows.to_vec();
    let mut left = alloc::vec![0u64; k];
    for feature in 0..x.cols() {
        order.sort_by(|&a, &b| x[(a, feature)].total_cmp(&x[(b, feature)]).then(a.cmp(&b)));
        left.iter_mut().for_each(|c| *c = 0);
        let (mut sq_left, mut sq_right) = (0u64, total_sq);
        for pos in 0..n - 1 {
            let l = labels[order[pos]];
            sq_left += 2 * left[l] + 1;
            sq_right -= 2 * (total[l] - left[l]) - 1;
            left[l] += 1;
            let (a, b) = (x[(order[pos], feature)], x[(order[pos + 1], feature)]);
            if a == b {
                continue;
            }
            let n_left = pos as u64 + 1;
            let score = Purity::new(sq_left, n_left, sq_right, n as u64 - n_left);
            if best.as_ref().is_none_or(|(b, _)| score.beats(b)) {
                best = Some((
                    score,
                    Split {
                        feature,
                        threshold: midpoint(a, b),
                    },
                ));
            }
        }
    }
    best.map(|(_, s)| s)
}

/// Most frequent label; ties go to the smallest label. `None` when empty.
pub fn majority_label(labels: impl IntoIterator<Item = usize>, k: usize) -> Option<usize> {
    let mut counts = alloc::vec![0usize; k];
    let mut any = false;
    for l in labels {
        counts[l] += 1;
        any = true;
    }
    if !any {
        return None;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    Some(best)
}

/// Grows a tree top-down. A node becomes a leaf when it holds fewer than
/// `min_num` instances, sits at `max_depth`, is label-pure, or admits no
/// threshold. Leaves take the majority label.
pub fn build_tree(
    x: &Tensor2,
    labels: &[usize],
    n_clusters: usize,
    config: &TreeConfig,
) -> Result<DecisionTree> {
    check_dim("label count", x.rows(), labels.len())?;
    if config.max_depth == 0 || config.min_num == 0 {
        return Err(Error::Config(format!(
            "max_depth and min_num must be at least 1, got {} and {}",
            config.max_depth, config.min_num
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_clusters) {
        return Err(Error::InvalidK {
            k: n_clusters,
            n: bad,
        });
    }

    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut queue: VecDeque<(NodeId, Vec<usize>)> = VecDeque::new();
    nodes.push(TreeNode {
        id: 0,
        depth: 0,
        samples: x.rows(),
        kind: NodeKind::Leaf { label: 0 },
    });
    queue.push_back((0, (0..x.rows()).collect()));

    while let Some((id, rows)) = queue.pop_front() {
        let depth = nodes[id].depth;
        let label = majority_label(rows.iter().map(|&r| labels[r]), n_clusters).unwrap_or(0);
        let pure = rows.iter().all(|&r| labels[r] == labels[rows[0]]);
        let split = if rows.len() < config.min_num || depth >= config.max_depth || pure {
            None
        } else {
            best_split_rows(x, labels, &rows, n_clusters)
        };
        let Some(Split { feature, threshold }) = split else {
            nodes[id].kind = NodeKind::Leaf { label };
            continue;
        };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| x[(r, feature)] <= threshold);
        let (left, right) = (nodes.len(), nodes.len() + 1);
        for (child, child_rows) in [(left, l_rows), (right, r_rows)] {
            nodes.push(TreeNode {
                id: child,
                depth: depth + 1,
                samples: child_rows.len(),
                kind: NodeKind::Leaf { label: 0 },
            });
            queue.push_back((child, child_rows));
        }
        nodes[id].kind = NodeKind::Internal {
            feature,
            threshold,
            left,
            right,
        };
    }
    DecisionTree::from_nodes(nodes, 0, n_clusters, x.cols())
}
