//! Tree alternating optimization over a fixed tree structure.
//!
//! With every other node frozen, an instance's final label depends only on
//! which child of a node it enters. A pass therefore visits nodes deepest
//! level first: leaves take the majority label of the instances reaching
//! them, and internal nodes pick the axis-aligned split that misroutes the
//! fewest *care* instances, those that would be labeled correctly on exactly
//! one side. Emptied branches are pruned afterwards, so the tree never grows.

use alloc::vec::Vec;

use crate::dtree::{candidate_thresholds, majority_label, DecisionTree, NodeId, NodeKind, Split};
use crate::error::{check_dim, Result};
use crate::tensor::Tensor2;

/// Hard cap on self-labeling iterations in [`optimize_tree`].
pub const DEFAULT_MAX_ITERATIONS: usize = 50;

/// Instances reaching each node (indexed by node id) under the current routing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachSets {
    sets: Vec<Vec<usize>>,
}

impl ReachSets {
    pub fn compute(tree: &DecisionTree, x: &Tensor2) -> Result<Self> {
        check_dim("instance width", tree.feature_dim(), x.cols())?;
        let mut sets = alloc::vec![Vec::new(); tree.node_count()];
        for (i, row) in x.iter_rows().enumerate() {
            let mut id = tree.root();
            loop {
                sets[id].push(i);
                match tree.node(id).kind {
                    NodeKind::Leaf { .. } => break,
                    NodeKind::Internal {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        id = if row[feature] <= threshold {
                            left
                        } else {
                            right
                        }
                    }
                }
            }
        }
        Ok(Self { sets })
    }

    #[inline]
    pub fn get(&self, node: NodeId) -> &[usize] {
        &self.sets[node]
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// An instance whose label at a node depends on the branch it takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CareInstance {
    pub index: usize,
    pub left_correct: bool,
    pub right_correct: bool,
}

impl CareInstance {
    #[inline]
    pub fn correct_side(&self) -> Side {
        if self.left_correct {
            Side::Left
        } else {
            Side::Right
        }
    }
}

/// Majority label of the reaching instances, or `current` when none reach.
pub fn relabel_leaf(
    current: usize,
    reaching: &[usize],
    labels: &[usize],
    n_clusters: usize,
) -> usize {
    majority_label(reaching.iter().map(|&i| labels[i]), n_clusters).unwrap_or(current)
}

/// Label of the leaf reached when `x` descends from `node`.
pub fn subtree_label(tree: &DecisionTree, node: NodeId, x: &[f64]) -> usize {
    tree.leaf_label(tree.descend(node, x))
}

/// Reaching instances that are labeled correctly on exactly one side of `node`.
/// Empty for leaves.
pub fn care_set(
    tree: &DecisionTree,
    node: NodeId,
    reach: &[usize],
    x: &Tensor2,
    labels: &[usize],
) -> Vec<CareInstance> {
    let NodeKind::Internal { left, right, .. } = tree.node(node).kind else {
        return Vec::new();
    };
    reach
        .iter()
        .filter_map(|&i| {
            let left_correct = subtree_label(tree, left, x.row(i)) == labels[i];
            let right_correct = subtree_label(tree, right, x.row(i)) == labels[i];
            (left_correct != right_correct).then_some(CareInstance {
                index: i,
                left_correct,
                right_correct,
            })
        })
        .collect()
}

/// Number of care instances sent to their incorrect side by `split`.
pub fn node_objective(care: &[CareInstance], x: &Tensor2, split: Split) -> usize {
    care.iter()
        .filter(|c| {
            let goes_left = x[(c.index, split.feature)] <= split.threshold;
            goes_left != c.left_correct
        })
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeUpdate {
    /// Objective of the split the node had on entry.
    pub before: usize,
    /// Objective of the split it has on exit.
    pub after: usize,
    pub split: Split,
    pub changed: bool,
}

/// Best split for `care` over midpoint thresholds of the reaching instances.
/// Ties resolve to the lowest objective, then feature, then threshold.
fn best_care_split(care: &[CareInstance], reach: &[usize], x: &Tensor2) -> Option<(usize, Split)> {
    let want_left_total = care.iter().filter(|c| c.left_correct).count();
    let mut best: Option<(usize, Split)> = None;
    let mut values = Vec::with_capacity(reach.len());
    let mut sorted_care: Vec<(f64, bool)> = Vec::with_capacity(care.len());
    for feature in 0..x.cols() {
        values.clear();
        values.extend(reach.iter().map(|&i| x[(i, feature)]));
        let thresholds = candidate_thresholds(&mut values);
        if thresholds.is_empty() {
            continue;
        }
        sorted_care.clear();
        sorted_care.extend(care.iter().map(|c| (x[(c.index, feature)], c.left_correct)));
        sorted_care.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut left_ok, mut right_wrong, mut pos) = (0usize, 0usize, 0usize);
        for &threshold in &thresholds {
            while pos < sorted_care.len() && sorted_care[pos].0 <= threshold {
                if sorted_care[pos].1 {
                    left_ok += 1;
                } else {
                    right_wrong += 1;
                }
                pos += 1;
            }
            let objective = (want_left_total - left_ok) + right_wrong;
            if best.is_none_or(|(b, _)| objective < b) {
                best = Some((objective, Split { feature, threshold }));
            }
        }
    }
    best
}

/// Re-optimizes one internal node against `labels`; the current split is kept
/// unless a candidate is strictly better.
pub fn optimize_node(
    tree: &mut DecisionTree,
    node: NodeId,
    reach: &[usize],
    x: &Tensor2,
    labels: &[usize],
) -> Option<NodeUpdate> {
    let NodeKind::Internal {
        feature, threshold, ..
    } = tree.node(node).kind
    else {
        return None;
    };
    let current = Split { feature, threshold };
    let care = care_set(tree, node, reach, x, labels);
    let before = node_objective(&care, x, current);
    let mut update = NodeUpdate {
        before,
        after: before,
        split: current,
        changed: false,
    };
    if before == 0 {
        return Some(update);
    }
    if let Some((objective, split)) = best_care_split(&care, reach, x) {
        if objective < before {
            if let NodeKind::Internal {
                feature, threshold, ..
            } = &mut tree.node_mut(node).kind
            {
                *feature = split.feature;
                *threshold = split.threshold;
            }
            update = NodeUpdate {
                before,
                after: objective,
                split,
                changed: true,
            };
        }
    }
    Some(update)
}

/// Number of instances whose predicted label differs from `labels`.
pub fn misclassification(tree: &DecisionTree, x: &Tensor2, labels: &[usize]) -> Result<usize> {
    check_dim("label count", x.rows(), labels.len())?;
    Ok(tree
        .predict_batch(x)?
        .iter()
        .zip(labels)
        .filter(|(p, y)| p != y)
        .count())
}

/// Collapses every internal node with an empty child into its other child,
/// renumbers the remaining nodes breadth-first and refreshes sample counts.
/// Returns the reach sets of the pruned tree and whether anything was removed.
pub fn prune_and_reallocate(tree: &mut DecisionTree, x: &Tensor2) -> Result<(ReachSets, bool)> {
    let reach = ReachSets::compute(tree, x)?;
    fn resolve(tree: &mut DecisionTree, reach: &ReachSets, id: NodeId) -> NodeId {
        let NodeKind::Internal { left, right, .. } = tree.node(id).kind else {
            return id;
        };
        if reach.get(left).is_empty() {
            return resolve(tree, reach, right);
        }
        if reach.get(right).is_empty() {
            return resolve(tree, reach, left);
        }
        let new_left = resolve(tree, reach, left);
        let new_right = resolve(tree, reach, right);
        if let NodeKind::Internal { left, right, .. } = &mut tree.node_mut(id).kind {
            *left = new_left;
            *right = new_right;
        }
        id
    }
    let before = tree.node_count();
    let root = tree.root();
    let new_root = resolve(tree, &reach, root);
    tree.compact(new_root);
    let pruned = tree.node_count() != before;
    let reach = ReachSets::compute(tree, x)?;
    for id in 0..tree.node_count() {
        tree.node_mut(id).samples = reach.get(id).len();
    }
    Ok((reach, pruned))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassOutcome {
    /// Misclassification against the pass labels before and after the pass.
    pub loss_before: usize,
    pub loss_after: usize,
    pub relabeled_leaves: usize,
    pub resplit_nodes: usize,
    pub pruned: bool,
}

impl PassOutcome {
    pub fn changed(&self) -> bool {
        self.relabeled_leaves > 0 || self.resplit_nodes > 0 || self.pruned
    }
}

/// One reverse breadth-first sweep followed by pruning and reallocation.
pub fn tao_pass(tree: &mut DecisionTree, x: &Tensor2, labels: &[usize]) -> Result<PassOutcome> {
    let loss_before = misclassification(tree, x, labels)?;
    // Reach sets depend only on ancestors, which a deepest-first sweep has not
    // touched yet when a node is visited.
    let reach = ReachSets::compute(tree, x)?;
    let k = tree.n_clusters();
    let (mut relabeled_leaves, mut resplit_nodes) = (0, 0);
    for level in tree.levels().into_iter().rev() {
        for id in level {
            match tree.node(id).kind {
                NodeKind::Leaf { label } => {
                    let new = relabel_leaf(label, reach.get(id), labels, k);
                    if new != label {
                        tree.node_mut(id).kind = NodeKind::Leaf { label: new };
                        relabeled_leaves += 1;
                    }
                }
                NodeKind::Internal { .. } => {
                    if optimize_node(tree, id, reach.get(id), x, labels).is_some_and(|u| u.changed)
                    {
                        resplit_nodes += 1;
                    }
                }
            }
        }
    }
    let (_, pruned) = prune_and_reallocate(tree, x)?;
    Ok(PassOutcome {
        loss_before,
        loss_after: misclassification(tree, x, labels)?,
        relabeled_leaves,
        resplit_nodes,
        pruned,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaoReport {
    pub passes: Vec<PassOutcome>,
    /// True when the last pass changed nothing; false when the cap was hit.
    pub converged: bool,
}

impl TaoReport {
    pub fn iterations(&self) -> usize {
        self.passes.len()
    }
}

/// Repeats [`tao_pass`], starting from `initial_labels` and then feeding the
/// tree's own predictions back in, until a pass changes nothing or
/// `max_iterations` passes have run.
pub fn optimize_tree(
    tree: &mut DecisionTree,
    x: &Tensor2,
    initial_labels: &[usize],
    max_iterations: usize,
) -> Result<TaoReport> {
    check_dim("label count", x.rows(), initial_labels.len())?;
    let mut labels = initial_labels.to_vec();
    let mut passes = Vec::new();
    let mut converged = false;
    while passes.len() < max_iterations.max(1) {
        let outcome = tao_pass(tree, x, &labels)?;
        passes.push(outcome);
        if !outcome.changed() {
            converged = true;
            break;
        }
        labels = tree.predict_batch(x)?;
    }
    Ok(TaoReport { passes, converged })
}
