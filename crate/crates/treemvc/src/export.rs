//! Tree export: a JSON document that round-trips exactly, and Graphviz DOT.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use treemvc_core::dtree::{DecisionTree, NodeKind, TreeNode};
use treemvc_core::pipeline::ViewLayout;

use crate::error::{Error, Result};

pub const TREE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRecordKind {
    Internal,
    Leaf,
}

/// One node; split fields are set for internal nodes, `label` for leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub kind: NodeRecordKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<usize>,
    pub depth: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub schema_version: u32,
    pub n_clusters: usize,
    pub feature_dim: usize,
    pub view_offsets: Vec<usize>,
    pub view_dims: Vec<usize>,
    pub root: usize,
    pub nodes: Vec<NodeRecord>,
}

impl TreeDocument {
    pub fn from_tree(tree: &DecisionTree, layout: &ViewLayout) -> Self {
        let nodes = tree
            .nodes()
            .iter()
            .map(|n| {
                let mut rec = NodeRecord {
                    id: n.id,
                    kind: NodeRecordKind::Leaf,
                    feature: None,
                    threshold: None,
                    label: None,
                    left: None,
                    right: None,
                    depth: n.depth,
                    samples: n.samples,
                };
                match n.kind {
                    NodeKind::Internal {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        rec.kind = NodeRecordKind::Internal;
                        rec.feature = Some(feature);
                        rec.threshold = Some(threshold);
                        rec.left = Some(left);
                        rec.right = Some(right);
                    }
                    NodeKind::Leaf { label } => rec.label = Some(label),
                }
                rec
            })
            .collect();
        Self {
            schema_version: TREE_SCHEMA_VERSION,
            n_clusters: tree.n_clusters(),
            feature_dim: tree.feature_dim(),
            view_offsets: layout.offsets().to_vec(),
            view_dims: layout.dims().to_vec(),
            root: tree.root(),
            nodes,
        }
    }

    pub fn to_tree(&self) -> Result<DecisionTree> {
        if self.schema_version != TREE_SCHEMA_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported tree schema version {}",
                self.schema_version
            )));
        }
        let missing =
            |id: usize, field: &str| Error::ModelFormat(format!("node {id}: missing `{field}`"));
        let nodes = self
            .nodes
            .iter()
            .map(|r| {
                let kind = match r.kind {
                    NodeRecordKind::Internal => NodeKind::Internal {
                        feature: r.feature.ok_or_else(|| missing(r.id, "feature"))?,
                        threshold: r.threshold.ok_or_else(|| missing(r.id, "threshold"))?,
                        left: r.left.ok_or_else(|| missing(r.id, "left"))?,
                        right: r.right.ok_or_else(|| missing(r.id, "right"))?,
                    },
                    NodeRecordKind::Leaf => NodeKind::Leaf {
                        label: r.label.ok_or_else(|| missing(r.id, "label"))?,
                    },
                };
                Ok(TreeNode {
                    id: r.id,
                    depth: r.depth,
                    samples: r.samples,
                    kind,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DecisionTree::from_nodes(
            nodes,
            self.root,
            self.n_clusters,
            self.feature_dim,
        )?)
    }
}

pub fn tree_to_json(tree: &DecisionTree, layout: &ViewLayout) -> Result<String> {
    Ok(serde_json::to_string_pretty(&TreeDocument::from_tree(
        tree, layout,
    ))?)
}

pub fn tree_from_json(json: &str) -> Result<DecisionTree> {
    serde_json::from_str::<TreeDocument>(json)?.to_tree()
}

/// Human-readable feature name, e.g. `V2[4]` for the fifth column of the
/// second view. Falls back to `x[f]` when the layout does not cover `f`.
pub fn feature_name(layout: &ViewLayout, feature: usize) -> String {
    match layout.locate(feature) {
        Some((view, local)) => format!("V{}[{}]", view + 1, local),
        None => format!("x[{feature}]"),
    }
}

pub fn tree_to_dot(tree: &DecisionTree, layout: &ViewLayout) -> String {
    let mut out = String::from("digraph tree {\n  node [shape=box, fontname=\"Helvetica\"];\n");
    for n in tree.nodes() {
        match n.kind {
            NodeKind::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                let _ = writeln!(
                    out,
                    "  n{} [label=\"{} \u{2264} {}\\nn = {}\"];",
                    n.id,
                    feature_name(layout, feature),
                    threshold,
                    n.samples
                );
                let _ = writeln!(out, "  n{} -> n{} [label=\"yes\"];", n.id, left);
                let _ = writeln!(out, "  n{} -> n{} [label=\"no\"];", n.id, right);
            }
            NodeKind::Leaf { label } => {
                let _ = writeln!(
                    out,
                    "  n{} [label=\"cluster {}\\nn = {}\", style=rounded];",
                    n.id, label, n.samples
                );
            }
        }
    }
    out.push_str("}\n");
    out
}
