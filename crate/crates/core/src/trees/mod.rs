//! From-scratch tree ensembles.
//!
//! [`fit_tree`] grows a single CART tree either for classification (weighted
//! gini/entropy impurity, leaves hold the weighted positive fraction) or on
//! per-sample first/second-order gradients (Newton leaves `-G/(H+λ)`). The
//! forest and boosting front ends in [`forest`] and [`boost`] build on it.
//!
//! Routing is always "left iff `x[feature] <= threshold`", and thresholds
//! are midpoints between consecutive distinct training values.

mod binning;
pub mod boost;
mod cart;
pub mod forest;
mod model;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use binning::BinnedMatrix;
pub use boost::{fit_gbt, logistic_grad_hess, logistic_loss, sigmoid, BoostParams};
pub use cart::fit_tree;
pub use forest::{fit_random_forest, ForestParams};
pub use model::{predict_scores, EnsembleModel, ModelKind, ModelParams};

use crate::error::GadError;

#[derive(Debug, Clone, Copy, PartialEq)]
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

/// A fitted tree; node 0 is the root and children always follow their parent.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![TreeNode::Leaf { value }],
        }
    }

    pub(crate) fn from_nodes(nodes: Vec<TreeNode>) -> Self {
        Tree { nodes }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = GadError;

    fn from_str(s: &str) -> Result<Self, GadError> {
        match s {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            other => Err(GadError::InvalidParameter(format!(
                "criterion must be gini or entropy, got `{other}`"
            ))),
        }
    }
}

/// Exact greedy search over every distinct value, or a 256-bin histogram
/// approximation for very large inputs. The histogram mode only considers
/// bin edges as thresholds, so it can pick different splits than exact mode
/// whenever a feature has more than 256 distinct values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    #[default]
    Exact,
    Histogram,
}

impl FromStr for SplitMode {
    type Err = GadError;

    fn from_str(s: &str) -> Result<Self, GadError> {
        match s {
            "exact" => Ok(SplitMode::Exact),
            "histogram" | "hist" => Ok(SplitMode::Histogram),
            other => Err(GadError::InvalidParameter(format!(
                "split mode must be exact or histogram, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Exact => "exact",
            SplitMode::Histogram => "histogram",
        })
    }
}

/// Per-tree growth controls.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Columns sampled per node; `None` uses every column.
    pub max_features: Option<usize>,
    pub criterion: Criterion,
    /// L2 penalty on leaf weights (gradient mode).
    pub lambda: f64,
    /// Minimum hessian sum per child (gradient mode).
    pub min_child_weight: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
            criterion: Criterion::Gini,
            lambda: 1.0,
            min_child_weight: 0.0,
        }
    }
}

/// What a tree is fitted to. Slices are indexed by data row.
#[derive(Debug, Clone, Copy)]
pub enum TreeTargets<'a> {
    Classification {
        labels: &'a [bool],
        weights: Option<&'a [f64]>,
    },
    Gradient {
        grad: &'a [f64],
        hess: &'a [f64],
    },
}
