//! Parameter-free neighbor aggregation.
//!
//! Layer `l` replaces every node's vector with a pooled summary of its
//! neighbors' layer `l-1` vectors; [`stack`] concatenates layers `0..=L` into
//! one wide matrix that a tree ensemble can consume directly. A node is its
//! own neighbor only through an explicit self-loop, and nodes without
//! neighbors aggregate to the zero vector for every pooling kind.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};
use crate::graph::Graph;
use crate::matrix::FeatureMatrix;

/// Rows per parallel work item.
const ROW_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggKind {
    Mean,
    Sum,
    Max,
}

impl AggKind {
    pub const ALL: [AggKind; 3] = [AggKind::Sum, AggKind::Mean, AggKind::Max];

    pub fn as_str(self) -> &'static str {
        match self {
            AggKind::Mean => "mean",
            AggKind::Sum => "sum",
            AggKind::Max => "max",
        }
    }
}

impl fmt::Display for AggKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggKind {
    type Err = GadError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(AggKind::Mean),
            "sum" => Ok(AggKind::Sum),
            "max" => Ok(AggKind::Max),
            other => Err(GadError::InvalidParameter(format!(
                "aggregation must be one of sum, mean, max; got `{other}`"
            ))),
        }
    }
}

/// `N x d(L+1)` matrix `[h0 | h1 | ... | hL]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedFeatures {
    matrix: FeatureMatrix,
    layers: usize,
    base_dim: usize,
}

impl StackedFeatures {
    /// Number of aggregation layers `L` (the matrix has `L + 1` blocks).
    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn matrix(&self) -> &FeatureMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> FeatureMatrix {
        self.matrix
    }

    /// Copy of block `l` (`h^l`).
    pub fn block(&self, l: usize) -> FeatureMatrix {
        assert!(l <= self.layers, "block {l} out of range");
        let n = self.matrix.num_rows();
        let d = self.base_dim;
        let mut values = Vec::with_capacity(n * d);
        for i in 0..n {
            values.extend_from_slice(&self.matrix.row(i)[l * d..(l + 1) * d]);
        }
        FeatureMatrix::from_raw(n, d, values)
    }
}

fn single_relation(graph: &Graph) -> Cow<'_, Graph> {
    if graph.num_relations() == 1 {
        Cow::Borrowed(graph)
    } else {
        Cow::Owned(graph.merged_view())
    }
}

fn check_dims(graph: &Graph, x: &FeatureMatrix) -> Result<()> {
    if x.num_rows() != graph.num_nodes() {
        return Err(GadError::Dimension(format!(
            "graph has {} nodes but feature matrix has {} rows",
            graph.num_nodes(),
            x.num_rows()
        )));
    }
    Ok(())
}

/// Aggregates `input` (row-major, `dim` columns) over `graph`'s first
/// relation into a fresh buffer of the same shape.
fn aggregate_values(graph: &Graph, input: &[f64], dim: usize, kind: AggKind) -> Vec<f64> {
    let n = graph.num_nodes();
    let csr = graph.relation(0);
    let mut out = vec![0.0; n * dim];
    if dim == 0 {
        return out;
    }
    out.par_chunks_mut(ROW_CHUNK * dim)
        .enumerate()
        .for_each(|(chunk, rows)| {
            let first = chunk * ROW_CHUNK;
            for (k, acc) in rows.chunks_exact_mut(dim).enumerate() {
                let neighbors = csr.row(first + k);
                let Some((&head, tail)) = neighbors.split_first() else {
                    continue;
                };
                let head = head as usize;
                acc.copy_from_slice(&input[head * dim..(head + 1) * dim]);
                match kind {
                    AggKind::Sum | AggKind::Mean => {
                        for &j in tail {
                            let j = j as usize;
                            for (a, v) in acc.iter_mut().zip(&input[j * dim..(j + 1) * dim]) {
                                *a += v;
                            }
                        }
                        if kind == AggKind::Mean {
                            let deg = neighbors.len() as f64;
                            acc.iter_mut().for_each(|a| *a /= deg);
                        }
                    }
                    AggKind::Max => {
                        for &j in tail {
                            let j = j as usize;
                            for (a, &v) in acc.iter_mut().zip(&input[j * dim..(j + 1) * dim]) {
                                if v > *a {
                                    *a = v;
                                }
                            }
                        }
                    }
                }
            }
        });
    out
}

/// One round of neighbor pooling. Multi-relation graphs are pooled over
/// their merged view.
pub fn aggregate_once(graph: &Graph, x: &FeatureMatrix, kind: AggKind) -> Result<FeatureMatrix> {
    check_dims(graph, x)?;
    let graph = single_relation(graph);
    let values = aggregate_values(&graph, x.values(), x.dim(), kind);
    finite_or_err(&values)?;
    Ok(FeatureMatrix::from_raw(x.num_rows(), x.dim(), values))
}

fn finite_or_err(values: &[f64]) -> Result<()> {
    if values.par_iter().any(|v| !v.is_finite()) {
        return Err(GadError::InvalidValue(
            "aggregation overflowed to a non-finite value".into(),
        ));
    }
    Ok(())
}

/// `[h0 | h1 | ... | hL]` with `h0 = x` and `hl = aggregate_once(hl-1)`.
pub fn stack(
    graph: &Graph,
    x: &FeatureMatrix,
    layers: usize,
    kind: AggKind,
) -> Result<StackedFeatures> {
    check_dims(graph, x)?;
    let graph = single_relation(graph);
    let n = x.num_rows();
    let d = x.dim();
    let width = d * (layers + 1);

    let mut out = vec![0.0; n * width];
    if width > 0 {
        out.par_chunks_mut(width)
            .zip(x.values().par_chunks(d.max(1)))
            .for_each(|(dst, src)| dst[..d].copy_from_slice(src));
    }

    let mut prev: Cow<'_, [f64]> = Cow::Borrowed(x.values());
    for l in 1..=layers {
        let next = aggregate_values(&graph, &prev, d, kind);
        finite_or_err(&next)?;
        if d > 0 {
            out.par_chunks_mut(width)
                .zip(next.par_chunks(d))
                .for_each(|(dst, src)| dst[l * d..(l + 1) * d].copy_from_slice(src));
        }
        prev = Cow::Owned(next);
    }

    Ok(StackedFeatures {
        matrix: FeatureMatrix::from_raw(n, width, out),
        layers,
        base_dim: d,
    })
}
