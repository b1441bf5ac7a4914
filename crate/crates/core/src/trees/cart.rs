use rand::Rng;
use rayon::prelude::*;

use super::binning::{midpoint, BinnedMatrix};
use super::{Criterion, Tree, TreeNode, TreeParams, TreeTargets};
use crate::error::{GadError, Result};
use crate::matrix::FeatureMatrix;

/// Samples x candidate features above which a node's split search runs in parallel.
const PARALLEL_WORK: usize = 1 << 16;

/// Sufficient statistics of a set of samples. Classification keeps
/// `(total weight, positive weight)`, gradient mode keeps `(H, G)`.
#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    count: usize,
    a: f64,
    b: f64,
}

impl Stats {
    #[inline]
    fn add(&mut self, (a, b): (f64, f64)) {
        self.count += 1;
        self.a += a;
        self.b += b;
    }

    #[inline]
    fn merge(&mut self, other: &Stats) {
        self.count += other.count;
        self.a += other.a;
        self.b += other.b;
    }

    #[inline]
    fn minus(&self, other: &Stats) -> Stats {
        Stats {
            count: self.count - other.count,
            a: self.a - other.a,
            b: self.b - other.b,
        }
    }
}

#[derive(Clone, Copy)]
enum Objective<'a> {
    Class {
        labels: &'a [bool],
        weights: Option<&'a [f64]>,
        criterion: Criterion,
    },
    Grad {
        grad: &'a [f64],
        hess: &'a [f64],
        lambda: f64,
        min_child_weight: f64,
    },
}

fn impurity(criterion: Criterion, p: f64) -> f64 {
    match criterion {
        Criterion::Gini => 2.0 * p * (1.0 - p),
        Criterion::Entropy => {
            let h = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
            h(p) + h(1.0 - p)
        }
    }
}

impl Objective<'_> {
    #[inline]
    fn sample(&self, row: usize) -> (f64, f64) {
        match *self {
            Objective::Class {
                labels, weights, ..
            } => {
                let w = weights.map_or(1.0, |w| w[row]);
                (w, if labels[row] { w } else { 0.0 })
            }
            Objective::Grad { grad, hess, .. } => (hess[row], grad[row]),
        }
    }

    fn leaf_value(&self, s: &Stats) -> f64 {
        match *self {
            Objective::Class { .. } => {
                if s.a > 0.0 {
                    s.b / s.a
                } else {
                    0.0
                }
            }
            Objective::Grad { lambda, .. } => {
                let denom = s.a + lambda;
                if denom > 0.0 {
                    -s.b / denom
                } else {
                    0.0
                }
            }
        }
    }

    fn is_pure(&self, s: &Stats) -> bool {
        match self {
            Objective::Class { .. } => s.b == 0.0 || s.b == s.a,
            Objective::Grad { .. } => false,
        }
    }

    #[inline]
    fn child_ok(&self, s: &Stats, min_samples_leaf: usize) -> bool {
        s.count >= min_samples_leaf
            && match *self {
                Objective::Class { .. } => true,
                Objective::Grad {
                    min_child_weight, ..
                } => s.a >= min_child_weight,
            }
    }

    /// Impurity decrease (classification) or the regularized Newton gain.
    #[inline]
    fn gain(&self, parent: &Stats, left: &Stats, right: &Stats) -> f64 {
        match *self {
            Objective::Class { criterion, .. } => {
                let cost = |s: &Stats| {
                    if s.a > 0.0 {
                        s.a * impurity(criterion, s.b / s.a)
                    } else {
                        0.0
                    }
                };
                cost(parent) - cost(left) - cost(right)
            }
            Objective::Grad { lambda, .. } => {
                let score = |s: &Stats| {
                    let denom = s.a + lambda;
                    if denom > 0.0 {
                        s.b * s.b / denom
                    } else {
                        0.0
                    }
                };
                0.5 * (score(left) + score(right) - score(parent))
            }
        }
    }

    fn accepts(&self, gain: f64) -> bool {
        match self {
            // Zero-decrease splits are allowed so XOR-like structure can be
            // separated deeper down.
            Objective::Class { .. } => gain.is_finite(),
            Objective::Grad { .. } => gain > 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    binned: Option<&'a BinnedMatrix>,
    objective: Objective<'a>,
    params: &'a TreeParams,
}

impl Builder<'_> {
    fn best_exact(&self, feature: usize, samples: &[usize], total: &Stats) -> Option<Candidate> {
        let mut pairs: Vec<(f64, usize)> = samples
            .iter()
            .map(|&r| (self.x.get(r, feature), r))
            .collect();
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if pairs[0].0 == pairs[pairs.len() - 1].0 {
            return None;
        }
        let mut best: Option<Candidate> = None;
        let mut left = Stats::default();
        for i in 0..pairs.len() - 1 {
            left.add(self.objective.sample(pairs[i].1));
            if pairs[i].0 == pairs[i + 1].0 {
                continue;
            }
            let right = total.minus(&left);
            if !self.objective.child_ok(&left, self.params.min_samples_leaf)
                || !self
                    .objective
                    .child_ok(&right, self.params.min_samples_leaf)
            {
                continue;
            }
            let gain = self.objective.gain(total, &left, &right);
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    feature,
                    threshold: midpoint(pairs[i].0, pairs[i + 1].0),
                    gain,
                });
            }
        }
        best
    }

    fn best_binned(
        &self,
        binned: &BinnedMatrix,
        feature: usize,
        samples: &[usize],
        total: &Stats,
    ) -> Option<Candidate> {
        let edges = binned.edges(feature);
        if edges.is_empty() {
            return None;
        }
        let mut hist = vec![Stats::default(); edges.len() + 1];
        for &r in samples {
            hist[binned.bin(feature, r) as usize].add(self.objective.sample(r));
        }
        let mut best: Option<Candidate> = None;
        let mut left = Stats::default();
        for (b, &edge) in edges.iter().enumerate() {
            left.merge(&hist[b]);
            if left.count == 0 {
                continue;
            }
            if left.count == total.count {
                break;
            }
            let right = total.minus(&left);
            if !self.objective.child_ok(&left, self.params.min_samples_leaf)
                || !self
                    .objective
                    .child_ok(&right, self.params.min_samples_leaf)
            {
                continue;
            }
            let gain = self.objective.gain(total, &left, &right);
            if best.is_none_or(|c| gain > c.gain) {
                best = Some(Candidate {
                    feature,
                    threshold: edge,
                    gain,
                });
            }
        }
        best
    }

    fn best_for(&self, feature: usize, samples: &[usize], total: &Stats) -> Option<Candidate> {
        match self.binned {
            Some(b) => self.best_binned(b, feature, samples, total),
            None => self.best_exact(feature, samples, total),
        }
    }

    /// Best split over `features` (ascending); ties go to the lower feature.
    fn best_among(
        &self,
        features: &[usize],
        samples: &[usize],
        total: &Stats,
    ) -> Option<Candidate> {
        let per_feature: Vec<Option<Candidate>> = if samples.len() * features.len() >= PARALLEL_WORK
        {
            features
                .par_iter()
                .map(|&f| self.best_for(f, samples, total))
                .collect()
        } else {
            features
                .iter()
                .map(|&f| self.best_for(f, samples, total))
                .collect()
        };
        per_feature
            .into_iter()
            .flatten()
            .fold(None, |best: Option<Candidate>, c| match best {
                Some(b) if c.gain <= b.gain => Some(b),
                _ => Some(c),
            })
    }

    fn find_split<R: Rng + ?Sized>(
        &self,
        samples: &[usize],
        total: &Stats,
        rng: &mut R,
    ) -> Option<Candidate> {
        let dim = self.x.dim();
        match self.params.max_features {
            Some(k) if k < dim => {
                let mut chosen = rand::seq::index::sample(rng, dim, k.max(1)).into_vec();
                chosen.sort_unstable();
                let best = self.best_among(&chosen, samples, total);
                if best.is_some() {
                    return best;
                }
                // Every sampled column was constant here; fall back to the rest.
                let rest: Vec<usize> = (0..dim)
                    .filter(|f| chosen.binary_search(f).is_err())
                    .collect();
                self.best_among(&rest, samples, total)
            }
            _ => {
                let all: Vec<usize> = (0..dim).collect();
                self.best_among(&all, samples, total)
            }
        }
    }

    fn build<R: Rng + ?Sized>(&self, rows: &[usize], rng: &mut R) -> Tree {
        let mut samples = rows.to_vec();
        let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
        let mut stack = vec![(0usize, 0usize, samples.len(), 0usize)];
        let min_leaf = self.params.min_samples_leaf.max(1);

        while let Some((id, start, end, depth)) = stack.pop() {
            let slice = &samples[start..end];
            let mut total = Stats::default();
            for &r in slice {
                total.add(self.objective.sample(r));
            }
            nodes[id] = TreeNode::Leaf {
                value: self.objective.leaf_value(&total),
            };
            if total.count < 2 * min_leaf
                || self.params.max_depth.is_some_and(|m| depth >= m)
                || self.objective.is_pure(&total)
            {
                continue;
            }
            let Some(split) = self.find_split(slice, &total, rng) else {
                continue;
            };
            if !self.objective.accepts(split.gain) {
                continue;
            }

            let (left, right): (Vec<usize>, Vec<usize>) = slice
                .iter()
                .partition(|&&r| self.x.get(r, split.feature) <= split.threshold);
            let mid = start + left.len();
            samples[start..mid].copy_from_slice(&left);
            samples[mid..end].copy_from_slice(&right);

            let left_id = nodes.len();
            nodes.push(TreeNode::Leaf { value: 0.0 });
            nodes.push(TreeNode::Leaf { value: 0.0 });
            nodes[id] = TreeNode::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: left_id,
                right: left_id + 1,
            };
            stack.push((left_id + 1, mid, end, depth + 1));
            stack.push((left_id, start, mid, depth + 1));
        }
        Tree::from_nodes(nodes)
    }
}

fn validate(x: &FeatureMatrix, rows: &[usize], targets: &TreeTargets<'_>) -> Result<()> {
    if rows.is_empty() {
        return Err(GadError::InvalidValue(
            "cannot fit a tree on zero samples".into(),
        ));
    }
    let n = x.num_rows();
    if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
        return Err(GadError::Dimension(format!(
            "sample row {bad} out of range for {n} rows"
        )));
    }
    let len_ok = |len: usize, what: &str| {
        if len == n {
            Ok(())
        } else {
            Err(GadError::Dimension(format!(
                "{what} has {len} entries for {n} rows"
            )))
        }
    };
    match targets {
        TreeTargets::Classification { labels, weights } => {
            len_ok(labels.len(), "labels")?;
            if let Some(w) = weights {
                len_ok(w.len(), "weights")?;
                if rows.iter().any(|&r| !(w[r].is_finite() && w[r] >= 0.0)) {
                    return Err(GadError::InvalidValue(
                        "sample weights must be finite and non-negative".into(),
                    ));
                }
            }
        }
        TreeTargets::Gradient { grad, hess } => {
            len_ok(grad.len(), "gradients")?;
            len_ok(hess.len(), "hessians")?;
            if let Some(&r) = rows
                .iter()
                .find(|&&r| !grad[r].is_finite() || !hess[r].is_finite())
            {
                return Err(GadError::InvalidValue(format!(
                    "non-finite gradient/hessian at row {r}: ({}, {})",
                    grad[r], hess[r]
                )));
            }
        }
    }
    Ok(())
}

/// Grows one tree on the samples `rows` of `x` (repeats act as weights).
pub fn fit_tree<R: Rng + ?Sized>(
    x: &FeatureMatrix,
    rows: &[usize],
    targets: TreeTargets<'_>,
    params: &TreeParams,
    rng: &mut R,
) -> Result<Tree> {
    fit_tree_with(x, None, rows, targets, params, rng)
}

pub(crate) fn fit_tree_with<R: Rng + ?Sized>(
    x: &FeatureMatrix,
    binned: Option<&BinnedMatrix>,
    rows: &[usize],
    targets: TreeTargets<'_>,
    params: &TreeParams,
    rng: &mut R,
) -> Result<Tree> {
    validate(x, rows, &targets)?;
    let objective = match targets {
        TreeTargets::Classification { labels, weights } => Objective::Class {
            labels,
            weights,
            criterion: params.criterion,
        },
        TreeTargets::Gradient { grad, hess } => Objective::Grad {
            grad,
            hess,
            lambda: params.lambda,
            min_child_weight: params.min_child_weight,
        },
    };
    let builder = Builder {
        x,
        binned,
        objective,
        params,
    };
    Ok(builder.build(rows, rng))
}
