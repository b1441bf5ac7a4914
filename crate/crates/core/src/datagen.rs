//! Deterministic synthetic anomaly-detection graphs.
//!
//! The topology is an Erdős–Rényi `G(N, p)` graph with
//! `p = avg_degree / (N - 1)`; isolated nodes are allowed. Node features are
//! i.i.d. standard normal. Two labeling mechanisms are available:
//!
//! - `feature-only`: a random subset of nodes is anomalous and their features
//!   are shifted by [`FEATURE_SHIFT`] in every column, so the label is
//!   recoverable from a node's own row.
//! - `neighborhood`: a node is anomalous iff the mean of its neighbors'
//!   features, projected on a hidden random unit vector, is among the top
//!   `floor(ratio * N)` values. Own features carry no label signal.
//!
//! Afterwards each label is flipped independently with probability `noise`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate_once, AggKind};
use crate::dataset::{Dataset, LabelTable};
use crate::error::{GadError, Result};
use crate::graph::{Edge, Graph};
use crate::matrix::FeatureMatrix;
use crate::rng;

/// Mean shift applied to anomalous rows under the feature-only mechanism.
pub const FEATURE_SHIFT: f64 = 5.0;

/// Largest anomaly ratio a benchmark dataset may have.
pub const MAX_ANOMALY_RATIO: f64 = 0.25;

/// Smallest anomaly count a benchmark dataset should have.
pub const MIN_ANOMALIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    FeatureOnly,
    Neighborhood,
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mechanism::FeatureOnly => "feature-only",
            Mechanism::Neighborhood => "neighborhood",
        })
    }
}

impl FromStr for Mechanism {
    type Err = GadError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feature-only" => Ok(Mechanism::FeatureOnly),
            "neighborhood" => Ok(Mechanism::Neighborhood),
            other => Err(GadError::InvalidParameter(format!(
                "mechanism must be feature-only or neighborhood, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub num_nodes: usize,
    pub avg_degree: f64,
    pub dim: usize,
    pub anomaly_ratio: f64,
    pub mechanism: Mechanism,
    pub noise: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn num_anomalies(&self) -> usize {
        (self.anomaly_ratio * self.num_nodes as f64).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GadError::InvalidParameter(m));
        if self.num_nodes < 2 {
            return bad("need at least 2 nodes".into());
        }
        if !(self.avg_degree > 0.0 && self.avg_degree <= (self.num_nodes - 1) as f64) {
            return bad(format!(
                "avg_degree must lie in (0, {}], got {}",
                self.num_nodes - 1,
                self.avg_degree
            ));
        }
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if !(self.anomaly_ratio > 0.0 && self.anomaly_ratio <= MAX_ANOMALY_RATIO) {
            return bad(format!(
                "anomaly ratio must lie in (0, 0.25]: datasets may have no more than a 25% anomaly ratio (got {})",
                self.anomaly_ratio
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise must lie in [0, 1], got {}", self.noise));
        }
        if self.num_anomalies() < 2 {
            return Err(GadError::DegenerateLabels(format!(
                "{} nodes at ratio {} give fewer than 2 anomalies",
                self.num_nodes, self.anomaly_ratio
            )));
        }
        Ok(())
    }

    /// Whether the spec yields at least 100 anomalies at a ratio of at most 25%.
    pub fn meets_selection_rule(&self) -> bool {
        self.num_anomalies() >= MIN_ANOMALIES && self.anomaly_ratio <= MAX_ANOMALY_RATIO
    }
}

/// Undirected `G(n, p)` by geometric skipping over the lower triangle.
pub fn erdos_renyi_edges<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Vec<Edge> {
    let mut edges = Vec::new();
    if p <= 0.0 || n < 2 {
        return edges;
    }
    if p >= 1.0 {
        for v in 1..n {
            for w in 0..v {
                edges.push((v, w, 0));
            }
        }
        return edges;
    }
    edges.reserve((p * n as f64 * (n - 1) as f64 / 2.0 * 1.05) as usize);
    let log_q = (1.0 - p).ln();
    let mut v: usize = 1;
    let mut w: i64 = -1;
    while v < n {
        let r: f64 = rng.random();
        let skip = ((1.0 - r).ln() / log_q).floor() as i64;
        w = w.saturating_add(1).saturating_add(skip);
        while v < n && w >= v as i64 {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edges.push((v, w as usize, 0));
        }
    }
    edges
}

pub fn generate(spec: &GenSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.num_nodes;
    let d = spec.dim;
    let m = spec.num_anomalies();

    let p = spec.avg_degree / (n - 1) as f64;
    let edges = erdos_renyi_edges(n, p, &mut rng::stream(spec.seed, 0));
    let graph = Graph::build_csr(&edges, n, 1, false)?;
    drop(edges);

    let mut feat_rng = rng::stream(spec.seed, 1);
    let mut values: Vec<f64> = (0..n * d)
        .map(|_| feat_rng.sample(StandardNormal))
        .collect();

    let mut hidden_rng = rng::stream(spec.seed, 2);
    let mut anomalous = vec![false; n];
    match spec.mechanism {
        Mechanism::FeatureOnly => {
            let mut ids: Vec<usize> = (0..n).collect();
            ids.shuffle(&mut hidden_rng);
            for &i in &ids[..m] {
                anomalous[i] = true;
                values[i * d..(i + 1) * d]
                    .iter_mut()
                    .for_each(|v| *v += FEATURE_SHIFT);
            }
        }
        Mechanism::Neighborhood => {
            let direction = random_unit_vector(d, &mut hidden_rng);
            let x = FeatureMatrix::new(n, d, values.clone())?;
            let hidden = hidden_scores(&graph, &x, &direction)?;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| hidden[b].total_cmp(&hidden[a]).then(a.cmp(&b)));
            for &i in &order[..m] {
                anomalous[i] = true;
            }
        }
    }

    if spec.noise > 0.0 {
        let mut noise_rng = rng::stream(spec.seed, 3);
        for flag in anomalous.iter_mut() {
            if noise_rng.random::<f64>() < spec.noise {
                *flag = !*flag;
            }
        }
    }

    let features = FeatureMatrix::new(n, d, values)?;
    let labels = LabelTable::from_bools(&anomalous)?;
    let name = format!("synthetic-{}-n{}-s{}", spec.mechanism, n, spec.seed);
    Ok(Dataset::new(name, graph, features, labels)?
        .with_meta("generator", "erdos-renyi")
        .with_meta("mechanism", spec.mechanism.to_string())
        .with_meta("num_nodes", n.to_string())
        .with_meta("avg_degree", format!("{:?}", spec.avg_degree))
        .with_meta("dim", d.to_string())
        .with_meta("anomaly_ratio", format!("{:?}", spec.anomaly_ratio))
        .with_meta("noise", format!("{:?}", spec.noise))
        .with_meta("seed", spec.seed.to_string()))
}

/// Hidden direction used by the neighborhood mechanism for `spec`.
pub fn hidden_direction(spec: &GenSpec) -> Vec<f64> {
    random_unit_vector(spec.dim, &mut rng::stream(spec.seed, 2))
}

/// Projection of each node's neighbor-mean features on `direction`.
pub fn hidden_scores(graph: &Graph, x: &FeatureMatrix, direction: &[f64]) -> Result<Vec<f64>> {
    let h = aggregate_once(graph, x, AggKind::Mean)?;
    Ok((0..h.num_rows())
        .map(|i| h.row(i).iter().zip(direction).map(|(a, b)| a * b).sum())
        .collect())
}

fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(mechanism: Mechanism) -> GenSpec {
        GenSpec {
            num_nodes: 2000,
            avg_degree: 10.0,
            dim: 8,
            anomaly_ratio: 0.05,
            mechanism,
            noise: 0.0,
            seed: 7,
        }
    }

    #[test]
    fn exact_anomaly_count_without_noise() {
        for mech in [Mechanism::Neighborhood, Mechanism::FeatureOnly] {
            let d = generate(&spec(mech)).unwrap();
            assert_eq!(d.labels.num_pos(), 100);
            assert_eq!(d.labels.num_neg(), 1900);
        }
    }

    #[test]
    fn deterministic() {
        let a = generate(&spec(Mechanism::Neighborhood)).unwrap();
        let b = generate(&spec(Mechanism::Neighborhood)).unwrap();
        assert_eq!(a, b);
        let mut other = spec(Mechanism::Neighborhood);
        other.seed = 8;
        assert_ne!(generate(&other).unwrap().graph, a.graph);
    }

    #[test]
    fn average_degree_is_close_to_target() {
        let d = generate(&spec(Mechanism::Neighborhood)).unwrap();
        let mean_deg = d.graph.num_entries() as f64 / 2000.0;
        assert!((mean_deg - 10.0).abs() < 0.5, "{mean_deg}");
        assert!(!d.graph.is_directed());
    }

    #[test]
    fn ratio_rule_and_degenerate_counts() {
        let mut s = spec(Mechanism::Neighborhood);
        s.anomaly_ratio = 0.4;
        let err = generate(&s).unwrap_err();
        assert!(err.to_string().contains("25%"));
        let mut s = spec(Mechanism::Neighborhood);
        s.num_nodes = 20;
        s.avg_degree = 3.0;
        assert!(matches!(generate(&s), Err(GadError::DegenerateLabels(_))));
        assert!(spec(Mechanism::Neighborhood).meets_selection_rule());
    }

    #[test]
    fn noise_flips_some_labels() {
        let mut s = spec(Mechanism::FeatureOnly);
        s.noise = 0.02;
        let d = generate(&s).unwrap();
        assert_ne!(d.labels.num_pos(), 100);
    }

    #[test]
    fn complete_graph_when_p_is_one() {
        let edges = erdos_renyi_edges(5, 1.0, &mut rng::stream(0, 0));
        assert_eq!(edges.len(), 10);
    }
}
