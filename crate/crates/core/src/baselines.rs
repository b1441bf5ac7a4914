//! Exact k-nearest-neighbor scoring and feature-space neighborhood averaging.
//!
//! Both use squared Euclidean distance with brute-force search; equal
//! distances are resolved by the lower row index.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};
use crate::matrix::FeatureMatrix;

/// Query rows handled per parallel work item.
const QUERY_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NaParams {
    pub num_neighbors: usize,
}

impl Default for NaParams {
    fn default() -> Self {
        Self { num_neighbors: 5 }
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Indices of the `k` rows of `reference` closest to `query`, skipping `exclude`.
fn nearest(
    reference: &FeatureMatrix,
    query: &[f64],
    k: usize,
    exclude: Option<usize>,
    buf: &mut Vec<(f64, usize)>,
) -> Vec<usize> {
    buf.clear();
    buf.extend(
        (0..reference.num_rows())
            .filter(|&j| Some(j) != exclude)
            .map(|j| (sq_dist(reference.row(j), query), j)),
    );
    let k = k.min(buf.len());
    if k == 0 {
        return Vec::new();
    }
    if k < buf.len() {
        buf.select_nth_unstable_by(k - 1, by_distance);
    }
    buf[..k].iter().map(|&(_, j)| j).collect()
}

/// Fraction of anomalous labels among each query row's `k` nearest training rows.
pub fn knn_scores(
    train_x: &FeatureMatrix,
    train_y: &[bool],
    query_x: &FeatureMatrix,
    params: &KnnParams,
) -> Result<Vec<f64>> {
    if train_x.dim() != query_x.dim() {
        return Err(GadError::Dimension(format!(
            "training rows have {} features, queries {}",
            train_x.dim(),
            query_x.dim()
        )));
    }
    if train_y.len() != train_x.num_rows() {
        return Err(GadError::Dimension(format!(
            "{} labels for {} training rows",
            train_y.len(),
            train_x.num_rows()
        )));
    }
    if params.k == 0 || params.k > train_x.num_rows() {
        return Err(GadError::InvalidParameter(format!(
            "k = {} must lie in [1, {}] (training size)",
            params.k,
            train_x.num_rows()
        )));
    }
    let k = params.k;
    let rows: Vec<usize> = (0..query_x.num_rows()).collect();
    Ok(rows
        .par_chunks(QUERY_CHUNK)
        .flat_map_iter(|chunk| {
            let mut buf = Vec::with_capacity(train_x.num_rows());
            chunk
                .iter()
                .map(|&q| {
                    let hits = nearest(train_x, query_x.row(q), k, None, &mut buf)
                        .into_iter()
                        .filter(|&j| train_y[j])
                        .count();
                    hits as f64 / k as f64
                })
                .collect::<Vec<_>>()
        })
        .collect())
}

/// Replaces each score by the uniform mean of itself and the scores of its
/// `num_neighbors` nearest other rows of `x`.
pub fn neighborhood_average(
    scores: &[f64],
    x: &FeatureMatrix,
    params: &NaParams,
) -> Result<Vec<f64>> {
    if scores.len() != x.num_rows() {
        return Err(GadError::Dimension(format!(
            "{} scores for {} feature rows",
            scores.len(),
            x.num_rows()
        )));
    }
    if params.num_neighbors == 0 {
        return Ok(scores.to_vec());
    }
    let rows: Vec<usize> = (0..x.num_rows()).collect();
    Ok(rows
        .par_chunks(QUERY_CHUNK)
        .flat_map_iter(|chunk| {
            let mut buf = Vec::with_capacity(x.num_rows());
            chunk
                .iter()
                .map(|&i| {
                    let nn = nearest(x, x.row(i), params.num_neighbors, Some(i), &mut buf);
                    let total: f64 = scores[i] + nn.iter().map(|&j| scores[j]).sum::<f64>();
                    (total / (nn.len() + 1) as f64).clamp(
                        nn.iter().map(|&j| scores[j]).fold(scores[i], f64::min),
                        nn.iter().map(|&j| scores[j]).fold(scores[i], f64::max),
                    )
                })
                .collect::<Vec<_>>()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn m(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn all_positive_training_scores_one() {
        let train = m(&[vec![0.0], vec![1.0], vec![2.0]]);
        let q = m(&[vec![-5.0], vec![0.5]]);
        let s = knn_scores(&train, &[true; 3], &q, &KnnParams { k: 2 }).unwrap();
        assert_eq!(s, vec![1.0, 1.0]);
    }

    #[test]
    fn coincident_negative_wins_for_k1() {
        let train = m(&[vec![0.0, 0.0], vec![3.0, 3.0]]);
        let q = m(&[vec![3.0, 3.0]]);
        let s = knn_scores(&train, &[true, false], &q, &KnnParams { k: 1 }).unwrap();
        assert_eq!(s, vec![0.0]);
    }

    #[test]
    fn hand_checked_three_point_query() {
        let train = m(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
        let q = m(&[vec![0.9, 0.1]]);
        let s = knn_scores(&train, &[false, false, true], &q, &KnnParams { k: 3 }).unwrap();
        assert!((s[0] - 1.0 / 3.0).abs() < 1e-15);
        // k = 1 picks (1, 0), the only positive
        let s = knn_scores(&train, &[false, false, true], &q, &KnnParams { k: 1 }).unwrap();
        assert_eq!(s, vec![1.0]);
    }

    #[test]
    fn distance_ties_prefer_lower_training_index() {
        let train = m(&[vec![-1.0], vec![1.0]]);
        let q = m(&[vec![0.0]]);
        assert_eq!(
            knn_scores(&train, &[true, false], &q, &KnnParams { k: 1 }).unwrap(),
            vec![1.0]
        );
        assert_eq!(
            knn_scores(&train, &[false, true], &q, &KnnParams { k: 1 }).unwrap(),
            vec![0.0]
        );
    }

    #[test]
    fn k_too_large() {
        let train = m(&[vec![0.0]]);
        assert!(knn_scores(&train, &[true], &train, &KnnParams { k: 2 }).is_err());
        assert!(knn_scores(&train, &[true], &train, &KnnParams { k: 0 }).is_err());
        assert!(knn_scores(&train, &[true], &m(&[vec![0.0, 1.0]]), &KnnParams { k: 1 }).is_err());
    }

    #[test]
    fn na_identity_and_constants() {
        let x = m(&[vec![0.0], vec![1.0], vec![5.0]]);
        let s = vec![0.2, 0.9, 0.4];
        assert_eq!(
            neighborhood_average(&s, &x, &NaParams { num_neighbors: 0 }).unwrap(),
            s
        );
        let c = vec![0.7; 3];
        for k in 1..4 {
            for v in neighborhood_average(&c, &x, &NaParams { num_neighbors: k }).unwrap() {
                assert!((v - 0.7).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn na_colinear_tie_rule() {
        let x = m(&[vec![0.0], vec![1.0], vec![2.0]]);
        let out =
            neighborhood_average(&[0.0, 1.0, 0.0], &x, &NaParams { num_neighbors: 1 }).unwrap();
        assert_eq!(out, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn na_is_not_idempotent_in_general() {
        let x = m(&[vec![0.0], vec![1.0], vec![3.0], vec![7.0]]);
        let p = NaParams { num_neighbors: 1 };
        let once = neighborhood_average(&[0.1, 0.9, 0.3, 0.6], &x, &p).unwrap();
        let twice = neighborhood_average(&once, &x, &p).unwrap();
        assert_ne!(once, twice);
    }

    proptest! {
        #[test]
        fn knn_scores_are_multiples_of_one_over_k(
            pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, any::<bool>()), 3..30),
            k in 1usize..4,
        ) {
            let train = m(&pts.iter().map(|p| vec![p.0, p.1]).collect::<Vec<_>>());
            let y: Vec<bool> = pts.iter().map(|p| p.2).collect();
            let s = knn_scores(&train, &y, &train, &KnnParams { k }).unwrap();
            for v in s {
                let scaled = v * k as f64;
                prop_assert!((scaled - scaled.round()).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn na_output_within_score_range(
            pts in proptest::collection::vec((-5.0f64..5.0, 0.0f64..1.0), 1..30),
            k in 0usize..8,
        ) {
            let x = m(&pts.iter().map(|p| vec![p.0]).collect::<Vec<_>>());
            let s: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let out = neighborhood_average(&s, &x, &NaParams { num_neighbors: k }).unwrap();
            prop_assert_eq!(out.clone(), neighborhood_average(&s, &x, &NaParams { num_neighbors: k }).unwrap());
            for v in out {
                prop_assert!(v >= lo && v <= hi);
            }
        }
    }
}
