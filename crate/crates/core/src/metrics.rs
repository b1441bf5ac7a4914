//! Ranking metrics for imbalanced binary detection. Anomalies are the
//! positive class and higher scores mean "more anomalous".
//!
//! Tie conventions: AUROC gives tied (positive, negative) pairs half credit,
//! average precision treats a run of equal scores as one threshold, and
//! Rec@K resolves ties at the cut-off by ascending index.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auroc: f64,
    pub auprc: f64,
    pub rec_at_k: f64,
    pub k: usize,
    pub num_pos: usize,
    pub num_neg: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_memory_bytes: Option<u64>,
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(GadError::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(GadError::InvalidValue(format!("score {i} is NaN")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    Ok((pos, labels.len() - pos))
}

/// Indices sorted by descending score, ascending index among ties.
fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Area under the ROC curve in Mann–Whitney form.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (num_pos, num_neg) = check_inputs(scores, labels)?;
    if num_pos == 0 || num_neg == 0 {
        return Err(GadError::DegenerateLabels(
            "AUROC needs at least one positive and one negative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Walk tie groups in ascending score order; every positive beats the
    // negatives already passed and ties with negatives in its own group.
    let mut wins = 0.0f64;
    let mut neg_below = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < order.len() && scores[order[j]].total_cmp(&scores[order[i]]) == Ordering::Equal {
            if labels[order[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        wins += (pos * neg_below) as f64 + 0.5 * (pos * neg) as f64;
        neg_below += neg;
        i = j;
    }
    Ok(wins / (num_pos as f64 * num_neg as f64))
}

/// Average precision: `Σ (R_n − R_{n−1}) P_n` over distinct score thresholds
/// taken in descending order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (num_pos, _) = check_inputs(scores, labels)?;
    if num_pos == 0 {
        return Err(GadError::DegenerateLabels(
            "average precision needs at least one positive".into(),
        ));
    }
    let order = rank_descending(scores);
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]].total_cmp(&scores[order[i]]) == Ordering::Equal {
            tp += labels[order[j]] as usize;
            j += 1;
        }
        seen += j - i;
        let recall = tp as f64 / num_pos as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(ap)
}

fn top_k_hits(scores: &[f64], labels: &[bool], k: usize) -> Result<usize> {
    if k == 0 || k > scores.len() {
        return Err(GadError::InvalidParameter(format!(
            "k must lie in [1, {}], got {k}",
            scores.len()
        )));
    }
    let order = rank_descending(scores);
    Ok(order[..k].iter().filter(|&&i| labels[i]).count())
}

/// Fraction of all positives found among the `k` highest scores.
pub fn recall_at_k(scores: &[f64], labels: &[bool], k: usize) -> Result<f64> {
    let (num_pos, _) = check_inputs(scores, labels)?;
    if num_pos == 0 {
        return Err(GadError::DegenerateLabels(
            "Rec@K needs at least one positive".into(),
        ));
    }
    Ok(top_k_hits(scores, labels, k)? as f64 / num_pos as f64)
}

/// Fraction of the `k` highest scores that are positive.
pub fn precision_at_k(scores: &[f64], labels: &[bool], k: usize) -> Result<f64> {
    check_inputs(scores, labels)?;
    Ok(top_k_hits(scores, labels, k)? as f64 / k as f64)
}

/// AUROC, AUPRC and Rec@K with `k` = number of positives.
pub fn evaluate(scores: &[f64], labels: &[bool]) -> Result<MetricReport> {
    let (num_pos, _) = check_inputs(scores, labels)?;
    evaluate_with_k(scores, labels, num_pos)
}

pub fn evaluate_with_k(scores: &[f64], labels: &[bool], k: usize) -> Result<MetricReport> {
    let (num_pos, num_neg) = check_inputs(scores, labels)?;
    Ok(MetricReport {
        auroc: auroc(scores, labels)?,
        auprc: average_precision(scores, labels)?,
        rec_at_k: recall_at_k(scores, labels, k)?,
        k,
        num_pos,
        num_neg,
        fit_seconds: None,
        peak_memory_bytes: None,
    })
}

/// Best-effort process memory probe. Returns 0 where unsupported.
pub mod memory {
    /// Peak resident set size of this process, in bytes.
    pub fn peak_rss_bytes() -> u64 {
        #[cfg(target_os = "linux")]
        {
            if let Ok(status) = std::fs::read_to_string("/proc/self/status") {
                for line in status.lines() {
                    if let Some(rest) = line.strip_prefix("VmHWM:") {
                        let kb = rest.trim().trim_end_matches("kB").trim();
                        return kb.parse::<u64>().map_or(0, |v| v * 1024);
                    }
                }
            }
        }
        0
    }

    /// Resets the peak counter so the next reading covers only what follows.
    /// Silently does nothing where the platform does not allow it.
    pub fn reset_peak() {
        #[cfg(target_os = "linux")]
        {
            let _ = std::fs::write("/proc/self/clear_refs", "5");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1000 points, 10 positives ranked 11th..20th.
    fn ranks_11_to_20() -> (Vec<f64>, Vec<bool>) {
        let scores: Vec<f64> = (0..1000).map(|i| 1000.0 - i as f64).collect();
        let labels: Vec<bool> = (0..1000).map(|i| (10..20).contains(&i)).collect();
        (scores, labels)
    }

    #[test]
    fn perfect_and_reversed() {
        let scores = [0.9, 0.8, 0.1, 0.2];
        let labels = [true, true, false, false];
        assert_eq!(auroc(&scores, &labels).unwrap(), 1.0);
        assert_eq!(average_precision(&scores, &labels).unwrap(), 1.0);
        assert_eq!(recall_at_k(&scores, &labels, 2).unwrap(), 1.0);
        let rev: Vec<f64> = scores.iter().map(|s| -s).collect();
        let r = evaluate(&rev, &labels).unwrap();
        assert_eq!(r.auroc, 0.0);
        assert_eq!(r.rec_at_k, 0.0);
    }

    #[test]
    fn all_tied() {
        let scores = vec![0.3; 1000];
        let labels: Vec<bool> = (0..1000).map(|i| i % 100 == 0).collect();
        assert_eq!(auroc(&scores, &labels).unwrap(), 0.5);
        assert!((average_precision(&scores, &labels).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn shifted_ranking_triple() {
        let (scores, labels) = ranks_11_to_20();
        // 10 positives each beat 980 of 990 negatives.
        assert!((auroc(&scores, &labels).unwrap() - 980.0 / 990.0).abs() < 1e-15);
        let expected_ap: f64 = (1..=10).map(|i| i as f64 / (10 + i) as f64).sum::<f64>() / 10.0;
        assert!((average_precision(&scores, &labels).unwrap() - expected_ap).abs() < 1e-15);
        assert_eq!(recall_at_k(&scores, &labels, 10).unwrap(), 0.0);
        let r = evaluate(&scores, &labels).unwrap();
        assert_eq!(r.k, 10);
        assert!((r.auroc - 0.989899).abs() < 1e-6);
        assert!((r.auprc - 0.331229).abs() < 1e-6);
    }

    #[test]
    fn half_of_top_ten() {
        let scores: Vec<f64> = (0..40).map(|i| -(i as f64)).collect();
        // positives at ranks 0,2,4,6,8 and 30..35
        let labels: Vec<bool> = (0..40)
            .map(|i| (i < 10 && i % 2 == 0) || (30..35).contains(&i))
            .collect();
        assert_eq!(recall_at_k(&scores, &labels, 10).unwrap(), 0.5);
    }

    #[test]
    fn rec_at_k_boundary_ties_use_index() {
        let scores = [1.0, 1.0, 1.0];
        assert_eq!(recall_at_k(&scores, &[false, true, false], 1).unwrap(), 0.0);
        assert_eq!(recall_at_k(&scores, &[true, false, false], 1).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        assert!(auroc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(average_precision(&[0.1, 0.2], &[false, false]).is_err());
        assert!(recall_at_k(&[0.1, 0.2], &[true, false], 0).is_err());
        assert!(recall_at_k(&[0.1, 0.2], &[true, false], 3).is_err());
        assert!(auroc(&[0.1], &[true, false]).is_err());
        assert!(auroc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn memory_probe_never_fails() {
        memory::reset_peak();
        let _ = memory::peak_rss_bytes();
    }
}
