//! Quantile binning for the histogram split mode.

use crate::matrix::FeatureMatrix;

/// Threshold strictly between `a < b`, preferring the exact midpoint.
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = a / 2.0 + b / 2.0;
    if m >= a && m < b {
        m
    } else {
        a
    }
}

/// Column-major bin codes plus per-feature split edges. A value falls in bin
/// `b` iff exactly `b` edges lie strictly below it, so "bin <= b" and
/// "value <= edges[b]" select the same rows.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    num_rows: usize,
    codes: Vec<u8>,
    edges: Vec<Vec<f64>>,
}

impl BinnedMatrix {
    pub const MAX_BINS: usize = 256;

    pub fn new(x: &FeatureMatrix) -> Self {
        Self::with_max_bins(x, Self::MAX_BINS)
    }

    pub fn with_max_bins(x: &FeatureMatrix, max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, Self::MAX_BINS);
        let n = x.num_rows();
        let mut codes = vec![0u8; n * x.dim()];
        let mut edges = Vec::with_capacity(x.dim());
        for f in 0..x.dim() {
            let column = x.column(f);
            let mut sorted = column.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            let mut distinct = sorted.clone();
            distinct.dedup_by(|a, b| a == b);

            let cuts: Vec<f64> = if distinct.len() <= max_bins {
                distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect()
            } else {
                let mut cuts = Vec::with_capacity(max_bins - 1);
                for b in 1..max_bins {
                    let upper = sorted[b * n / max_bins];
                    let pos = distinct.partition_point(|&v| v < upper);
                    if pos == 0 {
                        continue;
                    }
                    let edge = midpoint(distinct[pos - 1], upper);
                    if cuts.last().is_none_or(|&last| edge > last) {
                        cuts.push(edge);
                    }
                }
                cuts
            };
            for (i, &v) in column.iter().enumerate() {
                codes[f * n + i] = cuts.partition_point(|&e| e < v) as u8;
            }
            edges.push(cuts);
        }
        Self {
            num_rows: n,
            codes,
            edges,
        }
    }

    #[inline]
    pub fn bin(&self, feature: usize, row: usize) -> u8 {
        self.codes[feature * self.num_rows + row]
    }

    pub fn edges(&self, feature: usize) -> &[f64] {
        &self.edges[feature]
    }
}
