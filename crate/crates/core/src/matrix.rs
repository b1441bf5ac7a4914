//! Dense row-major real matrices.

use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};

/// `num_rows x dim` row-major matrix of finite values. Row `i` holds node
/// `i`'s feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    num_rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(num_rows: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_rows * dim {
            return Err(GadError::Dimension(format!(
                "expected {} values for a {num_rows}x{dim} matrix, got {}",
                num_rows * dim,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(GadError::InvalidValue(format!(
                "non-finite value {} at row {}, column {}",
                values[pos],
                pos / dim.max(1),
                pos % dim.max(1)
            )));
        }
        Ok(Self {
            num_rows,
            dim,
            values,
        })
    }

    pub fn zeros(num_rows: usize, dim: usize) -> Self {
        Self {
            num_rows,
            dim,
            values: vec![0.0; num_rows * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(GadError::Dimension(format!(
                "row {bad} has {} values, expected {dim}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    /// Wraps values already known to be finite.
    pub(crate) fn from_raw(num_rows: usize, dim: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), num_rows * dim);
        Self {
            num_rows,
            dim,
            values,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.num_rows).map(|i| self.get(i, j)).collect()
    }

    /// New matrix holding the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix::from_raw(rows.len(), self.dim, values)
    }

    /// Multiplies every value by `factor`; used for scale-invariance checks.
    pub fn scaled(&self, factor: f64) -> Result<FeatureMatrix> {
        FeatureMatrix::new(
            self.num_rows,
            self.dim,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        let err = FeatureMatrix::new(1, 2, vec![1.0, f64::NAN]).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
        assert!(FeatureMatrix::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(matches!(
            FeatureMatrix::new(2, 2, vec![0.0; 3]),
            Err(GadError::Dimension(_))
        ));
        assert!(FeatureMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn row_access() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.column(0), vec![1.0, 3.0]);
        assert_eq!(m.select_rows(&[1, 1]).values(), &[3.0, 4.0, 3.0, 4.0]);
    }
}
