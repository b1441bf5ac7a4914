//! Bagged random forests of classification trees.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::BinnedMatrix;
use super::cart::fit_tree_with;
use super::model::{EnsembleModel, ModelParams};
use super::{Criterion, SplitMode, TreeParams, TreeTargets};
use crate::error::{GadError, Result};
use crate::matrix::FeatureMatrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub criterion: Criterion,
    /// Bootstrap size as a fraction of the training rows.
    pub max_samples: f64,
    /// Columns tried per node; `None` means `ceil(sqrt(dim))`.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    /// When false every tree sees each training row exactly once.
    pub bootstrap: bool,
    pub pos_weight: f64,
    pub split_mode: SplitMode,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            criterion: Criterion::Gini,
            max_samples: 1.0,
            max_features: None,
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: true,
            pos_weight: 1.0,
            split_mode: SplitMode::Exact,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GadError::InvalidParameter(m));
        if self.n_estimators == 0 {
            return bad("n_estimators must be at least 1".into());
        }
        if !(self.max_samples > 0.0 && self.max_samples <= 1.0) {
            return bad(format!(
                "max_samples must lie in (0, 1], got {}",
                self.max_samples
            ));
        }
        if self.max_features == Some(0) {
            return bad("max_features must be at least 1".into());
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1".into());
        }
        if !(self.pos_weight.is_finite() && self.pos_weight > 0.0) {
            return bad(format!(
                "pos_weight must be positive, got {}",
                self.pos_weight
            ));
        }
        Ok(())
    }

    pub fn resolved_max_features(&self, dim: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
            .clamp(1, dim.max(1))
    }
}

pub(crate) fn check_labels(x: &FeatureMatrix, y: &[bool]) -> Result<()> {
    if y.len() != x.num_rows() {
        return Err(GadError::Dimension(format!(
            "{} labels for {} rows",
            y.len(),
            x.num_rows()
        )));
    }
    let pos = y.iter().filter(|&&v| v).count();
    if pos == 0 || pos == y.len() {
        return Err(GadError::DegenerateLabels(
            "training labels contain a single class".into(),
        ));
    }
    Ok(())
}

/// Fits `n_estimators` trees, each on its own bootstrap sample drawn from the
/// stream `(seed, tree_index)`. Trees train in parallel; the result does not
/// depend on the number of workers.
pub fn fit_random_forest(
    x: &FeatureMatrix,
    y: &[bool],
    params: &ForestParams,
    seed: u64,
) -> Result<EnsembleModel> {
    params.validate()?;
    check_labels(x, y)?;
    let n = x.num_rows();
    let binned = (params.split_mode == SplitMode::Histogram).then(|| BinnedMatrix::new(x));
    let weights: Option<Vec<f64>> = (params.pos_weight != 1.0).then(|| {
        y.iter()
            .map(|&p| if p { params.pos_weight } else { 1.0 })
            .collect()
    });
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: Some(params.resolved_max_features(x.dim())),
        criterion: params.criterion,
        ..TreeParams::default()
    };
    let draws = ((params.max_samples * n as f64).ceil() as usize).clamp(1, n);

    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..draws).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_with(
                x,
                binned.as_ref(),
                &rows,
                TreeTargets::Classification {
                    labels: y,
                    weights: weights.as_deref(),
                },
                &tree_params,
                &mut rng,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EnsembleModel::new_forest(
        x.dim(),
        trees,
        ModelParams::Forest(params.clone()),
    ))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::trees::fit_tree;

    fn toy() -> (FeatureMatrix, Vec<bool>) {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![i as f64, ((i * 7) % 11) as f64])
            .collect();
        let y: Vec<bool> = (0..40).map(|i| i % 3 == 0 || i > 30).collect();
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn single_unbagged_tree_matches_fit_tree() {
        let (x, y) = toy();
        let params = ForestParams {
            n_estimators: 1,
            bootstrap: false,
            max_features: Some(2),
            ..ForestParams::default()
        };
        let forest = fit_random_forest(&x, &y, &params, 5).unwrap();
        let rows: Vec<usize> = (0..x.num_rows()).collect();
        let tree = fit_tree(
            &x,
            &rows,
            TreeTargets::Classification {
                labels: &y,
                weights: None,
            },
            &TreeParams {
                max_features: Some(2),
                ..TreeParams::default()
            },
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let scores = forest.predict(&x).unwrap();
        for i in 0..x.num_rows() {
            assert_eq!(scores[i], tree.predict_row(x.row(i)));
        }
    }

    #[test]
    fn predictions_in_unit_interval() {
        let (x, y) = toy();
        let model = fit_random_forest(
            &x,
            &y,
            &ForestParams {
                n_estimators: 15,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let probe =
            FeatureMatrix::from_rows(&[vec![-100.0, 3.0], vec![1e6, -1e6], vec![12.5, 4.0]])
                .unwrap();
        for s in model.predict(&probe).unwrap() {
            assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let (x, _) = toy();
        let y = vec![false; x.num_rows()];
        assert!(matches!(
            fit_random_forest(&x, &y, &ForestParams::default(), 0),
            Err(GadError::DegenerateLabels(_))
        ));
    }

    #[test]
    fn invalid_params() {
        let (x, y) = toy();
        for p in [
            ForestParams {
                n_estimators: 0,
                ..Default::default()
            },
            ForestParams {
                max_samples: 0.0,
                ..Default::default()
            },
            ForestParams {
                max_samples: 1.5,
                ..Default::default()
            },
            ForestParams {
                min_samples_leaf: 0,
                ..Default::default()
            },
        ] {
            assert!(fit_random_forest(&x, &y, &p, 0).is_err());
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (x, y) = toy();
        let p = ForestParams {
            n_estimators: 8,
            ..Default::default()
        };
        let a = fit_random_forest(&x, &y, &p, 3)
            .unwrap()
            .predict(&x)
            .unwrap();
        let b = fit_random_forest(&x, &y, &p, 3)
            .unwrap()
            .predict(&x)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn histogram_mode_trains() {
        let (x, y) = toy();
        let p = ForestParams {
            n_estimators: 5,
            split_mode: SplitMode::Histogram,
            ..Default::default()
        };
        let s = fit_random_forest(&x, &y, &p, 3)
            .unwrap()
            .predict(&x)
            .unwrap();
        assert_eq!(s.len(), x.num_rows());
    }

    #[test]
    fn default_max_features_is_sqrt_ceiling() {
        let p = ForestParams::default();
        assert_eq!(p.resolved_max_features(24), 5);
        assert_eq!(p.resolved_max_features(16), 4);
        assert_eq!(p.resolved_max_features(1), 1);
    }
}
