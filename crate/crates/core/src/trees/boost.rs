//! Second-order gradient boosting with logistic loss.
//!
//! Each round computes `g = p - y` and `h = p(1 - p)` at the current logits,
//! fits a gradient-mode tree on a row subsample and adds `η · tree(x)` to
//! every logit. Scores are `sigmoid(base_logit + Σ η · leaf)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::BinnedMatrix;
use super::cart::fit_tree_with;
use super::forest::check_labels;
use super::model::{EnsembleModel, ModelParams};
use super::{SplitMode, TreeParams, TreeTargets};
use crate::error::{GadError, Result};
use crate::matrix::FeatureMatrix;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub subsample: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub base_logit: f64,
    pub pos_weight: f64,
    pub split_mode: SplitMode,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            learning_rate: 0.3,
            lambda: 1.0,
            subsample: 1.0,
            max_depth: 6,
            min_child_weight: 1.0,
            base_logit: 0.0,
            pos_weight: 1.0,
            split_mode: SplitMode::Exact,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GadError::InvalidParameter(m));
        if self.n_estimators == 0 {
            return bad("n_estimators must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            ));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad(format!(
                "subsample must lie in (0, 1], got {}",
                self.subsample
            ));
        }
        if !(self.min_child_weight.is_finite() && self.min_child_weight >= 0.0) {
            return bad(format!(
                "min_child_weight must be non-negative, got {}",
                self.min_child_weight
            ));
        }
        if !self.base_logit.is_finite() {
            return bad("base_logit must be finite".into());
        }
        if !(self.pos_weight.is_finite() && self.pos_weight > 0.0) {
            return bad(format!(
                "pos_weight must be positive, got {}",
                self.pos_weight
            ));
        }
        Ok(())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z) - y z`, evaluated without overflow.
pub fn logistic_loss(z: f64, y: bool) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - if y { z } else { 0.0 }
}

/// First and second derivative of [`logistic_loss`] in `z`.
pub fn logistic_grad_hess(z: f64, y: bool) -> (f64, f64) {
    let p = sigmoid(z);
    (p - if y { 1.0 } else { 0.0 }, p * (1.0 - p))
}

/// Fits a boosted ensemble. Row subsampling draws from a stream keyed by `seed`.
pub fn fit_gbt(
    x: &FeatureMatrix,
    y: &[bool],
    params: &BoostParams,
    seed: u64,
) -> Result<EnsembleModel> {
    params.validate()?;
    check_labels(x, y)?;
    let n = x.num_rows();
    let binned = (params.split_mode == SplitMode::Histogram).then(|| BinnedMatrix::new(x));
    let tree_params = TreeParams {
        max_depth: Some(params.max_depth),
        min_samples_leaf: 1,
        max_features: None,
        lambda: params.lambda,
        min_child_weight: params.min_child_weight,
        ..TreeParams::default()
    };
    let weight = |i: usize| if y[i] { params.pos_weight } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let take = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let all_rows: Vec<usize> = (0..n).collect();

    let mut logits = vec![params.base_logit; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_estimators);
    for round in 0..params.n_estimators {
        grad.par_iter_mut()
            .zip(hess.par_iter_mut())
            .enumerate()
            .for_each(|(i, (g, h))| {
                let (gi, hi) = logistic_grad_hess(logits[i], y[i]);
                let w = weight(i);
                *g = w * gi;
                *h = w * hi;
            });

        let rows = if take < n {
            let mut rows = rand::seq::index::sample(&mut rng, n, take).into_vec();
            rows.sort_unstable();
            rows
        } else {
            all_rows.clone()
        };
        let tree = fit_tree_with(
            x,
            binned.as_ref(),
            &rows,
            TreeTargets::Gradient {
                grad: &grad,
                hess: &hess,
            },
            &tree_params,
            &mut rng,
        )?;

        let eta = params.learning_rate;
        logits.par_iter_mut().enumerate().for_each(|(i, z)| {
            *z += eta * tree.predict_row(x.row(i));
        });
        if let Some(i) = logits.iter().position(|z| !z.is_finite()) {
            return Err(GadError::Diverged(format!(
                "logit of row {i} became {} in round {round}",
                logits[i]
            )));
        }
        trees.push(tree);
    }

    Ok(EnsembleModel::new_boosted(
        x.dim(),
        trees,
        params.learning_rate,
        params.base_logit,
        ModelParams::Boosted(params.clone()),
    ))
}

/// Total training loss before any tree and after each boosting round.
pub fn staged_losses(model: &EnsembleModel, x: &FeatureMatrix, y: &[bool]) -> Result<Vec<f64>> {
    check_labels(x, y)?;
    let mut logits = vec![model.base_logit(); x.num_rows()];
    let total = |logits: &[f64]| -> f64 {
        logits
            .iter()
            .zip(y)
            .map(|(&z, &t)| logistic_loss(z, t))
            .sum()
    };
    let mut out = vec![total(&logits)];
    for tree in model.trees() {
        for (i, z) in logits.iter_mut().enumerate() {
            *z += model.learning_rate() * tree.predict_row(x.row(i));
        }
        out.push(total(&logits));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (FeatureMatrix, Vec<bool>) {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i % 13) as f64, (i / 5) as f64])
            .collect();
        let y: Vec<bool> = (0..60).map(|i| (i % 13) > 8 || i % 7 == 0).collect();
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn zero_learning_rate_keeps_prior() {
        let (x, y) = toy();
        let p = BoostParams {
            learning_rate: 0.0,
            n_estimators: 5,
            ..Default::default()
        };
        let m = fit_gbt(&x, &y, &p, 0).unwrap();
        assert!(m.predict(&x).unwrap().iter().all(|&s| s == 0.5));
    }

    #[test]
    fn first_round_gradients() {
        assert_eq!(logistic_grad_hess(0.0, true), (-0.5, 0.25));
        assert_eq!(logistic_grad_hess(0.0, false), (0.5, 0.25));
    }

    #[test]
    fn loss_is_stable_for_large_logits() {
        assert!((logistic_loss(800.0, true)).abs() < 1e-12);
        assert!((logistic_loss(-800.0, true) - 800.0).abs() < 1e-9);
        assert!((logistic_loss(0.0, false) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }

    #[test]
    fn depth_zero_converges_to_class_prior() {
        let (x, y) = toy();
        let prior = y.iter().filter(|&&v| v).count() as f64 / y.len() as f64;
        let p = BoostParams {
            max_depth: 0,
            n_estimators: 400,
            ..Default::default()
        };
        let scores = fit_gbt(&x, &y, &p, 0).unwrap().predict(&x).unwrap();
        assert!(scores.iter().all(|&s| s == scores[0]));
        assert!((scores[0] - prior).abs() < 1e-9, "{} vs {prior}", scores[0]);
    }

    #[test]
    fn training_loss_never_increases() {
        let (x, y) = toy();
        let m = fit_gbt(&x, &y, &BoostParams::default(), 0).unwrap();
        let losses = staged_losses(&m, &x, &y).unwrap();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn subsampling_is_seeded() {
        let (x, y) = toy();
        let p = BoostParams {
            subsample: 0.5,
            n_estimators: 10,
            ..Default::default()
        };
        let a = fit_gbt(&x, &y, &p, 1).unwrap().predict(&x).unwrap();
        let b = fit_gbt(&x, &y, &p, 1).unwrap().predict(&x).unwrap();
        let c = fit_gbt(&x, &y, &p, 2).unwrap().predict(&x).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_params_rejected() {
        let (x, y) = toy();
        for p in [
            BoostParams {
                n_estimators: 0,
                ..Default::default()
            },
            BoostParams {
                subsample: 0.0,
                ..Default::default()
            },
            BoostParams {
                lambda: -1.0,
                ..Default::default()
            },
            BoostParams {
                learning_rate: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(fit_gbt(&x, &y, &p, 0).is_err());
        }
        assert!(fit_gbt(&x, &[true; 60], &BoostParams::default(), 0).is_err());
    }

    #[test]
    fn huge_learning_rate_reports_divergence() {
        let (x, y) = toy();
        let p = BoostParams {
            learning_rate: 1e308,
            lambda: 0.0,
            n_estimators: 3,
            ..Default::default()
        };
        assert!(matches!(fit_gbt(&x, &y, &p, 0), Err(GadError::Diverged(_))));
    }
}
