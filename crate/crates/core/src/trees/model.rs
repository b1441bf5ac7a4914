use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boost::sigmoid;
use super::{BoostParams, ForestParams, Tree, TreeNode};
use crate::error::{GadError, Result};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Forest,
    Boosted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "lowercase")]
pub enum ModelParams {
    Forest(ForestParams),
    Boosted(BoostParams),
}

/// A trained forest or boosted ensemble. Scores always lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    kind: ModelKind,
    num_features: usize,
    trees: Vec<Tree>,
    learning_rate: f64,
    base_logit: f64,
    params: ModelParams,
}

impl EnsembleModel {
    pub(crate) fn new_forest(num_features: usize, trees: Vec<Tree>, params: ModelParams) -> Self {
        Self {
            kind: ModelKind::Forest,
            num_features,
            trees,
            learning_rate: 1.0,
            base_logit: 0.0,
            params,
        }
    }

    pub(crate) fn new_boosted(
        num_features: usize,
        trees: Vec<Tree>,
        learning_rate: f64,
        base_logit: f64,
        params: ModelParams,
    ) -> Self {
        Self {
            kind: ModelKind::Boosted,
            num_features,
            trees,
            learning_rate,
            base_logit,
            params,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn base_logit(&self) -> f64 {
        self.base_logit
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Score of a single row; the caller guarantees the width.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        match self.kind {
            ModelKind::Forest => {
                if self.trees.is_empty() {
                    return 0.5;
                }
                let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
                (sum / self.trees.len() as f64).clamp(0.0, 1.0)
            }
            ModelKind::Boosted => {
                let mut z = self.base_logit;
                for t in &self.trees {
                    z += self.learning_rate * t.predict_row(row);
                }
                sigmoid(z)
            }
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.dim() != self.num_features {
            return Err(GadError::Dimension(format!(
                "model expects {} features, input has {}",
                self.num_features,
                x.dim()
            )));
        }
        Ok((0..x.num_rows())
            .into_par_iter()
            .map(|i| self.score_row(x.row(i)))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            format: FORMAT.to_string(),
            version: FORMAT_VERSION,
            kind: self.kind,
            num_features: self.num_features,
            learning_rate: self.learning_rate,
            base_logit: self.base_logit,
            params: self.params.clone(),
            trees: self.trees.iter().map(FlatTree::from_tree).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.format != FORMAT || doc.version != FORMAT_VERSION {
            return Err(GadError::InvalidValue(format!(
                "unsupported model document {} v{}",
                doc.format, doc.version
            )));
        }
        let trees = doc
            .trees
            .iter()
            .map(|t| t.to_tree(doc.num_features))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: doc.kind,
            num_features: doc.num_features,
            trees,
            learning_rate: doc.learning_rate,
            base_logit: doc.base_logit,
            params: doc.params,
        })
    }
}

/// Scores every row of `x` with `model`.
pub fn predict_scores(model: &EnsembleModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    model.predict(x)
}

const FORMAT: &str = "gad-ensemble";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    kind: ModelKind,
    num_features: usize,
    learning_rate: f64,
    base_logit: f64,
    params: ModelParams,
    trees: Vec<FlatTree>,
}

/// Struct-of-arrays tree; leaves have `feature = -1`.
#[derive(Serialize, Deserialize)]
struct FlatTree {
    feature: Vec<i64>,
    threshold: Vec<f64>,
    left: Vec<usize>,
    right: Vec<usize>,
    value: Vec<f64>,
}

impl FlatTree {
    fn from_tree(tree: &Tree) -> Self {
        let n = tree.nodes().len();
        let mut flat = FlatTree {
            feature: Vec::with_capacity(n),
            threshold: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            value: Vec::with_capacity(n),
        };
        for node in tree.nodes() {
            match *node {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    flat.feature.push(feature as i64);
                    flat.threshold.push(threshold);
                    flat.left.push(left);
                    flat.right.push(right);
                    flat.value.push(0.0);
                }
                TreeNode::Leaf { value } => {
                    flat.feature.push(-1);
                    flat.threshold.push(0.0);
                    flat.left.push(0);
                    flat.right.push(0);
                    flat.value.push(value);
                }
            }
        }
        flat
    }

    fn to_tree(&self, num_features: usize) -> Result<Tree> {
        let n = self.feature.len();
        if n == 0
            || [
                self.threshold.len(),
                self.left.len(),
                self.right.len(),
                self.value.len(),
            ]
            .iter()
            .any(|&l| l != n)
        {
            return Err(GadError::InvalidValue("malformed tree arrays".into()));
        }
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let node = if self.feature[i] < 0 {
                TreeNode::Leaf {
                    value: self.value[i],
                }
            } else {
                let feature = self.feature[i] as usize;
                let (left, right) = (self.left[i], self.right[i]);
                // Children must come after their parent, which rules out cycles.
                if feature >= num_features || left <= i || right <= i || left >= n || right >= n {
                    return Err(GadError::InvalidValue(format!("invalid split node {i}")));
                }
                TreeNode::Split {
                    feature,
                    threshold: self.threshold[i],
                    left,
                    right,
                }
            };
            nodes.push(node);
        }
        Ok(Tree::from_nodes(nodes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::{fit_gbt, fit_random_forest};

    fn toy() -> (FeatureMatrix, Vec<bool>) {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.37).cos()])
            .collect();
        let y: Vec<bool> = (0..30).map(|i| (i as f64).sin() > 0.3).collect();
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn single_leaf_model_scores_constant() {
        let m = EnsembleModel::new_forest(
            2,
            vec![Tree::leaf(0.3)],
            ModelParams::Forest(ForestParams::default()),
        );
        let (x, _) = toy();
        assert!(m.predict(&x).unwrap().iter().all(|&s| s == 0.3));
    }

    #[test]
    fn empty_boosted_model_scores_half() {
        let m = EnsembleModel::new_boosted(
            2,
            vec![],
            0.3,
            0.0,
            ModelParams::Boosted(BoostParams::default()),
        );
        let (x, _) = toy();
        assert!(m.predict(&x).unwrap().iter().all(|&s| s == 0.5));
    }

    #[test]
    fn dimension_mismatch() {
        let m = EnsembleModel::new_forest(
            3,
            vec![Tree::leaf(0.3)],
            ModelParams::Forest(ForestParams::default()),
        );
        let (x, _) = toy();
        assert!(matches!(
            predict_scores(&m, &x),
            Err(GadError::Dimension(_))
        ));
    }

    #[test]
    fn duplicated_rows_get_duplicated_scores() {
        let (x, y) = toy();
        let m = fit_gbt(
            &x,
            &y,
            &BoostParams {
                n_estimators: 10,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let dup = x.select_rows(&[4, 4, 9, 9]);
        let s = m.predict(&dup).unwrap();
        assert_eq!(s[0], s[1]);
        assert_eq!(s[2], s[3]);
    }

    #[test]
    fn json_round_trip_reproduces_scores() {
        let (x, y) = toy();
        let forest = fit_random_forest(
            &x,
            &y,
            &ForestParams {
                n_estimators: 7,
                ..Default::default()
            },
            2,
        )
        .unwrap();
        let boosted = fit_gbt(
            &x,
            &y,
            &BoostParams {
                n_estimators: 12,
                ..Default::default()
            },
            2,
        )
        .unwrap();
        for model in [forest, boosted] {
            let text = model.to_json().unwrap();
            let back = EnsembleModel::from_json(&text).unwrap();
            assert_eq!(back, model);
            assert_eq!(back.predict(&x).unwrap(), model.predict(&x).unwrap());
        }
    }

    #[test]
    fn rejects_cyclic_tree() {
        let bad = r#"{"format":"gad-ensemble","version":1,"kind":"forest","num_features":1,
            "learning_rate":1.0,"base_logit":0.0,
            "params":{"kind":"forest","values":{"n_estimators":1,"criterion":"gini","max_samples":1.0,
              "max_features":null,"min_samples_leaf":1,"max_depth":null,"bootstrap":true,"pos_weight":1.0,"split_mode":"exact"}},
            "trees":[{"feature":[0,-1],"threshold":[0.5,0.0],"left":[0,0],"right":[1,0],"value":[0.0,1.0]}]}"#;
        assert!(EnsembleModel::from_json(bad).is_err());
    }
}
