//! Train/validation/test partitions of the labeled nodes.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabelTable, NamedSplit};
use crate::error::{GadError, Result};
use crate::rng;

/// Resampling budget for a full split whose training set misses a class.
pub const MAX_SPLIT_ATTEMPTS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Setting {
    Full {
        train: f64,
        val: f64,
        test: f64,
    },
    Semi {
        n_pos: usize,
        n_neg: usize,
    },
    /// A split stored with the dataset.
    Named {
        name: String,
    },
}

impl Setting {
    pub fn full() -> Self {
        Setting::Full {
            train: 0.4,
            val: 0.2,
            test: 0.4,
        }
    }

    pub fn semi() -> Self {
        Setting::Semi {
            n_pos: 20,
            n_neg: 80,
        }
    }

    /// Draws (or looks up) the split for one repeat.
    pub fn split(&self, dataset: &Dataset, seed: u64) -> Result<SplitSpec> {
        match self {
            Setting::Full { train, val, test } => {
                full_split(&dataset.labels, (*train, *val, *test), seed)
            }
            Setting::Semi { n_pos, n_neg } => semi_split(&dataset.labels, *n_pos, *n_neg, seed),
            Setting::Named { name } => {
                let named = dataset.splits.get(name).ok_or_else(|| {
                    GadError::InvalidParameter(format!("dataset has no split named `{name}`"))
                })?;
                named_split(&dataset.labels, named, self.clone(), seed)
            }
        }
    }
}

/// Disjoint sorted node sets drawn for one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub setting: Setting,
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

fn has_both_classes(labels: &LabelTable, nodes: &[usize]) -> Result<bool> {
    let y = labels.targets(nodes)?;
    Ok(y.iter().any(|&b| b) && y.iter().any(|&b| !b))
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Uniform shuffle of the labeled nodes cut into `⌊ratio·n⌋`-sized train and
/// validation sets; test takes the remainder.
pub fn full_split(labels: &LabelTable, ratios: (f64, f64, f64), seed: u64) -> Result<SplitSpec> {
    let (r_train, r_val, r_test) = ratios;
    if [r_train, r_val, r_test]
        .iter()
        .any(|r| !(r.is_finite() && *r > 0.0))
        || ((r_train + r_val + r_test) - 1.0).abs() > 1e-9
    {
        return Err(GadError::InvalidParameter(format!(
            "split ratios must be positive and sum to 1, got ({r_train}, {r_val}, {r_test})"
        )));
    }
    let labeled = labels.labeled_nodes();
    let n = labeled.len();
    // The epsilon keeps e.g. 0.29·100 from flooring to 28.
    let n_train = ((r_train * n as f64) + 1e-9).floor() as usize;
    let n_val = ((r_val * n as f64) + 1e-9).floor() as usize;
    for attempt in 0..MAX_SPLIT_ATTEMPTS {
        let mut order = labeled.clone();
        order.shuffle(&mut rng::stream(seed, attempt));
        let train = &order[..n_train];
        if !has_both_classes(labels, train)? {
            continue;
        }
        return Ok(SplitSpec {
            setting: Setting::Full {
                train: r_train,
                val: r_val,
                test: r_test,
            },
            seed,
            train: sorted(train.to_vec()),
            val: sorted(order[n_train..n_train + n_val].to_vec()),
            test: sorted(order[n_train + n_val..].to_vec()),
        });
    }
    Err(GadError::InsufficientLabels(format!(
        "training set lacked a class after {MAX_SPLIT_ATTEMPTS} attempts"
    )))
}

/// `n_pos` positives and `n_neg` negatives for training, a disjoint draw of
/// the same composition for validation, everything else for test.
pub fn semi_split(labels: &LabelTable, n_pos: usize, n_neg: usize, seed: u64) -> Result<SplitSpec> {
    if n_pos == 0 || n_neg == 0 {
        return Err(GadError::InvalidParameter(
            "semi split needs at least one label of each class".into(),
        ));
    }
    let mut pos = labels.positives();
    let mut neg = labels.negatives();
    if pos.len() < 2 * n_pos {
        return Err(GadError::InsufficientLabels(format!(
            "insufficient positives for semi split: need {}, have {}",
            2 * n_pos,
            pos.len()
        )));
    }
    if neg.len() < 2 * n_neg {
        return Err(GadError::InsufficientLabels(format!(
            "insufficient negatives for semi split: need {}, have {}",
            2 * n_neg,
            neg.len()
        )));
    }
    pos.shuffle(&mut rng::stream(seed, 0));
    neg.shuffle(&mut rng::stream(seed, 1));
    let train = [&pos[..n_pos], &neg[..n_neg]].concat();
    let val = [&pos[n_pos..2 * n_pos], &neg[n_neg..2 * n_neg]].concat();
    let test = [&pos[2 * n_pos..], &neg[2 * n_neg..]].concat();
    Ok(SplitSpec {
        setting: Setting::Semi { n_pos, n_neg },
        seed,
        train: sorted(train),
        val: sorted(val),
        test: sorted(test),
    })
}

fn named_split(
    labels: &LabelTable,
    named: &NamedSplit,
    setting: Setting,
    seed: u64,
) -> Result<SplitSpec> {
    if !has_both_classes(labels, &named.train)? {
        return Err(GadError::DegenerateLabels(
            "stored training split lacks a class".into(),
        ));
    }
    Ok(SplitSpec {
        setting,
        seed,
        train: sorted(named.train.clone()),
        val: sorted(named.val.clone()),
        test: sorted(named.test.clone()),
    })
}
