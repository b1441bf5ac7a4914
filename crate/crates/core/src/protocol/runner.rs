//! Repeated train/evaluate trials and their reports.

use std::borrow::Cow;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::space::{Config, Family};
use super::split::{Setting, SplitSpec};
use crate::aggregation::{self, AggKind};
use crate::baselines::{knn_scores, neighborhood_average};
use crate::dataset::Dataset;
use crate::error::{GadError, Result};
use crate::graph::Graph;
use crate::matrix::FeatureMatrix;
use crate::metrics::{self, MetricReport};
use crate::rng::derive_seed;
use crate::trees::{fit_gbt, fit_random_forest};
use crate::ARTIFACT_VERSION;

/// Knobs shared by `run_trials` and `random_search` beyond the protocol's
/// own arguments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Aggregate along edge direction instead of over the symmetrized graph.
    pub keep_directed: bool,
    /// Record fit time and peak memory. Off by default so reports are
    /// byte-identical across runs.
    pub record_timings: bool,
}

/// Split seed of repeat `r`.
pub fn repeat_seed(master_seed: u64, r: usize) -> u64 {
    derive_seed(master_seed, r as u64)
}

/// Model seed for a repeat, derived from its split seed.
pub fn model_seed(repeat_seed: u64) -> u64 {
    derive_seed(repeat_seed, 1)
}

/// Validation metrics are absent when the validation set is empty or
/// single-class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub val: Option<MetricReport>,
    pub test: MetricReport,
}

/// Holds the (possibly symmetrized) graph and the last stacked feature
/// matrix, so repeated evaluations of one `(L, kind)` aggregate once.
pub struct Evaluator<'a> {
    dataset: &'a Dataset,
    graph: Cow<'a, Graph>,
    cache: Option<((usize, AggKind), FeatureMatrix)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(dataset: &'a Dataset, options: RunOptions) -> Self {
        let graph = if dataset.graph.is_directed() && !options.keep_directed {
            Cow::Owned(dataset.graph.symmetrized())
        } else {
            Cow::Borrowed(&dataset.graph)
        };
        Self {
            dataset,
            graph,
            cache: None,
        }
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    /// Model input for `family`: raw features, or stacked aggregations.
    pub fn features(&mut self, family: &Family, config: &Config) -> Result<&FeatureMatrix> {
        if !family.base.uses_graph() {
            return Ok(&self.dataset.features);
        }
        let key = config.aggregation()?;
        if self.cache.as_ref().map(|(k, _)| *k) != Some(key) {
            self.cache = None;
            let stacked = aggregation::stack(&self.graph, &self.dataset.features, key.0, key.1)?;
            self.cache = Some((key, stacked.into_matrix()));
        }
        Ok(&self.cache.as_ref().expect("cache filled above").1)
    }

    /// Trains on `split.train` and scores the validation and test sets.
    /// `config` must already be resolved against the family defaults.
    pub fn evaluate(
        &mut self,
        family: &Family,
        config: &Config,
        split: &SplitSpec,
        seed: u64,
        record_timings: bool,
    ) -> Result<SplitMetrics> {
        let labels = &self.dataset.labels;
        let y_train = labels.targets(&split.train)?;
        let y_val = labels.targets(&split.val)?;
        let y_test = labels.targets(&split.test)?;
        if y_test.is_empty() {
            return Err(GadError::InsufficientLabels("test set is empty".into()));
        }
        let raw = &self.dataset.features;
        let na = if family.neighborhood_average {
            Some(config.na_params()?)
        } else {
            None
        };
        let knn = if family.base == super::BaseFamily::Knn {
            Some(config.knn_params()?)
        } else {
            None
        };
        let forest = if family.base.is_forest() {
            Some(config.forest_params()?)
        } else {
            None
        };
        let boost = if family.base.is_boosted() {
            Some(config.boost_params()?)
        } else {
            None
        };

        if record_timings {
            metrics::memory::reset_peak();
        }
        let start = Instant::now();
        let feats = self.features(family, config)?;
        let train_x = feats.select_rows(&split.train);
        let model = if let Some(p) = &forest {
            Some(fit_random_forest(&train_x, &y_train, p, seed)?)
        } else if let Some(p) = &boost {
            Some(fit_gbt(&train_x, &y_train, p, seed)?)
        } else {
            None
        };
        let fit_seconds = start.elapsed().as_secs_f64();

        let score = |rows: &[usize]| -> Result<Vec<f64>> {
            let qx = feats.select_rows(rows);
            let base = match (&model, &knn) {
                (Some(m), _) => m.predict(&qx)?,
                (None, Some(p)) => knn_scores(&train_x, &y_train, &qx, p)?,
                (None, None) => unreachable!("every family has a scorer"),
            };
            match &na {
                Some(p) => neighborhood_average(&base, &raw.select_rows(rows), p),
                None => Ok(base),
            }
        };

        let val = if y_val.iter().any(|&b| b) && y_val.iter().any(|&b| !b) {
            Some(metrics::evaluate(&score(&split.val)?, &y_val)?)
        } else {
            None
        };
        let mut test = metrics::evaluate(&score(&split.test)?, &y_test)?;
        if record_timings {
            test.fit_seconds = Some(fit_seconds);
            test.peak_memory_bytes = Some(metrics::memory::peak_rss_bytes());
        }
        Ok(SplitMetrics { val, test })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Summary {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub auroc: Summary,
    pub auprc: Summary,
    pub rec_at_k: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_auprc: Option<Summary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_seconds: Option<Summary>,
}

impl Aggregate {
    pub fn from_repeats(repeats: &[RepeatResult]) -> Aggregate {
        let pick = |f: fn(&MetricReport) -> f64| -> Summary {
            Summary::of(&repeats.iter().map(|r| f(&r.test)).collect::<Vec<_>>())
        };
        let val: Option<Vec<f64>> = repeats
            .iter()
            .map(|r| r.val.as_ref().map(|v| v.auprc))
            .collect();
        let fit: Option<Vec<f64>> = repeats.iter().map(|r| r.test.fit_seconds).collect();
        Aggregate {
            auroc: pick(|m| m.auroc),
            auprc: pick(|m| m.auprc),
            rec_at_k: pick(|m| m.rec_at_k),
            val_auprc: val.map(|v| Summary::of(&v)),
            fit_seconds: fit.map(|v| Summary::of(&v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub index: usize,
    pub seed: u64,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val: Option<MetricReport>,
    pub test: MetricReport,
}

pub const BENCH_REPORT_SCHEMA: &str = "gad-bench-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: String,
    pub version: String,
    pub dataset: String,
    pub family: Family,
    pub setting: Setting,
    pub master_seed: u64,
    pub n_repeats: usize,
    /// Fully resolved configuration.
    pub config: Config,
    pub repeats: Vec<RepeatResult>,
    pub aggregate: Aggregate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_seconds: Option<f64>,
}

/// `n_repeats` independent splits, each trained and evaluated once.
pub fn run_trials(
    family: &Family,
    config: &Config,
    dataset: &Dataset,
    setting: &Setting,
    n_repeats: usize,
    master_seed: u64,
    options: RunOptions,
) -> Result<BenchReport> {
    if n_repeats == 0 {
        return Err(GadError::InvalidParameter(
            "n_repeats must be at least 1".into(),
        ));
    }
    let start = Instant::now();
    let config = family.resolve(config)?;
    let mut evaluator = Evaluator::new(dataset, options);
    let mut repeats = Vec::with_capacity(n_repeats);
    for r in 0..n_repeats {
        let wrap = |source: GadError| GadError::Repeat {
            index: r,
            source: Box::new(source),
        };
        let seed = repeat_seed(master_seed, r);
        let split = setting.split(dataset, seed).map_err(wrap)?;
        let m = evaluator
            .evaluate(
                family,
                &config,
                &split,
                model_seed(seed),
                options.record_timings,
            )
            .map_err(wrap)?;
        let (train_size, val_size, test_size) = split.sizes();
        repeats.push(RepeatResult {
            index: r,
            seed,
            train_size,
            val_size,
            test_size,
            val: m.val,
            test: m.test,
        });
    }
    Ok(BenchReport {
        schema: BENCH_REPORT_SCHEMA.to_string(),
        version: ARTIFACT_VERSION.to_string(),
        dataset: dataset.name.clone(),
        family: *family,
        setting: setting.clone(),
        master_seed,
        n_repeats,
        config,
        aggregate: Aggregate::from_repeats(&repeats),
        repeats,
        total_seconds: options
            .record_timings
            .then(|| start.elapsed().as_secs_f64()),
    })
}
