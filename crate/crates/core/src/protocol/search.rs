//! Random hyperparameter search on one fixed split.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::runner::{model_seed, repeat_seed, Evaluator, RunOptions};
use super::space::{sample_config, Config, Family};
use super::split::Setting;
use crate::dataset::Dataset;
use crate::error::{GadError, Result};
use crate::metrics::MetricReport;
use crate::rng;
use crate::ARTIFACT_VERSION;

/// Stream index of the configuration sampler, away from the repeat indices.
const SEARCH_STREAM: u64 = 0x7475_6e65;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub index: usize,
    /// Fully resolved configuration.
    pub config: Config,
    pub val: MetricReport,
    pub test: MetricReport,
}

pub const TUNE_REPORT_SCHEMA: &str = "gad-tune-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub schema: String,
    pub version: String,
    pub dataset: String,
    pub family: Family,
    pub setting: Setting,
    pub master_seed: u64,
    pub n_trials: usize,
    /// Seed of the shared split; equals repeat 0 of `run_trials` with the
    /// same master seed.
    pub split_seed: u64,
    pub best_trial: usize,
    pub best_config: Config,
    pub best_val: MetricReport,
    pub best_test: MetricReport,
    pub trials: Vec<TrialResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_seconds: Option<f64>,
}

/// Index of the highest validation AUPRC, lowest index among ties.
pub fn select_best(trials: &[TrialResult]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, t) in trials.iter().enumerate() {
        if best.is_none_or(|b| t.val.auprc > trials[b].val.auprc) {
            best = Some(i);
        }
    }
    best
}

/// Trial 0 uses the family defaults; later trials draw from its search
/// space. All trials share the repeat-0 split and model seed, so
/// `run_trials(.., 1, master_seed, ..)` on the winner reproduces its test
/// metrics.
pub fn random_search(
    family: &Family,
    dataset: &Dataset,
    setting: &Setting,
    n_trials: usize,
    master_seed: u64,
    options: RunOptions,
) -> Result<TuneReport> {
    if n_trials == 0 {
        return Err(GadError::InvalidParameter(
            "n_trials must be at least 1".into(),
        ));
    }
    let start = Instant::now();
    let split_seed = repeat_seed(master_seed, 0);
    let split = setting.split(dataset, split_seed)?;
    let space = family.search_space();
    let defaults = family.defaults();
    let mut sampler = rng::stream(master_seed, SEARCH_STREAM);
    let mut evaluator = Evaluator::new(dataset, options);
    let mut trials = Vec::with_capacity(n_trials);
    for index in 0..n_trials {
        let config = if index == 0 {
            defaults.clone()
        } else {
            family.resolve(&sample_config(&space, &mut sampler))?
        };
        let m = evaluator.evaluate(
            family,
            &config,
            &split,
            model_seed(split_seed),
            options.record_timings,
        )?;
        let val = m.val.ok_or_else(|| {
            GadError::InsufficientLabels("validation set needs both classes for search".into())
        })?;
        trials.push(TrialResult {
            index,
            config,
            val,
            test: m.test,
        });
    }
    let best = select_best(&trials).expect("at least one trial");
    Ok(TuneReport {
        schema: TUNE_REPORT_SCHEMA.to_string(),
        version: ARTIFACT_VERSION.to_string(),
        dataset: dataset.name.clone(),
        family: *family,
        setting: setting.clone(),
        master_seed,
        n_trials,
        split_seed,
        best_trial: best,
        best_config: trials[best].config.clone(),
        best_val: trials[best].val.clone(),
        best_test: trials[best].test.clone(),
        trials,
        total_seconds: options
            .record_timings
            .then(|| start.elapsed().as_secs_f64()),
    })
}
