//! Evaluation protocol: splits, repeated trials and random search.
//!
//! Every random choice descends from one master seed. Repeat `r` splits with
//! `derive_seed(master, r)` and trains with a seed derived from that, so a
//! report is a pure function of its inputs regardless of worker count.

mod runner;
mod search;
mod space;
mod split;

pub use runner::{
    model_seed, repeat_seed, run_trials, Aggregate, BenchReport, Evaluator, RepeatResult,
    RunOptions, SplitMetrics, Summary, BENCH_REPORT_SCHEMA,
};
pub use search::{random_search, select_best, TrialResult, TuneReport, TUNE_REPORT_SCHEMA};
pub use space::{sample_config, BaseFamily, Config, Distribution, Family, HyperSpace, ParamValue};
pub use split::{full_split, semi_split, Setting, SplitSpec, MAX_SPLIT_ATTEMPTS};
