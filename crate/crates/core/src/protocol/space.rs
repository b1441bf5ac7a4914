//! Model families, flat configurations and random-search distributions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::AggKind;
use crate::baselines::{KnnParams, NaParams};
use crate::error::{GadError, Result};
use crate::trees::{BoostParams, Criterion, ForestParams, SplitMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseFamily {
    Rf,
    Xgb,
    RfGraph,
    XgbGraph,
    Knn,
}

impl BaseFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            BaseFamily::Rf => "rf",
            BaseFamily::Xgb => "xgb",
            BaseFamily::RfGraph => "rf-graph",
            BaseFamily::XgbGraph => "xgb-graph",
            BaseFamily::Knn => "knn",
        }
    }

    pub fn uses_graph(self) -> bool {
        matches!(self, BaseFamily::RfGraph | BaseFamily::XgbGraph)
    }

    pub fn is_forest(self) -> bool {
        matches!(self, BaseFamily::Rf | BaseFamily::RfGraph)
    }

    pub fn is_boosted(self) -> bool {
        matches!(self, BaseFamily::Xgb | BaseFamily::XgbGraph)
    }
}

/// A base model, optionally followed by neighborhood-averaging of its scores.
/// `na` on its own means `xgb+na`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Family {
    pub base: BaseFamily,
    pub neighborhood_average: bool,
}

impl Family {
    pub const NAMES: &'static [&'static str] = &[
        "rf",
        "xgb",
        "rf-graph",
        "xgb-graph",
        "knn",
        "na",
        "<family>+na",
    ];

    pub fn plain(base: BaseFamily) -> Self {
        Self {
            base,
            neighborhood_average: false,
        }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Default configuration (trial 0 of every search).
    pub fn defaults(&self) -> Config {
        let mut c = Config::default();
        if self.base.is_forest() {
            c.insert("n_estimators", ParamValue::Int(100));
            c.insert("criterion", ParamValue::Str("gini".into()));
            c.insert("max_samples", ParamValue::Float(1.0));
            c.insert("max_features", ParamValue::Str("sqrt".into()));
            c.insert("min_samples_leaf", ParamValue::Int(1));
            c.insert("max_depth", ParamValue::Str("none".into()));
            c.insert("pos_weight", ParamValue::Float(1.0));
            c.insert("split_mode", ParamValue::Str("exact".into()));
        }
        if self.base.is_boosted() {
            c.insert("n_estimators", ParamValue::Int(100));
            c.insert("learning_rate", ParamValue::Float(0.3));
            c.insert("lambda", ParamValue::Float(1.0));
            c.insert("subsample", ParamValue::Float(1.0));
            c.insert("max_depth", ParamValue::Int(6));
            c.insert("min_child_weight", ParamValue::Float(1.0));
            c.insert("pos_weight", ParamValue::Float(1.0));
            c.insert("split_mode", ParamValue::Str("exact".into()));
        }
        if self.base.uses_graph() {
            c.insert("L", ParamValue::Int(2));
            c.insert("agg", ParamValue::Str("mean".into()));
        }
        if self.base == BaseFamily::Knn {
            c.insert("k", ParamValue::Int(5));
        }
        if self.neighborhood_average {
            c.insert("num_neighbors", ParamValue::Int(5));
        }
        c
    }

    /// Random-search distributions, in draw order.
    pub fn search_space(&self) -> HyperSpace {
        use Distribution::*;
        let mut s = HyperSpace::default();
        if self.base.is_forest() {
            s.push("n_estimators", RandInt(10, 200));
            s.push("criterion", Choice(vec!["gini".into(), "entropy".into()]));
            s.push("max_samples", Uniform(0.1, 1.0));
        }
        if self.base.is_boosted() {
            s.push("n_estimators", RandInt(10, 200));
            s.push(
                "learning_rate",
                ScaledLogUniform {
                    scale: 0.5,
                    lo: -1.0,
                    hi: 0.0,
                },
            );
            s.push("lambda", Choice(vec![0.0.into(), 1.0.into(), 10.0.into()]));
            s.push(
                "subsample",
                Choice(vec![0.5.into(), 0.75.into(), 1.0.into()]),
            );
        }
        if self.base.uses_graph() {
            s.push("L", Choice(vec![1.into(), 2.into(), 3.into(), 4.into()]));
            s.push(
                "agg",
                Choice(vec!["sum".into(), "mean".into(), "max".into()]),
            );
        }
        if self.base == BaseFamily::Knn {
            s.push("k", RandInt(1, 50));
        }
        if self.neighborhood_average {
            s.push("num_neighbors", RandInt(0, 50));
        }
        s
    }

    /// Checks that every key is known to this family and converts cleanly.
    pub fn validate(&self, config: &Config) -> Result<()> {
        let defaults = self.defaults();
        if let Some(key) = config.keys().find(|k| !defaults.contains_key(k)) {
            return Err(GadError::InvalidParameter(format!(
                "unknown key `{key}` for family {self}"
            )));
        }
        let full = defaults.overlay(config);
        if self.base.is_forest() {
            full.forest_params()?.validate()?;
        }
        if self.base.is_boosted() {
            full.boost_params()?.validate()?;
        }
        if self.base.uses_graph() {
            full.aggregation()?;
        }
        if self.base == BaseFamily::Knn {
            full.knn_params()?;
        }
        if self.neighborhood_average {
            full.na_params()?;
        }
        Ok(())
    }

    /// Defaults overlaid with `config`, validated.
    pub fn resolve(&self, config: &Config) -> Result<Config> {
        self.validate(config)?;
        Ok(self.defaults().overlay(config))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.base.as_str())?;
        if self.neighborhood_average {
            f.write_str("+na")?;
        }
        Ok(())
    }
}

impl FromStr for Family {
    type Err = GadError;

    fn from_str(s: &str) -> Result<Self> {
        let (base, na) = match s.strip_suffix("+na") {
            Some(base) => (base, true),
            None if s == "na" => ("xgb", true),
            None => (s, false),
        };
        let base = match base {
            "rf" => BaseFamily::Rf,
            "xgb" => BaseFamily::Xgb,
            "rf-graph" => BaseFamily::RfGraph,
            "xgb-graph" => BaseFamily::XgbGraph,
            "knn" => BaseFamily::Knn,
            _ => return Err(GadError::UnknownFamily(s.to_string())),
        };
        Ok(Family {
            base,
            neighborhood_average: na,
        })
    }
}

impl Serialize for Family {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Family {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Str(String),
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<i32> for ParamValue {
    fn from(v: i32) -> Self {
        ParamValue::Int(v as i64)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v:?}"),
            ParamValue::Str(v) => f.write_str(v),
        }
    }
}

/// Flat `key -> value` model configuration, ordered by key.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Config(BTreeMap<String, ParamValue>);

impl Config {
    pub fn insert(&mut self, key: impl Into<String>, value: ParamValue) {
        self.0.insert(key.into(), value);
    }

    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.0.get(key)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamValue)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `self` with every entry of `other` written over it.
    pub fn overlay(&self, other: &Config) -> Config {
        let mut out = self.clone();
        for (k, v) in &other.0 {
            out.0.insert(k.clone(), v.clone());
        }
        out
    }

    /// Parses `key=value` for `family`, typing the value after the default.
    pub fn set_from_str(&mut self, family: &Family, assignment: &str) -> Result<()> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| {
            GadError::InvalidParameter(format!("override `{assignment}` is not key=value"))
        })?;
        let (key, raw) = (key.trim(), raw.trim());
        let defaults = family.defaults();
        let default = defaults.get(key).ok_or_else(|| {
            GadError::InvalidParameter(format!("unknown key `{key}` for family {family}"))
        })?;
        let bad = || GadError::InvalidParameter(format!("cannot parse `{raw}` for key `{key}`"));
        let value = match default {
            ParamValue::Int(_) => ParamValue::Int(raw.parse().map_err(|_| bad())?),
            ParamValue::Float(_) => ParamValue::Float(raw.parse().map_err(|_| bad())?),
            ParamValue::Str(_) => match raw.parse::<i64>() {
                Ok(v) => ParamValue::Int(v),
                Err(_) => ParamValue::Str(raw.to_string()),
            },
        };
        self.insert(key, value);
        Ok(())
    }

    /// `--set key=value` arguments reproducing this configuration.
    pub fn to_assignments(&self) -> Vec<String> {
        self.iter().map(|(k, v)| format!("{k}={v}")).collect()
    }

    fn need(&self, key: &str) -> Result<&ParamValue> {
        self.get(key)
            .ok_or_else(|| GadError::InvalidParameter(format!("missing key `{key}`")))
    }

    fn int(&self, key: &str) -> Result<i64> {
        match self.need(key)? {
            ParamValue::Int(v) => Ok(*v),
            other => Err(GadError::InvalidParameter(format!(
                "`{key}` must be an integer, got {other}"
            ))),
        }
    }

    fn count(&self, key: &str) -> Result<usize> {
        let v = self.int(key)?;
        usize::try_from(v).map_err(|_| {
            GadError::InvalidParameter(format!("`{key}` must be non-negative, got {v}"))
        })
    }

    fn float(&self, key: &str) -> Result<f64> {
        match self.need(key)? {
            ParamValue::Float(v) => Ok(*v),
            ParamValue::Int(v) => Ok(*v as f64),
            other => Err(GadError::InvalidParameter(format!(
                "`{key}` must be a number, got {other}"
            ))),
        }
    }

    fn string(&self, key: &str) -> Result<&str> {
        match self.need(key)? {
            ParamValue::Str(v) => Ok(v),
            other => Err(GadError::InvalidParameter(format!(
                "`{key}` must be a string, got {other}"
            ))),
        }
    }

    /// Integer, or `None` for the given sentinel string.
    fn optional_count(&self, key: &str, sentinel: &str) -> Result<Option<usize>> {
        match self.need(key)? {
            ParamValue::Str(s) if s == sentinel => Ok(None),
            ParamValue::Int(_) => self.count(key).map(Some),
            other => Err(GadError::InvalidParameter(format!(
                "`{key}` must be an integer or `{sentinel}`, got {other}"
            ))),
        }
    }

    pub fn forest_params(&self) -> Result<ForestParams> {
        Ok(ForestParams {
            n_estimators: self.count("n_estimators")?,
            criterion: self.string("criterion")?.parse::<Criterion>()?,
            max_samples: self.float("max_samples")?,
            max_features: self.optional_count("max_features", "sqrt")?,
            min_samples_leaf: self.count("min_samples_leaf")?,
            max_depth: self.optional_count("max_depth", "none")?,
            bootstrap: true,
            pos_weight: self.float("pos_weight")?,
            split_mode: self.string("split_mode")?.parse::<SplitMode>()?,
        })
    }

    pub fn boost_params(&self) -> Result<BoostParams> {
        Ok(BoostParams {
            n_estimators: self.count("n_estimators")?,
            learning_rate: self.float("learning_rate")?,
            lambda: self.float("lambda")?,
            subsample: self.float("subsample")?,
            max_depth: self.count("max_depth")?,
            min_child_weight: self.float("min_child_weight")?,
            base_logit: 0.0,
            pos_weight: self.float("pos_weight")?,
            split_mode: self.string("split_mode")?.parse::<SplitMode>()?,
        })
    }

    /// `(L, kind)`.
    pub fn aggregation(&self) -> Result<(usize, AggKind)> {
        Ok((self.count("L")?, self.string("agg")?.parse()?))
    }

    pub fn knn_params(&self) -> Result<KnnParams> {
        let k = self.count("k")?;
        if k == 0 {
            return Err(GadError::InvalidParameter("k must be at least 1".into()));
        }
        Ok(KnnParams { k })
    }

    pub fn na_params(&self) -> Result<NaParams> {
        Ok(NaParams {
            num_neighbors: self.count("num_neighbors")?,
        })
    }
}

/// One search dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform over the listed values.
    Choice(Vec<ParamValue>),
    /// Continuous uniform on `[a, b)`.
    Uniform(f64, f64),
    /// `10^u` with `u` uniform on `(lo, hi]`.
    LogUniform { lo: f64, hi: f64 },
    /// `scale * 10^u` with `u` uniform on `(lo, hi]`.
    ScaledLogUniform { scale: f64, lo: f64, hi: f64 },
    /// Integer uniform on `[a, b]`, both ends included.
    RandInt(i64, i64),
}

impl Distribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match self {
            Distribution::Choice(options) => options[rng.random_range(0..options.len())].clone(),
            Distribution::Uniform(a, b) => ParamValue::Float(a + (b - a) * rng.random::<f64>()),
            Distribution::LogUniform { lo, hi } => {
                ParamValue::Float(10f64.powf(hi - (hi - lo) * rng.random::<f64>()))
            }
            Distribution::ScaledLogUniform { scale, lo, hi } => {
                ParamValue::Float(scale * 10f64.powf(hi - (hi - lo) * rng.random::<f64>()))
            }
            Distribution::RandInt(a, b) => ParamValue::Int(rng.random_range(*a..=*b)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HyperSpace {
    pub params: Vec<(String, Distribution)>,
}

impl HyperSpace {
    fn push(&mut self, key: &str, dist: Distribution) {
        self.params.push((key.to_string(), dist));
    }

    pub fn get(&self, key: &str) -> Option<&Distribution> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, d)| d)
    }
}

/// One independent draw per parameter, in the space's order.
pub fn sample_config<R: Rng + ?Sized>(space: &HyperSpace, rng: &mut R) -> Config {
    let mut c = Config::default();
    for (key, dist) in &space.params {
        c.insert(key.clone(), dist.sample(rng));
    }
    c
}
