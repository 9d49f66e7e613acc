//! Experiment configuration and its flat `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! datasets = ecoli, cube
//! dataset.ecoli.csv = data/ecoli.csv
//! dataset.ecoli.label = class
//! dataset.ecoli.positive = imU
//! dataset.cube.generator = cube
//! dataset.cube.n_minority = 100
//! samplers = raw, nearmiss, ros, smote, adasyn, kde
//! classifiers = knn, mlp
//! knn.k = 5
//! mlp.epochs = 200
//! replications = 2
//! seed = 1
//! ```
//!
//! Lists are comma-separated. Relative CSV paths are resolved against the
//! directory of the config file.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::classifiers::{ClassifierConfig, MlpConfig};
use crate::dataset::{ColumnRef, LabelSpec, Seed};
use crate::error::{Error, Result};
use crate::samplers::Strategy;
use crate::synthgen::{CubeSpec, DonutSpec, GeneratorSpec, SeparableSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    F1,
    GMean,
    Auc,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::F1 => "f1",
            Metric::GMean => "gmean",
            Metric::Auc => "auc",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f1" => Ok(Metric::F1),
            "gmean" | "g-mean" | "g" => Ok(Metric::GMean),
            "auc" => Ok(Metric::Auc),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

/// A resampling step of an experiment; `Raw` trains on the data as split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerSpec {
    Raw,
    Resample(Strategy),
}

impl SamplerSpec {
    pub fn name(self) -> &'static str {
        match self {
            SamplerSpec::Raw => "raw",
            SamplerSpec::Resample(s) => s.name(),
        }
    }
}

impl fmt::Display for SamplerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" | "none" => Ok(SamplerSpec::Raw),
            other => other.parse().map(SamplerSpec::Resample),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DataSource {
    Csv { path: String, label: LabelSpec },
    Generated { spec: GeneratorSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    pub source: DataSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetConfig>,
    /// Always starts with [`SamplerSpec::Raw`] once validated.
    pub samplers: Vec<SamplerSpec>,
    pub classifiers: Vec<ClassifierConfig>,
    pub replications: usize,
    pub test_fraction: f64,
    pub seed: Seed,
    pub metrics: Vec<Metric>,
    pub target_ratio: f64,
    /// Per-strategy neighborhood sizes overriding the defaults.
    pub k_neighbors: BTreeMap<Strategy, usize>,
    /// z-score features with training-split statistics.
    pub standardize: bool,
    /// Resample in the standardized space rather than the raw one.
    pub resample_after_standardize: bool,
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn new(datasets: Vec<DatasetConfig>, seed: Seed) -> Self {
        ExperimentConfig {
            datasets,
            samplers: std::iter::once(SamplerSpec::Raw)
                .chain(Strategy::ALL.map(SamplerSpec::Resample))
                .collect(),
            classifiers: vec![ClassifierConfig::Knn { k: 5 }],
            replications: 2,
            test_fraction: 0.3,
            seed,
            metrics: vec![Metric::F1, Metric::GMean, Metric::Auc],
            target_ratio: 1.0,
            k_neighbors: BTreeMap::new(),
            standardize: true,
            resample_after_standardize: true,
            parallel: true,
        }
    }

    /// Checks invariants, puts the raw baseline first and fills in generator
    /// seeds that were left unset.
    pub fn validated(mut self) -> Result<Self> {
        if self.datasets.is_empty() || self.classifiers.is_empty() || self.metrics.is_empty() {
            return Err(Error::Config("datasets, classifiers and metrics must be non-empty".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction)));
        }
        if !(self.target_ratio >= 1.0) {
            return Err(Error::Config(format!("target_ratio must be >= 1, got {}", self.target_ratio)));
        }
        self.samplers.retain(|s| *s != SamplerSpec::Raw);
        self.samplers.insert(0, SamplerSpec::Raw);
        dedup_preserving_order(&mut self.samplers);
        dedup_preserving_order(&mut self.metrics);
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("dataset names must be unique".into()));
        }
        let mut cls: Vec<&str> = self.classifiers.iter().map(|c| c.name()).collect();
        cls.sort_unstable();
        if cls.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("classifier names must be unique".into()));
        }
        Ok(self)
    }

    pub fn k_for(&self, strategy: Strategy) -> usize {
        self.k_neighbors.get(&strategy).copied().unwrap_or(strategy.default_k())
    }
}

fn dedup_preserving_order<T: PartialEq + Copy>(v: &mut Vec<T>) {
    let mut out: Vec<T> = Vec::with_capacity(v.len());
    for x in v.iter() {
        if !out.contains(x) {
            out.push(*x);
        }
    }
    *v = out;
}

/// Raw `key = value` pairs, later entries overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = ConfigMap::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            map.set(key, v.trim());
        }
        Ok(map)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Parses `key=value` as given on the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got `{pair}`")))?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfigMap) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Makes relative `dataset.*.csv` paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for (k, v) in self.entries.iter_mut() {
            if k.starts_with("dataset.") && k.ends_with(".csv") && Path::new(v.as_str()).is_relative() {
                *v = base.join(&*v).to_string_lossy().into_owned();
            }
        }
    }

    pub fn to_config(&self) -> Result<ExperimentConfig> {
        let used: RefCell<Vec<String>> = RefCell::new(Vec::new());
        let take = |key: &str| -> Option<&str> {
            used.borrow_mut().push(key.to_string());
            self.get(key)
        };

        let seed = Seed(parse_or(take("seed"), "seed", 0u64)?);
        let dataset_names = list(take("datasets").ok_or_else(|| Error::Config("missing key `datasets`".into()))?);
        let mut datasets = Vec::new();
        for name in &dataset_names {
            let prefix = format!("dataset.{name}.");
            let source = if let Some(path) = take(&format!("{prefix}csv")) {
                let column = take(&format!("{prefix}label")).map_or(ColumnRef::Name("label".into()), ColumnRef::parse);
                let positive = take(&format!("{prefix}positive")).unwrap_or("1").to_string();
                DataSource::Csv {
                    path: path.to_string(),
                    label: LabelSpec::new(column, positive),
                }
            } else if let Some(kind) = take(&format!("{prefix}generator")) {
                let mut params = Map::new();
                for (k, v) in self.entries.range(prefix.clone()..) {
                    let Some(param) = k.strip_prefix(&prefix) else { break };
                    if param == "generator" {
                        continue;
                    }
                    used.borrow_mut().push(k.clone());
                    params.insert(param.to_string(), json_value(v));
                }
                let obj = Value::Object(params);
                let err = |e: serde_json::Error| Error::Config(format!("dataset `{name}`: {e}"));
                let spec = match kind.trim() {
                    "donut" => GeneratorSpec::Donut(serde_json::from_value::<DonutSpec>(obj).map_err(err)?),
                    "cube" => GeneratorSpec::Cube(serde_json::from_value::<CubeSpec>(obj).map_err(err)?),
                    "separable" => GeneratorSpec::Separable(serde_json::from_value::<SeparableSpec>(obj).map_err(err)?),
                    other => return Err(Error::Config(format!("dataset `{name}`: unknown generator `{other}`"))),
                };
                DataSource::Generated { spec }
            } else {
                return Err(Error::Config(format!("dataset `{name}` needs `{prefix}csv` or `{prefix}generator`")));
            };
            datasets.push(DatasetConfig {
                name: name.clone(),
                source,
            });
        }

        let mut cfg = ExperimentConfig::new(datasets, seed);
        // Generated datasets without an explicit seed derive one from the master seed.
        for (name, ds) in dataset_names.iter().zip(cfg.datasets.iter_mut()) {
            if let DataSource::Generated { spec } = &mut ds.source {
                if self.get(&format!("dataset.{name}.seed")).is_none() {
                    spec.set_seed(seed.child(&format!("gen/{name}")));
                }
            }
        }
        if let Some(v) = take("samplers") {
            cfg.samplers = list(v).iter().map(|s| s.parse()).collect::<Result<_>>()?;
        }
        if let Some(v) = take("metrics") {
            cfg.metrics = list(v).iter().map(|s| s.parse()).collect::<Result<_>>()?;
        }
        let knn_k = parse_or(take("knn.k"), "knn.k", 5usize)?;
        let defaults = MlpConfig::default();
        let mlp = MlpConfig {
            hidden_units: parse_or(take("mlp.hidden_units"), "mlp.hidden_units", defaults.hidden_units)?,
            epochs: parse_or(take("mlp.epochs"), "mlp.epochs", defaults.epochs)?,
            learning_rate: parse_or(take("mlp.learning_rate"), "mlp.learning_rate", defaults.learning_rate)?,
            batch_size: parse_or(take("mlp.batch_size"), "mlp.batch_size", defaults.batch_size)?,
            seed: Seed(0),
        };
        if let Some(v) = take("classifiers") {
            cfg.classifiers = list(v)
                .iter()
                .map(|c| match c.to_ascii_lowercase().as_str() {
                    "knn" => Ok(ClassifierConfig::Knn { k: knn_k }),
                    "mlp" => Ok(ClassifierConfig::Mlp(mlp.clone())),
                    other => Err(Error::Config(format!("unknown classifier `{other}`"))),
                })
                .collect::<Result<_>>()?;
        } else {
            cfg.classifiers = vec![ClassifierConfig::Knn { k: knn_k }];
        }
        for s in Strategy::ALL {
            let key = format!("{}.k", s.name());
            if let Some(v) = take(&key) {
                cfg.k_neighbors.insert(s, parse_value(v, &key)?);
            }
        }
        cfg.replications = parse_or(take("replications"), "replications", cfg.replications)?;
        cfg.test_fraction = parse_or(take("test_fraction"), "test_fraction", cfg.test_fraction)?;
        cfg.target_ratio = parse_or(take("target_ratio"), "target_ratio", cfg.target_ratio)?;
        cfg.standardize = parse_or(take("standardize"), "standardize", cfg.standardize)?;
        cfg.resample_after_standardize = parse_or(
            take("resample_after_standardize"),
            "resample_after_standardize",
            cfg.resample_after_standardize,
        )?;
        cfg.parallel = parse_or(take("parallel"), "parallel", cfg.parallel)?;

        let used = used.into_inner();
        if let Some(unknown) = self.entries.keys().find(|k| !used.contains(k)) {
            return Err(Error::Config(format!("unknown configuration key `{unknown}`")));
        }
        cfg.validated()
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn parse_value<T: FromStr>(v: &str, key: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

fn parse_or<T: FromStr>(v: Option<&str>, key: &str, default: T) -> Result<T> {
    v.map_or(Ok(default), |v| parse_value(v, key))
}

/// Numbers become JSON numbers, comma lists arrays; anything else a string.
fn json_value(v: &str) -> Value {
    if v.contains(',') {
        return Value::Array(list(v).iter().map(|s| json_value(s)).collect());
    }
    if let Ok(i) = v.parse::<u64>() {
        return Value::from(i);
    }
    if let Ok(f) = v.parse::<f64>() {
        return Value::from(f);
    }
    Value::from(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# demo
datasets = ecoli, cube
dataset.ecoli.csv = data/ecoli.csv
dataset.ecoli.label = class
dataset.ecoli.positive = imU
dataset.cube.generator = cube
dataset.cube.minority_mean = 7, 7, 7
dataset.cube.seed = 9
samplers = kde, smote
classifiers = knn, mlp
mlp.epochs = 20
replications = 3
seed = 4
";

    #[test]
    fn parses_sample_config() {
        let mut map = ConfigMap::parse(SAMPLE).unwrap();
        map.resolve_paths(Path::new("/base"));
        let cfg = map.to_config().unwrap();
        assert_eq!(cfg.seed, Seed(4));
        assert_eq!(cfg.replications, 3);
        assert_eq!(
            cfg.samplers,
            vec![SamplerSpec::Raw, SamplerSpec::Resample(Strategy::Kde), SamplerSpec::Resample(Strategy::Smote)]
        );
        match &cfg.datasets[0].source {
            DataSource::Csv { path, label } => {
                assert_eq!(path, "/base/data/ecoli.csv");
                assert_eq!(label.column, ColumnRef::Name("class".into()));
                assert_eq!(label.positive_value, "imU");
            }
            other => panic!("{other:?}"),
        }
        match &cfg.datasets[1].source {
            DataSource::Generated { spec: GeneratorSpec::Cube(c) } => {
                assert_eq!(c.seed, Seed(9));
                assert_eq!(c.minority_mean, [7.0, 7.0, 7.0]);
            }
            other => panic!("{other:?}"),
        }
        match &cfg.classifiers[1] {
            ClassifierConfig::Mlp(m) => assert_eq!(m.epochs, 20),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_win() {
        let mut map = ConfigMap::parse(SAMPLE).unwrap();
        let mut flags = ConfigMap::default();
        flags.set_pair("replications=7").unwrap();
        map.merge(&flags);
        assert_eq!(map.to_config().unwrap().replications, 7);
    }

    #[test]
    fn unset_generator_seed_derives_from_master() {
        let text = "datasets = d\ndataset.d.generator = donut\nseed = 3\n";
        let cfg = ConfigMap::parse(text).unwrap().to_config().unwrap();
        match &cfg.datasets[0].source {
            DataSource::Generated { spec } => assert_eq!(spec.seed(), Seed(3).child("gen/d")),
            _ => panic!(),
        }
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        assert!(ConfigMap::parse("datasets = d\ndataset.d.generator = donut\nreplicatons = 2")
            .unwrap()
            .to_config()
            .is_err());
        assert!(ConfigMap::parse("datasets = d\ndataset.d.generator = donut\ndataset.d.radius = 2")
            .unwrap()
            .to_config()
            .is_err());
        assert!(ConfigMap::parse("datasets = d\ndataset.d.generator = blob").unwrap().to_config().is_err());
        assert!(ConfigMap::parse("no equals sign").is_err());
        assert!(ConfigMap::parse("datasets = d\ndataset.d.generator = donut\nreplications = 0")
            .unwrap()
            .to_config()
            .is_err());
    }
}
