//! Benchmark harness: runs every (dataset, sampler, classifier) cell of an
//! experiment over repeated stratified splits and collects the metrics.
//!
//! Within a cell the test split is fixed before any resampling and is never
//! shown to a sampler or a classifier; its fingerprint is checked again right
//! before scoring. All randomness is derived from the master seed, so a run is
//! reproducible whether cells execute serially or in parallel.

mod config;
mod report;

pub use config::{ConfigMap, DataSource, DatasetConfig, ExperimentConfig, Metric, SamplerSpec};
pub use report::{emit_report, Best, CellOutcome, CellResult, MetricValues, Report, ReportFormat};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::classifiers::ClassifierConfig;
use crate::dataset::{load_csv, stratified_split_indices, Dataset, Seed};
use crate::error::{Error, Result};
use crate::metrics::{auc, confusion, f1, g_mean, ConfusionMatrix, F1Score};
use crate::samplers::{resample, ResampleRequest};

/// Per-feature z-scoring with statistics from a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

impl Standardizer {
    /// Population standard deviation; constant features get scale 1.
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("non-empty matrix");
        let scale = x
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s > 0.0 && s.is_finite() { s } else { 1.0 });
        Standardizer { mean, scale }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.scale
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        ds.map_features(self.transform(ds.features()))
    }
}

/// Settings shared by every replication of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub sampler: SamplerSpec,
    pub k_neighbors: usize,
    pub target_ratio: f64,
    pub standardize: bool,
    pub resample_after_standardize: bool,
}

impl EvalOptions {
    pub fn new(sampler: SamplerSpec) -> Self {
        let k_neighbors = match sampler {
            SamplerSpec::Raw => 0,
            SamplerSpec::Resample(s) => s.default_k(),
        };
        EvalOptions {
            sampler,
            k_neighbors,
            target_ratio: 1.0,
            standardize: true,
            resample_after_standardize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub g_mean: f64,
    pub f1: F1Score,
    pub auc: f64,
}

impl Evaluation {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::F1 => self.f1.value,
            Metric::GMean => self.g_mean,
            Metric::Auc => self.auc,
        }
    }
}

/// Resamples `train`, fits the classifier and scores it on `test`.
///
/// When standardizing, the statistics come from `train` as split, before any
/// resampling, so both orderings of the two steps share the same scaling.
pub fn evaluate(
    train: &Dataset,
    test: &Dataset,
    classifier: &ClassifierConfig,
    opts: &EvalOptions,
    seed: Seed,
) -> Result<Evaluation> {
    let test_fingerprint = test.fingerprint();
    let scaler = opts.standardize.then(|| Standardizer::fit(train.features()));
    let resample_train = |ds: &Dataset| -> Result<Dataset> {
        match opts.sampler {
            SamplerSpec::Raw => Ok(ds.clone()),
            SamplerSpec::Resample(strategy) => {
                let req = ResampleRequest::new(strategy, seed.child("resample"))
                    .with_target_ratio(opts.target_ratio)
                    .with_k(opts.k_neighbors);
                Ok(resample(ds, &req)?.dataset)
            }
        }
    };

    let fitted_on = match &scaler {
        Some(sc) if opts.resample_after_standardize => resample_train(&sc.apply(train)?)?,
        Some(sc) => sc.apply(&resample_train(train)?)?,
        None => resample_train(train)?,
    };
    let model = classifier.fit(&fitted_on, seed.child("classifier"))?;

    if test.fingerprint() != test_fingerprint {
        return Err(Error::Data("test split changed between splitting and scoring".into()));
    }
    let scored = match &scaler {
        Some(sc) => sc.apply(test)?,
        None => test.clone(),
    };
    let (scores, predictions) = model.score_and_predict(scored.features())?;
    let cm = confusion(test.labels(), &predictions)?;
    Ok(Evaluation {
        confusion: cm,
        g_mean: g_mean(&cm)?,
        f1: f1(&cm),
        auc: auc(test.labels(), &scores)?,
    })
}

pub fn load_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    match &cfg.source {
        DataSource::Csv { path, label } => load_csv(path, label),
        DataSource::Generated { spec } => spec.generate(),
    }
}

/// Seed of one replication of one cell.
pub fn cell_seed(master: Seed, dataset: &str, sampler: &str, classifier: &str, rep: usize) -> Seed {
    master.child(&format!("cell/{dataset}/{sampler}/{classifier}/{rep}"))
}

/// Train/test split of one replication, shared by every cell of the dataset
/// so that samplers are compared on identical splits.
pub fn replication_split(ds: &Dataset, name: &str, rep: usize, master: Seed, test_fraction: f64) -> Result<(Dataset, Dataset)> {
    let mut rng = master.child(&format!("split/{name}/{rep}")).stream("split");
    let (train, test) = stratified_split_indices(ds, test_fraction, &mut rng)?;
    Ok((ds.select(&train)?, ds.select(&test)?))
}

fn run_cell(cfg: &ExperimentConfig, ds_cfg: &DatasetConfig, data: &Dataset, sampler: SamplerSpec, cls: &ClassifierConfig) -> Result<Vec<MetricValues>> {
    let opts = EvalOptions {
        sampler,
        k_neighbors: match sampler {
            SamplerSpec::Raw => 0,
            SamplerSpec::Resample(s) => cfg.k_for(s),
        },
        target_ratio: cfg.target_ratio,
        standardize: cfg.standardize,
        resample_after_standardize: cfg.resample_after_standardize,
    };
    let mut per_metric: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.replications); cfg.metrics.len()];
    for rep in 0..cfg.replications {
        let (train, test) = replication_split(data, &ds_cfg.name, rep, cfg.seed, cfg.test_fraction)?;
        let seed = cell_seed(cfg.seed, &ds_cfg.name, sampler.name(), cls.name(), rep);
        let eval = evaluate(&train, &test, cls, &opts, seed)
            .map_err(|e| Error::Fit(format!("replication {rep}: {e}")))?;
        for (vals, &m) in per_metric.iter_mut().zip(&cfg.metrics) {
            vals.push(eval.get(m));
        }
    }
    Ok(cfg.metrics.iter().zip(per_metric).map(|(&m, v)| MetricValues::new(m, v)).collect())
}

/// Runs every cell of the experiment. Cells that fail are reported with
/// their reason instead of aborting the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let cfg = cfg.clone().validated()?;
    let loaded: Vec<std::result::Result<Dataset, String>> = cfg
        .datasets
        .iter()
        .map(|d| {
            load_dataset(d).map_err(|e| {
                log::warn!("dataset `{}` could not be loaded: {e}", d.name);
                format!("dataset could not be loaded: {e}")
            })
        })
        .collect();

    let mut jobs = Vec::new();
    for (di, ds) in cfg.datasets.iter().enumerate() {
        for &sampler in &cfg.samplers {
            for cls in &cfg.classifiers {
                jobs.push((di, ds, sampler, cls));
            }
        }
    }
    let run = |&(di, ds, sampler, cls): &(usize, &DatasetConfig, SamplerSpec, &ClassifierConfig)| {
        let outcome = match &loaded[di] {
            Err(reason) => CellOutcome::Failed { reason: reason.clone() },
            Ok(data) => match run_cell(&cfg, ds, data, sampler, cls) {
                Ok(metrics) => CellOutcome::Ok { metrics },
                Err(e) => {
                    log::warn!("cell {}/{}/{} failed: {e}", ds.name, sampler, cls.name());
                    CellOutcome::Failed { reason: e.to_string() }
                }
            },
        };
        CellResult {
            dataset: ds.name.clone(),
            sampler: sampler.name().to_string(),
            classifier: cls.name().to_string(),
            outcome,
        }
    };
    // par_iter().collect() keeps job order, so the report is identical to a serial run.
    let cells: Vec<CellResult> = if cfg.parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };
    Ok(Report::new(cfg, cells))
}
