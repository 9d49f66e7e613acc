//! Base classifiers: k-nearest-neighbor voting and a one-hidden-layer
//! perceptron. Both produce a score in `[0, 1]` for the positive class.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label, Seed};
use crate::error::{Error, Result};
use crate::neighbors::NeighborIndex;

/// Majority vote over the `k` nearest training rows.
#[derive(Debug, Clone)]
pub struct KnnClassifier {
    index: NeighborIndex,
    labels: Vec<Label>,
    k: usize,
}

impl KnnClassifier {
    pub fn fit(train: &Dataset, k: usize) -> Result<Self> {
        if k == 0 || k > train.n_rows() {
            return Err(Error::Argument(format!("kNN k = {k} must lie in 1..={}", train.n_rows())));
        }
        Ok(KnnClassifier {
            index: NeighborIndex::new(train.features().to_owned())?,
            labels: train.labels().to_vec(),
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Fraction of positive labels among the `k` nearest training rows.
    pub fn predict_score(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        let nn = self.index.knn(x, self.k, None)?;
        let pos = nn.iter().filter(|n| self.labels[n.row].is_positive()).count();
        Ok(pos as f64 / self.k as f64)
    }

    /// Positive when at least half of the neighbors are positive.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<Label> {
        Ok(Label::from_bool(self.predict_score(x)? >= 0.5))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_units: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: Seed,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_units: 32,
            epochs: 200,
            learning_rate: 0.01,
            batch_size: 32,
            seed: Seed(0),
        }
    }
}

/// Weights and biases of the network, also used to hold gradients.
///
/// `w1` is `hidden × inputs`, `w2` has one weight per hidden unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

impl MlpParams {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        MlpParams {
            w1: Array2::zeros((hidden, inputs)),
            b1: Array1::zeros(hidden),
            w2: Array1::zeros(hidden),
            b2: 0.0,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(inputs, hidden);
        let a1 = (6.0 / (inputs + hidden) as f64).sqrt();
        p.w1.mapv_inplace(|_| rng.random_range(-a1..a1));
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        p.w2.mapv_inplace(|_| rng.random_range(-a2..a2));
        p
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flattened view order: `w1` (row-major), `b1`, `w2`, `b2`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(self.w1.iter());
        v.extend(self.b1.iter());
        v.extend(self.w2.iter());
        v.push(self.b2);
        v
    }

    pub fn get(&self, i: usize) -> f64 {
        self.to_vec()[i]
    }

    pub fn set(&mut self, mut i: usize, value: f64) {
        if i < self.w1.len() {
            let cols = self.w1.ncols();
            self.w1[[i / cols, i % cols]] = value;
            return;
        }
        i -= self.w1.len();
        if i < self.b1.len() {
            self.b1[i] = value;
            return;
        }
        i -= self.b1.len();
        if i < self.w2.len() {
            self.w2[i] = value;
            return;
        }
        assert_eq!(i - self.w2.len(), 0, "parameter index out of range");
        self.b2 = value;
    }

    fn is_finite(&self) -> bool {
        self.w1.iter().chain(&self.b1).chain(&self.w2).all(|v| v.is_finite()) && self.b2.is_finite()
    }

    fn axpy(&mut self, alpha: f64, g: &MlpParams) {
        self.w1.scaled_add(alpha, &g.w1);
        self.b1.scaled_add(alpha, &g.b1);
        self.w2.scaled_add(alpha, &g.w2);
        self.b2 += alpha * g.b2;
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// ReLU hidden layer, logistic output, binary cross-entropy loss.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub params: MlpParams,
    /// Mean training loss after each epoch.
    pub loss_history: Vec<f64>,
}

impl MlpModel {
    pub fn from_params(params: MlpParams) -> Self {
        MlpModel {
            params,
            loss_history: Vec::new(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.params.w1.ncols()
    }

    fn hidden(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z1 = x.dot(&self.params.w1.t());
        z1 += &self.params.b1;
        z1
    }

    /// Output logits for each row of `x`.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.inputs() {
            return Err(Error::shape(format!("{} features", self.inputs()), x.ncols()));
        }
        let a1 = self.hidden(x).mapv(|v| v.max(0.0));
        Ok(a1.dot(&self.params.w2) + self.params.b2)
    }

    pub fn predict_scores(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        Ok(self.logits(x)?.iter().map(|&z| sigmoid(z)).collect())
    }

    pub fn predict_score(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        Ok(self.predict_scores(x.insert_axis(Axis(0)))?[0])
    }

    /// Positive when the score exceeds one half.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<Label> {
        Ok(Label::from_bool(self.predict_score(x)? > 0.5))
    }

    /// Mean cross-entropy over the batch and its gradient with respect to
    /// every parameter. `y` holds targets in {0, 1}.
    pub fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> Result<(f64, MlpParams)> {
        let b = x.nrows();
        if y.len() != b {
            return Err(Error::shape(format!("{b} targets"), y.len()));
        }
        if x.ncols() != self.inputs() {
            return Err(Error::shape(format!("{} features", self.inputs()), x.ncols()));
        }
        let z1 = self.hidden(x);
        let a1 = z1.mapv(|v| v.max(0.0));
        let z2 = a1.dot(&self.params.w2) + self.params.b2;
        let inv_b = 1.0 / b as f64;

        let loss = z2.iter().zip(y).map(|(&z, &t)| softplus(z) - t * z).sum::<f64>() * inv_b;
        let dz2: Array1<f64> = z2.iter().zip(y).map(|(&z, &t)| (sigmoid(z) - t) * inv_b).collect();

        let gw2 = a1.t().dot(&dz2);
        let gb2 = dz2.sum();
        let mut dz1 = dz2.view().insert_axis(Axis(1)).dot(&self.params.w2.view().insert_axis(Axis(0)));
        ndarray::Zip::from(&mut dz1).and(&z1).for_each(|g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
        let gw1 = dz1.t().dot(&x);
        let gb1 = dz1.sum_axis(Axis(0));
        Ok((
            loss,
            MlpParams {
                w1: gw1,
                b1: gb1,
                w2: gw2,
                b2: gb2,
            },
        ))
    }

    pub fn loss(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> Result<f64> {
        let z = self.logits(x)?;
        Ok(z.iter().zip(y).map(|(&z, &t)| softplus(z) - t * z).sum::<f64>() / y.len() as f64)
    }
}

fn targets(ds: &Dataset) -> Vec<f64> {
    ds.labels().iter().map(|l| if l.is_positive() { 1.0 } else { 0.0 }).collect()
}

/// Mini-batch SGD on binary cross-entropy. Rows are reshuffled every epoch.
pub fn mlp_train(train: &Dataset, config: &MlpConfig) -> Result<MlpModel> {
    if config.hidden_units == 0 || config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::Argument("hidden units, epochs and batch size must be positive".into()));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::Argument(format!("learning rate must be positive, got {}", config.learning_rate)));
    }
    let mut rng = config.seed.stream("mlp");
    let x = train.features();
    let y = targets(train);
    let mut model = MlpModel::from_params(MlpParams::init(train.n_features(), config.hidden_units, &mut rng));
    let mut order: Vec<usize> = (0..train.n_rows()).collect();
    let mut batch_y = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let bx = x.select(Axis(0), chunk);
            batch_y.clear();
            batch_y.extend(chunk.iter().map(|&i| y[i]));
            let (_, grad) = model.loss_and_gradient(bx.view(), &batch_y)?;
            model.params.axpy(-config.learning_rate, &grad);
        }
        let loss = model.loss(x, &y)?;
        if !loss.is_finite() || !model.params.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("training loss became {loss}"),
            });
        }
        model.loss_history.push(loss);
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierConfig {
    Knn { k: usize },
    Mlp(MlpConfig),
}

impl ClassifierConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierConfig::Knn { .. } => "knn",
            ClassifierConfig::Mlp(_) => "mlp",
        }
    }

    /// Trains on `train`; `seed` replaces any seed in the configuration.
    pub fn fit(&self, train: &Dataset, seed: Seed) -> Result<Classifier> {
        match self {
            ClassifierConfig::Knn { k } => Ok(Classifier::Knn(KnnClassifier::fit(train, *k)?)),
            ClassifierConfig::Mlp(cfg) => {
                let cfg = MlpConfig { seed, ..cfg.clone() };
                Ok(Classifier::Mlp(mlp_train(train, &cfg)?))
            }
        }
    }
}

impl fmt::Display for ClassifierConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A trained base classifier.
#[derive(Debug, Clone)]
pub enum Classifier {
    Knn(KnnClassifier),
    Mlp(MlpModel),
}

impl Classifier {
    /// Positive-class scores and hard predictions for every row of `x`.
    pub fn score_and_predict(&self, x: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Vec<Label>)> {
        match self {
            Classifier::Knn(m) => {
                let scores = (0..x.nrows())
                    .into_par_iter()
                    .map(|i| m.predict_score(x.row(i)))
                    .collect::<Result<Vec<f64>>>()?;
                let labels = scores.iter().map(|&s| Label::from_bool(s >= 0.5)).collect();
                Ok((scores, labels))
            }
            Classifier::Mlp(m) => {
                let scores = m.predict_scores(x)?;
                let labels = scores.iter().map(|&s| Label::from_bool(s > 0.5)).collect();
                Ok((scores, labels))
            }
        }
    }
}
