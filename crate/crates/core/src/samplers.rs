//! Resampling strategies for binary imbalanced data.
//!
//! Four oversamplers append synthetic minority rows (random oversampling,
//! SMOTE, ADASYN and KDE sampling) and one undersampler drops majority rows
//! (NearMiss-1). [`resample`] puts them behind one interface that rebalances a
//! [`Dataset`] to a target majority:minority ratio.

use std::fmt;
use std::str::FromStr;

use log::warn;
use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Label, Seed};
use crate::error::{Error, Result};
use crate::kde::{scott_factor, BandwidthRule, KdeModel};
use crate::linalg;
use crate::neighbors::{avg_distance_to_k_nearest, NeighborIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Ros,
    Smote,
    Adasyn,
    NearMiss,
    Kde,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::NearMiss,
        Strategy::Ros,
        Strategy::Smote,
        Strategy::Adasyn,
        Strategy::Kde,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ros => "ros",
            Strategy::Smote => "smote",
            Strategy::Adasyn => "adasyn",
            Strategy::NearMiss => "nearmiss",
            Strategy::Kde => "kde",
        }
    }

    /// Neighborhood size used when the request does not set one.
    pub fn default_k(self) -> usize {
        match self {
            Strategy::NearMiss => 3,
            _ => 5,
        }
    }

    pub fn is_oversampler(self) -> bool {
        self != Strategy::NearMiss
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ros" => Ok(Strategy::Ros),
            "smote" => Ok(Strategy::Smote),
            "adasyn" => Ok(Strategy::Adasyn),
            "nearmiss" | "near-miss" => Ok(Strategy::NearMiss),
            "kde" => Ok(Strategy::Kde),
            other => Err(Error::Config(format!("unknown resampling strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleRequest {
    pub strategy: Strategy,
    /// Desired majority:minority ratio after resampling (>= 1).
    pub target_ratio: f64,
    pub k_neighbors: usize,
    pub seed: Seed,
}

impl ResampleRequest {
    /// Fully balanced output with the strategy's default neighborhood size.
    pub fn new(strategy: Strategy, seed: Seed) -> Self {
        ResampleRequest {
            strategy,
            target_ratio: 1.0,
            k_neighbors: strategy.default_k(),
            seed,
        }
    }

    pub fn with_target_ratio(mut self, ratio: f64) -> Self {
        self.target_ratio = ratio;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k_neighbors = k;
        self
    }
}

/// Where an output row came from. Indices refer to rows of the minority
/// matrix for oversamplers and to rows of the input dataset for `Retained`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Copy { source: usize },
    Interpolated { source: usize, neighbor: usize, t: f64 },
    KdeCenter { center: usize },
    Retained { source: usize },
}

/// Rows produced by an oversampler, one provenance record per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub rows: Array2<f64>,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleResult {
    pub dataset: Dataset,
    /// Marks appended synthetic rows (oversamplers) or retained majority rows
    /// (NearMiss).
    pub synthetic_mask: Vec<bool>,
    /// One record per `true` entry of `synthetic_mask`, in row order.
    pub provenance: Vec<Provenance>,
}

/// Random oversampling: `n_new` rows copied uniformly with replacement.
pub fn ros<R: Rng + ?Sized>(minority: ArrayView2<'_, f64>, n_new: usize, rng: &mut R) -> Result<Synthetic> {
    let m = minority.nrows();
    if m == 0 {
        return Err(Error::Data("random oversampling needs at least one minority row".into()));
    }
    let sources: Vec<usize> = (0..n_new).map(|_| rng.random_range(0..m)).collect();
    Ok(Synthetic {
        rows: minority.select(Axis(0), &sources),
        provenance: sources.into_iter().map(|source| Provenance::Copy { source }).collect(),
    })
}

fn minority_neighbor_lists(minority: ArrayView2<'_, f64>, k: usize) -> Result<Vec<Vec<usize>>> {
    let index = NeighborIndex::new(minority.to_owned())?;
    Ok(index
        .knn_of_each_row(k)?
        .into_iter()
        .map(|nn| nn.into_iter().map(|n| n.row).collect())
        .collect())
}

fn interpolate<R: Rng + ?Sized>(
    minority: ArrayView2<'_, f64>,
    source: usize,
    neighbors: &[usize],
    rng: &mut R,
    out: &mut Vec<f64>,
) -> Provenance {
    let neighbor = neighbors[rng.random_range(0..neighbors.len())];
    let t: f64 = rng.random();
    let p = minority.row(source);
    let q = minority.row(neighbor);
    out.extend(p.iter().zip(q.iter()).map(|(a, b)| a + t * (b - a)));
    Provenance::Interpolated { source, neighbor, t }
}

/// SMOTE: each new row is `p + t (q - p)` for a uniformly chosen minority row
/// `p`, one of its `k` nearest minority neighbors `q` and `t ~ U[0, 1)`.
pub fn smote<R: Rng + ?Sized>(minority: ArrayView2<'_, f64>, n_new: usize, k: usize, rng: &mut R) -> Result<Synthetic> {
    let (m, d) = minority.dim();
    if m < 2 {
        return Err(Error::Data(format!("SMOTE needs at least 2 minority rows, got {m}")));
    }
    if k == 0 || k >= m {
        return Err(Error::Argument(format!("SMOTE k = {k} must lie in 1..={}", m - 1)));
    }
    let neighbors = minority_neighbor_lists(minority, k)?;
    let mut values = Vec::with_capacity(n_new * d);
    let provenance = (0..n_new)
        .map(|_| {
            let source = rng.random_range(0..m);
            interpolate(minority, source, &neighbors[source], rng, &mut values)
        })
        .collect();
    Ok(Synthetic {
        rows: Array2::from_shape_vec((n_new, d), values).expect("row-major buffer"),
        provenance,
    })
}

/// For each minority row, the number of majority rows among its `k` nearest
/// neighbors in the combined minority+majority set (itself excluded). The
/// ADASYN difficulty ratio is this count divided by `k`.
pub fn adasyn_majority_counts(minority: ArrayView2<'_, f64>, majority: ArrayView2<'_, f64>, k: usize) -> Result<Vec<usize>> {
    let m = minority.nrows();
    let total = m + majority.nrows();
    if k == 0 || k > total - 1 {
        return Err(Error::Argument(format!("ADASYN k = {k} must lie in 1..={}", total - 1)));
    }
    let combined = concatenate(Axis(0), &[minority, majority]).map_err(|e| Error::shape(minority.ncols(), e))?;
    let index = NeighborIndex::new(combined)?;
    (0..m)
        .map(|i| Ok(index.knn(minority.row(i), k, Some(i))?.iter().filter(|n| n.row >= m).count()))
        .collect()
}

/// Splits `total` into integer parts proportional to `weights` using the
/// largest-remainder method. Larger remainders are served first, ties by
/// lower index. Zero total weight yields an even split.
pub fn largest_remainder(weights: &[usize], total: usize) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let uniform = vec![1usize; n];
    let w = if weights.iter().all(|&x| x == 0) { &uniform } else { weights };
    let sum: u128 = w.iter().map(|&x| x as u128).sum();
    let mut alloc = Vec::with_capacity(n);
    let mut rem = Vec::with_capacity(n);
    for (i, &wi) in w.iter().enumerate() {
        let share = total as u128 * wi as u128;
        alloc.push((share / sum) as usize);
        rem.push((share % sum, i));
    }
    let left = total - alloc.iter().sum::<usize>();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rem.iter().take(left) {
        alloc[i] += 1;
    }
    alloc
}

/// How many synthetic rows ADASYN assigns to each minority row.
pub fn adasyn_allocation(
    minority: ArrayView2<'_, f64>,
    majority: ArrayView2<'_, f64>,
    n_new: usize,
    k: usize,
) -> Result<Vec<usize>> {
    let counts = adasyn_majority_counts(minority, majority, k)?;
    if counts.iter().all(|&c| c == 0) {
        warn!("ADASYN: no minority row has a majority neighbor; allocating uniformly");
    }
    Ok(largest_remainder(&counts, n_new))
}

/// ADASYN: SMOTE interpolation with more synthetic rows seeded at minority
/// rows whose neighborhoods contain more majority rows.
pub fn adasyn<R: Rng + ?Sized>(
    minority: ArrayView2<'_, f64>,
    majority: ArrayView2<'_, f64>,
    n_new: usize,
    k: usize,
    rng: &mut R,
) -> Result<Synthetic> {
    let (m, d) = minority.dim();
    if m < 2 {
        return Err(Error::Data(format!("ADASYN needs at least 2 minority rows, got {m}")));
    }
    if majority.ncols() != d {
        return Err(Error::shape(format!("{d} majority columns"), majority.ncols()));
    }
    let alloc = adasyn_allocation(minority, majority, n_new, k)?;
    let neighbors = minority_neighbor_lists(minority, k.min(m - 1))?;
    let mut values = Vec::with_capacity(n_new * d);
    let mut provenance = Vec::with_capacity(n_new);
    for (source, &count) in alloc.iter().enumerate() {
        for _ in 0..count {
            provenance.push(interpolate(minority, source, &neighbors[source], rng, &mut values));
        }
    }
    Ok(Synthetic {
        rows: Array2::from_shape_vec((n_new, d), values).expect("row-major buffer"),
        provenance,
    })
}

/// NearMiss-1: the `n_keep` majority rows with the smallest mean distance to
/// their `k` nearest minority rows, ordered by that distance (ties by row).
pub fn nearmiss(majority: ArrayView2<'_, f64>, minority: ArrayView2<'_, f64>, n_keep: usize, k: usize) -> Result<Vec<usize>> {
    let big_m = majority.nrows();
    if n_keep > big_m {
        return Err(Error::Argument(format!("cannot keep {n_keep} of {big_m} majority rows")));
    }
    let mut scored: Vec<(f64, usize)> = majority
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| Ok((avg_distance_to_k_nearest(row, minority, k)?, i)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(n_keep).map(|(_, i)| i).collect())
}

/// Scott-rule KDE on the minority rows. A singular covariance gets one retry
/// with `1e-9 · tr(S)/d` added to the diagonal.
pub fn fit_minority_kde(minority: ArrayView2<'_, f64>) -> Result<KdeModel> {
    match KdeModel::fit(minority, &BandwidthRule::Scott) {
        Err(Error::Fit(reason)) => {
            let (n, d) = minority.dim();
            let mut cov = linalg::sample_covariance(minority);
            let jitter = 1e-9 * cov.diag().sum() / d as f64;
            warn!("KDE fit failed ({reason}); retrying with diagonal jitter {jitter:e}");
            cov.diag_mut().mapv_inplace(|v| v + jitter);
            let f = scott_factor(n, d);
            KdeModel::fit(minority, &BandwidthRule::Fixed(cov * (f * f)))
                .map_err(|e| Error::Fit(format!("{reason}; jittered retry also failed: {e}")))
        }
        other => other,
    }
}

/// KDE sampling: fit a Gaussian KDE on the minority rows and draw `n_new`
/// rows from it.
pub fn kde_oversample<R: Rng + ?Sized>(minority: ArrayView2<'_, f64>, n_new: usize, rng: &mut R) -> Result<Synthetic> {
    let model = fit_minority_kde(minority)?;
    let (rows, centers) = model.sample_with_centers(n_new, rng);
    Ok(Synthetic {
        rows,
        provenance: centers.into_iter().map(|center| Provenance::KdeCenter { center }).collect(),
    })
}

fn round_count(x: f64) -> usize {
    x.round() as usize
}

/// Rebalances `ds` according to `req`.
///
/// Oversamplers append synthetic minority rows after the untouched original
/// rows until the minority count reaches `round(n_majority / ratio)`. NearMiss
/// keeps `round(n_minority · ratio)` majority rows (all of them if fewer
/// exist), preserving original row order.
pub fn resample(ds: &Dataset, req: &ResampleRequest) -> Result<ResampleResult> {
    if !(req.target_ratio >= 1.0) || !req.target_ratio.is_finite() {
        return Err(Error::Argument(format!("target ratio must be >= 1, got {}", req.target_ratio)));
    }
    if req.k_neighbors == 0 {
        return Err(Error::Argument("k_neighbors must be at least 1".into()));
    }
    let (n_maj, n_min) = ds.class_counts();
    let minority = ds.minority();
    let mut rng = req.seed.stream(&format!("resample/{}", req.strategy));

    if req.strategy == Strategy::NearMiss {
        let mut n_keep = round_count(n_min as f64 * req.target_ratio);
        if n_keep > n_maj {
            warn!("NearMiss: ratio {} needs {n_keep} majority rows but only {n_maj} exist; keeping all", req.target_ratio);
            n_keep = n_maj;
        }
        let mut k = req.k_neighbors;
        if k > n_min {
            warn!("NearMiss: k = {k} exceeds minority count {n_min}; using {n_min}");
            k = n_min;
        }
        let maj_idx = ds.indices_of(Label::Negative);
        let selected = nearmiss(ds.majority().view(), minority.view(), n_keep, k)?;
        let mut keep = vec![false; ds.n_rows()];
        for s in selected {
            keep[maj_idx[s]] = true;
        }
        let rows: Vec<usize> = (0..ds.n_rows())
            .filter(|&i| keep[i] || ds.labels()[i].is_positive())
            .collect();
        let synthetic_mask: Vec<bool> = rows.iter().map(|&i| keep[i]).collect();
        let provenance = rows
            .iter()
            .filter(|&&i| keep[i])
            .map(|&source| Provenance::Retained { source })
            .collect();
        return Ok(ResampleResult {
            dataset: ds.select(&rows)?,
            synthetic_mask,
            provenance,
        });
    }

    let target = round_count(n_maj as f64 / req.target_ratio);
    let n_new = target.saturating_sub(n_min);
    if n_new == 0 {
        return Ok(ResampleResult {
            dataset: ds.clone(),
            synthetic_mask: vec![false; ds.n_rows()],
            provenance: Vec::new(),
        });
    }

    let synthetic = match req.strategy {
        Strategy::Ros => ros(minority.view(), n_new, &mut rng)?,
        Strategy::Smote => {
            let mut k = req.k_neighbors;
            if n_min >= 2 && k >= n_min {
                warn!("SMOTE: k = {k} needs more than {n_min} minority rows; using {}", n_min - 1);
                k = n_min - 1;
            }
            smote(minority.view(), n_new, k, &mut rng)?
        }
        Strategy::Adasyn => {
            let mut k = req.k_neighbors;
            if k > ds.n_rows() - 1 {
                warn!("ADASYN: k = {k} exceeds available neighbors; using {}", ds.n_rows() - 1);
                k = ds.n_rows() - 1;
            }
            adasyn(minority.view(), ds.majority().view(), n_new, k, &mut rng)?
        }
        Strategy::Kde => kde_oversample(minority.view(), n_new, &mut rng)?,
        Strategy::NearMiss => unreachable!("handled above"),
    };

    let dataset = ds.append(synthetic.rows.view(), Label::Positive)?;
    let mut synthetic_mask = vec![false; ds.n_rows()];
    synthetic_mask.resize(dataset.n_rows(), true);
    Ok(ResampleResult {
        dataset,
        synthetic_mask,
        provenance: synthetic.provenance,
    })
}
