//! Multivariate Gaussian kernel density estimation.
//!
//! For sample points `x_1..x_n` in `d` dimensions and a bandwidth covariance
//! `H`, the estimate is
//!
//! ```text
//! f(x) = 1/n Σ_i (2π)^{-d/2} |H|^{-1/2} exp(-½ (x - x_i)ᵀ H⁻¹ (x - x_i))
//! ```
//!
//! With [`BandwidthRule::Scott`] the bandwidth is `H = n^{-2/(d+4)} S`, where
//! `S` is the unbiased sample covariance. Note the squared factor: the Scott
//! factor `n^{-1/(d+4)}` scales standard deviations, so the covariance is
//! scaled by its square. This is what common implementations (SciPy's
//! `gaussian_kde` among them) do.
//!
//! `H⁻¹` is never formed: quadratic forms go through a triangular solve with
//! the Cholesky factor `L`, and kernel sums are accumulated in log space so
//! far-away queries underflow cleanly to zero instead of producing NaN.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky, forward_substitute, NotPositiveDefinite};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// `n^(-1/(d+4))`.
pub fn scott_factor(n: usize, d: usize) -> f64 {
    (n as f64).powf(-1.0 / (d as f64 + 4.0))
}

#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthRule {
    /// `H = scott_factor(n, d)² · S`.
    Scott,
    /// A caller-supplied symmetric positive definite bandwidth covariance.
    Fixed(Array2<f64>),
}

/// A fitted density estimate. Immutable after [`KdeModel::fit`].
#[derive(Debug, Clone)]
pub struct KdeModel {
    points: Array2<f64>,
    bandwidth_cov: Array2<f64>,
    chol_factor: Array2<f64>,
    log_norm_const: f64,
}

impl KdeModel {
    /// Fits the estimator on the rows of `points`.
    ///
    /// The Scott rule needs `n >= 2` and a nonsingular sample covariance; a
    /// singular covariance is reported, never silently regularized. A fixed
    /// bandwidth only needs one point.
    pub fn fit(points: ArrayView2<'_, f64>, rule: &BandwidthRule) -> Result<Self> {
        let (n, d) = points.dim();
        if d == 0 {
            return Err(Error::Data("points have zero columns".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("points contain non-finite values".into()));
        }
        let bandwidth_cov = match rule {
            BandwidthRule::Scott => {
                if n < 2 {
                    return Err(Error::Data(format!("Scott bandwidth needs at least 2 points, got {n}")));
                }
                let cov = linalg::sample_covariance(points);
                if let Err(e) = cholesky(cov.view()) {
                    return Err(Error::Fit(describe_singular(&cov, e)));
                }
                let f = scott_factor(n, d);
                cov * (f * f)
            }
            BandwidthRule::Fixed(h) => {
                if n < 1 {
                    return Err(Error::Data("no points to fit".into()));
                }
                if h.dim() != (d, d) {
                    return Err(Error::shape(format!("{d}x{d} bandwidth"), format!("{:?}", h.dim())));
                }
                if !linalg::is_symmetric(h.view(), 1e-12) {
                    return Err(Error::Fit("fixed bandwidth matrix is not symmetric".into()));
                }
                h.clone()
            }
        };
        let chol_factor = cholesky(bandwidth_cov.view()).map_err(|e| {
            Error::Fit(format!(
                "bandwidth matrix is not positive definite (pivot {} = {:e})",
                e.pivot, e.value
            ))
        })?;
        let log_det_half: f64 = chol_factor.diag().iter().map(|v| v.ln()).sum();
        let log_norm_const = -0.5 * d as f64 * LN_2PI - log_det_half;
        Ok(KdeModel {
            points: points.to_owned(),
            bandwidth_cov,
            chol_factor,
            log_norm_const,
        })
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn bandwidth_cov(&self) -> ArrayView2<'_, f64> {
        self.bandwidth_cov.view()
    }

    pub fn chol_factor(&self) -> ArrayView2<'_, f64> {
        self.chol_factor.view()
    }

    /// `ln (2π)^{-d/2} |H|^{-1/2}`.
    pub fn log_norm_const(&self) -> f64 {
        self.log_norm_const
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn n_points(&self) -> usize {
        self.points.nrows()
    }

    pub fn log_density(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::shape(format!("query of length {d}"), x.len()));
        }
        let mut diff = Array1::<f64>::zeros(d);
        let mut y = vec![0.0; d];
        let log_kernels: Vec<f64> = self
            .points
            .rows()
            .into_iter()
            .map(|p| {
                diff.assign(&(&x - &p));
                forward_substitute(self.chol_factor.view(), diff.view(), &mut y);
                let quad: f64 = y.iter().map(|v| v * v).sum();
                self.log_norm_const - 0.5 * quad
            })
            .collect();
        Ok(log_sum_exp(&log_kernels) - (self.n_points() as f64).ln())
    }

    /// Density estimate at `x`. Nonnegative; far-away queries give 0, never NaN.
    pub fn density(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// Draws `m` samples; see [`KdeModel::sample_with_centers`].
    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Array2<f64> {
        self.sample_with_centers(m, rng).0
    }

    /// Draws `m` samples from the estimated density together with the index
    /// of the fitted point each sample was centered on.
    ///
    /// Each row is `points[i] + L z` with `i` uniform over the fitted points
    /// and `z` a vector of independent standard normals. Per row, the center
    /// index is drawn first, then the `d` normals.
    pub fn sample_with_centers<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> (Array2<f64>, Vec<usize>) {
        let (n, d) = self.points.dim();
        let mut out = Array2::<f64>::zeros((m, d));
        let mut centers = Vec::with_capacity(m);
        let mut z = vec![0.0; d];
        for mut row in out.rows_mut() {
            let i = rng.random_range(0..n);
            centers.push(i);
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            for r in 0..d {
                let mut s = self.points[[i, r]];
                for c in 0..=r {
                    s += self.chol_factor[[r, c]] * z[c];
                }
                row[r] = s;
            }
        }
        (out, centers)
    }
}

fn describe_singular(cov: &Array2<f64>, e: NotPositiveDefinite) -> String {
    let d = cov.nrows();
    if let Some(j) = (0..d).find(|&j| !(cov[[j, j]] > 0.0)) {
        return format!("sample covariance is singular: feature {j} has zero variance");
    }
    if e.pivot == 0 {
        return "sample covariance is singular at feature 0".into();
    }
    format!(
        "sample covariance is singular: feature {} is a linear combination of features 0..{} \
         (fewer independent points than dimensions?)",
        e.pivot, e.pivot
    )
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + s.ln()
}

/// Leave-one-out log-likelihood `Σ_i ln f₋ᵢ(x_i)` for each multiplier `c`
/// applied to the Scott bandwidth standard deviations (`H_c = c² H_scott`).
pub fn loo_log_likelihoods(points: ArrayView2<'_, f64>, multipliers: &[f64]) -> Result<Vec<f64>> {
    let (n, d) = points.dim();
    if n < 3 {
        return Err(Error::Argument(format!("leave-one-out search needs at least 3 points, got {n}")));
    }
    if let Some(c) = multipliers.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
        return Err(Error::Argument(format!("bandwidth multipliers must be positive, got {c}")));
    }
    let scott = KdeModel::fit(points, &BandwidthRule::Scott)?;

    // Mahalanobis distances under H_scott; scaling H by c² divides them by c².
    let mut quad = Array2::<f64>::zeros((n, n));
    let mut y = vec![0.0; d];
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = &points.row(i) - &points.row(j);
            forward_substitute(scott.chol_factor.view(), diff.view(), &mut y);
            let q: f64 = y.iter().map(|v| v * v).sum();
            quad[[i, j]] = q;
            quad[[j, i]] = q;
        }
    }
    let ln_rest = ((n - 1) as f64).ln();
    let mut terms = Vec::with_capacity(n - 1);
    Ok(multipliers
        .iter()
        .map(|&c| {
            let log_norm = scott.log_norm_const - d as f64 * c.ln();
            let inv_c2 = 1.0 / (c * c);
            (0..n)
                .map(|i| {
                    terms.clear();
                    terms.extend(
                        quad.index_axis(Axis(0), i)
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != i)
                            .map(|(_, q)| log_norm - 0.5 * q * inv_c2),
                    );
                    log_sum_exp(&terms) - ln_rest
                })
                .sum()
        })
        .collect())
}

/// Scores within this relative distance of the best are treated as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Grid search over multipliers of the Scott bandwidth maximizing the
/// leave-one-out log-likelihood. Returns the winning multiplier and the
/// corresponding fixed bandwidth. Ties go to the smallest multiplier.
pub fn select_loo_multiplier(points: ArrayView2<'_, f64>, grid: &[f64]) -> Result<(f64, BandwidthRule)> {
    if grid.is_empty() {
        return Err(Error::Argument("bandwidth grid is empty".into()));
    }
    let scores = loo_log_likelihoods(points, grid)?;
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));

    let mut best: Option<(f64, f64)> = None;
    for i in order {
        let (c, s) = (grid[i], scores[i]);
        if !s.is_finite() {
            continue;
        }
        match best {
            Some((_, b)) if s <= b + TIE_TOLERANCE * b.abs().max(1.0) => {}
            _ => best = Some((c, s)),
        }
    }
    let (c, _) = best.ok_or_else(|| Error::Search("every candidate bandwidth has -inf log-likelihood".into()))?;
    let (n, d) = points.dim();
    let f = scott_factor(n, d);
    let h = linalg::sample_covariance(points) * (c * c * f * f);
    Ok((c, BandwidthRule::Fixed(h)))
}

pub fn loo_loglik_bandwidth_search(points: ArrayView2<'_, f64>, grid: &[f64]) -> Result<BandwidthRule> {
    select_loo_multiplier(points, grid).map(|(_, rule)| rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Seed;
    use ndarray::array;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn scott_factor_values() {
        assert_eq!(scott_factor(32, 1), 0.5);
        assert_eq!(scott_factor(1, 7), 1.0);
        // 1000^(-1/7) evaluated with 50-digit arithmetic: 0.37275937203149401...
        assert!((scott_factor(1000, 3) - 0.372_759_372_031_494).abs() < 1e-12);
    }

    #[test]
    fn two_point_scott_bandwidth() {
        let m = KdeModel::fit(array![[0.0], [2.0]].view(), &BandwidthRule::Scott).unwrap();
        // S = 2, H = 2^(-2/5) * 2
        assert!((m.bandwidth_cov()[[0, 0]] - 1.515_716_566_510_398).abs() < 1e-12);
        let h = scott_factor(2, 1) * 2f64.sqrt();
        assert!((m.bandwidth_cov()[[0, 0]] - h * h).abs() < 1e-12);
    }

    #[test]
    fn fixed_rule_passes_through() {
        let pts = array![[3.0, 1.0], [5.0, -2.0], [0.0, 0.5]];
        let eye = Array2::eye(2);
        let m = KdeModel::fit(pts.view(), &BandwidthRule::Fixed(eye.clone())).unwrap();
        assert_eq!(m.bandwidth_cov(), eye);
    }

    #[test]
    fn fixed_rule_rejects_asymmetric_or_indefinite() {
        let pts = array![[0.0, 0.0], [1.0, 1.0]];
        let asym = array![[1.0, 0.5], [0.0, 1.0]];
        assert!(matches!(KdeModel::fit(pts.view(), &BandwidthRule::Fixed(asym)), Err(Error::Fit(_))));
        let indef = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(KdeModel::fit(pts.view(), &BandwidthRule::Fixed(indef)), Err(Error::Fit(_))));
    }

    #[test]
    fn standard_normal_at_mode() {
        let m = KdeModel::fit(array![[0.0]].view(), &BandwidthRule::Fixed(array![[1.0]])).unwrap();
        let v = m.density(array![0.0].view()).unwrap();
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn far_query_underflows_without_nan() {
        let m = KdeModel::fit(array![[0.0, 0.0], [1.0, 0.3], [0.2, 1.0]].view(), &BandwidthRule::Scott).unwrap();
        let v = m.density(array![1e4, -1e4].view()).unwrap();
        assert!(v < 1e-300 && !v.is_nan());
        assert!(m.log_density(array![1e4, -1e4].view()).unwrap().is_finite());
    }

    #[test]
    fn dimension_mismatch() {
        let m = KdeModel::fit(array![[0.0], [1.0]].view(), &BandwidthRule::Scott).unwrap();
        assert!(matches!(m.density(array![0.0, 1.0].view()), Err(Error::Shape { .. })));
    }

    #[test]
    fn too_few_points_is_data_error() {
        assert!(matches!(KdeModel::fit(array![[1.0, 2.0]].view(), &BandwidthRule::Scott), Err(Error::Data(_))));
    }

    #[test]
    fn constant_column_named_in_error() {
        let pts = array![[1.0, 5.0], [2.0, 5.0], [4.0, 5.0]];
        match KdeModel::fit(pts.view(), &BandwidthRule::Scott) {
            Err(Error::Fit(msg)) => assert!(msg.contains("feature 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn collinear_columns_named_in_error() {
        let pts = array![[1.0, 2.0], [2.0, 4.0], [4.0, 8.0]];
        match KdeModel::fit(pts.view(), &BandwidthRule::Scott) {
            Err(Error::Fit(msg)) => assert!(msg.contains("feature 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_noise_sample_returns_a_fitted_point() {
        let pts = array![[1.0, 2.0], [3.0, 4.0], [5.0, 7.0]];
        let mut m = KdeModel::fit(pts.view(), &BandwidthRule::Scott).unwrap();
        m.chol_factor.fill(0.0);
        let s = m.sample(1, &mut Seed(3).stream("t"));
        assert!(pts.rows().into_iter().any(|r| r == s.row(0)));
    }

    #[test]
    fn sampling_is_deterministic() {
        let pts = array![[1.0, 2.0], [3.0, 4.5], [5.0, 7.0], [0.0, 1.0]];
        let m = KdeModel::fit(pts.view(), &BandwidthRule::Scott).unwrap();
        let a = m.sample_with_centers(50, &mut Seed(9).stream("s"));
        let b = m.sample_with_centers(50, &mut Seed(9).stream("s"));
        assert_eq!(a, b);
    }

    #[test]
    fn singleton_grid_returns_scott() {
        let pts = array![[0.1, 1.0], [1.3, 0.2], [2.2, 2.9], [0.7, 1.1]];
        let rule = loo_loglik_bandwidth_search(pts.view(), &[1.0]).unwrap();
        let scott = KdeModel::fit(pts.view(), &BandwidthRule::Scott).unwrap();
        match rule {
            BandwidthRule::Fixed(h) => {
                for (a, b) in h.iter().zip(scott.bandwidth_cov().iter()) {
                    assert!((a - b).abs() < 1e-15);
                }
            }
            _ => panic!(),
        }
    }

    #[test]
    fn loo_search_argument_errors() {
        let pts = array![[0.0], [1.0], [3.0]];
        assert!(loo_loglik_bandwidth_search(pts.view(), &[]).is_err());
        assert!(loo_loglik_bandwidth_search(pts.view(), &[1.0, -2.0]).is_err());
        assert!(loo_loglik_bandwidth_search(pts.slice(ndarray::s![..2, ..]), &[1.0]).is_err());
    }

    #[test]
    fn loo_tie_goes_to_smaller_multiplier() {
        // Equilateral triangle: every pair has the same Mahalanobis distance q,
        // so the score is g(c) = 3 (k - 2 ln c - q / (2c²)) and two multipliers
        // on either side of the maximum can score equally.
        let s3 = 3f64.sqrt() / 2.0;
        let pts = array![[0.0, 0.0], [1.0, 0.0], [0.5, s3]];
        let scores = |c: f64| loo_log_likelihoods(pts.view(), &[c]).unwrap()[0];
        let c_lo = 0.6;
        let target = scores(c_lo);
        // bisection for the partner multiplier above the maximum
        let (mut a, mut b) = (1.5, 50.0);
        assert!(scores(a) > target && scores(b) < target);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if scores(mid) > target {
                a = mid;
            } else {
                b = mid;
            }
        }
        let c_hi = 0.5 * (a + b);
        assert!((scores(c_hi) - target).abs() <= 1e-12 * target.abs().max(1.0));
        let (c, _) = select_loo_multiplier(pts.view(), &[c_hi, c_lo]).unwrap();
        assert_eq!(c, c_lo);
    }

    #[test]
    fn loo_prefers_interior_for_normal_data() {
        let grid: Vec<f64> = (0..=16).map(|i| 0.25 * 2f64.powf(i as f64 / 4.0)).collect();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut interior = 0;
        for seed in 0..10 {
            let mut rng = Seed(seed).stream("loo");
            let pts = Array2::from_shape_fn((100, 1), |_| normal.sample(&mut rng));
            let (c, _) = select_loo_multiplier(pts.view(), &grid).unwrap();
            if c > grid[0] && c < grid[grid.len() - 1] {
                interior += 1;
            }
        }
        assert!(interior >= 8, "interior selections: {interior}/10");
    }
}
