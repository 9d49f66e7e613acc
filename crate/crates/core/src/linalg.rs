//! Small dense linear-algebra helpers used by the density estimator.
//!
//! Dimensions here are the feature counts of tabular datasets (tens, rarely a
//! few hundred), so plain O(d³) loops are sufficient.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

/// Failure of a Cholesky factorization: the leading minor ending at `pivot`
/// is not positive definite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub pivot: usize,
    pub value: f64,
}

/// Lower-triangular `L` with `L Lᵀ = a`. Only the lower triangle of `a` is read.
pub fn cholesky(a: ArrayView2<'_, f64>) -> Result<Array2<f64>, NotPositiveDefinite> {
    let d = a.nrows();
    assert_eq!(d, a.ncols(), "cholesky needs a square matrix");
    let mut l = Array2::<f64>::zeros((d, d));
    for j in 0..d {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(NotPositiveDefinite { pivot: j, value: diag });
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..d {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L y = b` for lower-triangular `L` by forward substitution, writing
/// `y` into `out`.
pub fn forward_substitute(l: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>, out: &mut [f64]) {
    let d = l.nrows();
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * out[k];
        }
        out[i] = s / l[[i, i]];
    }
}

pub fn column_means(x: ArrayView2<'_, f64>) -> Array1<f64> {
    let n = x.nrows() as f64;
    x.sum_axis(Axis(0)) / n
}

/// Unbiased (divide by `n - 1`) sample covariance of the rows of `x`.
pub fn sample_covariance(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    assert!(n >= 2, "covariance needs at least two rows");
    let mean = column_means(x);
    let centered = &x - &mean.view().insert_axis(Axis(0));
    let mut cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    // exact symmetry
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (cov[[i, j]] + cov[[j, i]]);
            cov[[i, j]] = v;
            cov[[j, i]] = v;
        }
    }
    cov
}

pub fn is_symmetric(a: ArrayView2<'_, f64>, tol: f64) -> bool {
    let d = a.nrows();
    if d != a.ncols() {
        return false;
    }
    (0..d).all(|i| (0..i).all(|j| (a[[i, j]] - a[[j, i]]).abs() <= tol))
}

pub fn squared_euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    squared_euclidean(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_reproduces_matrix() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let l = cholesky(a.view()).unwrap();
        let back = l.dot(&l.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(l[[0, 1]], 0.0);
    }

    #[test]
    fn cholesky_reports_failing_pivot() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        let err = cholesky(a.view()).unwrap_err();
        assert_eq!(err.pivot, 1);
    }

    #[test]
    fn forward_substitution_solves() {
        let l = array![[2.0, 0.0], [1.0, 3.0]];
        let b = array![4.0, 11.0];
        let mut y = [0.0; 2];
        forward_substitute(l.view(), b.view(), &mut y);
        assert_eq!(y, [2.0, 3.0]);
    }

    #[test]
    fn unbiased_covariance_of_two_points() {
        let x = array![[0.0], [2.0]];
        assert_eq!(sample_covariance(x.view())[[0, 0]], 2.0);
    }
}
