//! Exact Euclidean nearest-neighbor queries by linear scan.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::squared_euclidean;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub row: usize,
    pub distance: f64,
}

/// Brute-force index over the rows of a matrix.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    data: Array2<f64>,
}

fn by_distance_then_row(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl NeighborIndex {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::Data("neighbor index needs at least one row".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("neighbor index data must be finite".into()));
        }
        Ok(NeighborIndex { data })
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    /// The `k` nearest rows to `query`, nearest first. Equal distances are
    /// ordered by row index. `exclude` removes one row from the candidates.
    pub fn knn(&self, query: ArrayView1<'_, f64>, k: usize, exclude: Option<usize>) -> Result<Vec<Neighbor>> {
        if query.len() != self.dim() {
            return Err(Error::shape(format!("query of length {}", self.dim()), query.len()));
        }
        let candidates = self.len() - usize::from(exclude.is_some_and(|e| e < self.len()));
        if k == 0 || k > candidates {
            return Err(Error::Argument(format!("k = {k} but only {candidates} candidate rows")));
        }
        let mut dists: Vec<(f64, usize)> = self
            .data
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(i, row)| (squared_euclidean(query, row), i))
            .collect();
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, by_distance_then_row);
            dists.truncate(k);
        }
        dists.sort_unstable_by(by_distance_then_row);
        Ok(dists
            .into_iter()
            .map(|(sq, row)| Neighbor {
                row,
                distance: sq.sqrt(),
            })
            .collect())
    }

    /// Neighbors of every indexed row among the other rows.
    pub fn knn_of_each_row(&self, k: usize) -> Result<Vec<Vec<Neighbor>>> {
        (0..self.len())
            .map(|i| self.knn(self.data.row(i), k, Some(i)))
            .collect()
    }
}

/// Mean of the `k` smallest Euclidean distances from `point` to the rows of
/// `targets`.
pub fn avg_distance_to_k_nearest(point: ArrayView1<'_, f64>, targets: ArrayView2<'_, f64>, k: usize) -> Result<f64> {
    let m = targets.nrows();
    if k == 0 || k > m {
        return Err(Error::Argument(format!("k = {k} but only {m} target rows")));
    }
    if point.len() != targets.ncols() {
        return Err(Error::shape(format!("point of length {}", targets.ncols()), point.len()));
    }
    let mut d: Vec<f64> = targets
        .rows()
        .into_iter()
        .map(|t| squared_euclidean(point, t))
        .collect();
    if k < m {
        d.select_nth_unstable_by(k - 1, f64::total_cmp);
        d.truncate(k);
    }
    d.sort_unstable_by(f64::total_cmp);
    Ok(d.iter().map(|v| v.sqrt()).sum::<f64>() / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Seed;
    use crate::linalg::euclidean;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn collinear_points_with_self_exclusion() {
        let idx = NeighborIndex::new(array![[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]).unwrap();
        let nn = idx.knn(array![0.0, 0.0].view(), 2, Some(0)).unwrap();
        assert_eq!(
            nn,
            vec![Neighbor { row: 1, distance: 1.0 }, Neighbor { row: 2, distance: 3.0 }]
        );
    }

    #[test]
    fn ties_break_by_row_index() {
        let mut data = Array2::from_elem((8, 2), 10.0);
        data.row_mut(7).assign(&array![1.0, 0.0]);
        data.row_mut(4).assign(&array![-1.0, 0.0]);
        let idx = NeighborIndex::new(data).unwrap();
        let nn = idx.knn(array![0.0, 0.0].view(), 2, None).unwrap();
        assert_eq!(nn[0].row, 4);
        assert_eq!(nn[1].row, 7);
    }

    #[test]
    fn duplicate_of_query_is_a_neighbor_unless_excluded() {
        let idx = NeighborIndex::new(array![[1.0], [1.0], [5.0]]).unwrap();
        let nn = idx.knn(array![1.0].view(), 1, Some(0)).unwrap();
        assert_eq!(nn[0], Neighbor { row: 1, distance: 0.0 });
        let nn = idx.knn(array![1.0].view(), 3, None).unwrap();
        assert_eq!(nn.iter().map(|n| n.row).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn k_too_large() {
        let idx = NeighborIndex::new(array![[0.0], [1.0]]).unwrap();
        assert!(matches!(idx.knn(array![0.0].view(), 2, Some(0)), Err(Error::Argument(_))));
        assert!(idx.knn(array![0.0].view(), 2, None).is_ok());
        assert!(idx.knn(array![0.0].view(), 0, None).is_err());
    }

    #[test]
    fn avg_distance_examples() {
        let t = array![[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        let p = array![0.0, 0.0];
        assert_eq!(avg_distance_to_k_nearest(p.view(), t.view(), 2).unwrap(), 1.5);
        assert_eq!(avg_distance_to_k_nearest(p.view(), t.view(), 3).unwrap(), 2.0);
        assert!(avg_distance_to_k_nearest(p.view(), t.view(), 4).is_err());
    }

    fn brute_force(data: &Array2<f64>, q: ArrayView1<'_, f64>, exclude: Option<usize>) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = (0..data.nrows())
            .filter(|i| Some(*i) != exclude)
            .map(|i| (euclidean(q, data.row(i)), i))
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        all
    }

    #[test]
    fn agrees_with_full_sort() {
        let mut rng = Seed(17).stream("knn");
        for _ in 0..20 {
            // coarse grid values produce plenty of exact ties
            let data = Array2::from_shape_fn((50, 4), |_| rng.random_range(0..4) as f64);
            let idx = NeighborIndex::new(data.clone()).unwrap();
            let q = Array2::from_shape_fn((1, 4), |_| rng.random_range(0..4) as f64);
            let k = rng.random_range(1..=49);
            let ex = rng.random_range(0..50);
            let got = idx.knn(q.row(0), k, Some(ex)).unwrap();
            let want = brute_force(&data, q.row(0), Some(ex));
            for (g, w) in got.iter().zip(&want) {
                assert_eq!(g.row, w.1);
                assert!((g.distance - w.0).abs() < 1e-12);
            }
            let avg = avg_distance_to_k_nearest(q.row(0), data.view(), k).unwrap();
            let want_avg: f64 = brute_force(&data, q.row(0), None)[..k].iter().map(|p| p.0).sum::<f64>() / k as f64;
            assert!((avg - want_avg).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn knn_is_sorted_prefix_without_excluded(
            vals in prop::collection::vec(-5.0f64..5.0, 6..60),
            k_seed in 0usize..1000,
            ex_seed in 0usize..1000,
        ) {
            let n = vals.len() / 2;
            let data = Array2::from_shape_vec((n, 2), vals[..2 * n].to_vec()).unwrap();
            let idx = NeighborIndex::new(data.clone()).unwrap();
            let ex = ex_seed % n;
            let k = 1 + k_seed % (n - 1);
            let nn = idx.knn(data.row(ex), k, Some(ex)).unwrap();
            prop_assert_eq!(nn.len(), k);
            prop_assert!(nn.iter().all(|x| x.row != ex));
            prop_assert!(nn.windows(2).all(|w| w[0].distance <= w[1].distance));
            let want = brute_force(&data, data.row(ex), Some(ex));
            for (g, w) in nn.iter().zip(&want) {
                prop_assert_eq!(g.row, w.1);
            }
        }

        #[test]
        fn distance_is_symmetric(a in prop::collection::vec(-1e3f64..1e3, 5), b in prop::collection::vec(-1e3f64..1e3, 5)) {
            let a = ndarray::Array1::from(a);
            let b = ndarray::Array1::from(b);
            prop_assert!((euclidean(a.view(), b.view()) - euclidean(b.view(), a.view())).abs() < 1e-12);
        }
    }
}
