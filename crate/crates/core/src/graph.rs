//! Graph construction: point clouds, sparse symmetric affinity matrices,
//! degrees, the deflation vector and batch neighborhoods.
//!
//! Affinity matrices are stored in compressed-row form and are symmetric both
//! structurally and numerically: for every stored `(i, j)` the mirrored
//! `(j, i)` entry exists with the same value. Column indices are strictly
//! increasing within a row and exact zeros are never stored.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{input_err, Error, Result};
use crate::mat::Mat;

#[allow(unused_imports)]
use num_traits::Float;

/// A set of `n` points in `R^m`, optionally labeled.
#[derive(Debug, Clone)]
pub struct PointCloud {
    points: Mat,
    labels: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(points: Mat, labels: Option<Vec<u32>>) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(input_err!("point cloud must have n >= 1 points of dimension m >= 1"));
        }
        if let Some(l) = &labels {
            if l.len() != points.rows() {
                return Err(input_err!(
                    "label count {} does not match point count {}",
                    l.len(),
                    points.rows()
                ));
            }
        }
        Ok(PointCloud { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn points(&self) -> &Mat {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn squared_dist(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Symmetric sparse matrix with nonnegative entries, compressed-row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Builds from `(i, j, w)` triplets. Exact zeros are dropped; duplicate
    /// coordinates, negative weights, asymmetry or out-of-range indices are
    /// rejected.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, w) in triplets {
            if i >= n || j >= n {
                return Err(input_err!("entry ({i}, {j}) out of range for n = {n}"));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(input_err!("entry ({i}, {j}) has invalid weight {w}"));
            }
            if w != 0.0 {
                entries.push((i, j, w));
            }
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(input_err!("duplicate entry ({}, {})", pair[0].0, pair[0].1));
            }
        }

        let mut row_ptr = vec![0usize; n + 1];
        for &(i, _, _) in &entries {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx: Vec<usize> = entries.iter().map(|e| e.1).collect();
        let values: Vec<f64> = entries.iter().map(|e| e.2).collect();
        let m = SparseSym { n, row_ptr, col_idx, values };
        m.check_symmetry()?;
        Ok(m)
    }

    pub fn from_dense(a: &Mat) -> Result<Self> {
        assert_eq!(a.rows(), a.cols());
        let mut triplets = Vec::new();
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                if a[(i, j)] != 0.0 {
                    triplets.push((i, j, a[(i, j)]));
                }
            }
        }
        SparseSym::from_triplets(a.rows(), &triplets)
    }

    fn check_symmetry(&self) -> Result<()> {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &w) in cols.iter().zip(vals) {
                if self.get(j, i) != w {
                    return Err(input_err!(
                        "asymmetric entries: ({i}, {j}) = {w} but ({j}, {i}) = {}",
                        self.get(j, i)
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    /// Iterator over stored entries `(i, j, w)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &w)| (i, j, w))
        })
    }

    pub fn to_dense(&self) -> Mat {
        let mut a = Mat::zeros(self.n, self.n);
        for (i, j, w) in self.iter() {
            a[(i, j)] = w;
        }
        a
    }

    /// `W * y` for dense `y` with `n` rows.
    pub fn times_dense(&self, y: &Mat) -> Mat {
        assert_eq!(y.rows(), self.n);
        let k = y.cols();
        let mut out = Mat::zeros(self.n, k);
        if k == 2 {
            // narrow iterates dominate the solver workloads; keep the
            // accumulators in registers
            for i in 0..self.n {
                let (cols, vals) = self.row(i);
                let (mut a, mut b) = (0.0, 0.0);
                for (&j, &w) in cols.iter().zip(vals) {
                    let yr = y.row(j);
                    a += w * yr[0];
                    b += w * yr[1];
                }
                let orow = out.row_mut(i);
                orow[0] = a;
                orow[1] = b;
            }
            return out;
        }
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let orow = out.row_mut(i);
            for (&j, &w) in cols.iter().zip(vals) {
                for (o, &v) in orow.iter_mut().zip(y.row(j)) {
                    *o += w * v;
                }
            }
        }
        out
    }

    /// Principal submatrix on `idx`, reindexed to `0..idx.len()`.
    pub fn principal_submatrix(&self, idx: &IndexSet) -> SparseSym {
        let mut pos = vec![usize::MAX; self.n];
        for (local, &global) in idx.as_slice().iter().enumerate() {
            pos[global] = local;
        }
        let mut row_ptr = Vec::with_capacity(idx.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &g in idx.as_slice() {
            let (cols, vals) = self.row(g);
            for (&j, &w) in cols.iter().zip(vals) {
                if pos[j] != usize::MAX {
                    col_idx.push(pos[j]);
                    values.push(w);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseSym { n: idx.len(), row_ptr, col_idx, values }
    }
}

/// Sorted, duplicate-free node indices; used for batches and neighborhoods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    idx: Vec<usize>,
}

impl IndexSet {
    pub fn new(mut idx: Vec<usize>, n: usize) -> Result<Self> {
        idx.sort_unstable();
        for pair in idx.windows(2) {
            if pair[0] == pair[1] {
                return Err(input_err!("duplicate index {}", pair[0]));
            }
        }
        if let Some(&last) = idx.last() {
            if last >= n {
                return Err(input_err!("index {last} out of range for n = {n}"));
            }
        }
        Ok(IndexSet { idx })
    }

    /// All nodes `0..n`.
    pub fn full(n: usize) -> Self {
        IndexSet { idx: (0..n).collect() }
    }

    pub(crate) fn from_sorted(idx: Vec<usize>) -> Self {
        debug_assert!(idx.windows(2).all(|p| p[0] < p[1]));
        IndexSet { idx }
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.idx
    }

    pub fn contains(&self, i: usize) -> bool {
        self.idx.binary_search(&i).is_ok()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut merged = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (0, 0);
        while a < self.idx.len() || b < other.idx.len() {
            match (self.idx.get(a), other.idx.get(b)) {
                (Some(&x), Some(&y)) if x == y => {
                    merged.push(x);
                    a += 1;
                    b += 1;
                }
                (Some(&x), Some(&y)) if x < y => {
                    merged.push(x);
                    a += 1;
                }
                (Some(_), Some(&y)) => {
                    merged.push(y);
                    b += 1;
                }
                (Some(&x), None) => {
                    merged.push(x);
                    a += 1;
                }
                (None, Some(&y)) => {
                    merged.push(y);
                    b += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        IndexSet { idx: merged }
    }
}

/// Which exponent the Gaussian kernel uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelConvention {
    /// `exp(-r^2 / (2 sigma^2))` — the default.
    #[default]
    TwoSigmaSquared,
    /// `exp(-r^2 / sigma^2)`.
    SigmaSquared,
}

/// Gaussian affinity truncated below `threshold`.
///
/// Stores `W[i][j] = exp(-|x_i - x_j|^2 / (2 sigma^2))` whenever that value
/// exceeds `threshold` (strictly), plus unit diagonal entries. The
/// alternative exponent convention divides by `sigma^2` instead.
pub fn build_gaussian_affinity(
    pc: &PointCloud,
    sigma: f64,
    threshold: f64,
    convention: KernelConvention,
) -> Result<SparseSym> {
    if !(sigma > 0.0) {
        return Err(input_err!("sigma must be positive, got {sigma}"));
    }
    if !(0.0..1.0).contains(&threshold) {
        return Err(input_err!("threshold must lie in [0, 1), got {threshold}"));
    }
    if !pc.points().is_finite() {
        return Err(input_err!("point cloud contains non-finite coordinates"));
    }
    let denom = match convention {
        KernelConvention::TwoSigmaSquared => 2.0 * sigma * sigma,
        KernelConvention::SigmaSquared => sigma * sigma,
    };
    let n = pc.len();
    let mut triplets = Vec::new();
    for i in 0..n {
        triplets.push((i, i, 1.0));
        for j in (i + 1)..n {
            let w = (-pc.squared_dist(i, j) / denom).exp();
            if w > threshold {
                triplets.push((i, j, w));
                triplets.push((j, i, w));
            }
        }
    }
    SparseSym::from_triplets(n, &triplets)
}

/// Symmetrized k-nearest-neighbor affinity `W = (A + A^T) / 2` where
/// `A[i][j] = 1` iff `j` is among the `k` nearest neighbors of `i` (self
/// excluded, distance ties broken by lower index). Entries are `0.5` for
/// one-sided neighbor pairs and `1.0` for mutual ones; the diagonal is zero.
pub fn build_knn_affinity(pc: &PointCloud, k: usize) -> Result<SparseSym> {
    let n = pc.len();
    if k == 0 || k >= n {
        return Err(input_err!("k must satisfy 1 <= k < n, got k = {k}, n = {n}"));
    }
    if !pc.points().is_finite() {
        return Err(input_err!("point cloud contains non-finite coordinates"));
    }
    let neighbors = knn_indices(pc, k);
    let mut half: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, nbrs) in neighbors.iter().enumerate() {
        for &j in nbrs {
            half[i.min(j)].push(i.max(j));
        }
    }
    let mut triplets = Vec::new();
    for (i, mut js) in half.into_iter().enumerate() {
        js.sort_unstable();
        let mut prev = usize::MAX;
        let mut count = 0usize;
        js.push(usize::MAX); // flush sentinel
        for j in js {
            if j == prev {
                count += 1;
            } else {
                if prev != usize::MAX && count > 0 {
                    let w = if count == 2 { 1.0 } else { 0.5 };
                    triplets.push((i, prev, w));
                    triplets.push((prev, i, w));
                }
                prev = j;
                count = 1;
            }
        }
    }
    SparseSym::from_triplets(n, &triplets)
}

/// Exact k-nearest neighbors of every point by brute-force scan.
fn knn_indices(pc: &PointCloud, k: usize) -> Vec<Vec<usize>> {
    let n = pc.len();
    (0..n)
        .map(|i| {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| {
                let da = pc.squared_dist(i, a);
                let db = pc.squared_dist(i, b);
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            });
            order.truncate(k);
            order
        })
        .collect()
}

/// Row sums of `W`. Errors on any zero degree (isolated node).
pub fn degree(w: &SparseSym) -> Result<Vec<f64>> {
    let mut d = vec![0.0; w.n()];
    for (i, _, v) in w.iter() {
        d[i] += v;
    }
    if let Some(i) = d.iter().position(|&x| x == 0.0) {
        return Err(Error::IsolatedNode(i));
    }
    Ok(d)
}

/// Deflation vector `eta = d / sqrt(sum(d))`, so that `(W - eta eta^T)`
/// annihilates the constant vector.
pub fn deflation_vector(d: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = d.iter().position(|&x| !(x > 0.0)) {
        return Err(input_err!("nonpositive degree {} at node {i}", d[i]));
    }
    let total: f64 = d.iter().sum();
    let scale = 1.0 / total.sqrt();
    Ok(d.iter().map(|&x| x * scale).collect())
}

/// The neighborhood of a batch: every node reachable by one stored entry
/// from a batch row, `{ j : W[i][j] != 0 for some i in batch }`.
pub fn neighborhood(w: &SparseSym, batch: &IndexSet) -> Result<IndexSet> {
    if batch.is_empty() {
        return Err(input_err!("batch must be nonempty"));
    }
    if let Some(&max) = batch.as_slice().last() {
        if max >= w.n() {
            return Err(input_err!("batch index {max} out of range for n = {}", w.n()));
        }
    }
    let mut mark = vec![false; w.n()];
    for &i in batch.as_slice() {
        let (cols, _) = w.row(i);
        for &j in cols {
            mark[j] = true;
        }
    }
    let idx: Vec<usize> = (0..w.n()).filter(|&j| mark[j]).collect();
    Ok(IndexSet::from_sorted(idx))
}

/// Degrees of a (sub)matrix without the isolated-node check; rows may sum
/// to zero, which batch-local schemes must tolerate.
pub(crate) fn sub_degrees(w: &SparseSym) -> Vec<f64> {
    let mut d = vec![0.0; w.n()];
    for (i, _, v) in w.iter() {
        d[i] += v;
    }
    d
}

/// Deflation vector of possibly-zero batch-local degrees; all-zero degrees
/// yield the zero vector (no deflation contribution).
pub(crate) fn sub_deflation(d: &[f64]) -> Vec<f64> {
    let total: f64 = d.iter().sum();
    if total <= 0.0 {
        return vec![0.0; d.len()];
    }
    let scale = 1.0 / total.sqrt();
    d.iter().map(|&x| x * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::norm2;

    fn cloud(points: &[&[f64]]) -> PointCloud {
        let m = points[0].len();
        let flat: Vec<f64> = points.iter().flat_map(|p| p.iter().copied()).collect();
        PointCloud::new(Mat::from_flat(points.len(), m, flat), None).unwrap()
    }

    /// Path graph 0 - 1 - 2 with unit weights and zero diagonal.
    pub(crate) fn path3() -> SparseSym {
        SparseSym::from_triplets(3, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)])
            .unwrap()
    }

    #[test]
    fn gaussian_coincident_points() {
        let pc = cloud(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let w = build_gaussian_affinity(&pc, 1.0, 0.6, KernelConvention::TwoSigmaSquared).unwrap();
        assert_eq!(w.get(0, 1), 1.0);
        assert_eq!(w.get(0, 0), 1.0);
        assert_eq!(w.get(1, 1), 1.0);
    }

    #[test]
    fn gaussian_threshold_keeps_and_drops() {
        // distance 0.1, sigma 0.1: exp(-0.5) ~ 0.6065 > 0.6 -> kept
        let pc = cloud(&[&[0.0], &[0.1]]);
        let w = build_gaussian_affinity(&pc, 0.1, 0.6, KernelConvention::TwoSigmaSquared).unwrap();
        let expected = (-0.5f64).exp();
        assert!((w.get(0, 1) - expected).abs() < 1e-15);

        // distance 0.11: exp(-0.605) ~ 0.546 < 0.6 -> absent
        let pc = cloud(&[&[0.0], &[0.11]]);
        let w = build_gaussian_affinity(&pc, 0.1, 0.6, KernelConvention::TwoSigmaSquared).unwrap();
        assert_eq!(w.get(0, 1), 0.0);
        assert_eq!(w.nnz(), 2); // diagonal only
    }

    #[test]
    fn gaussian_plain_convention_changes_exponent() {
        let pc = cloud(&[&[0.0], &[0.1]]);
        let w = build_gaussian_affinity(&pc, 0.1, 0.0, KernelConvention::SigmaSquared).unwrap();
        assert!((w.get(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_rejects_bad_inputs() {
        let pc = cloud(&[&[0.0], &[1.0]]);
        assert!(build_gaussian_affinity(&pc, 0.0, 0.5, KernelConvention::default()).is_err());
        assert!(build_gaussian_affinity(&pc, 1.0, 1.0, KernelConvention::default()).is_err());
        let bad = cloud(&[&[f64::NAN], &[1.0]]);
        assert!(build_gaussian_affinity(&bad, 1.0, 0.5, KernelConvention::default()).is_err());
    }

    #[test]
    fn knn_collinear_example() {
        // points at 0, 1, 10 with k = 1: 0 <-> 1 mutual, 2 -> 1 one-sided
        let pc = cloud(&[&[0.0], &[1.0], &[10.0]]);
        let w = build_knn_affinity(&pc, 1).unwrap();
        assert_eq!(w.get(0, 1), 1.0);
        assert_eq!(w.get(1, 2), 0.5);
        assert_eq!(w.get(2, 1), 0.5);
        assert_eq!(w.get(0, 2), 0.0);
        assert_eq!(w.get(0, 0), 0.0);
    }

    #[test]
    fn knn_two_points() {
        let pc = cloud(&[&[0.0], &[1.0]]);
        let w = build_knn_affinity(&pc, 1).unwrap();
        assert_eq!(w.get(0, 1), 1.0);
        assert_eq!(w.get(1, 0), 1.0);
        assert_eq!(w.nnz(), 2);
    }

    #[test]
    fn knn_duplicate_points_tie_break_is_deterministic() {
        let pc = cloud(&[&[0.0], &[0.0], &[0.0], &[5.0]]);
        let w1 = build_knn_affinity(&pc, 1).unwrap();
        let w2 = build_knn_affinity(&pc, 1).unwrap();
        assert_eq!(w1, w2);
        // every point's nearest neighbor is the lowest-index coincident point
        assert_eq!(w1.get(1, 0), 1.0); // mutual: 0 -> 1 (tie, lower index 1), 1 -> 0
        assert_eq!(w1.get(3, 0), 0.5); // one-sided: 3 -> 0
    }

    #[test]
    fn knn_rejects_k_out_of_range() {
        let pc = cloud(&[&[0.0], &[1.0]]);
        assert!(build_knn_affinity(&pc, 2).is_err());
        assert!(build_knn_affinity(&pc, 0).is_err());
    }

    #[test]
    fn degree_row_sums() {
        let w = SparseSym::from_triplets(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(degree(&w).unwrap(), vec![1.0, 1.0]);
        assert_eq!(degree(&path3()).unwrap(), vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn degree_rejects_isolated_node() {
        let w = SparseSym::from_triplets(3, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(degree(&w), Err(Error::IsolatedNode(2)));
    }

    #[test]
    fn deflation_examples() {
        assert_eq!(deflation_vector(&[1.0, 2.0, 1.0]).unwrap(), vec![0.5, 1.0, 0.5]);
        let eta = deflation_vector(&[1.0, 1.0]).unwrap();
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((eta[0] - inv_sqrt2).abs() < 1e-15 && (eta[1] - inv_sqrt2).abs() < 1e-15);
        assert!(deflation_vector(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn deflated_pencil_annihilates_constants() {
        let w = path3();
        let d = degree(&w).unwrap();
        let eta = deflation_vector(&d).unwrap();
        // (W - eta eta^T) 1 = d - eta * sum(eta)
        let eta_sum: f64 = eta.iter().sum();
        let scale = norm2(&d);
        for i in 0..3 {
            let r = d[i] - eta[i] * eta_sum;
            assert!(r.abs() <= 1e-12 * scale, "residual {r} at row {i}");
        }
    }

    #[test]
    fn neighborhood_on_path() {
        let w = path3();
        let b = IndexSet::new(vec![0], 3).unwrap();
        let nb = neighborhood(&w, &b).unwrap();
        assert_eq!(nb.as_slice(), &[1]); // zero diagonal: 0 itself not included

        let all = IndexSet::full(3);
        assert_eq!(neighborhood(&w, &all).unwrap().as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn neighborhood_of_dense_graph_is_everything() {
        let n = 5;
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                t.push((i, j, 1.0));
            }
        }
        let w = SparseSym::from_triplets(n, &t).unwrap();
        let b = IndexSet::new(vec![2], n).unwrap();
        assert_eq!(neighborhood(&w, &b).unwrap().len(), n);
    }

    #[test]
    fn from_triplets_rejects_asymmetry() {
        assert!(SparseSym::from_triplets(2, &[(0, 1, 1.0)]).is_err());
        assert!(SparseSym::from_triplets(2, &[(0, 1, 1.0), (1, 0, 0.5)]).is_err());
    }

    #[test]
    fn principal_submatrix_reindexes() {
        let w = path3();
        let idx = IndexSet::new(vec![0, 2], 3).unwrap();
        let sub = w.principal_submatrix(&idx);
        assert_eq!(sub.n(), 2);
        assert_eq!(sub.nnz(), 0); // 0 and 2 are not adjacent
        let idx = IndexSet::new(vec![0, 1], 3).unwrap();
        let sub = w.principal_submatrix(&idx);
        assert_eq!(sub.get(0, 1), 1.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_cloud(max_n: usize) -> impl Strategy<Value = PointCloud> {
            (2usize..max_n, 1usize..4).prop_flat_map(|(n, m)| {
                proptest::collection::vec(-2.0f64..2.0, n * m)
                    .prop_map(move |flat| {
                        PointCloud::new(Mat::from_flat(n, m, flat), None).unwrap()
                    })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn gaussian_symmetric_and_threshold_faithful(
                pc in arb_cloud(24),
                sigma in 0.2f64..2.0,
                threshold in 0.0f64..0.9,
            ) {
                let w = build_gaussian_affinity(
                    &pc, sigma, threshold, KernelConvention::TwoSigmaSquared,
                ).unwrap();
                for (i, j, v) in w.iter() {
                    prop_assert_eq!(w.get(j, i), v);
                    prop_assert!(v > threshold);
                }
                // brute force: every above-threshold kernel value is stored
                for i in 0..pc.len() {
                    for j in 0..pc.len() {
                        if i == j { continue; }
                        let k = (-pc.squared_dist(i, j) / (2.0 * sigma * sigma)).exp();
                        if k > threshold {
                            prop_assert!((w.get(i, j) - k).abs() < 1e-15);
                        } else {
                            prop_assert_eq!(w.get(i, j), 0.0);
                        }
                    }
                }
            }

            #[test]
            fn knn_values_and_presym_degree(pc in arb_cloud(20), k in 1usize..5) {
                prop_assume!(k < pc.len());
                let w = build_knn_affinity(&pc, k).unwrap();
                for (_, _, v) in w.iter() {
                    prop_assert!(v == 0.5 || v == 1.0);
                }
                // W = (A + A^T)/2 with A row sums exactly k
                for i in 0..pc.len() {
                    let (_, vals) = w.row(i);
                    let out_deg: f64 = vals.iter().sum::<f64>();
                    // row i of A has exactly k ones; each contributes 0.5 to W row i,
                    // plus 0.5 per in-edge
                    prop_assert!(out_deg >= k as f64 * 0.5 - 1e-12);
                }
                // reconstruct A from brute-force search and compare exactly
                let nbrs = super::super::knn_indices(&pc, k);
                for (i, js) in nbrs.iter().enumerate() {
                    prop_assert_eq!(js.len(), k);
                    for &j in js {
                        let expect = if nbrs[j].contains(&i) { 1.0 } else { 0.5 };
                        prop_assert_eq!(w.get(i, j), expect);
                    }
                }
            }

            #[test]
            fn neighborhood_matches_brute_force(
                pc in arb_cloud(16),
                raw in proptest::collection::vec(0usize..16, 1..6),
            ) {
                let w = build_gaussian_affinity(
                    &pc, 0.5, 0.3, KernelConvention::TwoSigmaSquared,
                ).unwrap();
                let picked: Vec<usize> =
                    raw.into_iter().map(|r| r % pc.len()).collect();
                let mut uniq = picked.clone();
                uniq.sort_unstable();
                uniq.dedup();
                let batch = IndexSet::new(uniq, pc.len()).unwrap();
                let nb = neighborhood(&w, &batch).unwrap();
                let dense = w.to_dense();
                let brute: Vec<usize> = (0..pc.len())
                    .filter(|&j| batch.as_slice().iter().any(|&i| dense[(i, j)] != 0.0))
                    .collect();
                prop_assert_eq!(nb.as_slice(), &brute[..]);
            }

            #[test]
            fn deflation_identities(deg in proptest::collection::vec(0.1f64..5.0, 2..30)) {
                let eta = deflation_vector(&deg).unwrap();
                let total: f64 = deg.iter().sum();
                let sum_eta: f64 = eta.iter().sum();
                prop_assert!((sum_eta - total.sqrt()).abs() < 1e-10 * total.sqrt());
            }
        }
    }
}
