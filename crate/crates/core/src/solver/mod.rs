//! The orthogonalization-free iterative eigensolver for the affinity pencil
//! `(W, D)`, together with the orthogonally-constrained baseline.
//!
//! The quartic objective whose minimizers carry the leading eigenvectors is
//!
//! ```text
//! f2(Y) = (1/n^2) tr( -2 Y^T (W - eta eta^T) Y + (1/n^2) Y^T D Y Y^T D Y )
//! ```
//!
//! with the deflation term optional. Its (n-scaled) gradient can be
//! evaluated on a mini-batch three ways — from the batch submatrix alone
//! (`local`), from full affinity rows plus exactly recomputed global caches
//! (`full`), or from neighborhood rows plus incrementally maintained caches
//! (`neighbor`); `full` and `neighbor` are algebraically identical.
//!
//! [`driver::run_solver`] iterates these updates in coordinates where the
//! minimizers satisfy `Y^T D Y = Lambda` (unit eigenvector normalization);
//! that is the scale in which the stepsize bound of
//! [`constants::step_constants`] guarantees global convergence inside the
//! ball it defines.

mod constants;
mod driver;
mod f1;
mod f2;
mod recover;

pub use constants::{step_constants, StepConstants};
pub use driver::{init_in_ball, run_solver, SolveRun, SolverConfig};
pub use f1::{f1_batch_step, f1_value};
pub use f2::{f2_grad_batch, f2_grad_full_matrix, f2_step, f2_value, hessian_quadratic_form};
pub use recover::rayleigh_ritz;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{input_err, Result};
use crate::graph::{deflation_vector, degree, IndexSet, SparseSym};
use crate::mat::{dot, Mat};
use crate::rng::Rng;

#[allow(unused_imports)]
use num_traits::Float;

/// The generalized eigenproblem instance: affinity `W`, its degrees, and the
/// deflation vector (always derivable from the degrees, applied only where a
/// `deflated` flag asks for it).
#[derive(Debug, Clone)]
pub struct Pencil {
    w: SparseSym,
    d: Vec<f64>,
    eta: Vec<f64>,
}

impl Pencil {
    pub fn new(w: SparseSym) -> Result<Self> {
        let d = degree(&w)?;
        let eta = deflation_vector(&d)?;
        Ok(Pencil { w, d, eta })
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    pub fn w(&self) -> &SparseSym {
        &self.w
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Dense `W` or `W - eta eta^T`, for the oracle.
    pub fn to_dense_effective(&self, deflated: bool) -> Mat {
        let mut m = self.w.to_dense();
        if deflated {
            for i in 0..self.n() {
                for j in 0..self.n() {
                    m[(i, j)] -= self.eta[i] * self.eta[j];
                }
            }
        }
        m
    }
}

/// Mini-batch gradient evaluation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Gradient of the surrogate objective on the batch submatrix only.
    Local,
    /// Exact batch gradient with globally recomputed caches.
    Full,
    /// Exact batch gradient from neighborhood rows and incremental caches.
    Neighbor,
}

/// Which objective the driver iterates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Orthogonally-constrained quadratic objective with explicit
    /// re-orthogonalization after every step.
    F1,
    /// Unconstrained quartic objective; no factorization anywhere.
    F2,
}

/// Solver iterate `Y` with the two solver caches `C = Y^T D Y` and
/// `u = eta^T Y`.
#[derive(Debug, Clone)]
pub struct Embedding {
    y: Mat,
    c: Mat,
    u: Vec<f64>,
    fresh: bool,
}

impl Embedding {
    /// Wraps an iterate and computes both caches.
    pub fn from_matrix(p: &Pencil, y: Mat) -> Result<Self> {
        if y.rows() != p.n() || y.cols() == 0 {
            return Err(input_err!(
                "iterate must be n x K with n = {} and K >= 1, got {} x {}",
                p.n(),
                y.rows(),
                y.cols()
            ));
        }
        let c = Mat::gram_weighted(&y, p.d());
        let u = Mat::weighted_col_sums(&y, p.eta());
        Ok(Embedding { y, c, u, fresh: true })
    }

    pub fn k(&self) -> usize {
        self.y.cols()
    }

    pub fn y(&self) -> &Mat {
        &self.y
    }

    /// Consumes the embedding, returning the raw iterate.
    pub fn into_matrix(self) -> Mat {
        self.y
    }

    /// Cached `Y^T D Y`.
    pub fn c(&self) -> &Mat {
        &self.c
    }

    /// Cached `eta^T Y`.
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// Whether the caches reflect the current iterate. Local-scheme steps
    /// mutate `Y` without touching caches and clear this flag.
    pub fn caches_fresh(&self) -> bool {
        self.fresh
    }

    /// Recomputes both caches from the iterate.
    pub fn refresh_caches(&mut self, p: &Pencil) {
        self.c = Mat::gram_weighted(&self.y, p.d());
        self.u = Mat::weighted_col_sums(&self.y, p.eta());
        self.fresh = true;
    }

    /// `max_i |D_i^{1/2} Y_i|_2`, the weighted row-norm radius.
    pub fn max_weighted_row_norm(&self, d: &[f64]) -> f64 {
        max_weighted_row_norm(&self.y, d)
    }

    pub(crate) fn y_mut(&mut self) -> &mut Mat {
        &mut self.y
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Mat, &mut Mat, &mut Vec<f64>) {
        (&mut self.y, &mut self.c, &mut self.u)
    }

    pub(crate) fn mark_stale(&mut self) {
        self.fresh = false;
    }
}

pub(crate) fn max_weighted_row_norm(y: &Mat, d: &[f64]) -> f64 {
    let mut max = 0.0f64;
    for i in 0..y.rows() {
        let r = y.row(i);
        max = max.max((d[i] * dot(r, r)).sqrt());
    }
    max
}

/// How batch visit order evolves across epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VisitOrder {
    /// The same batch order every epoch.
    #[default]
    FixedCyclic,
    /// The order of the (fixed) batches is reshuffled each epoch.
    ReshuffleEachEpoch,
}

/// A disjoint partition of `0..n` into batches plus a visit-order policy.
#[derive(Debug, Clone)]
pub struct BatchPlan {
    sets: Vec<IndexSet>,
    n: usize,
    order: VisitOrder,
    seed: u64,
}

impl BatchPlan {
    pub fn new(sets: Vec<IndexSet>, n: usize, order: VisitOrder, seed: u64) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut covered = 0usize;
        for s in &sets {
            for &i in s.as_slice() {
                if i >= n {
                    return Err(input_err!("batch index {i} out of range"));
                }
                if seen[i] {
                    return Err(input_err!("batches are not disjoint at index {i}"));
                }
                seen[i] = true;
                covered += 1;
            }
        }
        if covered != n {
            return Err(input_err!("batches cover {covered} of {n} indices"));
        }
        Ok(BatchPlan { sets, n, order, seed })
    }

    /// Contiguous batches `[0, b), [b, 2b), ...` in index order.
    pub fn contiguous(n: usize, batch_size: usize, order: VisitOrder, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(input_err!("batch size must be positive"));
        }
        let sets = (0..n)
            .step_by(batch_size)
            .map(|lo| IndexSet::from_sorted((lo..(lo + batch_size).min(n)).collect()))
            .collect();
        BatchPlan::new(sets, n, order, seed)
    }

    /// Batches formed by chunking a seeded shuffle of `0..n`; the partition
    /// is then fixed for the life of the plan.
    pub fn shuffled(n: usize, batch_size: usize, order: VisitOrder, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(input_err!("batch size must be positive"));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = Rng::new(seed);
        rng.shuffle(&mut idx);
        let sets = idx
            .chunks(batch_size)
            .map(|c| IndexSet::new(c.to_vec(), n).expect("chunks are disjoint"))
            .collect();
        BatchPlan::new(sets, n, order, seed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_batches(&self) -> usize {
        self.sets.len()
    }

    pub fn batch(&self, i: usize) -> &IndexSet {
        &self.sets[i]
    }

    pub fn batch_sizes(&self) -> Vec<usize> {
        self.sets.iter().map(|s| s.len()).collect()
    }

    pub fn max_batch_size(&self) -> usize {
        self.sets.iter().map(|s| s.len()).max().unwrap_or(0)
    }

    /// The batch visit order for a given epoch.
    pub fn visit_order(&self, epoch: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.sets.len()).collect();
        if self.order == VisitOrder::ReshuffleEachEpoch {
            let mut rng = Rng::new(self.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            rng.shuffle(&mut order);
        }
        order
    }
}

/// One per-epoch record of the driver. `wall_time_s` is cumulative from the
/// start of the run (zero without the `std` feature); `macs` counts the
/// multiply-add work of the epoch's batch updates; `ball_radius` is a
/// running upper envelope of `max_i |D_i^{1/2} Y_i|` over every iterate
/// seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub epoch: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub ball_radius: f64,
    pub wall_time_s: f64,
    pub macs: u64,
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::graph::SparseSym;

    pub(crate) fn two_node_pencil() -> Pencil {
        let w =
            SparseSym::from_triplets(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)])
                .unwrap();
        Pencil::new(w).unwrap()
    }

    #[test]
    fn batch_plan_partitions() {
        let plan = BatchPlan::contiguous(10, 3, VisitOrder::FixedCyclic, 0).unwrap();
        assert_eq!(plan.num_batches(), 4);
        assert_eq!(plan.batch_sizes(), vec![3, 3, 3, 1]);
        assert_eq!(plan.visit_order(0), vec![0, 1, 2, 3]);
        assert_eq!(plan.visit_order(5), vec![0, 1, 2, 3]);

        let plan = BatchPlan::shuffled(10, 4, VisitOrder::ReshuffleEachEpoch, 7).unwrap();
        let mut all: Vec<usize> =
            (0..plan.num_batches()).flat_map(|b| plan.batch(b).as_slice().to_vec()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(plan.visit_order(1), plan.visit_order(1));
    }

    #[test]
    fn batch_plan_rejects_overlap_and_gaps() {
        let a = IndexSet::new(vec![0, 1], 3).unwrap();
        let b = IndexSet::new(vec![1, 2], 3).unwrap();
        assert!(BatchPlan::new(vec![a.clone(), b], 3, VisitOrder::FixedCyclic, 0).is_err());
        assert!(BatchPlan::new(vec![a], 3, VisitOrder::FixedCyclic, 0).is_err());
    }

    #[test]
    fn embedding_caches_match_definitions() {
        let p = two_node_pencil();
        let y = Mat::from_flat(2, 1, vec![1.0, 1.0]);
        let emb = Embedding::from_matrix(&p, y).unwrap();
        assert!((emb.c()[(0, 0)] - 4.0).abs() < 1e-15); // Y^T D Y = 2 + 2
        let eta_sum: f64 = p.eta().iter().sum();
        assert!((emb.u()[0] - eta_sum).abs() < 1e-15);
    }
}
