//! Constrained network training with an orthogonalization layer.
//!
//! The model is `x -> G_theta(x) Xi` for a square matrix `Xi` reset from a
//! factorization at every step: QR of the degree-weighted output (local and
//! full schemes) or Cholesky of the cached Gramian (neighbor scheme). The
//! constrained objective's batch gradient is evaluated at the normalized
//! output and backpropagated into `theta` with `Xi` detached; optionally
//! `Xi` itself then takes an Adam step on the same trace objective.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{neighborhood, sub_degrees, IndexSet};
use crate::mat::Mat;
use crate::oracle::{cholesky_spd, invert_upper, qr_tall, solve_lower};
use crate::solver::{Pencil, Scheme};

use super::{
    adam_tensor, adam_update, gather_rows, mlp_forward, train_grad, AdamState, MlpParams,
    NeighborCaches,
};

#[allow(unused_imports)]
use num_traits::Float;

/// Trainer for the constrained objective; the published map is the network
/// output times the orthogonalization layer.
#[derive(Debug, Clone)]
pub struct ConstrainedNetTrainer {
    params: MlpParams,
    orth: Mat,
    adam: AdamState,
    xi_m: Mat,
    xi_v: Mat,
    xi_steps: u64,
    scheme: Scheme,
    lr: f64,
    update_xi: bool,
    caches: Option<NeighborCaches>,
}

impl ConstrainedNetTrainer {
    /// `update_xi` enables the gradient step on the orthogonalization layer
    /// after its factorization reset.
    pub fn new(params: MlpParams, scheme: Scheme, lr: f64, update_xi: bool) -> Self {
        let k = params.out_dim();
        let adam = AdamState::new(&params);
        ConstrainedNetTrainer {
            params,
            orth: Mat::identity(k),
            adam,
            xi_m: Mat::zeros(k, k),
            xi_v: Mat::zeros(k, k),
            xi_steps: 0,
            scheme,
            lr,
            update_xi,
            caches: None,
        }
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    /// The current orthogonalization layer.
    pub fn orth(&self) -> &Mat {
        &self.orth
    }

    /// Composed model output `G_theta(x) Xi`.
    pub fn output(&self, x_rows: &Mat) -> Result<Mat> {
        Ok(mlp_forward(&self.params, x_rows)?.matmul(&self.orth))
    }

    pub fn init_caches(&mut self, p: &Pencil, x_all: &Mat) -> Result<()> {
        let y = mlp_forward(&self.params, x_all)?;
        self.caches = Some(NeighborCaches::init(p, &y));
        Ok(())
    }

    /// One batch step; a failed factorization aborts the step with a
    /// degenerate-embedding error and leaves the parameters untouched.
    pub fn step(&mut self, p: &Pencil, x_all: &Mat, batch: &IndexSet) -> Result<()> {
        let n = p.n();
        match self.scheme {
            Scheme::Local => {
                let x_b = gather_rows(x_all, batch);
                let y_b = mlp_forward(&self.params, &x_b)?;
                let sub = p.w().principal_submatrix(batch);
                let d_loc = sub_degrees(&sub);
                let weighted =
                    Mat::from_fn(batch.len(), y_b.cols(), |r, a| d_loc[r].sqrt() * y_b[(r, a)]);
                let rfac = qr_tall(&weighted).map_err(degenerate).map(|(_, r)| r)?;
                let mut xi = invert_upper(&rfac).map_err(degenerate)?;
                xi.scale(batch.len() as f64);
                self.orth = xi;
                let y_tilde = y_b.matmul(&self.orth);
                let wy = sub.times_dense(&y_tilde);
                let g = Mat::from_fn(batch.len(), y_b.cols(), |r, a| {
                    let inv_d = if d_loc[r] > 0.0 { 1.0 / d_loc[r] } else { 0.0 };
                    2.0 * (y_tilde[(r, a)] - inv_d * wy[(r, a)])
                });
                self.descend(&x_b, &y_b, &g)
            }
            Scheme::Full => {
                let y = mlp_forward(&self.params, x_all)?;
                let sqrt_d: Vec<f64> = p.d().iter().map(|&x| x.sqrt()).collect();
                let mut weighted = y.clone();
                weighted.scale_rows(&sqrt_d);
                let rfac = qr_tall(&weighted).map_err(degenerate).map(|(_, r)| r)?;
                let mut xi = invert_upper(&rfac).map_err(degenerate)?;
                xi.scale(n as f64);
                self.orth = xi;
                let y_tilde = y.matmul(&self.orth);
                let g = constrained_batch_grad(p, &y_tilde, None, batch);
                let x_b = gather_rows(x_all, batch);
                let y_b = gather_rows(&y, batch);
                self.descend(&x_b, &y_b, &g)
            }
            Scheme::Neighbor => {
                let caches = self.caches.as_mut().ok_or(Error::MissingCaches)?;
                let nbh = neighborhood(p.w(), batch)?;
                let fwd_set = batch.union(&nbh);
                let x_f = gather_rows(x_all, &fwd_set);
                let y_f = mlp_forward(&self.params, &x_f)?;
                caches.refresh_on(p, &fwd_set, &y_f);
                let l = match cholesky_spd(caches.c_star()) {
                    Ok(l) => l,
                    Err(Error::NotSpd) => {
                        return Err(Error::DegenerateEmbedding("nonpositive Cholesky pivot"))
                    }
                    Err(e) => return Err(e),
                };
                // Xi = n L^{-T}
                let k = self.params.out_dim();
                let mut xi = Mat::zeros(k, k);
                for col in 0..k {
                    let mut e = vec![0.0; k];
                    e[col] = 1.0;
                    let solved = solve_lower(&l, &e); // column of L^{-1}
                    for row in 0..k {
                        xi[(col, row)] = n as f64 * solved[row]; // transposed
                    }
                }
                self.orth = xi;
                // normalize only the rows this step reads (the forward set)
                let y_f_fresh = gather_rows(caches.y0(), &fwd_set);
                let y_tilde_f = y_f_fresh.matmul(&self.orth);
                let mut pos = vec![usize::MAX; p.n()];
                for (r, &i) in fwd_set.as_slice().iter().enumerate() {
                    pos[i] = r;
                }
                let g = constrained_batch_grad(p, &y_tilde_f, Some(&pos), batch);
                let x_b = gather_rows(x_all, batch);
                let y_b = gather_rows(caches.y0(), batch);
                self.descend(&x_b, &y_b, &g)
            }
        }
    }

    /// Backpropagates `tr((Y_B Xi)^T G)` into the network with `Xi`
    /// detached, then optionally Adam-steps `Xi` with its own gradient
    /// `Y_B^T G`.
    fn descend(&mut self, x_b: &Mat, y_b: &Mat, g: &Mat) -> Result<()> {
        let g_theta = g.matmul_nt(&self.orth); // G Xi^T
        let grads = train_grad(&self.params, x_b, &g_theta)?;
        adam_update(&mut self.params, &mut self.adam, &grads, self.lr);
        if self.update_xi {
            let xi_grad = y_b.t_matmul(g);
            self.xi_steps += 1;
            adam_tensor(
                self.orth.data_mut(),
                self.xi_m.data_mut(),
                self.xi_v.data_mut(),
                xi_grad.data(),
                self.lr,
                self.adam.beta1,
                self.adam.beta2,
                self.adam.eps,
                self.xi_steps,
            );
        }
        Ok(())
    }
}

/// Batch rows of the constrained gradient `2 (I - D^{-1} W) Y` evaluated at
/// a normalized output. When `row_map` is given, `y` is indexed through it
/// (rows of a forward-subset matrix); otherwise `y` has one row per node.
fn constrained_batch_grad(p: &Pencil, y: &Mat, row_map: Option<&[usize]>, batch: &IndexSet) -> Mat {
    let k = y.cols();
    let mut g = Mat::zeros(batch.len(), k);
    for (r, &i) in batch.as_slice().iter().enumerate() {
        let (cols, vals) = p.w().row(i);
        let grow = g.row_mut(r);
        for (&j, &w) in cols.iter().zip(vals) {
            let row = match row_map {
                Some(map) => y.row(map[j]),
                None => y.row(j),
            };
            for (o, &v) in grow.iter_mut().zip(row) {
                *o += w * v;
            }
        }
        let yi = match row_map {
            Some(map) => y.row(map[i]),
            None => y.row(i),
        };
        let inv_d = 1.0 / p.d()[i];
        for (a, o) in grow.iter_mut().enumerate() {
            *o = 2.0 * (yi[a] - inv_d * *o);
        }
    }
    g
}

fn degenerate(e: Error) -> Error {
    match e {
        Error::RankDeficient(_) | Error::NotSpd => {
            Error::DegenerateEmbedding("rank-deficient orthogonalization factor")
        }
        other => other,
    }
}
