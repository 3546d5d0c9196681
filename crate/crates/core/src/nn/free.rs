//! Orthogonalization-free network training.
//!
//! Each step evaluates the quartic objective's batch gradient at the current
//! network output, detaches it as a constant matrix `G`, and descends
//! `tr(Y_B(theta)^T G)` by backpropagation and Adam. There is no
//! orthogonalization layer and no matrix factorization on any path here.

use crate::error::{Error, Result};
use crate::graph::{neighborhood, sub_deflation, sub_degrees, IndexSet};
use crate::mat::Mat;
use crate::solver::{Pencil, Scheme};

use super::{
    adam_update, gather_rows, mlp_forward, train_grad, AdamState, MlpParams, NeighborCaches,
};

/// Trainer for the orthogonalization-free objective under one of the three
/// batch gradient schemes.
#[derive(Debug, Clone)]
pub struct FreeNetTrainer {
    params: MlpParams,
    adam: AdamState,
    scheme: Scheme,
    lr: f64,
    deflated: bool,
    caches: Option<NeighborCaches>,
}

impl FreeNetTrainer {
    pub fn new(params: MlpParams, scheme: Scheme, lr: f64, deflated: bool) -> Self {
        let adam = AdamState::new(&params);
        FreeNetTrainer { params, adam, scheme, lr, deflated, caches: None }
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Network output on arbitrary input rows.
    pub fn output(&self, x_rows: &Mat) -> Result<Mat> {
        mlp_forward(&self.params, x_rows)
    }

    /// One full forward pass to seed the neighbor-scheme records; required
    /// before the first neighbor step.
    pub fn init_caches(&mut self, p: &Pencil, x_all: &Mat) -> Result<()> {
        let y = mlp_forward(&self.params, x_all)?;
        self.caches = Some(NeighborCaches::init(p, &y));
        Ok(())
    }

    pub fn caches(&self) -> Option<&NeighborCaches> {
        self.caches.as_ref()
    }

    /// One batch step. `x_all` is the full training input matrix (row `i`
    /// is sample `i` of the graph).
    pub fn step(&mut self, p: &Pencil, x_all: &Mat, batch: &IndexSet) -> Result<()> {
        let k = self.params.out_dim();
        let n = p.n() as f64;
        let (x_b, g) = match self.scheme {
            Scheme::Local => {
                let x_b = gather_rows(x_all, batch);
                let y_b = mlp_forward(&self.params, &x_b)?;
                let sub = p.w().principal_submatrix(batch);
                let d_loc = sub_degrees(&sub);
                let eta_loc = sub_deflation(&d_loc);
                let wy = sub.times_dense(&y_b);
                let c_loc = Mat::gram_weighted(&y_b, &d_loc);
                let u_loc = Mat::weighted_col_sums(&y_b, &eta_loc);
                let b = batch.len() as f64;
                let (c1, c3) = (4.0 / b, 4.0 / (b * b * b));
                let mut g = Mat::zeros(batch.len(), k);
                for r in 0..batch.len() {
                    let yc = small_row_product(y_b.row(r), &c_loc);
                    for a in 0..k {
                        let mut v = -c1 * wy[(r, a)] + c3 * d_loc[r] * yc[a];
                        if self.deflated {
                            v += c1 * eta_loc[r] * u_loc[a];
                        }
                        g[(r, a)] = v;
                    }
                }
                (x_b, g)
            }
            Scheme::Full => {
                let y = mlp_forward(&self.params, x_all)?;
                let c = Mat::gram_weighted(&y, p.d());
                let u = Mat::weighted_col_sums(&y, p.eta());
                let (c1, c3) = (4.0 / n, 4.0 / (n * n * n));
                let mut g = Mat::zeros(batch.len(), k);
                for (r, &i) in batch.as_slice().iter().enumerate() {
                    let (cols, vals) = p.w().row(i);
                    let grow = g.row_mut(r);
                    for (&j, &w) in cols.iter().zip(vals) {
                        for (o, &v) in grow.iter_mut().zip(y.row(j)) {
                            *o += w * v;
                        }
                    }
                    let yc = small_row_product(y.row(i), &c);
                    for a in 0..k {
                        let mut v = -c1 * grow[a] + c3 * p.d()[i] * yc[a];
                        if self.deflated {
                            v += c1 * p.eta()[i] * u[a];
                        }
                        grow[a] = v;
                    }
                }
                (gather_rows(x_all, batch), g)
            }
            Scheme::Neighbor => {
                let caches = self.caches.as_mut().ok_or(Error::MissingCaches)?;
                let nbh = neighborhood(p.w(), batch)?;
                // forward on the batch and its neighborhood (the batch need
                // not be inside its own neighborhood on zero-diagonal graphs)
                let fwd_set = batch.union(&nbh);
                let x_f = gather_rows(x_all, &fwd_set);
                let y_f = mlp_forward(&self.params, &x_f)?;
                caches.refresh_on(p, &fwd_set, &y_f);
                // after the refresh, every row this step reads from the
                // snapshot is the fresh network output
                let y0 = caches.y0();
                let (c1, c3) = (4.0 / n, 4.0 / (n * n * n));
                let mut g = Mat::zeros(batch.len(), k);
                for (r, &i) in batch.as_slice().iter().enumerate() {
                    let (cols, vals) = p.w().row(i);
                    let grow = g.row_mut(r);
                    for (&j, &w) in cols.iter().zip(vals) {
                        for (o, &v) in grow.iter_mut().zip(y0.row(j)) {
                            *o += w * v;
                        }
                    }
                    let yc = small_row_product(y0.row(i), caches.c_star());
                    for a in 0..k {
                        let mut v = -c1 * grow[a] + c3 * p.d()[i] * yc[a];
                        if self.deflated {
                            v += c1 * p.eta()[i] * caches.u_star()[a];
                        }
                        grow[a] = v;
                    }
                }
                (gather_rows(x_all, batch), g)
            }
        };
        let grads = train_grad(&self.params, &x_b, &g)?;
        adam_update(&mut self.params, &mut self.adam, &grads, self.lr);
        Ok(())
    }
}

/// `x^T M` for a small square `M`.
fn small_row_product(x: &[f64], m: &Mat) -> alloc::vec::Vec<f64> {
    let k = x.len();
    let mut out = alloc::vec![0.0; k];
    for (a, &xa) in x.iter().enumerate() {
        for (o, &mv) in out.iter_mut().zip(m.row(a)) {
            *o += xa * mv;
        }
    }
    out
}
