//! The orthogonally-constrained baseline: gradient steps on the
//! degree-weighted iterate followed by an explicit re-orthogonalization.
//!
//! The iterate kept here is the weighted variable whose constraint reads
//! `Y^T D Y = n^2 I`; the gradient of the constrained quadratic objective in
//! this variable is `2 (I - D^{-1} W) Y`. After every batch update each
//! scheme restores the constraint its own way:
//!
//! * local — QR of the batch block `D_B^{1/2} Y_B` (batch-local degrees),
//!   then `Y <- b Y R^{-1}`;
//! * full — QR of `D^{1/2} Y`, then `Y <- n Y R^{-1}`;
//! * neighbor — Cholesky `L L^T` of the cached `Y^T D Y`, then
//!   `Y <- n Y L^{-T}`, the caches transforming exactly to `n^2 I`.

use crate::error::{Error, Result};
use crate::graph::{sub_degrees, IndexSet};
use crate::mat::{dot, Mat};
use crate::oracle::{cholesky_spd, invert_upper, qr_tall, solve_lower};

use super::{Embedding, Pencil, Scheme};

#[allow(unused_imports)]
use num_traits::Float;

/// Constrained objective value `(1/n^2) tr(Y^T (D - W) Y)` of the weighted
/// iterate; equals `K - sum_i lambda_i` at the constrained minimum.
pub fn f1_value(p: &Pencil, y: &Mat) -> f64 {
    let n = p.n() as f64;
    let wy = p.w().times_dense(y);
    let mut acc = 0.0;
    for i in 0..y.rows() {
        let yi = y.row(i);
        acc += p.d()[i] * dot(yi, yi) - dot(yi, wy.row(i));
    }
    acc / (n * n)
}

/// Frobenius norm of the full-scheme gradient `2 (I - D^{-1} W) Y`.
pub(crate) fn f1_grad_norm(p: &Pencil, y: &Mat) -> f64 {
    let wy = p.w().times_dense(y);
    let mut acc = 0.0;
    for i in 0..y.rows() {
        for (a, &v) in y.row(i).iter().enumerate() {
            let g = 2.0 * (v - wy[(i, a)] / p.d()[i]);
            acc += g * g;
        }
    }
    acc.sqrt()
}

/// One constrained batch step: scheme gradient, update of the batch rows,
/// then the scheme's re-orthogonalization.
pub fn f1_batch_step(
    emb: &mut Embedding,
    p: &Pencil,
    batch: &IndexSet,
    alpha: f64,
    scheme: Scheme,
) -> Result<()> {
    let mut macs = 0u64;
    f1_step_counted(emb, p, batch, alpha, scheme, 0, &mut macs).map(|_| ())
}

/// As [`f1_batch_step`], with mac counting and an iteration label for
/// divergence errors. Returns the post-step weighted row-norm maximum over
/// the whole iterate (the normalization touches every row).
pub(crate) fn f1_step_counted(
    emb: &mut Embedding,
    p: &Pencil,
    batch: &IndexSet,
    alpha: f64,
    scheme: Scheme,
    iteration: usize,
    macs: &mut u64,
) -> Result<f64> {
    let k = emb.k();
    let n = p.n();
    match scheme {
        Scheme::Local => {
            let sub = p.w().principal_submatrix(batch);
            let d_loc = sub_degrees(&sub);
            let b = batch.len();
            let yb = Mat::from_fn(b, k, |r, a| emb.y()[(batch.as_slice()[r], a)]);
            let wyb = sub.times_dense(&yb);
            *macs += (sub.nnz() * k) as u64;
            let y = emb.y_mut();
            for (r, &i) in batch.as_slice().iter().enumerate() {
                let inv_d = if d_loc[r] > 0.0 { 1.0 / d_loc[r] } else { 0.0 };
                let row = y.row_mut(i);
                for (a, v) in row.iter_mut().enumerate() {
                    *v -= alpha * 2.0 * (*v - inv_d * wyb[(r, a)]);
                }
            }
            *macs += (b * 2 * k) as u64;
            check_rows_finite(emb.y(), batch.as_slice(), iteration)?;
            // batch-local orthogonalization: QR of D_B^{1/2} Y_B
            let weighted = Mat::from_fn(b, k, |r, a| {
                d_loc[r].sqrt() * emb.y()[(batch.as_slice()[r], a)]
            });
            let (_, rfac) = qr_tall(&weighted).map_err(degenerate)?;
            let mut rinv = invert_upper(&rfac).map_err(degenerate)?;
            rinv.scale(b as f64);
            let y = emb.y_mut();
            *y = y.matmul(&rinv);
            *macs += (n * k * k) as u64;
            emb.mark_stale();
        }
        Scheme::Full | Scheme::Neighbor => {
            if scheme == Scheme::Neighbor && !emb.caches_fresh() {
                return Err(Error::MissingCaches);
            }
            let b = batch.len();
            let mut g = Mat::zeros(b, k);
            for (r, &i) in batch.as_slice().iter().enumerate() {
                let (cols, vals) = p.w().row(i);
                let grow = g.row_mut(r);
                for (&j, &w) in cols.iter().zip(vals) {
                    for (o, &v) in grow.iter_mut().zip(emb.y().row(j)) {
                        *o += w * v;
                    }
                }
                *macs += (cols.len() * k) as u64;
                let inv_d = 1.0 / p.d()[i];
                for (a, o) in grow.iter_mut().enumerate() {
                    *o = 2.0 * (emb.y()[(i, a)] - inv_d * *o);
                }
            }
            *macs += (b * 2 * k) as u64;
            let (y, c, u) = emb.parts_mut();
            for (r, &i) in batch.as_slice().iter().enumerate() {
                let di = p.d()[i];
                let eta_i = p.eta()[i];
                if scheme == Scheme::Neighbor {
                    let yi = y.row(i);
                    for a in 0..k {
                        for bcol in 0..k {
                            c[(a, bcol)] -= di * yi[a] * yi[bcol];
                        }
                        u[a] -= eta_i * yi[a];
                    }
                }
                let row = y.row_mut(i);
                for (v, &gv) in row.iter_mut().zip(g.row(r)) {
                    *v -= alpha * gv;
                }
                if scheme == Scheme::Neighbor {
                    let yi = y.row(i);
                    for a in 0..k {
                        for bcol in 0..k {
                            c[(a, bcol)] += di * yi[a] * yi[bcol];
                        }
                        u[a] += eta_i * yi[a];
                    }
                }
            }
            if scheme == Scheme::Neighbor {
                *macs += (b * (2 * k * k + 2 * k)) as u64;
            }
            check_rows_finite(emb.y(), batch.as_slice(), iteration)?;

            if scheme == Scheme::Full {
                let sqrt_d: alloc::vec::Vec<f64> = p.d().iter().map(|&x| x.sqrt()).collect();
                let mut weighted = emb.y().clone();
                weighted.scale_rows(&sqrt_d);
                let (_, rfac) = qr_tall(&weighted).map_err(degenerate)?;
                let mut rinv = invert_upper(&rfac).map_err(degenerate)?;
                rinv.scale(n as f64);
                let y = emb.y_mut();
                *y = y.matmul(&rinv);
                *macs += (n * k * k * 2) as u64;
                emb.refresh_caches(p);
                *macs += (n * (k * k + k)) as u64;
            } else {
                // Cholesky of the cached Gramian, then Y <- n Y L^{-T};
                // the caches transform exactly: C becomes n^2 I.
                let l = match cholesky_spd(emb.c()) {
                    Ok(l) => l,
                    Err(Error::NotSpd) => {
                        return Err(Error::DegenerateEmbedding("nonpositive Cholesky pivot"))
                    }
                    Err(e) => return Err(e),
                };
                let (y, c, u) = emb.parts_mut();
                for i in 0..n {
                    let solved = solve_lower(&l, y.row(i));
                    for (v, s) in y.row_mut(i).iter_mut().zip(solved) {
                        *v = n as f64 * s;
                    }
                }
                *macs += (n * k * k) as u64;
                let solved_u = solve_lower(&l, u);
                for (uv, s) in u.iter_mut().zip(solved_u) {
                    *uv = n as f64 * s;
                }
                let n_sq = (n * n) as f64;
                for a in 0..k {
                    for bcol in 0..k {
                        c[(a, bcol)] = if a == bcol { n_sq } else { 0.0 };
                    }
                }
            }
        }
    }
    if !emb.y().is_finite() {
        return Err(Error::Diverged { iteration });
    }
    Ok(emb.max_weighted_row_norm(p.d()))
}

fn degenerate(e: Error) -> Error {
    match e {
        Error::RankDeficient(_) | Error::NotSpd => {
            Error::DegenerateEmbedding("rank-deficient orthogonalization factor")
        }
        other => other,
    }
}

fn check_rows_finite(y: &Mat, rows: &[usize], iteration: usize) -> Result<()> {
    for &i in rows {
        if !dot(y.row(i), y.row(i)).is_finite() {
            return Err(Error::Diverged { iteration });
        }
    }
    Ok(())
}
