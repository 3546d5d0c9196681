//! The unconstrained quartic objective, its gradient under the three batch
//! evaluation schemes, the batch update step with cache maintenance, and the
//! Hessian bilinear form.
//!
//! All public entry points use the presentation normalization: the objective
//! divides by `n^2` (and carries an extra `1/n^2` on the quartic term), and
//! "the gradient" is the n-scaled expression
//!
//! ```text
//! grad(Y) = -4 ((W - eta eta^T)/n) Y + 4 (D/n^3) Y (Y^T D Y),
//! ```
//!
//! which is `n` times the gradient of the objective value. Internal callers
//! (the epoch driver) use the same kernels with unit scale.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{sub_deflation, sub_degrees, IndexSet};
use crate::mat::{dot, Mat};

use super::{Embedding, Pencil, Scheme};

#[allow(unused_imports)]
use num_traits::Float;

/// Objective value at scale `s`:
/// `(1/s^2) tr(-2 Y^T W_eff Y) + (1/s^4) tr((Y^T D Y)^2)`.
pub(crate) fn f2_value_scaled(p: &Pencil, y: &Mat, deflated: bool, s: f64) -> f64 {
    let wy = p.w().times_dense(y);
    let mut quad = 0.0;
    for i in 0..y.rows() {
        quad += dot(y.row(i), wy.row(i));
    }
    if deflated {
        let u = Mat::weighted_col_sums(y, p.eta());
        quad -= dot(&u, &u);
    }
    let c = Mat::gram_weighted(y, p.d());
    let cc: f64 = c.data().iter().map(|v| v * v).sum();
    (-2.0 * quad) / (s * s) + cc / (s * s * s * s)
}

/// `f2(Y)`, the quartic objective with the paper normalization (`s = n`);
/// minimized at `-sum_i lambda_i^2` over the leading `K` eigenvalues.
pub fn f2_value(p: &Pencil, y: &Mat, deflated: bool) -> f64 {
    f2_value_scaled(p, y, deflated, p.n() as f64)
}

/// The n-scaled full gradient `-4 (W_eff/n) Y + 4 (D/n^3) Y (Y^T D Y)`.
pub fn f2_grad_full_matrix(p: &Pencil, y: &Mat, deflated: bool) -> Mat {
    grad_matrix_scaled(p, y, deflated, p.n() as f64)
}

pub(crate) fn grad_matrix_scaled(p: &Pencil, y: &Mat, deflated: bool, s: f64) -> Mat {
    let c = Mat::gram_weighted(y, p.d());
    let u = Mat::weighted_col_sums(y, p.eta());
    let mut macs = 0u64;
    // same row kernel as the batch path, so a whole-set batch gradient is
    // bitwise identical to this matrix
    grad_rows_with_caches(p, y, &IndexSet::full(p.n()), &c, &u, deflated, s, &mut macs)
}

/// `x^T M` for a small square `M`, returned as a vector.
fn row_times_sym(x: &[f64], m: &Mat) -> Vec<f64> {
    let k = x.len();
    let mut out = alloc::vec![0.0; k];
    for (a, &xa) in x.iter().enumerate() {
        if xa == 0.0 {
            continue;
        }
        for (o, &mv) in out.iter_mut().zip(m.row(a)) {
            *o += xa * mv;
        }
    }
    out
}

/// Batch rows of the exact gradient given the global caches `C = Y^T D Y`
/// and `u = eta^T Y` (recomputed or maintained, depending on the scheme).
#[allow(clippy::too_many_arguments)]
fn grad_rows_with_caches(
    p: &Pencil,
    y: &Mat,
    batch: &IndexSet,
    c_ref: &Mat,
    u_ref: &[f64],
    deflated: bool,
    s: f64,
    macs: &mut u64,
) -> Mat {
    let k = y.cols();
    let b = batch.len();
    let (c1, c3) = (4.0 / s, 4.0 / (s * s * s));
    // Y_B C first, then fold the row sweep of W into it
    let mut g = if b == y.rows() {
        y.matmul(c_ref)
    } else {
        Mat::from_fn(b, k, |r, a| y[(batch.as_slice()[r], a)]).matmul(c_ref)
    };
    let mut nnz_seen = 0usize;
    for (r, &i) in batch.as_slice().iter().enumerate() {
        let di_c3 = c3 * p.d()[i];
        let eta_c1 = c1 * p.eta()[i];
        let grow = g.row_mut(r);
        for (a, v) in grow.iter_mut().enumerate() {
            *v *= di_c3;
            if deflated {
                *v += eta_c1 * u_ref[a];
            }
        }
        // W_{i,:} Y touches only neighborhood columns: the row sweep is the
        // neighbor-scheme product W_{B,N} Y_N.
        let (cols, vals) = p.w().row(i);
        nnz_seen += cols.len();
        if k == 2 {
            let (mut a0, mut a1) = (0.0, 0.0);
            for (&j, &w) in cols.iter().zip(vals) {
                let yr = y.row(j);
                a0 += w * yr[0];
                a1 += w * yr[1];
            }
            grow[0] -= c1 * a0;
            grow[1] -= c1 * a1;
        } else {
            for (&j, &w) in cols.iter().zip(vals) {
                let wc = c1 * w;
                for (o, &v) in grow.iter_mut().zip(y.row(j)) {
                    *o -= wc * v;
                }
            }
        }
    }
    *macs += (nnz_seen * k) as u64;
    *macs += (b * (k * k + 2 * k)) as u64;
    g
}

/// Batch gradient under the given scheme at the scheme's own presentation
/// scale (`b` for local, `n` for full/neighbor). Rows are ordered as in
/// `batch`. The neighbor scheme requires fresh embedding caches.
pub fn f2_grad_batch(
    p: &Pencil,
    emb: &Embedding,
    batch: &IndexSet,
    scheme: Scheme,
    deflated: bool,
) -> Result<Mat> {
    let s = match scheme {
        Scheme::Local => batch.len() as f64,
        Scheme::Full | Scheme::Neighbor => p.n() as f64,
    };
    let mut macs = 0u64;
    grad_batch_scaled(p, emb, batch, scheme, deflated, s, &mut macs)
}

pub(crate) fn grad_batch_scaled(
    p: &Pencil,
    emb: &Embedding,
    batch: &IndexSet,
    scheme: Scheme,
    deflated: bool,
    s: f64,
    macs: &mut u64,
) -> Result<Mat> {
    let y = emb.y();
    let k = y.cols();
    let b = batch.len();
    let (c1, c3) = (4.0 / s, 4.0 / (s * s * s));

    match scheme {
        Scheme::Local => {
            let sub = p.w().principal_submatrix(batch);
            let d_loc = sub_degrees(&sub);
            let eta_loc = sub_deflation(&d_loc);
            let yb = Mat::from_fn(b, k, |r, a| y[(batch.as_slice()[r], a)]);
            let wyb = sub.times_dense(&yb);
            let c_loc = Mat::gram_weighted(&yb, &d_loc);
            let u_loc = Mat::weighted_col_sums(&yb, &eta_loc);
            *macs += (sub.nnz() * k + b * k * k + b * k) as u64;
            let mut g = Mat::zeros(b, k);
            for r in 0..b {
                let yi_c = row_times_sym(yb.row(r), &c_loc);
                let grow = g.row_mut(r);
                for a in 0..k {
                    let mut v = -c1 * wyb[(r, a)] + c3 * d_loc[r] * yi_c[a];
                    if deflated {
                        v += c1 * eta_loc[r] * u_loc[a];
                    }
                    grow[a] = v;
                }
            }
            *macs += (b * (k * k + 2 * k)) as u64;
            Ok(g)
        }
        Scheme::Full | Scheme::Neighbor => {
            let (c_ref, u_ref);
            let (c_own, u_own);
            if scheme == Scheme::Full {
                c_own = Mat::gram_weighted(y, p.d());
                u_own = Mat::weighted_col_sums(y, p.eta());
                *macs += (p.n() * k * k + p.n() * k) as u64;
                c_ref = &c_own;
                u_ref = &u_own[..];
            } else {
                if !emb.caches_fresh() {
                    return Err(Error::MissingCaches);
                }
                c_ref = emb.c();
                u_ref = emb.u();
            }
            Ok(grad_rows_with_caches(p, y, batch, c_ref, u_ref, deflated, s, macs))
        }
    }
}

/// One batch update `Y_B <- Y_B - alpha * grad_B` under the scheme's own
/// presentation scale, with the scheme's cache policy: neighbor updates the
/// caches incrementally, full recomputes them exactly, local leaves them
/// untouched (marking them stale).
pub fn f2_step(
    emb: &mut Embedding,
    p: &Pencil,
    batch: &IndexSet,
    alpha: f64,
    scheme: Scheme,
    deflated: bool,
) -> Result<()> {
    let s = match scheme {
        Scheme::Local => batch.len() as f64,
        Scheme::Full | Scheme::Neighbor => p.n() as f64,
    };
    let mut macs = 0u64;
    step_scaled(emb, p, batch, alpha, scheme, deflated, s, 0, &mut macs).map(|_| ())
}

/// Scaled batch step. Returns the max weighted row norm over the rows it
/// updated (for ball tracking). `iteration` only labels divergence errors.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_scaled(
    emb: &mut Embedding,
    p: &Pencil,
    batch: &IndexSet,
    alpha: f64,
    scheme: Scheme,
    deflated: bool,
    s: f64,
    iteration: usize,
    macs: &mut u64,
) -> Result<f64> {
    let g = grad_batch_scaled(p, emb, batch, scheme, deflated, s, macs)?;
    let k = emb.k();
    let (y, c, u) = emb.parts_mut();
    let mut ball = 0.0f64;
    for (r, &i) in batch.as_slice().iter().enumerate() {
        let di = p.d()[i];
        let eta_i = p.eta()[i];
        if scheme == Scheme::Neighbor {
            // retire the old contribution of row i from both caches
            let yi = y.row(i);
            for a in 0..k {
                for bcol in 0..k {
                    c[(a, bcol)] -= di * yi[a] * yi[bcol];
                }
                u[a] -= eta_i * yi[a];
            }
        }
        let grow = g.row(r);
        let yrow = y.row_mut(i);
        let mut norm_sq = 0.0;
        for (v, &gv) in yrow.iter_mut().zip(grow) {
            *v -= alpha * gv;
            norm_sq += *v * *v;
        }
        if !norm_sq.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        ball = ball.max((di * norm_sq).sqrt());
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
    *macs += (batch.len() * k) as u64;
    match scheme {
        Scheme::Neighbor => *macs += (batch.len() * (2 * k * k + 2 * k)) as u64,
        Scheme::Full => {
            emb.refresh_caches(p);
            *macs += (p.n() * (k * k + k)) as u64;
        }
        Scheme::Local => emb.mark_stale(),
    }
    Ok(ball)
}

/// Objective value and full-gradient Frobenius norm at scale `s`, sharing
/// one sparse pass; used by the epoch driver for reports and stopping.
pub(crate) fn value_and_grad_norm_scaled(
    p: &Pencil,
    y: &Mat,
    deflated: bool,
    s: f64,
) -> (f64, f64) {
    let k = y.cols();
    let wy = p.w().times_dense(y);
    let c = Mat::gram_weighted(y, p.d());
    let u = Mat::weighted_col_sums(y, p.eta());
    let mut quad = 0.0;
    for i in 0..y.rows() {
        quad += dot(y.row(i), wy.row(i));
    }
    if deflated {
        quad -= dot(&u, &u);
    }
    let cc: f64 = c.data().iter().map(|v| v * v).sum();
    let value = (-2.0 * quad) / (s * s) + cc / (s * s * s * s);

    let (c1, c3) = (4.0 / s, 4.0 / (s * s * s));
    let yc = y.matmul(&c);
    let mut grad_sq = 0.0;
    for i in 0..y.rows() {
        let wrow = wy.row(i);
        let ycrow = yc.row(i);
        for a in 0..k {
            let mut v = -c1 * wrow[a] + c3 * p.d()[i] * ycrow[a];
            if deflated {
                v += c1 * p.eta()[i] * u[a];
            }
            grad_sq += v * v;
        }
    }
    (value, grad_sq.sqrt())
}

/// Bilinear form of the Hessian of the n-scaled objective along `S`:
/// the exact directional second derivative `d^2/dt^2 [n f2(Y + tS)]`.
pub fn hessian_quadratic_form(p: &Pencil, y: &Mat, s_dir: &Mat, deflated: bool) -> f64 {
    assert_eq!(y.rows(), s_dir.rows());
    assert_eq!(y.cols(), s_dir.cols());
    let n = p.n() as f64;
    let ws = p.w().times_dense(s_dir);
    let mut quad = 0.0;
    for i in 0..s_dir.rows() {
        quad += dot(s_dir.row(i), ws.row(i));
    }
    if deflated {
        let us = Mat::weighted_col_sums(s_dir, p.eta());
        quad -= dot(&us, &us);
    }
    let cy = Mat::gram_weighted(y, p.d());
    let cs = Mat::gram_weighted(s_dir, p.d());
    let mut dy = y.clone();
    dy.scale_rows(p.d());
    let m = s_dir.t_matmul(&dy); // S^T D Y
    let k = y.cols();
    let mut tr_cs_cy = 0.0;
    let mut tr_mm = 0.0;
    let mut tr_mmt = 0.0;
    for a in 0..k {
        for b in 0..k {
            tr_cs_cy += cs[(a, b)] * cy[(a, b)];
            tr_mm += m[(a, b)] * m[(b, a)];
            tr_mmt += m[(a, b)] * m[(a, b)];
        }
    }
    -4.0 / n * quad + 4.0 / (n * n * n) * (tr_cs_cy + tr_mm + tr_mmt)
}
