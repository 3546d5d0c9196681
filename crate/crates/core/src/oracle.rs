//! Dense reference computations at desk scale.
//!
//! Everything here is deliberately dependency-free and bit-stable: a cyclic
//! Jacobi eigensolver for the dense generalized problem, Householder QR,
//! Cholesky, the eigenfunction alignment metric and entrywise central finite
//! differences. These serve as the recovery layer of the iterative solver
//! and as ground truth for every convergence test.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{input_err, Error, Result};
use crate::mat::{dot, norm2, Mat};

#[allow(unused_imports)]
use num_traits::Float;

/// Largest `n` the dense path accepts; beyond this the caller is expected to
/// run without a reference.
pub const ORACLE_CAP: usize = 2048;

/// Full eigendecomposition of a pencil `(W, D)` with diagonal positive `D`.
///
/// Eigenvalues are descending; eigenvector `j` is column `j` of `vectors`,
/// normalized to `v^T D v = 1` with its largest-magnitude entry positive.
#[derive(Debug, Clone)]
pub struct DenseEig {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl DenseEig {
    /// The first `k` eigenvector columns as an `n x k` matrix.
    pub fn leading_vectors(&self, k: usize) -> Mat {
        Mat::from_fn(self.vectors.rows(), k, |i, j| self.vectors[(i, j)])
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.vectors.col(j)
    }
}

/// All eigenpairs of the generalized problem `W v = lambda D v` for dense
/// symmetric `W` and positive diagonal `D` given by `d`.
///
/// The problem is symmetrized to `D^{-1/2} W D^{-1/2}`, solved by cyclic
/// Jacobi rotations (off-diagonal Frobenius norm below `1e-14 * |A|_F`,
/// at most 100 sweeps), and back-transformed.
pub fn dense_gevp(w: &Mat, d: &[f64]) -> Result<DenseEig> {
    let n = w.rows();
    if w.cols() != n || d.len() != n {
        return Err(input_err!("pencil shape mismatch"));
    }
    if n > ORACLE_CAP {
        return Err(Error::OracleCap { n, cap: ORACLE_CAP });
    }
    if let Some(i) = d.iter().position(|&x| !(x > 0.0)) {
        return Err(input_err!("nonpositive degree {} at node {i}", d[i]));
    }
    let scale = w.max_abs();
    for i in 0..n {
        for j in (i + 1)..n {
            if (w[(i, j)] - w[(j, i)]).abs() > 1e-12 * scale.max(1.0) {
                return Err(input_err!("matrix is not symmetric at ({i}, {j})"));
            }
        }
    }
    let dis: Vec<f64> = d.iter().map(|&x| 1.0 / x.sqrt()).collect();
    let sym = Mat::from_fn(n, n, |i, j| {
        // enforce exact symmetry before rotating
        0.5 * (w[(i, j)] + w[(j, i)]) * dis[i] * dis[j]
    });
    let (values, vecs) = sym_eig(&sym);
    let mut vectors = vecs;
    for i in 0..n {
        for v in vectors.row_mut(i) {
            *v *= dis[i];
        }
    }
    fix_column_signs(&mut vectors);
    Ok(DenseEig { values, vectors })
}

/// Eigenpairs of a dense symmetric matrix by cyclic Jacobi; eigenvalues
/// descending, eigenvectors orthonormal columns.
pub fn sym_eig(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    let norm = m.frob_norm();
    let tol = 1e-14 * norm;

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if (2.0 * off).sqrt() <= tol || off == 0.0 {
            break;
        }
        // skip pivots that cannot matter this sweep
        let small = tol / (n as f64);
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= small {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate(&mut m, p, q, c, s);
                // accumulate the rotation into the eigenvector columns
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| v[(i, order[j])]);
    (values, vectors)
}

/// Two-sided Jacobi rotation of rows/columns `p`, `q`.
fn rotate(m: &mut Mat, p: usize, q: usize, c: f64, s: f64) {
    let n = m.rows();
    for i in 0..n {
        let mip = m[(i, p)];
        let miq = m[(i, q)];
        m[(i, p)] = c * mip - s * miq;
        m[(i, q)] = s * mip + c * miq;
    }
    for j in 0..n {
        let mpj = m[(p, j)];
        let mqj = m[(q, j)];
        m[(p, j)] = c * mpj - s * mqj;
        m[(q, j)] = s * mpj + c * mqj;
    }
}

/// Makes the largest-magnitude entry of every column positive, for
/// deterministic eigenvector output.
fn fix_column_signs(m: &mut Mat) {
    for j in 0..m.cols() {
        let mut best = 0usize;
        let mut mag = 0.0f64;
        for i in 0..m.rows() {
            if m[(i, j)].abs() > mag {
                mag = m[(i, j)].abs();
                best = i;
            }
        }
        if m[(best, j)] < 0.0 {
            for i in 0..m.rows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

/// Thin Householder QR of a tall matrix (`rows >= cols`): `A = Q R` with
/// orthonormal `Q` columns and `diag(R) >= 0`.
pub fn qr_tall(a: &Mat) -> Result<(Mat, Mat)> {
    let (m, k) = (a.rows(), a.cols());
    if m < k {
        return Err(input_err!("qr_tall needs rows >= cols, got {m} x {k}"));
    }
    let scale = a.frob_norm();
    let mut r = a.clone();
    let mut hh: Vec<Vec<f64>> = Vec::with_capacity(k);
    for col in 0..k {
        // Householder vector annihilating below-diagonal entries of `col`
        let mut v: Vec<f64> = (col..m).map(|i| r[(i, col)]).collect();
        let alpha = -v[0].signum() * norm2(&v);
        v[0] -= alpha;
        let vnorm = norm2(&v);
        if vnorm > 0.0 {
            for x in &mut v {
                *x /= vnorm;
            }
            for j in col..k {
                let proj: f64 = (col..m).map(|i| v[i - col] * r[(i, j)]).sum();
                for i in col..m {
                    r[(i, j)] -= 2.0 * proj * v[i - col];
                }
            }
        }
        hh.push(v);
        if r[(col, col)].abs() < 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient("qr pivot below tolerance"));
        }
    }
    // accumulate Q = H_0 ... H_{k-1} applied to the first k identity columns
    let mut q = Mat::from_fn(m, k, |i, j| if i == j { 1.0 } else { 0.0 });
    for col in (0..k).rev() {
        let v = &hh[col];
        if v.iter().all(|&x| x == 0.0) {
            continue;
        }
        for j in 0..k {
            let proj: f64 = (col..m).map(|i| v[i - col] * q[(i, j)]).sum();
            for i in col..m {
                q[(i, j)] -= 2.0 * proj * v[i - col];
            }
        }
    }
    // sign convention: nonnegative diagonal of R
    for col in 0..k {
        if r[(col, col)] < 0.0 {
            for j in col..k {
                r[(col, j)] = -r[(col, j)];
            }
            for i in 0..m {
                q[(i, col)] = -q[(i, col)];
            }
        }
    }
    let r_upper = Mat::from_fn(k, k, |i, j| if j >= i { r[(i, j)] } else { 0.0 });
    Ok((q, r_upper))
}

/// Cholesky factor `L` (lower triangular, positive diagonal) of a symmetric
/// positive definite matrix.
pub fn cholesky_spd(a: &Mat) -> Result<Mat> {
    let n = a.rows();
    if a.cols() != n {
        return Err(input_err!("cholesky needs a square matrix"));
    }
    let scale = a.max_abs();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale.max(1.0) {
                return Err(input_err!("matrix is not symmetric at ({i}, {j})"));
            }
        }
    }
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            if i == j {
                let piv = a[(i, i)] - s;
                if piv <= 0.0 {
                    return Err(Error::NotSpd);
                }
                l[(i, i)] = piv.sqrt();
            } else {
                l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * x[k]).sum();
        x[i] = (x[i] - s) / l[(i, i)];
    }
    x
}

/// Solves `L^T x = b` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| l[(k, i)] * x[k]).sum();
        x[i] = (x[i] - s) / l[(i, i)];
    }
    x
}

/// Inverse of an upper-triangular matrix by back substitution.
pub fn invert_upper(r: &Mat) -> Result<Mat> {
    let k = r.rows();
    let mut inv = Mat::zeros(k, k);
    for col in 0..k {
        let mut x = vec![0.0; k];
        x[col] = 1.0;
        for i in (0..=col).rev() {
            let s: f64 = ((i + 1)..k).map(|m| r[(i, m)] * x[m]).sum();
            if r[(i, i)] == 0.0 {
                return Err(Error::RankDeficient("zero diagonal in triangular solve"));
            }
            x[i] = (x[i] - s) / r[(i, i)];
        }
        for i in 0..k {
            inv[(i, col)] = x[i];
        }
    }
    Ok(inv)
}

/// Alignment-invariant relative error between a reference eigenfunction and
/// an approximation: `|psi - beta psi_hat| / |psi|` with the least-squares
/// scale `beta = psi^T psi_hat / |psi_hat|^2` (`beta = 0` for a zero
/// approximation, giving error 1).
pub fn relative_error(psi_ref: &[f64], psi_hat: &[f64]) -> Result<f64> {
    if psi_ref.len() != psi_hat.len() {
        return Err(input_err!("length mismatch"));
    }
    let ref_norm = norm2(psi_ref);
    if ref_norm == 0.0 {
        return Err(input_err!("reference eigenfunction is zero"));
    }
    let hat_sq = dot(psi_hat, psi_hat);
    let beta = if hat_sq == 0.0 { 0.0 } else { dot(psi_ref, psi_hat) / hat_sq };
    let resid: f64 = psi_ref
        .iter()
        .zip(psi_hat)
        .map(|(r, h)| {
            let e = r - beta * h;
            e * e
        })
        .sum::<f64>()
        .sqrt();
    Ok(resid / ref_norm)
}

/// Sine of the largest principal angle between the `D^{1/2}`-weighted column
/// spans of two full-rank `n x K` matrices; lies in `[0, 1]`.
pub fn subspace_error(u_ref: &Mat, u_hat: &Mat, d: &[f64]) -> Result<f64> {
    if u_ref.rows() != u_hat.rows() || u_ref.cols() != u_hat.cols() {
        return Err(input_err!("subspace shape mismatch"));
    }
    let sqrt_d: Vec<f64> = d.iter().map(|&x| x.sqrt()).collect();
    let mut a = u_ref.clone();
    a.scale_rows(&sqrt_d);
    let mut b = u_hat.clone();
    b.scale_rows(&sqrt_d);
    let (qa, _) = qr_tall(&a)?;
    let (qb, _) = qr_tall(&b)?;
    let cross = qa.t_matmul(&qb);
    let gram = cross.t_matmul(&cross);
    let (vals, _) = sym_eig(&gram);
    let min_cos_sq = vals.last().copied().unwrap_or(0.0).clamp(0.0, 1.0);
    Ok((1.0 - min_cos_sq).sqrt())
}

/// Entrywise central finite differences of a scalar function of a matrix.
pub fn finite_diff_grad(f: &mut dyn FnMut(&Mat) -> f64, y: &Mat, h: f64) -> Mat {
    assert!(h > 0.0);
    let mut g = Mat::zeros(y.rows(), y.cols());
    let mut probe = y.clone();
    for i in 0..y.rows() {
        for j in 0..y.cols() {
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + h;
            let up = f(&probe);
            probe[(i, j)] = orig - h;
            let down = f(&probe);
            probe[(i, j)] = orig;
            g[(i, j)] = (up - down) / (2.0 * h);
        }
    }
    g
}
