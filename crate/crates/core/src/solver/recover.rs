//! Rayleigh–Ritz recovery of individual eigenpairs from a converged span.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::oracle::{cholesky_spd, solve_lower, solve_lower_transpose, sym_eig};

use super::Pencil;

/// One Rayleigh–Ritz step on the span of `Y`: solves the reduced `K x K`
/// generalized problem `(Y^T W Y) O = (Y^T D Y) O diag(vals)` and returns
/// `(Y O, vals)` with eigenvalues descending and `(YO)^T D (YO) = I`.
pub fn rayleigh_ritz(p: &Pencil, y: &Mat) -> Result<(Mat, Vec<f64>)> {
    let k = y.cols();
    let wy = p.w().times_dense(y);
    let a = y.t_matmul(&wy);
    let b = Mat::gram_weighted(y, p.d());
    let l = match cholesky_spd(&b) {
        Ok(l) => l,
        Err(Error::NotSpd) => return Err(Error::DegenerateEmbedding("singular Y^T D Y")),
        Err(e) => return Err(e),
    };
    // reduce to the standard symmetric problem L^{-1} A L^{-T}
    let mut reduced = Mat::zeros(k, k);
    for col in 0..k {
        let acol = a.col(col);
        let solved = solve_lower(&l, &acol);
        for row in 0..k {
            reduced[(row, col)] = solved[row];
        }
    }
    let mut m = Mat::zeros(k, k);
    for row in 0..k {
        let solved = solve_lower(&l, reduced.row(row));
        for col in 0..k {
            m[(row, col)] = solved[col];
        }
    }
    // exact symmetrization before rotating
    let sym = Mat::from_fn(k, k, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let (vals, s) = sym_eig(&sym);
    let mut o = Mat::zeros(k, k);
    for col in 0..k {
        let scol = s.col(col);
        let solved = solve_lower_transpose(&l, &scol);
        for row in 0..k {
            o[(row, col)] = solved[row];
        }
    }
    Ok((y.matmul(&o), vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::dense_gevp;
    use crate::rng::Rng;
    use crate::solver::f2::tests::random_pencil;
    use crate::solver::Embedding;

    #[test]
    fn exact_eigenvectors_reproduce_oracle_values() {
        let p = random_pencil(30, 70);
        let eig = dense_gevp(&p.w().to_dense(), p.d()).unwrap();
        let y = eig.leading_vectors(3);
        let (_, vals) = rayleigh_ritz(&p, &y).unwrap();
        for (got, want) in vals.iter().zip(&eig.values[..3]) {
            assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn rotation_invariance() {
        let p = random_pencil(25, 71);
        let eig = dense_gevp(&p.w().to_dense(), p.d()).unwrap();
        let y = eig.leading_vectors(2);
        let q = Mat::from_flat(2, 2, alloc::vec![0.6, -0.8, 0.8, 0.6]);
        let (u1, v1) = rayleigh_ritz(&p, &y).unwrap();
        let (u2, v2) = rayleigh_ritz(&p, &y.matmul(&q)).unwrap();
        for (a, b) in v1.iter().zip(&v2) {
            assert!((a - b).abs() < 1e-10);
        }
        // recovered vectors agree up to sign
        for col in 0..2 {
            let c1 = u1.col(col);
            let c2 = u2.col(col);
            let dot: f64 = c1.iter().zip(&c2).map(|(x, y)| x * y).sum();
            let n1: f64 = c1.iter().map(|x| x * x).sum::<f64>().sqrt();
            let n2: f64 = c2.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((dot.abs() - n1 * n2).abs() < 1e-8 * n1 * n2);
        }
    }

    #[test]
    fn scalar_case_is_the_rayleigh_quotient() {
        let p = random_pencil(12, 72);
        let mut rng = Rng::new(73);
        let y = Mat::from_fn(12, 1, |_, _| rng.uniform(-1.0, 1.0));
        let wy = p.w().times_dense(&y);
        let num: f64 = (0..12).map(|i| y[(i, 0)] * wy[(i, 0)]).sum();
        let den: f64 = (0..12).map(|i| y[(i, 0)] * p.d()[i] * y[(i, 0)]).sum();
        let (_, vals) = rayleigh_ritz(&p, &y).unwrap();
        assert!((vals[0] - num / den).abs() < 1e-12 * (num / den).abs().max(1.0));
    }

    #[test]
    fn recovered_columns_are_d_orthonormal() {
        let p = random_pencil(20, 74);
        let emb = {
            let mut rng = Rng::new(75);
            let y = Mat::from_fn(20, 3, |_, _| rng.uniform(-1.0, 1.0));
            Embedding::from_matrix(&p, y).unwrap()
        };
        let (u, _) = rayleigh_ritz(&p, emb.y()).unwrap();
        let gram = Mat::gram_weighted(&u, p.d());
        assert!(Mat::max_abs_diff(&gram, &Mat::identity(3)) < 1e-9);
    }

    #[test]
    fn singular_gramian_is_rejected() {
        let p = random_pencil(10, 76);
        let y = Mat::from_fn(10, 2, |i, _| i as f64); // duplicate columns
        assert!(matches!(
            rayleigh_ritz(&p, &y),
            Err(Error::DegenerateEmbedding(_))
        ));
    }
}
