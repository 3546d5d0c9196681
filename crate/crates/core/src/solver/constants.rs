//! The constants behind the guaranteed-convergence stepsize bound.
//!
//! For iterates confined to the ball
//! `W0 = { Y : max_i |D_i^{1/2} Y_i|_2 < R }` with `R >= 2 sqrt(M1)`, the
//! unit-scale quartic iteration stays in `W0` and converges globally to
//! minimizers whenever the stepsize is below `alpha_max`, the minimum of the
//! three expressions assembled here.



use super::Pencil;

#[allow(unused_imports)]
use num_traits::Float;

/// Ball radius, curvature bounds and the resulting largest safe stepsize.
#[derive(Debug, Clone, PartialEq)]
pub struct StepConstants {
    pub m1: f64,
    pub m2: f64,
    pub m_of_r: f64,
    /// Coordinatewise Lipschitz bound of the gradient inside the ball.
    pub l: f64,
    /// Ball radius, at least `2 sqrt(M1)`.
    pub r: f64,
    pub alpha_max: f64,
}

/// Computes `M1`, `M2`, `M(R)`, `L` and
/// `alpha_max = min{ (-2 M2 + sqrt(4 M2^2 + 3 M(R) R^2)) / (8 M(R)),
/// 1 / (16 M(R)), 1 / (K L max_p |S_p|) }` for a partition with the given
/// batch sizes (the whole index set when empty). `r_opt` can enlarge the
/// ball beyond the default `2 sqrt(M1)`.
pub fn step_constants(
    p: &Pencil,
    k: usize,
    batch_sizes: &[usize],
    r_opt: Option<f64>,
) -> StepConstants {
    let n = p.n();
    let d = p.d();
    let mut m1 = 0.0f64;
    let mut m2 = 0.0f64;
    let mut max_wii_sq = 0.0f64;
    let mut max_di_sq = 0.0f64;
    let mut max_di_offdiag = 0.0f64;
    let mut max_w = 0.0f64;
    let mut max_d = 0.0f64;

    for i in 0..n {
        let (cols, vals) = p.w().row(i);
        let wii = p.w().get(i, i);
        // |W_{i, i^c} D_{i^c}^{-1/2}|_2^2 over the stored off-diagonal row
        let mut offdiag_sq = 0.0;
        for (&j, &w) in cols.iter().zip(vals) {
            max_w = max_w.max(w);
            if j != i {
                offdiag_sq += w * w / d[j];
            }
        }
        let di = d[i];
        max_d = max_d.max(di);
        max_wii_sq = max_wii_sq.max(wii * wii);
        max_di_sq = max_di_sq.max(di * di);
        max_di_offdiag = max_di_offdiag.max(di * offdiag_sq);
        let root = (wii * wii + di * offdiag_sq + di / 2.0).sqrt();
        m1 = m1.max((wii + root) / (2.0 * di));
        m2 = m2.max(wii * wii / (4.0 * di) + offdiag_sq / 4.0);
    }

    let r = (2.0 * m1.sqrt()).max(r_opt.unwrap_or(0.0));
    let r2 = r * r;
    let nk = (n * k) as f64;
    let m_of_r = 3.0
        * (max_wii_sq * r2
            + max_di_sq * nk * nk * r2 * r2 * r2
            + max_di_offdiag * n as f64 * r2);
    let l = 4.0 * max_w + 4.0 * ((n + k) as f64) * r2 * max_d;

    let max_batch = batch_sizes.iter().copied().max().unwrap_or(n) as f64;
    let a1 = (-2.0 * m2 + (4.0 * m2 * m2 + 3.0 * m_of_r * r2).sqrt()) / (8.0 * m_of_r);
    let a2 = 1.0 / (16.0 * m_of_r);
    let a3 = 1.0 / (k as f64 * l * max_batch);
    StepConstants { m1, m2, m_of_r, l, r, alpha_max: a1.min(a2).min(a3) }
}

impl StepConstants {
    /// Uniform row bound `r` such that entries drawn from `[-r, r]` put the
    /// iterate strictly inside the half-radius ball `max_i |D_i^{1/2} Y_i| <
    /// R/2`.
    pub fn init_entry_bound(&self, k: usize, d: &[f64]) -> f64 {
        let max_d = d.iter().cloned().fold(0.0f64, f64::max);
        0.999 * self.r / (2.0 * (k as f64 * max_d).sqrt())
    }
}
