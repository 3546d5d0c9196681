//! Fully-connected network parametrization of eigenfunctions, with manual
//! backpropagation and Adam.
//!
//! The network is affine–ReLU stacks with an affine output layer. Training
//! never differentiates the spectral objective end to end: each pipeline
//! builds a constant matrix `G` (the batch gradient of the objective with
//! respect to the network output) and descends `tr(Y(theta)^T G)`;
//! [`train_grad`] implements exactly that reverse pass.

mod constrained;
mod free;

pub use constrained::ConstrainedNetTrainer;
pub use free::FreeNetTrainer;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{input_err, Result};
use crate::graph::IndexSet;
use crate::mat::Mat;
use crate::oracle::DenseEig;
use crate::rng::Rng;
use crate::solver::{rayleigh_ritz, Pencil};

#[allow(unused_imports)]
use num_traits::Float;

/// Weights and biases of the fully-connected network; layer `l` maps
/// `sizes[l] -> sizes[l+1]` by `a W^T + b` with ReLU on all but the last
/// layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    sizes: Vec<usize>,
    weights: Vec<Mat>,
    biases: Vec<Vec<f64>>,
}

impl MlpParams {
    /// Seeded uniform initialization on `[-sqrt(6/fan_in), sqrt(6/fan_in)]`
    /// per layer, zero biases.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(input_err!("need at least input and output layer sizes, all positive"));
        }
        let mut rng = Rng::new(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let bound = (6.0 / sizes[l] as f64).sqrt();
            weights.push(Mat::from_fn(sizes[l + 1], sizes[l], |_, _| {
                rng.uniform(-bound, bound)
            }));
            biases.push(vec![0.0; sizes[l + 1]]);
        }
        Ok(MlpParams { sizes: sizes.to_vec(), weights, biases })
    }

    pub fn from_parts(sizes: Vec<usize>, weights: Vec<Mat>, biases: Vec<Vec<f64>>) -> Result<Self> {
        if sizes.len() < 2 || weights.len() != sizes.len() - 1 || biases.len() != weights.len() {
            return Err(input_err!("inconsistent layer structure"));
        }
        for l in 0..weights.len() {
            if weights[l].rows() != sizes[l + 1]
                || weights[l].cols() != sizes[l]
                || biases[l].len() != sizes[l + 1]
            {
                return Err(input_err!("layer {l} shapes do not match the size list"));
            }
        }
        Ok(MlpParams { sizes, weights, biases })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn in_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[Mat] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Mat] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    fn num_layers(&self) -> usize {
        self.weights.len()
    }
}

/// Per-layer gradients, same shapes as [`MlpParams`].
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Mat>,
    pub biases: Vec<Vec<f64>>,
}

/// Forward pass on a batch of input rows.
pub fn mlp_forward(params: &MlpParams, x_rows: &Mat) -> Result<Mat> {
    if x_rows.cols() != params.in_dim() {
        return Err(input_err!(
            "input dimension {} does not match first layer {}",
            x_rows.cols(),
            params.in_dim()
        ));
    }
    let mut a = x_rows.clone();
    for l in 0..params.num_layers() {
        a = affine(&a, &params.weights[l], &params.biases[l]);
        if l + 1 < params.num_layers() {
            relu_inplace(&mut a);
        }
    }
    Ok(a)
}

fn affine(a: &Mat, w: &Mat, b: &[f64]) -> Mat {
    let mut out = a.matmul_nt(w);
    for i in 0..out.rows() {
        for (v, &bias) in out.row_mut(i).iter_mut().zip(b) {
            *v += bias;
        }
    }
    out
}

fn relu_inplace(a: &mut Mat) {
    for i in 0..a.rows() {
        for v in a.row_mut(i) {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
}

/// Gradient of `tr(Y(theta)^T G)` with respect to every parameter, where
/// `Y(theta)` is the forward output on `x_rows` and `G` is a constant.
pub fn train_grad(params: &MlpParams, x_rows: &Mat, g: &Mat) -> Result<MlpGrads> {
    if x_rows.cols() != params.in_dim() {
        return Err(input_err!("input dimension mismatch"));
    }
    if g.rows() != x_rows.rows() || g.cols() != params.out_dim() {
        return Err(input_err!(
            "objective gradient must be {} x {}, got {} x {}",
            x_rows.rows(),
            params.out_dim(),
            g.rows(),
            g.cols()
        ));
    }
    if !g.is_finite() {
        return Err(input_err!("objective gradient contains non-finite values"));
    }
    // forward, keeping every post-activation
    let layers = params.num_layers();
    let mut acts: Vec<Mat> = Vec::with_capacity(layers + 1);
    acts.push(x_rows.clone());
    for l in 0..layers {
        let mut a = affine(&acts[l], &params.weights[l], &params.biases[l]);
        if l + 1 < layers {
            relu_inplace(&mut a);
        }
        acts.push(a);
    }
    // reverse pass: dL/d(output) = G
    let mut grads = MlpGrads {
        weights: params.weights.iter().map(|w| Mat::zeros(w.rows(), w.cols())).collect(),
        biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
    };
    let mut delta = g.clone();
    for l in (0..layers).rev() {
        grads.weights[l] = delta.t_matmul(&acts[l]);
        for i in 0..delta.rows() {
            for (gb, &d) in grads.biases[l].iter_mut().zip(delta.row(i)) {
                *gb += d;
            }
        }
        if l > 0 {
            let mut back = delta.matmul(&params.weights[l]);
            // ReLU mask: the stored activation is zero exactly where the unit
            // was clamped (or at the kink, where the subgradient 0 is used)
            for i in 0..back.rows() {
                let act = acts[l].row(i);
                for (v, &a) in back.row_mut(i).iter_mut().zip(act) {
                    if a <= 0.0 {
                        *v = 0.0;
                    }
                }
            }
            delta = back;
        }
    }
    Ok(grads)
}

/// First/second moment accumulators for Adam, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_w: Vec<Mat>,
    v_w: Vec<Mat>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        AdamState {
            m_w: params.weights.iter().map(|w| Mat::zeros(w.rows(), w.cols())).collect(),
            v_w: params.weights.iter().map(|w| Mat::zeros(w.rows(), w.cols())).collect(),
            m_b: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_b: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update with bias correction:
/// `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_update(params: &mut MlpParams, state: &mut AdamState, grads: &MlpGrads, lr: f64) {
    state.step += 1;
    let t = state.step;
    for l in 0..params.weights.len() {
        adam_tensor(
            params.weights[l].data_mut(),
            state.m_w[l].data_mut(),
            state.v_w[l].data_mut(),
            grads.weights[l].data(),
            lr,
            state.beta1,
            state.beta2,
            state.eps,
            t,
        );
        adam_tensor(
            &mut params.biases[l],
            &mut state.m_b[l],
            &mut state.v_b[l],
            &grads.biases[l],
            lr,
            state.beta1,
            state.beta2,
            state.eps,
            t,
        );
    }
}

/// Elementwise Adam recurrence shared by the network and the
/// orthogonalization layer.
#[allow(clippy::too_many_arguments)]
pub(crate) fn adam_tensor(
    theta: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    g: &[f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
) {
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);
    for i in 0..theta.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Rows of `x` selected by a batch, in batch order.
pub(crate) fn gather_rows(x: &Mat, batch: &IndexSet) -> Mat {
    Mat::from_fn(batch.len(), x.cols(), |r, c| x[(batch.as_slice()[r], c)])
}

/// Detached records kept by the neighbor training schemes: the running
/// Gramian `(YDY)*`, the running `eta^T Y0`, and the output snapshot `Y0`.
/// Initialization needs one full forward pass; afterwards only
/// neighborhood-sized slices are ever touched.
#[derive(Debug, Clone)]
pub struct NeighborCaches {
    c_star: Mat,
    u_star: Vec<f64>,
    y0: Mat,
}

impl NeighborCaches {
    pub fn init(p: &Pencil, y_full: &Mat) -> Self {
        NeighborCaches {
            c_star: Mat::gram_weighted(y_full, p.d()),
            u_star: Mat::weighted_col_sums(y_full, p.eta()),
            y0: y_full.clone(),
        }
    }

    /// Replaces the snapshot rows on `set` with `y_new` (rows in set order)
    /// and folds the difference into both running records.
    pub fn refresh_on(&mut self, p: &Pencil, set: &IndexSet, y_new: &Mat) {
        let k = self.y0.cols();
        for (r, &i) in set.as_slice().iter().enumerate() {
            let di = p.d()[i];
            let eta_i = p.eta()[i];
            let old = self.y0.row(i).to_vec();
            let new = y_new.row(r);
            for a in 0..k {
                for b in 0..k {
                    self.c_star[(a, b)] += di * (new[a] * new[b] - old[a] * old[b]);
                }
                self.u_star[a] += eta_i * (new[a] - old[a]);
            }
            self.y0.row_mut(i).copy_from_slice(new);
        }
    }

    pub fn c_star(&self) -> &Mat {
        &self.c_star
    }

    pub fn u_star(&self) -> &[f64] {
        &self.u_star
    }

    /// The output snapshot; rows most recently refreshed are exact.
    pub fn y0(&self) -> &Mat {
        &self.y0
    }
}

/// The fixed per-epoch batch partition used in training: a seeded shuffle of
/// `0..n` reshuffled every epoch, cut into `batch_size` chunks.
pub fn epoch_batches(n: usize, batch_size: usize, epoch: usize, seed: u64) -> Vec<IndexSet> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = Rng::new(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.shuffle(&mut idx);
    idx.chunks(batch_size.max(1))
        .map(|c| IndexSet::new(c.to_vec(), n).expect("chunks are disjoint"))
        .collect()
}

/// Aligns the network output on the whole dataset to reference eigenvectors:
/// one Rayleigh–Ritz step on the output span, then the scale-invariant
/// relative error of each recovered column against the same-index reference
/// column. Returns `k_cmp` errors.
pub fn evaluate_embedding(
    p: &Pencil,
    output_full: &Mat,
    reference: &DenseEig,
    k_cmp: usize,
) -> Result<Vec<f64>> {
    if k_cmp > output_full.cols() {
        return Err(input_err!(
            "cannot compare {k_cmp} eigenvectors from a {}-column output",
            output_full.cols()
        ));
    }
    let (u_hat, _) = rayleigh_ritz(p, output_full)?;
    let mut errs = Vec::with_capacity(k_cmp);
    for j in 0..k_cmp {
        errs.push(crate::oracle::relative_error(&reference.vector(j), &u_hat.col(j))?);
    }
    Ok(errs)
}

/// [`evaluate_embedding`] on a network's raw output over a point matrix.
pub fn evaluate_mlp(
    params: &MlpParams,
    points: &Mat,
    p: &Pencil,
    reference: &DenseEig,
    k_cmp: usize,
) -> Result<Vec<f64>> {
    let y = mlp_forward(params, points)?;
    evaluate_embedding(p, &y, reference, k_cmp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::finite_diff_grad;

    #[test]
    fn zero_network_maps_everything_to_zero() {
        let params = MlpParams::from_parts(
            vec![3, 4, 2],
            vec![Mat::zeros(4, 3), Mat::zeros(2, 4)],
            vec![vec![0.0; 4], vec![0.0; 2]],
        )
        .unwrap();
        let x = Mat::from_fn(5, 3, |i, j| (i * 3 + j) as f64);
        let y = mlp_forward(&params, &x).unwrap();
        assert_eq!(y.max_abs(), 0.0);
    }

    #[test]
    fn single_linear_identity_layer() {
        let params =
            MlpParams::from_parts(vec![2, 2], vec![Mat::identity(2)], vec![vec![0.0; 2]]).unwrap();
        let x = Mat::from_flat(2, 2, vec![1.0, -2.0, 3.0, 4.0]);
        let y = mlp_forward(&params, &x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let params = MlpParams::new(&[3, 4, 2], 0).unwrap();
        let x = Mat::zeros(5, 2);
        assert!(mlp_forward(&params, &x).is_err());
    }

    #[test]
    fn trace_gradient_of_single_linear_layer() {
        // Y = X W^T: d tr(Y^T G) / dW = G^T X
        let mut rng = Rng::new(3);
        let w = Mat::from_fn(2, 3, |_, _| rng.uniform(-1.0, 1.0));
        let params =
            MlpParams::from_parts(vec![3, 2], vec![w], vec![vec![0.0; 2]]).unwrap();
        let x = Mat::from_fn(4, 3, |_, _| rng.uniform(-1.0, 1.0));
        let g = Mat::from_fn(4, 2, |_, _| rng.uniform(-1.0, 1.0));
        let grads = train_grad(&params, &x, &g).unwrap();
        let want = g.t_matmul(&x);
        assert!(Mat::max_abs_diff(&grads.weights[0], &want) < 1e-13);
    }

    #[test]
    fn zero_objective_gradient_gives_zero_parameter_gradient() {
        let params = MlpParams::new(&[2, 8, 2], 1).unwrap();
        let x = Mat::from_fn(3, 2, |i, j| (i + j) as f64 * 0.3);
        let grads = train_grad(&params, &x, &Mat::zeros(3, 2)).unwrap();
        for w in &grads.weights {
            assert_eq!(w.max_abs(), 0.0);
        }
    }

    #[test]
    fn backprop_matches_finite_differences_per_tensor() {
        let params = MlpParams::new(&[2, 128, 2], 11).unwrap();
        let mut rng = Rng::new(12);
        let x = Mat::from_fn(4, 2, |_, _| rng.uniform(-1.0, 1.0));
        let g = Mat::from_fn(4, 2, |_, _| rng.uniform(-1.0, 1.0));
        let grads = train_grad(&params, &x, &g).unwrap();
        let h = 1e-4;
        for l in 0..params.num_layers() {
            // weights
            let mut fd = Mat::zeros(params.weights[l].rows(), params.weights[l].cols());
            for r in 0..fd.rows() {
                for c in 0..fd.cols() {
                    let mut probe = params.clone();
                    probe.weights[l][(r, c)] += h;
                    let up = trace_obj(&probe, &x, &g);
                    probe.weights[l][(r, c)] -= 2.0 * h;
                    let down = trace_obj(&probe, &x, &g);
                    fd[(r, c)] = (up - down) / (2.0 * h);
                }
            }
            let rel = Mat::max_abs_diff(&fd, &grads.weights[l]) / grads.weights[l].frob_norm();
            assert!(rel < 1e-5, "layer {l} weight gradient rel err {rel}");
            // biases
            let mut worst = 0.0f64;
            let mut norm = 0.0f64;
            for idx in 0..params.biases[l].len() {
                let mut probe = params.clone();
                probe.biases[l][idx] += h;
                let up = trace_obj(&probe, &x, &g);
                probe.biases[l][idx] -= 2.0 * h;
                let down = trace_obj(&probe, &x, &g);
                let fd = (up - down) / (2.0 * h);
                worst = worst.max((fd - grads.biases[l][idx]).abs());
                norm += grads.biases[l][idx] * grads.biases[l][idx];
            }
            assert!(worst / norm.sqrt() < 1e-5, "layer {l} bias gradient");
        }
    }

    fn trace_obj(params: &MlpParams, x: &Mat, g: &Mat) -> f64 {
        let y = mlp_forward(params, x).unwrap();
        y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn backprop_is_implicitly_checked_by_finite_differences_of_forward() {
        // gradient through the matrix-based finite-difference oracle as well
        let params = MlpParams::new(&[2, 6, 1], 21).unwrap();
        let mut rng = Rng::new(22);
        let x = Mat::from_fn(3, 2, |_, _| rng.uniform(-1.0, 1.0));
        let g = Mat::from_fn(3, 1, |_, _| rng.uniform(-1.0, 1.0));
        let grads = train_grad(&params, &x, &g).unwrap();
        let w0 = params.weights[0].clone();
        let fd = finite_diff_grad(
            &mut |w: &Mat| {
                let mut probe = params.clone();
                probe.weights[0] = w.clone();
                trace_obj(&probe, &x, &g)
            },
            &w0,
            1e-5,
        );
        let rel = Mat::max_abs_diff(&fd, &grads.weights[0]) / grads.weights[0].frob_norm();
        assert!(rel < 1e-6, "rel {rel}");
    }

    #[test]
    fn train_grad_rejects_bad_objective_gradient() {
        let params = MlpParams::new(&[2, 4, 2], 5).unwrap();
        let x = Mat::zeros(3, 2);
        assert!(train_grad(&params, &x, &Mat::zeros(2, 2)).is_err());
        let mut nan = Mat::zeros(3, 2);
        nan[(0, 0)] = f64::NAN;
        assert!(train_grad(&params, &x, &nan).is_err());
    }

    #[test]
    fn adam_hand_checked_first_step() {
        // scalar parameter, g = 1, lr = 0.1: update is -0.1/(1 + 1e-8)
        let mut params = MlpParams::from_parts(
            vec![1, 1],
            vec![Mat::from_flat(1, 1, vec![0.0])],
            vec![vec![0.0]],
        )
        .unwrap();
        let mut state = AdamState::new(&params);
        let grads = MlpGrads {
            weights: vec![Mat::from_flat(1, 1, vec![1.0])],
            biases: vec![vec![0.0]],
        };
        adam_update(&mut params, &mut state, &grads, 0.1);
        let want = -0.1 / (1.0 + 1e-8);
        assert!((params.weights[0][(0, 0)] - want).abs() < 1e-15);

        // a second identical step moves less than the first
        let before = params.weights[0][(0, 0)];
        adam_update(&mut params, &mut state, &grads, 0.1);
        let second = (params.weights[0][(0, 0)] - before).abs();
        assert!(second < 0.1 && second > 0.0);
    }

    #[test]
    fn adam_with_zero_gradient_is_identity() {
        let mut params = MlpParams::new(&[2, 3, 1], 8).unwrap();
        let snapshot = params.clone();
        let mut state = AdamState::new(&params);
        let grads = MlpGrads {
            weights: vec![Mat::zeros(3, 2), Mat::zeros(1, 3)],
            biases: vec![vec![0.0; 3], vec![0.0]],
        };
        adam_update(&mut params, &mut state, &grads, 0.5);
        assert_eq!(params, snapshot);
    }

    #[test]
    fn initialization_is_seeded_and_bounded() {
        let a = MlpParams::new(&[2, 128, 2], 33).unwrap();
        let b = MlpParams::new(&[2, 128, 2], 33).unwrap();
        assert_eq!(a, b);
        let bound = (6.0f64 / 2.0).sqrt();
        assert!(a.weights[0].max_abs() <= bound);
        assert!(a.biases.iter().all(|b| b.iter().all(|&x| x == 0.0)));
    }
}
