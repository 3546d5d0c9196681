//! Subcommand implementations and the dataset/graph plumbing they share.

mod eval;
mod solve;
mod train;

pub use eval::cmd_eval;
pub use solve::cmd_solve_la;
pub use train::cmd_train_nn;

use std::path::Path;

use specmap_core::data::{gen_one_moon, gen_two_moons, MnistSet};
use specmap_core::graph::{
    build_gaussian_affinity, build_knn_affinity, KernelConvention, PointCloud, SparseSym,
};
use specmap_core::mat::Mat;
use specmap_core::oracle::DenseEig;
use specmap_core::rng::Rng;
use specmap_core::solver::Pencil;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::io;

/// `gen-data`: writes the configured generator's point cloud (plus labels
/// when the generator has them) as `points.csv` in the output directory.
pub fn cmd_gen_data(cfg: &ExperimentConfig) -> Result<()> {
    let pc = generate_cloud(cfg, cfg.n, cfg.seed)?;
    cfg.write_echo()?;
    io::save_points_csv(&cfg.out_dir.join("points.csv"), &pc)
}

/// `build-graph`: builds the configured affinity matrix over the training
/// cloud and writes it as `graph.coo`.
pub fn cmd_build_graph(cfg: &ExperimentConfig) -> Result<()> {
    let pc = load_train_cloud(cfg)?;
    let w = build_affinity(cfg, &pc)?;
    cfg.write_echo()?;
    io::save_coo(&cfg.out_dir.join("graph.coo"), &w)
}

/// Generator datasets only; `mnist` and `csv` load existing data.
fn generate_cloud(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<PointCloud> {
    match cfg.dataset.as_str() {
        "one-moon" => Ok(gen_one_moon(n, cfg.noise_var, seed)?),
        "two-moons" => Ok(gen_two_moons(n, seed)?),
        other => Err(CliError::config(format!(
            "dataset '{other}' is not a generator; valid generators: one-moon, two-moons"
        ))),
    }
}

/// The training cloud for any dataset kind.
pub(crate) fn load_train_cloud(cfg: &ExperimentConfig) -> Result<PointCloud> {
    match cfg.dataset.as_str() {
        "one-moon" | "two-moons" => generate_cloud(cfg, cfg.n, cfg.seed),
        "csv" => {
            let path = cfg
                .data_csv
                .as_ref()
                .ok_or_else(|| CliError::config("dataset = csv requires data_csv"))?;
            io::load_points_csv(path)
        }
        "mnist" => {
            let images = cfg
                .images_path
                .as_ref()
                .ok_or_else(|| CliError::config("dataset = mnist requires images_path"))?;
            let labels = cfg
                .labels_path
                .as_ref()
                .ok_or_else(|| CliError::config("dataset = mnist requires labels_path"))?;
            let set = io::load_mnist_files(images, labels)?;
            mnist_subset(&set, cfg.n, cfg.seed)
        }
        other => Err(CliError::config(format!("unhandled dataset '{other}'"))),
    }
}

/// The held-out cloud, when the configuration provides one.
pub(crate) fn load_test_cloud(cfg: &ExperimentConfig) -> Result<Option<PointCloud>> {
    match cfg.dataset.as_str() {
        "one-moon" | "two-moons" => {
            Ok(Some(generate_cloud(cfg, cfg.effective_test_n(), cfg.effective_test_seed())?))
        }
        "mnist" => match (&cfg.test_images_path, &cfg.test_labels_path) {
            (Some(images), Some(labels)) => {
                let set = io::load_mnist_files(images, labels)?;
                Ok(Some(mnist_subset(&set, cfg.effective_test_n(), cfg.effective_test_seed())?))
            }
            _ => Ok(None),
        },
        _ => Ok(None),
    }
}

/// Takes the first `n` samples after a seeded shuffle.
fn mnist_subset(set: &MnistSet, n: usize, seed: u64) -> Result<PointCloud> {
    let total = set.images.rows();
    if n > total {
        return Err(CliError::config(format!(
            "requested {n} samples from an mnist file with {total}"
        )));
    }
    let mut order: Vec<usize> = (0..total).collect();
    Rng::new(seed).shuffle(&mut order);
    order.truncate(n);
    let points = Mat::from_fn(n, set.images.cols(), |i, j| set.images[(order[i], j)]);
    // digit labels are 0..=9; the two-class accuracy metric is not defined
    // for them, so they ride along for external use only
    let labels = order.iter().map(|&i| u32::from(set.labels[i])).collect();
    Ok(PointCloud::new(points, Some(labels))?)
}

pub(crate) fn build_affinity(cfg: &ExperimentConfig, pc: &PointCloud) -> Result<SparseSym> {
    match cfg.kernel.as_str() {
        "gaussian" => {
            let convention = match cfg.kernel_convention.as_str() {
                "sigma-squared" => KernelConvention::SigmaSquared,
                _ => KernelConvention::TwoSigmaSquared,
            };
            Ok(build_gaussian_affinity(pc, cfg.sigma, cfg.threshold, convention)?)
        }
        "knn" => Ok(build_knn_affinity(pc, cfg.knn_k)?),
        other => Err(CliError::config(format!("unhandled kernel '{other}'"))),
    }
}

/// The training pencil: from `graph_path` when given, otherwise built from
/// the dataset keys. Returns the cloud alongside (absent when solving a
/// loaded graph with no dataset behind it).
pub(crate) fn load_pencil(cfg: &ExperimentConfig) -> Result<(Pencil, Option<PointCloud>)> {
    if let Some(path) = &cfg.graph_path {
        let w = io::load_coo(Path::new(path))?;
        return Ok((Pencil::new(w)?, None));
    }
    let pc = load_train_cloud(cfg)?;
    let w = build_affinity(cfg, &pc)?;
    Ok((Pencil::new(w)?, Some(pc)))
}

/// Dense references for a pencil, when it fits under the oracle cap.
pub(crate) struct References {
    /// Eigenpairs of the plain pencil `(W, D)`.
    pub plain: Option<DenseEig>,
    /// Eigenpairs of the deflated pencil `(W - eta eta^T, D)`.
    pub deflated: Option<DenseEig>,
}

impl References {
    pub fn compute(p: &Pencil, cap: usize, want_deflated: bool) -> Self {
        if p.n() > cap {
            return References { plain: None, deflated: None };
        }
        let plain = specmap_core::oracle::dense_gevp(&p.to_dense_effective(false), p.d()).ok();
        let deflated = if want_deflated {
            specmap_core::oracle::dense_gevp(&p.to_dense_effective(true), p.d()).ok()
        } else {
            None
        };
        References { plain, deflated }
    }

    /// Reference eigenvectors for the first `k` nontrivial eigenfunctions
    /// plus the recovered-column offset, given how the run treats the
    /// trivial direction: deflated runs exclude it from the iterate, others
    /// carry it in column zero.
    pub fn nontrivial(&self, deflated_run: bool) -> (Option<&DenseEig>, usize) {
        if deflated_run {
            (self.deflated.as_ref(), 0)
        } else {
            (self.plain.as_ref(), 1)
        }
    }
}

/// Sum of the squared leading eigenvalues: the negated optimum of the
/// quartic objective.
pub(crate) fn f2_optimum(eig: &DenseEig, k: usize) -> f64 {
    -eig.values[..k].iter().map(|l| l * l).sum::<f64>()
}

/// `K - sum of leading eigenvalues`: the optimum of the constrained
/// objective over `k` columns.
pub(crate) fn f1_optimum(eig: &DenseEig, k: usize) -> f64 {
    k as f64 - eig.values[..k].iter().sum::<f64>()
}
