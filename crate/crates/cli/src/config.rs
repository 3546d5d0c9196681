//! Flat key=value experiment configuration.
//!
//! One canonical key list covers every subcommand; a config file supplies
//! `key = value` lines (`#` comments allowed), command-line flags override
//! file values, and the effective configuration is echoed into the output
//! directory so any run can be reproduced bit-for-bit from its echo.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

pub const DATASETS: &[&str] = &["one-moon", "two-moons", "mnist", "csv"];
pub const KERNELS: &[&str] = &["gaussian", "knn"];
pub const OBJECTIVES: &[&str] = &["f1", "f2"];
pub const SCHEMES: &[&str] = &["local", "full", "neighbor"];
pub const BATCH_ORDERS: &[&str] = &["fixed", "reshuffle"];
pub const KERNEL_CONVENTIONS: &[&str] = &["two-sigma-squared", "sigma-squared"];

/// Every run option, with defaults suited to the one-moon experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Data source: one of [`DATASETS`].
    pub dataset: String,
    /// Training sample count (generated datasets and the mnist subset).
    pub n: usize,
    /// One-moon noise variance.
    pub noise_var: f64,
    /// Data generation / subset selection seed.
    pub seed: u64,
    /// Test sample count; defaults to `n`.
    pub test_n: Option<usize>,
    /// Test generation seed; defaults to `seed + 1`.
    pub test_seed: Option<u64>,
    pub images_path: Option<PathBuf>,
    pub labels_path: Option<PathBuf>,
    pub test_images_path: Option<PathBuf>,
    pub test_labels_path: Option<PathBuf>,
    /// Points CSV to load when `dataset = csv`.
    pub data_csv: Option<PathBuf>,
    /// Affinity construction: one of [`KERNELS`].
    pub kernel: String,
    pub sigma: f64,
    pub threshold: f64,
    /// Gaussian exponent convention: one of [`KERNEL_CONVENTIONS`].
    pub kernel_convention: String,
    pub knn_k: usize,
    /// Pre-built affinity to load instead of constructing one.
    pub graph_path: Option<PathBuf>,
    /// One of [`OBJECTIVES`].
    pub objective: String,
    /// One of [`SCHEMES`].
    pub scheme: String,
    /// Number of nontrivial eigenfunctions to compute.
    pub k: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Linear-algebra stepsize; absent means the guaranteed bound for the
    /// quartic objective (and a safe constant for the constrained one).
    pub alpha: Option<f64>,
    /// Network learning rate.
    pub lr: f64,
    /// Replica seeds (network init and batch shuffling).
    pub seeds: Vec<u64>,
    /// Deflate the pencil (quartic objective only).
    pub deflate: bool,
    /// Early-stopping tolerance; zero disables.
    pub tol: f64,
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    /// Gradient-update the orthogonalization layer after its reset.
    pub update_xi: bool,
    /// Batch visit order: one of [`BATCH_ORDERS`].
    pub batch_order: String,
    /// Largest n for dense reference computations; above it gaps and
    /// relative errors are reported as `NA`.
    pub oracle_cap: usize,
    /// Parameter checkpoint to evaluate.
    pub checkpoint: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: "one-moon".into(),
            n: 500,
            noise_var: 0.01,
            seed: 0,
            test_n: None,
            test_seed: None,
            images_path: None,
            labels_path: None,
            test_images_path: None,
            test_labels_path: None,
            data_csv: None,
            kernel: "gaussian".into(),
            sigma: 0.1,
            threshold: 0.6,
            kernel_convention: "two-sigma-squared".into(),
            knn_k: 16,
            graph_path: None,
            objective: "f2".into(),
            scheme: "neighbor".into(),
            k: 2,
            batch_size: 4,
            epochs: 100,
            alpha: None,
            lr: 1e-3,
            seeds: vec![0],
            deflate: true,
            tol: 0.0,
            hidden: vec![128],
            update_xi: true,
            batch_order: "fixed".into(),
            oracle_cap: 2048,
            checkpoint: None,
            out_dir: PathBuf::from("."),
        }
    }
}

fn choice(key: &str, value: &str, allowed: &[&str]) -> Result<String> {
    if allowed.contains(&value) {
        Ok(value.to_string())
    } else {
        Err(CliError::config(format!(
            "invalid {key} '{value}'; valid values: {}",
            allowed.join(", ")
        )))
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::config(format!("invalid {key} '{value}'")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::config(format!("invalid {key} '{value}', expected true/false"))),
    }
}

fn num_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

impl ExperimentConfig {
    /// Sets one canonical key from its textual value; unknown keys are
    /// rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = choice(key, value, DATASETS)?,
            "n" => self.n = num(key, value)?,
            "noise_var" => self.noise_var = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "test_n" => self.test_n = Some(num(key, value)?),
            "test_seed" => self.test_seed = Some(num(key, value)?),
            "images_path" => self.images_path = Some(value.into()),
            "labels_path" => self.labels_path = Some(value.into()),
            "test_images_path" => self.test_images_path = Some(value.into()),
            "test_labels_path" => self.test_labels_path = Some(value.into()),
            "data_csv" => self.data_csv = Some(value.into()),
            "kernel" => self.kernel = choice(key, value, KERNELS)?,
            "sigma" => self.sigma = num(key, value)?,
            "threshold" => self.threshold = num(key, value)?,
            "kernel_convention" => {
                self.kernel_convention = choice(key, value, KERNEL_CONVENTIONS)?
            }
            "knn_k" => self.knn_k = num(key, value)?,
            "graph_path" => self.graph_path = Some(value.into()),
            "objective" => self.objective = choice(key, value, OBJECTIVES)?,
            "scheme" => self.scheme = choice(key, value, SCHEMES)?,
            "k" => self.k = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "alpha" => self.alpha = Some(num(key, value)?),
            "lr" => self.lr = num(key, value)?,
            "seeds" => self.seeds = num_list(key, value)?,
            "deflate" => self.deflate = boolean(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "hidden" => self.hidden = num_list(key, value)?,
            "update_xi" => self.update_xi = boolean(key, value)?,
            "batch_order" => self.batch_order = choice(key, value, BATCH_ORDERS)?,
            "oracle_cap" => self.oracle_cap = num(key, value)?,
            "checkpoint" => self.checkpoint = Some(value.into()),
            "out_dir" => self.out_dir = value.into(),
            _ => return Err(CliError::config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Loads `key = value` lines over the current values.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::parse(path, lineno + 1, "expected 'key = value'")
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn effective_test_n(&self) -> usize {
        self.test_n.unwrap_or(self.n)
    }

    pub fn effective_test_seed(&self) -> u64 {
        self.test_seed.unwrap_or(self.seed + 1)
    }

    /// The resolved configuration as canonical `key = value` lines; loading
    /// the echo reproduces this configuration exactly.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("dataset", self.dataset.clone());
        put("n", self.n.to_string());
        put("noise_var", self.noise_var.to_string());
        put("seed", self.seed.to_string());
        put("test_n", self.effective_test_n().to_string());
        put("test_seed", self.effective_test_seed().to_string());
        if let Some(p) = &self.images_path {
            put("images_path", p.display().to_string());
        }
        if let Some(p) = &self.labels_path {
            put("labels_path", p.display().to_string());
        }
        if let Some(p) = &self.test_images_path {
            put("test_images_path", p.display().to_string());
        }
        if let Some(p) = &self.test_labels_path {
            put("test_labels_path", p.display().to_string());
        }
        if let Some(p) = &self.data_csv {
            put("data_csv", p.display().to_string());
        }
        put("kernel", self.kernel.clone());
        put("sigma", self.sigma.to_string());
        put("threshold", self.threshold.to_string());
        put("kernel_convention", self.kernel_convention.clone());
        put("knn_k", self.knn_k.to_string());
        if let Some(p) = &self.graph_path {
            put("graph_path", p.display().to_string());
        }
        put("objective", self.objective.clone());
        put("scheme", self.scheme.clone());
        put("k", self.k.to_string());
        put("batch_size", self.batch_size.to_string());
        put("epochs", self.epochs.to_string());
        if let Some(a) = self.alpha {
            put("alpha", a.to_string());
        }
        put("lr", self.lr.to_string());
        put(
            "seeds",
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        );
        put("deflate", self.deflate.to_string());
        put("tol", self.tol.to_string());
        put(
            "hidden",
            self.hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        );
        put("update_xi", self.update_xi.to_string());
        put("batch_order", self.batch_order.clone());
        put("oracle_cap", self.oracle_cap.to_string());
        if let Some(p) = &self.checkpoint {
            put("checkpoint", p.display().to_string());
        }
        put("out_dir", self.out_dir.display().to_string());
        out
    }

    /// Writes the echo into the output directory.
    pub fn write_echo(&self) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::io(&self.out_dir, e))?;
        let path = self.out_dir.join("config.echo");
        std::fs::write(&path, self.echo()).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.set("sigmaa", "0.1").is_err());
        assert!(cfg.set("dataset", "three-moons").is_err());
        let err = cfg.set("dataset", "nope").unwrap_err().to_string();
        assert!(err.contains("one-moon") && err.contains("mnist"), "{err}");
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("n", "123").unwrap();
        cfg.set("sigma", "0.17").unwrap();
        cfg.set("seeds", "3,5,7").unwrap();
        cfg.set("alpha", "0.000125").unwrap();
        let echo = cfg.echo();
        let mut back = ExperimentConfig::default();
        for line in echo.lines() {
            let (k, v) = line.split_once('=').unwrap();
            back.set(k.trim(), v.trim()).unwrap();
        }
        assert_eq!(back.echo(), echo);
    }
}
