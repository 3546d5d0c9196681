//! `train-nn`: network training runs over replica seeds, one CSV per seed
//! plus a cross-seed summary.

use std::time::Instant;

use specmap_core::data::{clustering_accuracy, kmeans_1d};
use specmap_core::graph::{neighborhood, PointCloud};
use specmap_core::mat::Mat;
use specmap_core::nn::{
    epoch_batches, evaluate_embedding, ConstrainedNetTrainer, FreeNetTrainer, MlpParams,
};
use specmap_core::oracle::DenseEig;
use specmap_core::solver::{f1_value, f2_value, rayleigh_ritz, Pencil, Scheme};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::io::{save_mlp, CsvCell, CsvWriter};

use super::solve::parse_scheme;
use super::{build_affinity, f1_optimum, f2_optimum, load_test_cloud, load_train_cloud, References};

/// One side of the evaluation: a pencil, its point matrix, optional labels
/// and optional dense references.
struct EvalSide {
    pencil: Pencil,
    points: Mat,
    labels: Option<Vec<u8>>,
    refs: References,
}

impl EvalSide {
    fn build(cfg: &ExperimentConfig, pc: &PointCloud, deflated: bool) -> Result<Self> {
        let w = build_affinity(cfg, pc)?;
        let pencil = Pencil::new(w)?;
        let refs = References::compute(&pencil, cfg.oracle_cap, deflated);
        let labels = pc.labels().and_then(two_class_labels);
        Ok(EvalSide { pencil, points: pc.points().clone(), labels, refs })
    }
}

/// Clustering accuracy is defined for exactly two classes labeled 1 and 2.
fn two_class_labels(labels: &[u32]) -> Option<Vec<u8>> {
    if labels.iter().all(|&l| l == 1 || l == 2) {
        Some(labels.iter().map(|&l| l as u8).collect())
    } else {
        None
    }
}

enum Trainer {
    Free(FreeNetTrainer),
    Constrained(ConstrainedNetTrainer),
}

impl Trainer {
    fn step(
        &mut self,
        p: &Pencil,
        x: &Mat,
        batch: &specmap_core::graph::IndexSet,
    ) -> specmap_core::Result<()> {
        match self {
            Trainer::Free(t) => t.step(p, x, batch),
            Trainer::Constrained(t) => t.step(p, x, batch),
        }
    }

    fn output(&self, x: &Mat) -> specmap_core::Result<Mat> {
        match self {
            Trainer::Free(t) => t.output(x),
            Trainer::Constrained(t) => t.output(x),
        }
    }
}

/// Per-epoch CSV columns: `epoch, loss, gap, rel_err_train_1..K,
/// rel_err_test_1..K, acc_train, acc_test, mean_nbh, cost_full, cost_nbr,
/// wall_time_s`; a `summary.csv` aggregates seeds per epoch.
pub fn cmd_train_nn(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.k == 0 {
        return Err(CliError::config("k must be at least 1"));
    }
    let constrained = cfg.objective == "f1";
    let deflated = !constrained && cfg.deflate;
    // constrained and undeflated runs carry the trivial direction in an
    // extra leading output column
    let skip = usize::from(constrained || !cfg.deflate);
    let out_dim = cfg.k + skip;
    let scheme = parse_scheme(&cfg.scheme);

    let train_pc = load_train_cloud(cfg)?;
    let train = EvalSide::build(cfg, &train_pc, deflated)?;
    let test = match load_test_cloud(cfg)? {
        Some(pc) => EvalSide::build(cfg, &pc, deflated).ok(),
        None => None,
    };
    let n = train.pencil.n();
    let optimum = match constrained {
        false => train.refs.nontrivial(deflated).0.map(|eig| f2_optimum(eig, out_dim)),
        true => train.refs.plain.as_ref().map(|eig| f1_optimum(eig, out_dim)),
    };

    let mut sizes = vec![train.points.cols()];
    sizes.extend(&cfg.hidden);
    sizes.push(out_dim);

    cfg.write_echo()?;
    let header = csv_header(cfg.k);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();

    // per-seed per-epoch records kept for the summary
    let mut all_rows: Vec<Vec<EpochRecord>> = Vec::new();
    for &seed in &cfg.seeds {
        let params = MlpParams::new(&sizes, seed)?;
        let mut trainer = if constrained {
            Trainer::Constrained(ConstrainedNetTrainer::new(
                params,
                scheme,
                cfg.lr,
                cfg.update_xi,
            ))
        } else {
            Trainer::Free(FreeNetTrainer::new(params, scheme, cfg.lr, deflated))
        };
        if scheme == Scheme::Neighbor {
            match &mut trainer {
                Trainer::Free(t) => t.init_caches(&train.pencil, &train.points)?,
                Trainer::Constrained(t) => t.init_caches(&train.pencil, &train.points)?,
            }
        }

        let mut csv = CsvWriter::create(
            cfg.out_dir.join(format!("train_seed{seed}.csv")),
            &header_refs,
        );
        let mut rows: Vec<EpochRecord> = Vec::new();
        let clock = Instant::now();
        let mut aborted = None;
        for epoch in 1..=cfg.epochs {
            let mut nbh_sizes: Vec<f64> = Vec::new();
            let batches = epoch_batches(n, cfg.batch_size.min(n), epoch - 1, seed);
            for batch in &batches {
                if let Ok(nb) = neighborhood(train.pencil.w(), batch) {
                    nbh_sizes.push(nb.len() as f64);
                }
                if let Err(e) = trainer.step(&train.pencil, &train.points, batch) {
                    aborted = Some(e);
                    break;
                }
            }
            if aborted.is_some() {
                break;
            }
            let mean_nbh = nbh_sizes.iter().sum::<f64>() / nbh_sizes.len().max(1) as f64;
            let record = evaluate_epoch(
                cfg,
                &trainer,
                &train,
                test.as_ref(),
                epoch,
                skip,
                constrained,
                deflated,
                optimum,
                mean_nbh,
                clock.elapsed().as_secs_f64(),
            );
            csv.row(&record.cells(cfg.k));
            rows.push(record);
        }
        csv.finish()?;
        let (params, xi) = match &trainer {
            Trainer::Free(t) => (t.params(), None),
            Trainer::Constrained(t) => (t.params(), Some(t.orth())),
        };
        save_mlp(&cfg.out_dir.join(format!("params_seed{seed}.txt")), params, xi)?;
        if let Some(e) = aborted {
            // a failed factorization ends this replica; the others continue
            let msg = format!("seed {seed}: {e}");
            std::fs::write(cfg.out_dir.join(format!("train_seed{seed}.error")), msg)
                .map_err(|io| CliError::io(&cfg.out_dir, io))?;
        }
        all_rows.push(rows);
    }
    write_summary(cfg, &all_rows)?;
    Ok(())
}

struct EpochRecord {
    epoch: usize,
    loss: f64,
    gap: Option<f64>,
    rel_train: Option<Vec<f64>>,
    rel_test: Option<Vec<f64>>,
    acc_train: Option<f64>,
    acc_test: Option<f64>,
    mean_nbh: f64,
    cost_full: f64,
    cost_nbr: f64,
    wall_time_s: f64,
}

impl EpochRecord {
    fn cells(&self, k: usize) -> Vec<CsvCell> {
        let mut cells = vec![
            CsvCell::Int(self.epoch as u64),
            CsvCell::Float(self.loss),
            CsvCell::opt(self.gap),
        ];
        for errs in [&self.rel_train, &self.rel_test] {
            match errs {
                Some(list) => cells.extend(list.iter().map(|&e| CsvCell::Float(e))),
                None => cells.extend((0..k).map(|_| CsvCell::Na)),
            }
        }
        cells.push(CsvCell::opt(self.acc_train));
        cells.push(CsvCell::opt(self.acc_test));
        cells.push(CsvCell::Float(self.mean_nbh));
        cells.push(CsvCell::Float(self.cost_full));
        cells.push(CsvCell::Float(self.cost_nbr));
        cells.push(CsvCell::Float(self.wall_time_s));
        cells
    }
}

fn csv_header(k: usize) -> Vec<String> {
    let mut header = vec!["epoch".to_string(), "loss".to_string(), "gap".to_string()];
    header.extend((1..=k).map(|i| format!("rel_err_train_{i}")));
    header.extend((1..=k).map(|i| format!("rel_err_test_{i}")));
    for name in ["acc_train", "acc_test", "mean_nbh", "cost_full", "cost_nbr", "wall_time_s"] {
        header.push(name.to_string());
    }
    header
}

#[allow(clippy::too_many_arguments)]
fn evaluate_epoch(
    cfg: &ExperimentConfig,
    trainer: &Trainer,
    train: &EvalSide,
    test: Option<&EvalSide>,
    epoch: usize,
    skip: usize,
    constrained: bool,
    deflated: bool,
    optimum: Option<f64>,
    mean_nbh: f64,
    wall_time_s: f64,
) -> EpochRecord {
    let out_train = trainer.output(&train.points).ok();
    let loss = out_train
        .as_ref()
        .map(|y| {
            if constrained {
                f1_value(&train.pencil, y)
            } else {
                f2_value(&train.pencil, y, deflated)
            }
        })
        .unwrap_or(f64::NAN);
    let gap = optimum.map(|o| loss - o);

    let side_metrics = |side: &EvalSide, out: Option<&Mat>| {
        let out = out?;
        let (eig, _) = side.refs.nontrivial(deflated);
        let rel = eig.and_then(|eig| column_errors(&side.pencil, out, eig, skip, cfg.k));
        let acc = side.labels.as_ref().and_then(|labels| {
            let (u_hat, _) = rayleigh_ritz(&side.pencil, out).ok()?;
            let coord = u_hat.col(skip);
            let pred = kmeans_1d(&coord, 0).ok()?;
            clustering_accuracy(&pred, labels).ok()
        });
        Some((rel, acc))
    };

    let (rel_train, acc_train) = side_metrics(train, out_train.as_ref())
        .map_or((None, None), |(r, a)| (r, a));
    let (rel_test, acc_test) = match test {
        Some(side) => {
            let out_test = trainer.output(&side.points).ok();
            side_metrics(side, out_test.as_ref()).map_or((None, None), |(r, a)| (r, a))
        }
        None => (None, None),
    };

    let n = train.pencil.n() as f64;
    let b = cfg.batch_size as f64;
    EpochRecord {
        epoch,
        loss,
        gap,
        rel_train,
        rel_test,
        acc_train,
        acc_test,
        mean_nbh,
        cost_full: n * n / b * epoch as f64,
        cost_nbr: n * mean_nbh / b * epoch as f64,
        wall_time_s,
    }
}

/// Relative errors of the recovered nontrivial columns against reference
/// eigenvectors; `skip` drops the trivial direction of undeflated or
/// constrained models.
fn column_errors(
    p: &Pencil,
    out: &Mat,
    eig: &DenseEig,
    skip: usize,
    k: usize,
) -> Option<Vec<f64>> {
    let errs = evaluate_embedding(p, out, eig, skip + k).ok()?;
    Some(errs[skip..].to_vec())
}

/// `summary.csv`: per-epoch cross-seed mean/std of accuracy plus mean gap
/// and mean first relative error, over the epochs every seed completed.
fn write_summary(cfg: &ExperimentConfig, all_rows: &[Vec<EpochRecord>]) -> Result<()> {
    let epochs = all_rows.iter().map(Vec::len).min().unwrap_or(0);
    let mut csv = CsvWriter::create(
        cfg.out_dir.join("summary.csv"),
        &[
            "epoch",
            "mean_gap",
            "mean_rel_err_train_1",
            "mean_acc_train",
            "std_acc_train",
            "mean_acc_test",
            "std_acc_test",
        ],
    );
    for e in 0..epochs {
        let records: Vec<&EpochRecord> = all_rows.iter().map(|rows| &rows[e]).collect();
        let mean_of = |f: &dyn Fn(&EpochRecord) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = records.iter().filter_map(|r| f(r)).collect();
            (vals.len() == records.len())
                .then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let std_of = |f: &dyn Fn(&EpochRecord) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = records.iter().filter_map(|r| f(r)).collect();
            if vals.len() != records.len() || vals.is_empty() {
                return None;
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var =
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            Some(var.sqrt())
        };
        csv.row(&[
            CsvCell::Int(records[0].epoch as u64),
            CsvCell::opt(mean_of(&|r| r.gap)),
            CsvCell::opt(mean_of(&|r| r.rel_train.as_ref().map(|v| v[0]))),
            CsvCell::opt(mean_of(&|r| r.acc_train)),
            CsvCell::opt(std_of(&|r| r.acc_train)),
            CsvCell::opt(mean_of(&|r| r.acc_test)),
            CsvCell::opt(std_of(&|r| r.acc_test)),
        ]);
    }
    csv.finish()
}
