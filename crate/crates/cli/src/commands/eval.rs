//! `eval`: metrics of a trained checkpoint on the train and test splits.

use specmap_core::graph::PointCloud;
use specmap_core::mat::Mat;
use specmap_core::nn::{evaluate_embedding, mlp_forward};
use specmap_core::oracle::subspace_error;
use specmap_core::solver::{rayleigh_ritz, Pencil};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::io::{load_mlp, CsvCell, CsvWriter};

use super::{build_affinity, load_test_cloud, load_train_cloud, References};

/// `eval.csv` columns: `split, rel_err_1..rel_err_K, subspace_err,
/// accuracy`; cells are `NA` when no dense reference exists (n above the
/// oracle cap) or no labels are present.
pub fn cmd_eval(cfg: &ExperimentConfig) -> Result<()> {
    let checkpoint = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| CliError::config("eval requires checkpoint"))?;
    let (params, xi) = load_mlp(checkpoint)?;
    // constrained checkpoints (with an orthogonalization block) and
    // undeflated ones carry the trivial direction in a leading column
    let skip = usize::from(xi.is_some() || !cfg.deflate);
    let out_dim = *params.sizes().last().unwrap();
    if out_dim < cfg.k + skip {
        return Err(CliError::config(format!(
            "checkpoint output dimension {out_dim} cannot provide k = {} nontrivial \
             eigenfunctions (needs at least {})",
            cfg.k,
            cfg.k + skip
        )));
    }
    let deflated = xi.is_none() && cfg.deflate;

    let train_pc = load_train_cloud(cfg)?;
    let test_pc = load_test_cloud(cfg)?;
    cfg.write_echo()?;

    let mut header = vec!["split".to_string()];
    header.extend((1..=cfg.k).map(|i| format!("rel_err_{i}")));
    header.push("subspace_err".to_string());
    header.push("accuracy".to_string());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = CsvWriter::create(cfg.out_dir.join("eval.csv"), &header_refs);

    let model_output = |points: &Mat| -> Result<Mat> {
        let y = mlp_forward(&params, points)?;
        Ok(match &xi {
            Some(xi) => y.matmul(xi),
            None => y,
        })
    };

    let mut write_split = |name: &str, pc: &PointCloud| -> Result<()> {
        let w = build_affinity(cfg, pc)?;
        let pencil = Pencil::new(w)?;
        let refs = References::compute(&pencil, cfg.oracle_cap, deflated);
        let (eig, _) = refs.nontrivial(deflated);
        let out = model_output(pc.points())?;

        let mut cells = vec![CsvCell::Text(name.to_string())];
        let rel = eig.and_then(|eig| {
            let errs = evaluate_embedding(&pencil, &out, eig, skip + cfg.k).ok()?;
            Some(errs[skip..].to_vec())
        });
        match &rel {
            Some(list) => cells.extend(list.iter().map(|&e| CsvCell::Float(e))),
            None => cells.extend((0..cfg.k).map(|_| CsvCell::Na)),
        }
        let sub = eig.and_then(|eig| {
            let (u_hat, _) = rayleigh_ritz(&pencil, &out).ok()?;
            let k_total = skip + cfg.k;
            let hat = Mat::from_fn(pencil.n(), cfg.k, |i, j| u_hat[(i, skip + j)]);
            let reference =
                Mat::from_fn(pencil.n(), cfg.k, |i, j| eig.vectors[(i, skip + j)]);
            debug_assert!(k_total <= u_hat.cols());
            subspace_error(&reference, &hat, pencil.d()).ok()
        });
        cells.push(CsvCell::opt(sub));
        let acc = pc
            .labels()
            .filter(|l| l.iter().all(|&x| x == 1 || x == 2))
            .and_then(|labels| {
                let (u_hat, _) = rayleigh_ritz(&pencil, &out).ok()?;
                let pred = specmap_core::data::kmeans_1d(&u_hat.col(skip), 0).ok()?;
                let truth: Vec<u8> = labels.iter().map(|&l| l as u8).collect();
                specmap_core::data::clustering_accuracy(&pred, &truth).ok()
            });
        cells.push(CsvCell::opt(acc));
        csv.row(&cells);
        Ok(())
    };

    write_split("train", &train_pc)?;
    if let Some(test) = &test_pc {
        write_split("test", test)?;
    }
    drop(write_split);
    csv.finish()
}
