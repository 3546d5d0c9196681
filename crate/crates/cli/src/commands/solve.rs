//! `solve-la`: the linear-algebra solver comparison, one CSV per replica.

use specmap_core::mat::Mat;
use specmap_core::oracle::relative_error;
use specmap_core::rng::Rng;
use specmap_core::solver::{
    init_in_ball, rayleigh_ritz, run_solver, step_constants, BatchPlan, Embedding, Objective,
    Pencil, Scheme, SolverConfig, VisitOrder,
};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::io::{save_embedding, CsvCell, CsvWriter};

use super::{f1_optimum, f2_optimum, load_pencil, References};

pub(crate) fn parse_scheme(s: &str) -> Scheme {
    match s {
        "local" => Scheme::Local,
        "full" => Scheme::Full,
        _ => Scheme::Neighbor,
    }
}

fn parse_order(s: &str) -> VisitOrder {
    match s {
        "reshuffle" => VisitOrder::ReshuffleEachEpoch,
        _ => VisitOrder::FixedCyclic,
    }
}

/// Per-epoch CSV columns: `epoch, objective_value, objective_gap,
/// grad_norm, rel_err_1..rel_err_K, ball_radius, wall_time_s`.
pub fn cmd_solve_la(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.k == 0 {
        return Err(CliError::config("k must be at least 1"));
    }
    let (pencil, _) = load_pencil(cfg)?;
    let n = pencil.n();
    let objective = if cfg.objective == "f1" { Objective::F1 } else { Objective::F2 };
    let deflated = objective == Objective::F2 && cfg.deflate;
    // the constrained objective has no deflation: it carries the trivial
    // eigenvector in an extra column instead
    let k_solve = if objective == Objective::F1 { cfg.k + 1 } else { cfg.k };
    let scheme = parse_scheme(&cfg.scheme);
    let order = parse_order(&cfg.batch_order);

    let refs = References::compute(&pencil, cfg.oracle_cap, deflated);
    let (ref_eig, skip) = refs.nontrivial(deflated);
    let optimum = match objective {
        Objective::F2 => refs
            .nontrivial(deflated)
            .0
            .map(|eig| f2_optimum(eig, k_solve)),
        Objective::F1 => refs.plain.as_ref().map(|eig| f1_optimum(eig, k_solve)),
    };

    cfg.write_echo()?;
    let mut failure: Option<CliError> = None;
    for &seed in &cfg.seeds {
        let plan = BatchPlan::shuffled(n, cfg.batch_size.min(n), order, seed)?;
        let consts = step_constants(&pencil, k_solve, &plan.batch_sizes(), None);
        let alpha = cfg.alpha.unwrap_or(match objective {
            Objective::F2 => consts.alpha_max,
            Objective::F1 => 0.45,
        });
        let y0 = match objective {
            Objective::F2 => init_in_ball(&pencil, k_solve, consts.r, seed),
            Objective::F1 => {
                let mut rng = Rng::new(seed);
                let y = Mat::from_fn(n, k_solve, |_, _| rng.uniform(-1.0, 1.0));
                Embedding::from_matrix(&pencil, y)?
            }
        };
        let solver_cfg = SolverConfig {
            objective,
            scheme,
            alpha,
            epochs: cfg.epochs,
            tol: cfg.tol,
            deflated,
        };

        let header = csv_header(cfg.k);
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut csv = CsvWriter::create(
            cfg.out_dir.join(format!("solve_seed{seed}.csv")),
            &header_refs,
        );
        let run = run_solver(&pencil, y0, &solver_cfg, &plan, |_, emb, report| {
            let mut cells = vec![
                CsvCell::Int(report.epoch as u64),
                CsvCell::Float(report.objective),
                CsvCell::opt(optimum.map(|o| report.objective - o)),
                CsvCell::Float(report.grad_norm),
            ];
            let errs = ref_eig.and_then(|eig| recovered_errors(&pencil, emb, eig, skip, cfg.k));
            match errs {
                Some(list) => cells.extend(list.into_iter().map(CsvCell::Float)),
                None => cells.extend((0..cfg.k).map(|_| CsvCell::Na)),
            }
            cells.push(CsvCell::Float(report.ball_radius));
            cells.push(CsvCell::Float(report.wall_time_s));
            csv.row(&cells);
        })?;
        csv.finish()?;
        save_embedding(
            &cfg.out_dir.join(format!("embedding_seed{seed}.txt")),
            run.embedding.y(),
        )?;
        if let Some(err) = run.failure {
            let msg = format!("seed {seed}: {err}");
            std::fs::write(cfg.out_dir.join(format!("solve_seed{seed}.error")), &msg)
                .map_err(|e| CliError::io(&cfg.out_dir, e))?;
            failure.get_or_insert(CliError::Core(err));
        }
    }
    match failure {
        Some(err) => Err(err),
        None => Ok(()),
    }
}

fn csv_header(k: usize) -> Vec<String> {
    let mut header = vec![
        "epoch".to_string(),
        "objective_value".to_string(),
        "objective_gap".to_string(),
        "grad_norm".to_string(),
    ];
    header.extend((1..=k).map(|i| format!("rel_err_{i}")));
    header.push("ball_radius".to_string());
    header.push("wall_time_s".to_string());
    header
}

/// Relative errors of the recovered nontrivial columns against reference
/// eigenvectors, skipping `skip` leading recovered columns (the trivial
/// direction of undeflated runs).
fn recovered_errors(
    p: &Pencil,
    emb: &Embedding,
    eig: &specmap_core::oracle::DenseEig,
    skip: usize,
    k: usize,
) -> Option<Vec<f64>> {
    let (u_hat, _) = rayleigh_ritz(p, emb.y()).ok()?;
    let mut errs = Vec::with_capacity(k);
    for j in 0..k {
        let reference = eig.vector(skip + j);
        let recovered = u_hat.col(skip + j);
        errs.push(relative_error(&reference, &recovered).ok()?);
    }
    Some(errs)
}
