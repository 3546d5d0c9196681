//! The epoch driver: cyclic batch iteration with per-epoch reporting.

use alloc::vec::Vec;

use crate::error::{input_err, Error, Result};
use crate::mat::Mat;
use crate::rng::Rng;

use super::f1::{f1_grad_norm, f1_step_counted, f1_value};
use super::f2::{step_scaled, value_and_grad_norm_scaled};
use super::{BatchPlan, Embedding, Objective, Pencil, Scheme, SolveReport};

#[allow(unused_imports)]
use num_traits::Float;

/// What to iterate and when to stop.
///
/// For the quartic objective the driver works in unit-normalized coordinates
/// (minimizers satisfy `Y^T D Y = diag(lambda)`), the scale in which
/// [`super::step_constants`] bounds the safe stepsize and defines the
/// invariant ball. The reported objective has minimum `-sum lambda_i^2`.
/// The constrained objective keeps its `Y^T D Y = n^2 I` normalization and
/// stops on relative iterate change instead of gradient norm.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub objective: Objective,
    pub scheme: Scheme,
    pub alpha: f64,
    pub epochs: usize,
    /// Stopping tolerance: full-gradient Frobenius norm for the quartic
    /// objective, relative iterate change for the constrained one. Zero
    /// disables early stopping.
    pub tol: f64,
    /// Deflate the pencil (quartic objective only).
    pub deflated: bool,
}

/// Driver outcome: final iterate, one report per completed epoch (plus the
/// initial record at epoch 0), and the failure that interrupted the run, if
/// any — the reports then end at the last finite epoch.
#[derive(Debug, Clone)]
pub struct SolveRun {
    pub embedding: Embedding,
    pub reports: Vec<SolveReport>,
    pub failure: Option<Error>,
}

impl SolveRun {
    pub fn final_report(&self) -> &SolveReport {
        self.reports.last().expect("always at least the initial report")
    }
}

/// Random iterate with i.i.d. entries uniform on `[-r, r)`, `r` chosen so
/// that `max_i |D_i^{1/2} Y_i|_2 < radius / 2` — strictly inside the
/// invariant ball of that radius.
pub fn init_in_ball(p: &Pencil, k: usize, radius: f64, seed: u64) -> Embedding {
    let max_d = p.d().iter().cloned().fold(0.0f64, f64::max);
    let r = 0.999 * radius / (2.0 * (k as f64 * max_d).sqrt());
    let mut rng = Rng::new(seed);
    let y = Mat::from_fn(p.n(), k, |_, _| rng.uniform(-r, r));
    Embedding::from_matrix(p, y).expect("shape is consistent by construction")
}

/// Runs the configured objective over the batch plan for up to
/// `cfg.epochs` epochs, invoking `observer(epoch, iterate, report)` after
/// the initial record and after every completed epoch.
pub fn run_solver<F>(
    p: &Pencil,
    y0: Embedding,
    cfg: &SolverConfig,
    plan: &BatchPlan,
    mut observer: F,
) -> Result<SolveRun>
where
    F: FnMut(usize, &Embedding, &SolveReport),
{
    if !(cfg.alpha > 0.0) {
        return Err(input_err!("stepsize must be positive, got {}", cfg.alpha));
    }
    if plan.n() != p.n() {
        return Err(input_err!("batch plan is for n = {}, pencil has n = {}", plan.n(), p.n()));
    }
    if y0.y().rows() != p.n() {
        return Err(input_err!("iterate has {} rows, pencil has n = {}", y0.y().rows(), p.n()));
    }

    let mut emb = y0;
    let mut reports = Vec::with_capacity(cfg.epochs + 1);
    let mut ball = emb.max_weighted_row_norm(p.d());
    let clock = Clock::start();

    let initial = make_report(p, &emb, cfg, 0, ball, clock.elapsed(), 0);
    observer(0, &emb, &initial);
    reports.push(initial);

    let mut iteration = 0usize;
    let mut prev_y = if cfg.objective == Objective::F1 { Some(emb.y().clone()) } else { None };

    for epoch in 1..=cfg.epochs {
        let mut epoch_macs = 0u64;
        for &bi in &plan.visit_order(epoch - 1) {
            let batch = plan.batch(bi);
            iteration += 1;
            let stepped = match cfg.objective {
                Objective::F2 => step_scaled(
                    &mut emb,
                    p,
                    batch,
                    cfg.alpha,
                    cfg.scheme,
                    cfg.deflated,
                    1.0,
                    iteration,
                    &mut epoch_macs,
                ),
                Objective::F1 => f1_step_counted(
                    &mut emb,
                    p,
                    batch,
                    cfg.alpha,
                    cfg.scheme,
                    iteration,
                    &mut epoch_macs,
                ),
            };
            match stepped {
                Ok(step_ball) => ball = ball.max(step_ball),
                Err(e) => {
                    return Ok(SolveRun { embedding: emb, reports, failure: Some(e) });
                }
            }
        }
        // bound floating-point drift of the incremental caches
        if cfg.scheme == Scheme::Neighbor {
            emb.refresh_caches(p);
        }
        let report = make_report(p, &emb, cfg, epoch, ball, clock.elapsed(), epoch_macs);
        observer(epoch, &emb, &report);
        let stop = match cfg.objective {
            Objective::F2 => cfg.tol > 0.0 && report.grad_norm < cfg.tol,
            Objective::F1 => {
                let prev = prev_y.as_mut().expect("kept for the constrained objective");
                let mut diff = emb.y().clone();
                diff.add_scaled(prev, -1.0);
                let denom = prev.frob_norm().max(f64::MIN_POSITIVE);
                let change = diff.frob_norm() / denom;
                *prev = emb.y().clone();
                cfg.tol > 0.0 && change < cfg.tol
            }
        };
        reports.push(report);
        if stop {
            break;
        }
    }
    Ok(SolveRun { embedding: emb, reports, failure: None })
}

fn make_report(
    p: &Pencil,
    emb: &Embedding,
    cfg: &SolverConfig,
    epoch: usize,
    ball: f64,
    wall_time_s: f64,
    macs: u64,
) -> SolveReport {
    let (objective, grad_norm) = match cfg.objective {
        Objective::F2 => value_and_grad_norm_scaled(p, emb.y(), cfg.deflated, 1.0),
        Objective::F1 => (f1_value(p, emb.y()), f1_grad_norm(p, emb.y())),
    };
    SolveReport { epoch, objective, grad_norm, ball_radius: ball, wall_time_s, macs }
}

#[cfg(feature = "std")]
struct Clock(std::time::Instant);

#[cfg(feature = "std")]
impl Clock {
    fn start() -> Self {
        Clock(std::time::Instant::now())
    }

    fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(not(feature = "std"))]
struct Clock;

#[cfg(not(feature = "std"))]
impl Clock {
    fn start() -> Self {
        Clock
    }

    fn elapsed(&self) -> f64 {
        0.0
    }
}
