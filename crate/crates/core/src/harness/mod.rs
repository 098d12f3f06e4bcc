//! Reproducible Monte Carlo experiments over configured cells.
//!
//! Replicate `r` of cell `c` always draws from the stream `(seed, c, r)` and
//! replicate results are collected in index order before aggregation, so a
//! report depends only on the configuration, never on the thread count.

mod config;
mod report;

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{CellConfig, ExperimentConfig, LawKind, Outputs};
pub use report::{
  emit_dzeta_csv, emit_plot_data, emit_rate_csv, emit_report, emit_richardson_csv, write_outputs, DzetaRow, ReportFormat,
  DZETA_CSV_HEADER, RATE_CSV_HEADER, REPORT_CSV_HEADER, RICHARDSON_CSV_HEADER,
};

use crate::error::{Error, Result};
use crate::estimators::{
  jump_bias_with_moment, normalized_error, pairwise_sum, rate_fit, richardson, tqv, EstimatorConfig,
};
use crate::kernels::{c_tilde, kernel_moment, Kernel};
use crate::levy_sim::{simulate_path_with, PathSample};
use crate::rng;
use crate::stable_analytics::{c_alpha, d_zeta_asymptotic, d_zeta_mc, d_zeta_quadrature, Normalization, StableLaw};

/// Largest fraction of excluded replicates for which a cell stays valid.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

/// Sample moments of one error metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
  pub mean: f64,
  pub rms: f64,
  pub stderr: f64,
}

impl Moments {
  /// Mean, root mean square and standard error of the mean; the standard
  /// error is 0 for a single value. `xs` must be non-empty.
  pub fn of(xs: &[f64]) -> Self {
    let m = xs.len() as f64;
    let mean = pairwise_sum(xs) / m;
    let squares: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let rms = (pairwise_sum(&squares) / m).sqrt();
    let stderr = if xs.len() > 1 {
      let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
      (pairwise_sum(&dev) / (m - 1.0) / m).sqrt()
    } else {
      0.0
    };
    Self { mean, rms, stderr }
  }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
  pub cell: CellConfig,
  pub n: usize,
  pub attempted: usize,
  pub succeeded: usize,
  pub excluded: usize,
  /// False when more than 1% of replicates had to be excluded.
  pub valid: bool,
  /// Jump bias subtracted for E2.
  pub bias: f64,
  /// Coefficient of `psi_M` in the cancelling kernel used for E3.
  pub c_tilde: f64,
  pub e1: Moments,
  pub e2: Moments,
  pub e3: Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
  pub config: ExperimentConfig,
  pub cells: Vec<CellReport>,
}

/// Per-replicate errors `[E1, E2, E3]` of one cell, in replicate order;
/// excluded replicates are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSamples {
  pub replicates: Vec<u64>,
  pub errors: Vec<[f64; 3]>,
}

struct PreparedCell {
  model: crate::levy_sim::ModelSpec,
  estimator: EstimatorConfig,
  cancelling: EstimatorConfig,
  bias: f64,
  c_tilde: f64,
}

fn prepare(cfg: &ExperimentConfig, cell: &CellConfig, n: usize) -> Result<PreparedCell> {
  let model = cell.model(cfg.sigma, cfg.normalization)?;
  let estimator = cell.estimator()?;
  let moment = kernel_moment(&estimator.kernel, cell.alpha)?;
  let bias = jump_bias_with_moment(&cell.jump_info(cfg.normalization)?, cell.beta, cell.k, n, moment)?;
  let ct = c_tilde(cell.alpha, cell.m)?;
  let cancelling = estimator.with_kernel(Kernel::composite(ct, cell.m)?);
  Ok(PreparedCell {
    model,
    estimator,
    cancelling,
    bias,
    c_tilde: ct,
  })
}

fn replicate_errors(p: &PreparedCell, path: &PathSample, sigma2: f64) -> Option<[f64; 3]> {
  let n = path.n();
  let q = tqv(path, &p.estimator);
  let qc = tqv(path, &p.cancelling);
  let e = [
    normalized_error(q, sigma2, n),
    normalized_error(q - p.bias, sigma2, n),
    normalized_error(qc, sigma2, n),
  ];
  e.iter().all(|v| v.is_finite()).then_some(e)
}

fn finite_path(path: &PathSample) -> bool {
  path.observations().iter().all(|x| x.is_finite())
}

/// Runs every cell of `config`; see [`run_mc_observed`].
pub fn run_mc(config: &ExperimentConfig) -> Result<McReport> {
  run_mc_with_samples(config).map(|(r, _)| r)
}

/// [`run_mc`] that also returns the per-replicate errors.
pub fn run_mc_with_samples(config: &ExperimentConfig) -> Result<(McReport, Vec<CellSamples>)> {
  run_mc_observed(config, |_, _, _| {})
}

/// For each cell and replicate, simulates one path and evaluates E1 (raw),
/// E2 (bias subtracted) and E3 (cancelling kernel) on it. Replicates whose
/// path or errors are not finite are excluded and counted. `on_cell`
/// receives each finished cell with its wall time, which is kept out of the
/// report so that reports stay reproducible.
pub fn run_mc_observed<F>(config: &ExperimentConfig, mut on_cell: F) -> Result<(McReport, Vec<CellSamples>)>
where
  F: FnMut(usize, &CellReport, Duration),
{
  config.validate()?;
  let sigma2 = config.integrated_variance();
  let mut cells = Vec::with_capacity(config.cells.len());
  let mut samples = Vec::with_capacity(config.cells.len());
  for (ci, cell) in config.cells.iter().enumerate() {
    let started = Instant::now();
    let p = prepare(config, cell, config.n)?;
    let results: Vec<Option<[f64; 3]>> = (0..config.replicates as u64)
      .into_par_iter()
      .map(|r| {
        let mut rng = rng::stream(config.seed, ci as u64, r);
        simulate_path_with(&p.model, config.n, &mut rng)
          .ok()
          .filter(finite_path)
          .and_then(|path| replicate_errors(&p, &path, sigma2))
      })
      .collect();
    let mut kept = CellSamples {
      replicates: Vec::new(),
      errors: Vec::new(),
    };
    for (r, e) in results.into_iter().enumerate() {
      if let Some(e) = e {
        kept.replicates.push(r as u64);
        kept.errors.push(e);
      }
    }
    let succeeded = kept.errors.len();
    if succeeded == 0 {
      return Err(Error::Numerical {
        message: format!("every replicate of cell {ci} failed"),
        achieved: 0.0,
      });
    }
    let excluded = config.replicates - succeeded;
    let column = |j: usize| -> Vec<f64> { kept.errors.iter().map(|e| e[j]).collect() };
    cells.push(CellReport {
      cell: *cell,
      n: config.n,
      attempted: config.replicates,
      succeeded,
      excluded,
      valid: excluded as f64 <= MAX_EXCLUDED_FRACTION * config.replicates as f64,
      bias: p.bias,
      c_tilde: p.c_tilde,
      e1: Moments::of(&column(0)),
      e2: Moments::of(&column(1)),
      e3: Moments::of(&column(2)),
    });
    samples.push(kept);
    on_cell(ci, cells.last().unwrap(), started.elapsed());
  }
  Ok((
    McReport {
      config: config.clone(),
      cells,
    },
    samples,
  ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
  pub alpha: f64,
  pub beta: f64,
  pub expected_slope: f64,
  pub fitted_slope: f64,
  pub stderr: f64,
  pub mean_bias: Vec<f64>,
  pub dropped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
  pub config: ExperimentConfig,
  pub rows: Vec<RateRow>,
}

/// Rate diagnostic per cell over `config.n_grid`; grid size `j` of cell `c`
/// uses streams `(seed, c * len(n_grid) + j, r)`.
pub fn run_rate_experiment(config: &ExperimentConfig) -> Result<RateReport> {
  config.validate()?;
  let mut rows = Vec::with_capacity(config.cells.len());
  for (ci, cell) in config.cells.iter().enumerate() {
    let model = cell.model(config.sigma, config.normalization)?;
    let est = cell.estimator()?;
    let base = (ci * config.n_grid.len()) as u64;
    let fit = rate_fit(&model, &est, &config.n_grid, config.replicates, config.seed, base)?;
    rows.push(RateRow {
      alpha: cell.alpha,
      beta: cell.beta,
      expected_slope: cell.beta * (2.0 - cell.alpha),
      fitted_slope: fit.slope,
      stderr: fit.stderr,
      mean_bias: fit.mean_bias,
      dropped: fit.dropped,
    });
  }
  Ok(RateReport {
    config: config.clone(),
    rows,
  })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichardsonRow {
  pub cell: CellConfig,
  pub n: usize,
  pub succeeded: usize,
  /// Raw error `(Q_n - σ²)√n` on the coarse grid.
  pub e1: Moments,
  /// Error of the extrapolated estimate, same normalization.
  pub richardson: Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichardsonReport {
  pub config: ExperimentConfig,
  pub rows: Vec<RichardsonRow>,
}

/// Paired-path Richardson experiment: each replicate simulates on `2n` steps,
/// evaluates `Q_{2n}` there and `Q_n` on every other observation.
pub fn run_richardson(config: &ExperimentConfig) -> Result<RichardsonReport> {
  config.validate()?;
  let sigma2 = config.integrated_variance();
  let n = config.n;
  let mut rows = Vec::with_capacity(config.cells.len());
  for (ci, cell) in config.cells.iter().enumerate() {
    let model = cell.model(config.sigma, config.normalization)?;
    let est = cell.estimator()?;
    let results: Vec<Option<[f64; 2]>> = (0..config.replicates as u64)
      .into_par_iter()
      .map(|r| {
        let mut rng = rng::stream(config.seed, ci as u64, r);
        let fine = simulate_path_with(&model, 2 * n, &mut rng).ok().filter(finite_path)?;
        let coarse = fine.coarsen(2).ok()?;
        let q_n = tqv(&coarse, &est);
        let ext = richardson(q_n, tqv(&fine, &est), cell.alpha, cell.beta).ok()?;
        let e = [normalized_error(q_n, sigma2, n), normalized_error(ext, sigma2, n)];
        e.iter().all(|v| v.is_finite()).then_some(e)
      })
      .collect();
    let kept: Vec<[f64; 2]> = results.into_iter().flatten().collect();
    if kept.is_empty() {
      return Err(Error::Numerical {
        message: format!("every replicate of cell {ci} failed"),
        achieved: 0.0,
      });
    }
    let e1: Vec<f64> = kept.iter().map(|e| e[0]).collect();
    let er: Vec<f64> = kept.iter().map(|e| e[1]).collect();
    rows.push(RichardsonRow {
      cell: *cell,
      n,
      succeeded: kept.len(),
      e1: Moments::of(&e1),
      richardson: Moments::of(&er),
    });
  }
  Ok(RichardsonReport {
    config: config.clone(),
    rows,
  })
}

/// `d(ζ)` by Monte Carlo, quadrature and its small-ζ leading term, for the
/// stable law of the given normalization.
pub fn dzeta_table(
  alpha: f64,
  zetas: &[f64],
  draws: usize,
  seed: u64,
  normalization: Normalization,
) -> Result<Vec<DzetaRow>> {
  let law = StableLaw::new(alpha, normalization)?;
  let rescale = law.tail_constant() / c_alpha(alpha)?;
  zetas
    .iter()
    .map(|&zeta| {
      let mc = d_zeta_mc(zeta, &law, draws, seed)?;
      Ok(DzetaRow {
        zeta,
        alpha,
        mc: mc.mean,
        quadrature: d_zeta_quadrature(zeta, &law)?,
        asymptotic: rescale * d_zeta_asymptotic(zeta, alpha, &Kernel::Phi)?,
        stderr: mc.stderr,
      })
    })
    .collect()
}
