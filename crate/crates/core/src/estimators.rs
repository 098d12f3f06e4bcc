//! Truncated quadratic variation and its jump-bias corrections.
//!
//! `Q_n = Σ f(X_{t_{i-1}}) (ΔX_i)² K(ΔX_i / (k n^{-β}))`. The leading jump
//! bias of `Q_n` is `n^{-β(2-α)} λ |γ|^α k^{2-α} ∫ K(u) |u|^{1-α} du`, with
//! `λ` the prefactor of the small-jump Lévy density (`c_α` by default). It is
//! removed by subtraction, by a kernel whose moment vanishes, or by
//! Richardson extrapolation over the grids `n` and `2n`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{kernel_moment, Kernel};
use crate::levy_sim::{simulate_path_with, ModelSpec, PathSample};
use crate::rng;
use crate::stable_analytics::c_alpha;

/// Weight `f` applied at the left end of each increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
  #[default]
  Unit,
  /// `1 + |x|`
  OnePlusAbs,
  /// `1 + x²`
  OnePlusSquare,
}

impl Weight {
  #[inline]
  pub fn eval(&self, x: f64) -> f64 {
    match self {
      Weight::Unit => 1.0,
      Weight::OnePlusAbs => 1.0 + x.abs(),
      Weight::OnePlusSquare => 1.0 + x * x,
    }
  }
}

impl FromStr for Weight {
  type Err = Error;

  fn from_str(s: &str) -> Result<Self> {
    match s.trim() {
      "unit" | "1" => Ok(Weight::Unit),
      "one_plus_abs" => Ok(Weight::OnePlusAbs),
      "one_plus_square" => Ok(Weight::OnePlusSquare),
      other => Err(Error::param(format!(
        "unknown weight `{other}` (expected unit, one_plus_abs or one_plus_square)"
      ))),
    }
  }
}

impl fmt::Display for Weight {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    f.write_str(match self {
      Weight::Unit => "unit",
      Weight::OnePlusAbs => "one_plus_abs",
      Weight::OnePlusSquare => "one_plus_square",
    })
  }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correction {
  #[default]
  None,
  SubtractBias,
  /// Evaluate with `phi + c̃ psi_M`.
  CancelKernel { m: f64 },
  /// Treat the path as the `2n` grid and extrapolate against its every-other-point coarsening.
  Richardson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
  pub beta: f64,
  pub k: f64,
  pub kernel: Kernel,
  pub weight: Weight,
  pub correction: Correction,
}

impl EstimatorConfig {
  pub fn new(beta: f64, k: f64) -> Result<Self> {
    let c = Self {
      beta,
      k,
      kernel: Kernel::Phi,
      weight: Weight::Unit,
      correction: Correction::None,
    };
    c.validate()?;
    Ok(c)
  }

  pub fn with_kernel(mut self, kernel: Kernel) -> Self {
    self.kernel = kernel;
    self
  }

  pub fn with_weight(mut self, weight: Weight) -> Self {
    self.weight = weight;
    self
  }

  pub fn with_correction(mut self, correction: Correction) -> Self {
    self.correction = correction;
    self
  }

  pub fn validate(&self) -> Result<()> {
    if !(self.beta > 0.0 && self.beta < 0.5) {
      return Err(Error::param(format!("beta must lie in (0, 1/2), got {}", self.beta)));
    }
    if !(self.k > 0.0 && self.k.is_finite()) {
      return Err(Error::param(format!("threshold multiplier k must be positive, got {}", self.k)));
    }
    if let Correction::CancelKernel { m } = self.correction {
      Kernel::psi(m)?;
    }
    Ok(())
  }

  /// Truncation level `k n^{-β}`.
  pub fn threshold(&self, n: usize) -> f64 {
    self.k * (n as f64).powf(-self.beta)
  }
}

/// Jump component seen by the bias formula: index, coefficient and the
/// prefactor `λ` of the Lévy density `λ |z|^{-1-α}` near the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpInfo {
  pub alpha: f64,
  pub gamma: f64,
  pub levy_scale: f64,
}

impl JumpInfo {
  /// Jumps whose Lévy density prefactor is the tail constant `c_α`.
  pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
    Ok(Self {
      alpha,
      gamma,
      levy_scale: c_alpha(alpha)?,
    })
  }

  pub fn with_levy_scale(alpha: f64, gamma: f64, levy_scale: f64) -> Result<Self> {
    c_alpha(alpha)?;
    if !(levy_scale > 0.0 && levy_scale.is_finite()) {
      return Err(Error::param("Lévy density scale must be positive"));
    }
    Ok(Self {
      alpha,
      gamma,
      levy_scale,
    })
  }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
  pub q_n: f64,
  pub correction_applied: f64,
  pub final_estimate: f64,
  pub normalized_error: Option<f64>,
}

impl EstimateResult {
  fn new(q_n: f64, final_estimate: f64, correction_applied: f64, n: usize, sigma2: Option<f64>) -> Self {
    Self {
      q_n,
      correction_applied,
      final_estimate,
      normalized_error: sigma2.map(|s| normalized_error(final_estimate, s, n)),
    }
  }
}

/// `(estimate - σ²) √n`.
pub fn normalized_error(estimate: f64, sigma2: f64, n: usize) -> f64 {
  (estimate - sigma2) * (n as f64).sqrt()
}

/// `Σ f(X_{t_{i-1}}) (ΔX_i)²`.
pub fn realized_volatility(path: &PathSample, weight: Weight) -> f64 {
  path
    .observations()
    .windows(2)
    .map(|w| {
      let d = w[1] - w[0];
      weight.eval(w[0]) * d * d
    })
    .sum()
}

/// Truncated quadratic variation with the kernel of `config`.
pub fn tqv(path: &PathSample, config: &EstimatorConfig) -> f64 {
  tqv_with_kernel(path, config, &config.kernel)
}

fn tqv_with_kernel(path: &PathSample, config: &EstimatorConfig, kernel: &Kernel) -> f64 {
  let scale = 1.0 / config.threshold(path.n());
  path
    .observations()
    .windows(2)
    .map(|w| {
      let d = w[1] - w[0];
      let kv = kernel.eval(d * scale);
      if kv == 0.0 {
        0.0
      } else {
        config.weight.eval(w[0]) * d * d * kv
      }
    })
    .sum()
}

/// Leading jump bias `n^{-β(2-α)} λ |γ|^α k^{2-α} ∫ K(u)|u|^{1-α} du`.
pub fn jump_bias(jump: &JumpInfo, beta: f64, k: f64, n: usize, kernel: &Kernel) -> Result<f64> {
  if jump.gamma == 0.0 {
    return Ok(0.0);
  }
  jump_bias_with_moment(jump, beta, k, n, kernel_moment(kernel, jump.alpha)?)
}

/// [`jump_bias`] with a precomputed kernel moment.
pub fn jump_bias_with_moment(jump: &JumpInfo, beta: f64, k: f64, n: usize, moment: f64) -> Result<f64> {
  if n < 2 {
    return Err(Error::param(format!("need n >= 2, got {n}")));
  }
  if jump.gamma == 0.0 {
    return Ok(0.0);
  }
  let a = jump.alpha;
  Ok((n as f64).powf(-beta * (2.0 - a)) * jump.levy_scale * jump.gamma.abs().powf(a) * k.powf(2.0 - a) * moment)
}

/// `Q_n^c = Q_n - jump_bias`.
pub fn corrected_tqv(path: &PathSample, config: &EstimatorConfig, jump: &JumpInfo, sigma2: Option<f64>) -> Result<EstimateResult> {
  config.validate()?;
  let q = tqv(path, config);
  let bias = jump_bias(jump, config.beta, config.k, path.n(), &config.kernel)?;
  Ok(EstimateResult::new(q, q - bias, bias, path.n(), sigma2))
}

/// `Q_{n,c}`: the truncated variation under `phi + c̃ psi_M`.
pub fn cancelled_kernel_tqv(
  path: &PathSample,
  config: &EstimatorConfig,
  alpha: f64,
  m: f64,
  sigma2: Option<f64>,
) -> Result<EstimateResult> {
  config.validate()?;
  let kernel = Kernel::cancelling(alpha, m)?;
  let q = tqv_with_kernel(path, config, &kernel);
  Ok(EstimateResult::new(q, q, 0.0, path.n(), sigma2))
}

/// `(Q_n - 2^{β(2-α)} Q_{2n}) / (1 - 2^{β(2-α)})`.
pub fn richardson(q_n: f64, q_2n: f64, alpha: f64, beta: f64) -> Result<f64> {
  let r = 2f64.powf(beta * (2.0 - alpha));
  if r == 1.0 || !r.is_finite() {
    return Err(Error::param("Richardson needs β(2 - α) != 0"));
  }
  // same as (q_n - r q_2n) / (1 - r), written so that q_n = q_2n is a fixed point
  Ok(q_2n + (q_n - q_2n) / (1.0 - r))
}

/// Richardson estimate from a path on the `2n` grid: `Q_n` is taken on every
/// other observation, so both estimators see the same trajectory. The
/// normalized error uses the coarse `n`.
pub fn richardson_tqv(fine: &PathSample, config: &EstimatorConfig, alpha: f64, sigma2: Option<f64>) -> Result<EstimateResult> {
  config.validate()?;
  let coarse = fine.coarsen(2)?;
  let q_n = tqv(&coarse, config);
  let q_2n = tqv(fine, config);
  let r = richardson(q_n, q_2n, alpha, config.beta)?;
  Ok(EstimateResult::new(q_n, r, q_n - r, coarse.n(), sigma2))
}

/// Runs `config.correction`; `jump` is needed by every correction but `None`.
pub fn estimate(
  path: &PathSample,
  config: &EstimatorConfig,
  jump: Option<&JumpInfo>,
  sigma2: Option<f64>,
) -> Result<EstimateResult> {
  config.validate()?;
  let need_jump = || jump.ok_or_else(|| Error::param("this correction needs the jump index and coefficient"));
  match config.correction {
    Correction::None => {
      let q = tqv(path, config);
      Ok(EstimateResult::new(q, q, 0.0, path.n(), sigma2))
    }
    Correction::SubtractBias => corrected_tqv(path, config, need_jump()?, sigma2),
    Correction::CancelKernel { m } => cancelled_kernel_tqv(path, config, need_jump()?.alpha, m, sigma2),
    Correction::Richardson => richardson_tqv(path, config, need_jump()?.alpha, sigma2),
  }
}

/// Pairwise (cascade) summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
  if xs.len() <= 16 {
    return xs.iter().sum();
  }
  let mid = xs.len() / 2;
  pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Least-squares fit of `log(bias)` against `log(1/n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
  pub slope: f64,
  pub intercept: f64,
  pub stderr: f64,
  /// Grid values whose mean bias was not positive and so were left out.
  pub dropped: Vec<usize>,
  pub mean_bias: Vec<f64>,
}

/// Fits `log b = c + s log(1/n)` over the points with `b > 0`.
pub fn fit_log_log_slope(ns: &[usize], biases: &[f64]) -> Result<SlopeFit> {
  check_grid(ns)?;
  if ns.len() != biases.len() {
    return Err(Error::param("grid and bias lists differ in length"));
  }
  let mut xs = Vec::new();
  let mut ys = Vec::new();
  let mut dropped = Vec::new();
  for (&n, &b) in ns.iter().zip(biases) {
    if b > 0.0 && b.is_finite() {
      xs.push(-(n as f64).ln());
      ys.push(b.ln());
    } else {
      dropped.push(n);
    }
  }
  if xs.len() < 3 {
    return Err(Error::Numerical {
      message: format!("only {} grid points with positive mean bias; need 3", xs.len()),
      achieved: xs.len() as f64,
    });
  }
  let m = xs.len() as f64;
  let mx = xs.iter().sum::<f64>() / m;
  let my = ys.iter().sum::<f64>() / m;
  let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
  let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
  let slope = sxy / sxx;
  let intercept = my - slope * mx;
  let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
  let stderr = if xs.len() > 2 { (rss / (m - 2.0) / sxx).sqrt() } else { f64::NAN };
  Ok(SlopeFit {
    slope,
    intercept,
    stderr,
    dropped,
    mean_bias: biases.to_vec(),
  })
}

fn check_grid(ns: &[usize]) -> Result<()> {
  let mut sorted = ns.to_vec();
  sorted.sort_unstable();
  sorted.dedup();
  if sorted.len() < 4 || sorted[0] < 2 {
    return Err(Error::param("rate fit needs at least 4 distinct grid sizes n >= 2"));
  }
  if (*sorted.last().unwrap() as f64) < 8.0 * sorted[0] as f64 {
    return Err(Error::param("rate fit grid must span at least a factor of 8"));
  }
  Ok(())
}

/// Monte Carlo rate diagnostic: the mean of `Q_n - σ²` over `replicates`
/// paths per grid size, regressed on `1/n` in log-log scale. Expected slope
/// is `β(2 - α)`. Grid size `j` uses the streams `(seed, stream_base + j, r)`.
pub fn rate_fit(
  model: &ModelSpec,
  config: &EstimatorConfig,
  n_grid: &[usize],
  replicates: usize,
  seed: u64,
  stream_base: u64,
) -> Result<SlopeFit> {
  config.validate()?;
  model.validate()?;
  check_grid(n_grid)?;
  if replicates == 0 {
    return Err(Error::param("need at least one replicate"));
  }
  let sigma2 = model.integrated_variance();
  let mut biases = Vec::with_capacity(n_grid.len());
  for (j, &n) in n_grid.iter().enumerate() {
    let errs: Vec<f64> = (0..replicates as u64)
      .into_par_iter()
      .map(|r| {
        let mut rng = rng::stream(seed, stream_base + j as u64, r);
        simulate_path_with(model, n, &mut rng).map(|p| tqv(&p, config) - sigma2)
      })
      .collect::<Result<_>>()?;
    biases.push(pairwise_sum(&errs) / replicates as f64);
  }
  fit_log_log_slope(n_grid, &biases)
}
