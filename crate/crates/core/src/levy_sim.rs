//! Samplers for stable and tempered-stable increments and the discretely
//! observed jump-diffusion
//! `X_t = b t + σ W_t + γ L_t`, `L` symmetric (tempered) α-stable, on `[0, 1]`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{geometric_points, Integrator, Quad};
use crate::rng::{self, StreamRng};
use crate::stable_analytics::{check_alpha, Normalization, StableLaw};

/// Observation horizon; all paths live on `[0, 1]`.
pub const HORIZON: f64 = 1.0;

/// Default small-jump cutoff of the tempered sampler.
pub const DEFAULT_CUTOFF: f64 = 1e-2;

/// Chambers–Mallows–Stuck sampler for the symmetric stable law with
/// characteristic function `exp(-|t|^α)`, `α ∈ (0, 2]`.
#[derive(Debug, Clone, Copy)]
pub struct StandardStable {
  alpha: f64,
}

impl StandardStable {
  pub fn new(alpha: f64) -> Result<Self> {
    if alpha > 0.0 && alpha <= 2.0 {
      Ok(Self { alpha })
    } else {
      Err(Error::param(format!("stable index must lie in (0, 2], got {alpha}")))
    }
  }
}

impl Distribution<f64> for StandardStable {
  fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
    let a = self.alpha;
    // V uniform on the open interval (-π/2, π/2)
    let v = loop {
      let u: f64 = rng.random();
      if u > 0.0 {
        break PI * (u - 0.5);
      }
    };
    if a == 1.0 {
      return v.tan();
    }
    let w: f64 = rng.sample(Exp1);
    let cos_v = v.cos();
    (a * v).sin() / cos_v.powf(1.0 / a) * (((1.0 - a) * v).cos() / w).powf((1.0 - a) / a)
  }
}

/// One draw from the symmetric stable law with characteristic function
/// `exp(-|t|^α)`.
pub fn sample_standard_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
  Ok(StandardStable::new(alpha)?.sample(rng))
}

/// `σ_α = 2 ∫_0^∞ (1 - cos u) u^{-1-α} du`: the characteristic exponent of the
/// stable law whose Lévy density is `|z|^{-1-α}`.
pub fn unit_levy_scale(alpha: f64) -> Result<f64> {
  unit_levy_scale_with_tol(alpha, 1e-10)
}

// ∫_U^∞ e^{iu} u^{-p} du by repeated integration by parts; returns (cos, sin) parts.
fn oscillatory_tail(u: f64, p: f64, depth: u32) -> (f64, f64) {
  if depth == 0 {
    return (0.0, 0.0);
  }
  let (s, c) = u.sin_cos();
  let (next_c, next_s) = oscillatory_tail(u, p + 1.0, depth - 1);
  let up = u.powf(-p);
  // ∫cos u^{-p} = -sin U U^{-p} + p ∫ sin u^{-p-1}
  // ∫sin u^{-p} =  cos U U^{-p} - p ∫ cos u^{-p-1}
  (-s * up + p * next_s, c * up - p * next_c)
}

pub fn unit_levy_scale_with_tol(alpha: f64, tol: f64) -> Result<f64> {
  check_alpha(alpha)?;
  // [0, δ]: termwise integration of 1 - cos u = Σ (-1)^{k+1} u^{2k} / (2k)!
  let delta: f64 = 0.5;
  let mut head = 0.0;
  let mut fact = 1.0;
  for k in 1..12 {
    let two_k = 2.0 * k as f64;
    fact *= (two_k - 1.0) * two_k;
    let term = delta.powf(two_k - alpha) / (fact * (two_k - alpha));
    head += if k % 2 == 1 { term } else { -term };
  }
  // [δ, U] by quadrature on half-period panels
  let upper = 128.0 * PI;
  let mut pts = vec![delta, 1.0];
  pts.extend((1..=128).map(|j| j as f64 * PI));
  let Quad { value: body, .. } = Integrator::with_tol(tol / 4.0, 0.0)
    .integrate(|u| (1.0 - u.cos()) * u.powf(-1.0 - alpha), &pts)?;
  // [U, ∞): ∫u^{-1-α} minus the oscillatory part
  let (cos_tail, _) = oscillatory_tail(upper, 1.0 + alpha, 8);
  let tail = upper.powf(-alpha) / alpha - cos_tail;
  Ok(2.0 * (head + body + tail))
}

/// Increment of the stable process of `law` over a time step `delta`:
/// `(s delta)^{1/α}` times a standard draw.
pub fn sample_stable_increment<R: Rng + ?Sized>(law: &StableLaw, delta: f64, rng: &mut R) -> Result<f64> {
  if delta == 0.0 {
    return Ok(0.0);
  }
  if !(delta > 0.0 && delta.is_finite()) {
    return Err(Error::param(format!("time step must be positive, got {delta}")));
  }
  let std = StandardStable::new(law.alpha())?;
  Ok((law.cf_scale() * delta).powf(1.0 / law.alpha()) * std.sample(rng))
}

/// Tempered-stable increments for the Lévy density
/// `λ e^{-|z|} |z|^{-1-α}`: jumps above `cutoff` form a compound Poisson
/// process, jumps below it are replaced by a Gaussian of matched variance.
#[derive(Debug, Clone)]
pub struct TemperedSampler {
  alpha: f64,
  cutoff: f64,
  levy_scale: f64,
  intensity: f64,
  small_jump_variance: f64,
  // Cumulative unnormalized mass of e^{-z} z^{-1-α} on a geometric grid.
  grid: Vec<f64>,
  cumulative: Vec<f64>,
}

// Beyond this the tail mass e^{-z} z^{-1-α} is below double precision.
const TEMPERED_Z_MAX: f64 = 60.0;

fn tempered_density(z: f64, alpha: f64) -> f64 {
  (-z).exp() * z.powf(-1.0 - alpha)
}

fn gk_fixed(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
  // 10-point Gauss–Legendre
  const X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
  ];
  const W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
  ];
  let c = 0.5 * (a + b);
  let h = 0.5 * (b - a);
  let mut s = 0.0;
  for i in 0..5 {
    s += W[i] * (f(c - h * X[i]) + f(c + h * X[i]));
  }
  s * h
}

/// `∫_0^c z^{1-α} e^{-z} dz` by termwise integration of the exponential series.
fn small_jump_moment(alpha: f64, c: f64) -> f64 {
  let mut sum = 0.0;
  let mut fact = 1.0;
  for k in 0..40 {
    if k > 0 {
      fact *= k as f64;
    }
    let p = k as f64 + 2.0 - alpha;
    let term = c.powf(p) / (fact * p);
    sum += if k % 2 == 0 { term } else { -term };
    if term < 1e-18 * sum.abs() {
      break;
    }
  }
  sum
}

impl TemperedSampler {
  pub fn new(alpha: f64, levy_scale: f64, cutoff: f64) -> Result<Self> {
    check_alpha(alpha)?;
    if !(cutoff > 0.0 && cutoff <= 1.0) {
      return Err(Error::param(format!("small-jump cutoff must lie in (0, 1], got {cutoff}")));
    }
    if !(levy_scale > 0.0 && levy_scale.is_finite()) {
      return Err(Error::param("Lévy density scale must be positive"));
    }
    let grid = geometric_points(cutoff, TEMPERED_Z_MAX, 1.01);
    let mut cumulative = Vec::with_capacity(grid.len());
    cumulative.push(0.0);
    let mut acc = 0.0;
    for w in grid.windows(2) {
      acc += gk_fixed(|z| tempered_density(z, alpha), w[0], w[1]);
      cumulative.push(acc);
    }
    Ok(Self {
      alpha,
      cutoff,
      levy_scale,
      intensity: 2.0 * levy_scale * acc,
      small_jump_variance: 2.0 * levy_scale * small_jump_moment(alpha, cutoff),
      grid,
      cumulative,
    })
  }

  /// Rate of jumps with `|z| > cutoff`.
  pub fn intensity(&self) -> f64 {
    self.intensity
  }

  /// Variance per unit time of the Gaussian standing in for jumps below the cutoff.
  pub fn small_jump_variance(&self) -> f64 {
    self.small_jump_variance
  }

  pub fn cutoff(&self) -> f64 {
    self.cutoff
  }

  pub fn levy_scale(&self) -> f64 {
    self.levy_scale
  }

  /// Jump magnitude by inverting the restricted cumulative mass.
  fn jump_size(&self, u: f64) -> f64 {
    let total = *self.cumulative.last().unwrap();
    let target = u * total;
    let j = match self.cumulative.binary_search_by(|c| c.total_cmp(&target)) {
      Ok(j) => return self.grid[j],
      Err(j) => j.clamp(1, self.grid.len() - 1) - 1,
    };
    let (lo, hi) = (self.grid[j], self.grid[j + 1]);
    let base = self.cumulative[j];
    let span = self.cumulative[j + 1] - base;
    let mut z = lo + (hi - lo) * ((target - base) / span);
    for _ in 0..4 {
      let f = base + gk_fixed(|x| tempered_density(x, self.alpha), lo, z) - target;
      z = (z - f / tempered_density(z, self.alpha)).clamp(lo, hi);
    }
    z
  }

  /// Increment over `delta` together with the number of compound-Poisson jumps.
  pub fn sample_with_count<R: Rng + ?Sized>(&self, delta: f64, rng: &mut R) -> (f64, u64) {
    let gauss: f64 = rng.sample(StandardNormal);
    let mut x = (self.small_jump_variance * delta).sqrt() * gauss;
    let rate = self.intensity * delta;
    let count = if rate > 0.0 {
      Poisson::new(rate).map(|p| p.sample(rng) as u64).unwrap_or(0)
    } else {
      0
    };
    for _ in 0..count {
      let u: f64 = rng.random();
      let size = self.jump_size(u);
      x += if rng.random::<bool>() { size } else { -size };
    }
    (x, count)
  }

  pub fn sample<R: Rng + ?Sized>(&self, delta: f64, rng: &mut R) -> f64 {
    self.sample_with_count(delta, rng).0
  }
}

/// One tempered-stable increment with unit Lévy scale, i.e. Lévy density
/// `e^{-|z|} |z|^{-1-α}`.
pub fn sample_tempered_increment<R: Rng + ?Sized>(
  alpha: f64,
  delta: f64,
  cutoff: f64,
  rng: &mut R,
) -> Result<f64> {
  if !(delta >= 0.0 && delta.is_finite()) {
    return Err(Error::param(format!("time step must be nonnegative, got {delta}")));
  }
  Ok(TemperedSampler::new(alpha, 1.0, cutoff)?.sample(delta, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpKind {
  Stable,
  TemperedStable { cutoff: f64 },
}

/// Law of the driving Lévy process: Lévy density `λ ḡ(z) |z|^{-1-α}` with
/// `ḡ ≡ 1` (stable) or `ḡ(z) = e^{-|z|}` (tempered), and `λ` fixed by the
/// normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpLaw {
  pub kind: JumpKind,
  pub alpha: f64,
  pub normalization: Normalization,
}

impl JumpLaw {
  pub fn stable(alpha: f64) -> Result<Self> {
    check_alpha(alpha)?;
    Ok(Self {
      kind: JumpKind::Stable,
      alpha,
      normalization: Normalization::default(),
    })
  }

  pub fn tempered(alpha: f64, cutoff: f64) -> Result<Self> {
    check_alpha(alpha)?;
    if !(cutoff > 0.0 && cutoff <= 1.0) {
      return Err(Error::param(format!("small-jump cutoff must lie in (0, 1], got {cutoff}")));
    }
    Ok(Self {
      kind: JumpKind::TemperedStable { cutoff },
      alpha,
      normalization: Normalization::default(),
    })
  }

  pub fn with_normalization(mut self, normalization: Normalization) -> Self {
    self.normalization = normalization;
    self
  }

  pub fn validate(&self) -> Result<()> {
    match self.kind {
      JumpKind::Stable => check_alpha(self.alpha),
      JumpKind::TemperedStable { cutoff } => JumpLaw::tempered(self.alpha, cutoff).map(|_| ()),
    }
  }

  /// Prepares a sampler of increments over steps of length `delta`.
  pub fn sampler(&self, delta: f64) -> Result<JumpSampler> {
    self.validate()?;
    if !(delta > 0.0 && delta.is_finite()) {
      return Err(Error::param("time step must be positive"));
    }
    Ok(match self.kind {
      JumpKind::Stable => {
        let law = StableLaw::new(self.alpha, self.normalization)?;
        JumpSampler::Stable {
          standard: StandardStable::new(self.alpha)?,
          step_scale: (law.cf_scale() * delta).powf(1.0 / self.alpha),
        }
      }
      JumpKind::TemperedStable { cutoff } => JumpSampler::Tempered {
        sampler: TemperedSampler::new(self.alpha, self.normalization.levy_scale(self.alpha)?, cutoff)?,
        delta,
      },
    })
  }
}

/// Increment sampler for a fixed time step.
#[derive(Debug, Clone)]
pub enum JumpSampler {
  Stable { standard: StandardStable, step_scale: f64 },
  Tempered { sampler: TemperedSampler, delta: f64 },
}

impl Distribution<f64> for JumpSampler {
  fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
    match self {
      JumpSampler::Stable { standard, step_scale } => step_scale * standard.sample(rng),
      JumpSampler::Tempered { sampler, delta } => sampler.sample(*delta, rng),
    }
  }
}

/// Constant-coefficient jump diffusion on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
  pub drift: f64,
  pub sigma: f64,
  pub gamma: f64,
  pub jump_law: JumpLaw,
}

impl ModelSpec {
  pub fn new(drift: f64, sigma: f64, gamma: f64, jump_law: JumpLaw) -> Result<Self> {
    let m = Self {
      drift,
      sigma,
      gamma,
      jump_law,
    };
    m.validate()?;
    Ok(m)
  }

  pub fn validate(&self) -> Result<()> {
    if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
      return Err(Error::param(format!("sigma must be finite and nonnegative, got {}", self.sigma)));
    }
    if !self.drift.is_finite() || !self.gamma.is_finite() {
      return Err(Error::param("drift and gamma must be finite"));
    }
    self.jump_law.validate()
  }

  pub fn integrated_variance(&self) -> f64 {
    self.sigma * self.sigma * HORIZON
  }
}

/// Equally spaced observations `X_{t_0}, ..., X_{t_n}` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
  observations: Vec<f64>,
  pub seed: Option<u64>,
}

impl PathSample {
  pub fn new(observations: Vec<f64>, seed: Option<u64>) -> Result<Self> {
    if observations.len() < 2 {
      return Err(Error::param("a path needs at least two observations"));
    }
    Ok(Self { observations, seed })
  }

  pub fn n(&self) -> usize {
    self.observations.len() - 1
  }

  pub fn delta(&self) -> f64 {
    HORIZON / self.n() as f64
  }

  pub fn observations(&self) -> &[f64] {
    &self.observations
  }

  pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
    self.observations.windows(2).map(|w| w[1] - w[0])
  }

  /// Keeps every `factor`-th observation; `n` must be divisible by `factor`.
  pub fn coarsen(&self, factor: usize) -> Result<Self> {
    if factor == 0 || self.n() % factor != 0 || self.n() / factor < 1 {
      return Err(Error::param(format!("cannot coarsen n={} by {factor}", self.n())));
    }
    Ok(Self {
      observations: self.observations.iter().step_by(factor).copied().collect(),
      seed: self.seed,
    })
  }

  /// Writes `i,t,x` rows with shortest round-trip number formatting.
  pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
    writeln!(w, "i,t,x")?;
    let n = self.n() as f64;
    for (i, x) in self.observations.iter().enumerate() {
      writeln!(w, "{i},{},{x}", i as f64 / n)?;
    }
    Ok(())
  }

  pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
    let mut obs = Vec::new();
    for (idx, line) in r.lines().enumerate() {
      let line = line?;
      let lineno = idx + 1;
      let line = line.trim();
      if idx == 0 {
        if line.replace(' ', "") != "i,t,x" {
          return Err(Error::Parse {
            line: lineno,
            message: format!("expected header `i,t,x`, found `{line}`"),
          });
        }
        continue;
      }
      if line.is_empty() {
        continue;
      }
      let fields: Vec<&str> = line.split(',').map(str::trim).collect();
      if fields.len() != 3 {
        return Err(Error::Parse {
          line: lineno,
          message: "expected three fields".into(),
        });
      }
      let i: usize = fields[0].parse().map_err(|_| Error::Parse {
        line: lineno,
        message: format!("bad index `{}`", fields[0]),
      })?;
      if i != obs.len() {
        return Err(Error::Parse {
          line: lineno,
          message: format!("expected index {}, found {i}", obs.len()),
        });
      }
      let x: f64 = fields[2].parse().map_err(|_| Error::Parse {
        line: lineno,
        message: format!("bad value `{}`", fields[2]),
      })?;
      obs.push(x);
    }
    PathSample::new(obs, None)
  }
}

/// Simulates `model` on `n` equal steps with the stream keyed by `seed`.
pub fn simulate_path(model: &ModelSpec, n: usize, seed: u64) -> Result<PathSample> {
  let mut rng = rng::stream(seed, 0, 0);
  let mut path = simulate_path_with(model, n, &mut rng)?;
  path.seed = Some(seed);
  Ok(path)
}

/// Simulates with a caller-owned stream. Increments are exact in law for the
/// stable case; the tempered case carries only the small-jump substitution.
pub fn simulate_path_with(model: &ModelSpec, n: usize, rng: &mut StreamRng) -> Result<PathSample> {
  model.validate()?;
  if n < 2 {
    return Err(Error::param(format!("need at least two steps, got n={n}")));
  }
  let delta = HORIZON / n as f64;
  let jumps = if model.gamma != 0.0 {
    Some(model.jump_law.sampler(delta)?)
  } else {
    None
  };
  let vol = model.sigma * delta.sqrt();
  let mut obs = Vec::with_capacity(n + 1);
  obs.push(0.0);
  // drift is added as b·t_i so that deterministic paths land on the grid exactly
  let mut noise = 0.0;
  for i in 1..=n {
    let z: f64 = rng.sample(StandardNormal);
    noise += vol * z;
    if let Some(j) = &jumps {
      noise += model.gamma * j.sample(rng);
    }
    obs.push(model.drift * (i as f64 / n as f64) + noise);
  }
  Ok(PathSample { observations: obs, seed: None })
}

#[cfg(test)]
mod tests {
  use super::*;
  use statrs::function::gamma::gamma;

  fn draws<F: FnMut(&mut StreamRng) -> f64>(n: usize, seed: u64, mut f: F) -> Vec<f64> {
    let mut rng = rng::stream(seed, 1, 0);
    (0..n).map(|_| f(&mut rng)).collect()
  }

  fn empirical_cf(xs: &[f64], t: f64) -> f64 {
    xs.iter().map(|x| (t * x).cos()).sum::<f64>() / xs.len() as f64
  }

  fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
      if a[i] <= b[j] {
        i += 1;
      } else {
        j += 1;
      }
      d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
  }

  #[test]
  fn gaussian_limit_has_variance_two() {
    let xs = draws(100_000, 1, |r| sample_standard_stable(2.0, r).unwrap());
    let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    assert!((var - 2.0).abs() < 0.1, "{var}");
  }

  #[test]
  fn cauchy_median_is_zero() {
    let mut xs = draws(100_000, 2, |r| sample_standard_stable(1.0, r).unwrap());
    xs.sort_by(f64::total_cmp);
    assert!(xs[50_000].abs() < 0.02);
  }

  #[test]
  fn standard_cf_matches() {
    let n = 100_000;
    let xs = draws(n, 3, |r| sample_standard_stable(1.5, r).unwrap());
    let tol = 4.0 / (n as f64).sqrt();
    for k in -10..=10 {
      let t = 0.5 * k as f64;
      let d = (empirical_cf(&xs, t) - (-(t.abs().powf(1.5))).exp()).abs();
      assert!(d <= tol, "t={t}: {d}");
    }
  }

  #[test]
  fn stable_index_is_validated() {
    let mut rng = rng::stream(0, 0, 0);
    assert!(sample_standard_stable(0.0, &mut rng).is_err());
    assert!(sample_standard_stable(2.1, &mut rng).is_err());
    assert!(unit_levy_scale(2.0).is_err());
    assert!(unit_levy_scale(-0.5).is_err());
  }

  #[test]
  fn unit_scale_values() {
    assert!((unit_levy_scale(1.0).unwrap() - PI).abs() < 1e-9);
    let a: f64 = 0.5;
    let reflection = -2.0 * gamma(-a) * (PI * a / 2.0).cos();
    assert!((unit_levy_scale(a).unwrap() - reflection).abs() < 1e-8);
    for &a in &[0.2, 0.9, 1.4, 1.95] {
      let r = -2.0 * gamma(-a) * (PI * a / 2.0).cos();
      assert!((unit_levy_scale(a).unwrap() - r).abs() < 1e-8 * r.max(1.0), "alpha={a}");
    }
    let coarse = unit_levy_scale_with_tol(1.3, 1e-6).unwrap();
    let fine = unit_levy_scale_with_tol(1.3, 1e-10).unwrap();
    assert!((coarse - fine).abs() < 1e-6);
  }

  #[test]
  fn increment_scaling() {
    let law = StableLaw::unit_levy(1.0).unwrap();
    let mut rng = rng::stream(4, 0, 0);
    assert_eq!(sample_stable_increment(&law, 0.0, &mut rng).unwrap(), 0.0);
    assert!(sample_stable_increment(&law, -1.0, &mut rng).is_err());
    let n = 100_000;
    let xs = draws(n, 5, |r| sample_stable_increment(&law, 1.0, r).unwrap());
    let tol = 4.0 / (n as f64).sqrt();
    for k in -10..=10 {
      let t = 0.5 * k as f64;
      let d = (empirical_cf(&xs, t) - (-PI * t.abs()).exp()).abs();
      assert!(d <= tol, "t={t}: {d}");
    }
  }

  #[test]
  fn self_similarity_ks() {
    let a = 1.3;
    let law = StableLaw::tail_normalized(a).unwrap();
    let dt = 1.0 / 700.0;
    let mut s1 = draws(10_000, 6, |r| sample_stable_increment(&law, dt, r).unwrap() / dt.powf(1.0 / a));
    let mut s2 = draws(10_000, 7, |r| sample_stable_increment(&law, 1.0, r).unwrap());
    let d = ks_two_sample(&mut s1, &mut s2);
    let crit = 1.628 * (2.0 / 10_000.0f64).sqrt();
    assert!(d < crit, "KS {d} >= {crit}");
  }

  #[test]
  fn tempered_mean_is_zero() {
    let n = 100_000;
    let s = TemperedSampler::new(0.5, 1.0, 0.01).unwrap();
    let xs = draws(n, 8, |r| s.sample(1.0 / 700.0, r));
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 3.0 * (var / n as f64).sqrt());
  }

  #[test]
  fn tempered_jump_count_matches_intensity() {
    let s = TemperedSampler::new(0.5, 1.0, 0.1).unwrap();
    // independent quadrature of 2∫_0.1^∞ e^{-z} z^{-1.5} dz
    let q = Integrator::with_tol(1e-12, 0.0)
      .integrate(|z| tempered_density(z, 0.5), &geometric_points(0.1, 80.0, 2.0))
      .unwrap();
    let lambda = 2.0 * q.value;
    assert!((s.intensity() - lambda).abs() < 1e-8 * lambda);
    let n = 10_000;
    let mut rng = rng::stream(9, 0, 0);
    let counts: Vec<f64> = (0..n).map(|_| s.sample_with_count(1.0, &mut rng).1 as f64).collect();
    let mean = counts.iter().sum::<f64>() / n as f64;
    let se = (lambda / n as f64).sqrt();
    assert!((mean - lambda).abs() < 3.0 * se, "{mean} vs {lambda}");
  }

  #[test]
  fn tempered_variance_matches_second_moment() {
    let n = 100_000;
    let s = TemperedSampler::new(0.5, 1.0, 0.01).unwrap();
    let xs = draws(n, 10, |r| s.sample(1.0, r));
    let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let target = 2.0 * gamma(1.5);
    assert!(((var - target) / target).abs() < 0.05, "{var} vs {target}");
  }

  #[test]
  fn small_jump_series_matches_quadrature() {
    for &a in &[0.3, 0.9, 1.5] {
      let q = Integrator::with_tol(1e-13, 0.0)
        .integrate(|z| z.powf(1.0 - a) * (-z).exp(), &[0.0, 0.05])
        .unwrap();
      assert!((small_jump_moment(a, 0.05) - q.value).abs() < 1e-10);
    }
  }

  #[test]
  fn jump_sizes_follow_restricted_cdf() {
    let s = TemperedSampler::new(0.7, 1.0, 0.05).unwrap();
    let total = *s.cumulative.last().unwrap();
    for &u in &[0.01, 0.3, 0.77, 0.999] {
      let z = s.jump_size(u);
      let mass = Integrator::with_tol(1e-14, 0.0)
        .integrate(|x| tempered_density(x, 0.7), &geometric_points(0.05, z, 1.5))
        .unwrap()
        .value;
      assert!((mass / total - u).abs() < 1e-9, "u={u}: {}", mass / total);
    }
  }

  #[test]
  fn tempered_cutoff_is_validated() {
    let mut rng = rng::stream(0, 0, 0);
    assert!(sample_tempered_increment(0.5, 0.1, 0.0, &mut rng).is_err());
    assert!(sample_tempered_increment(0.5, 0.1, 1.5, &mut rng).is_err());
    assert!(JumpLaw::tempered(0.5, 2.0).is_err());
    assert!(JumpLaw::stable(2.0).is_err());
  }

  #[test]
  fn deterministic_drift_path() {
    let m = ModelSpec::new(1.0, 0.0, 0.0, JumpLaw::stable(1.5).unwrap()).unwrap();
    let p = simulate_path(&m, 10, 1).unwrap();
    let expected: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    assert_eq!(p.observations(), expected.as_slice());
    assert_eq!(p.n(), 10);
    assert_eq!(p.delta() * 10.0, 1.0);
  }

  #[test]
  fn brownian_realized_variance_is_one() {
    let m = ModelSpec::new(0.0, 1.0, 0.0, JumpLaw::stable(1.5).unwrap()).unwrap();
    let rv: Vec<f64> = (0..500)
      .map(|s| simulate_path(&m, 700, s).unwrap().increments().map(|d| d * d).sum())
      .collect();
    let mean = rv.iter().sum::<f64>() / 500.0;
    let var = rv.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 499.0;
    assert!((mean - 1.0).abs() < 3.0 * (var / 500.0).sqrt());
  }

  #[test]
  fn brownian_increments_are_gaussian() {
    let m = ModelSpec::new(0.0, 2.0, 0.0, JumpLaw::stable(1.5).unwrap()).unwrap();
    let p = simulate_path(&m, 20_000, 3).unwrap();
    let sd = 2.0 * p.delta().sqrt();
    let mut z: Vec<f64> = p.increments().map(|d| d / sd).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    use statrs::distribution::ContinuousCDF;
    let d = z
      .iter()
      .enumerate()
      .map(|(i, &x)| {
        let c = normal.cdf(x);
        (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
      })
      .fold(0.0, f64::max);
    assert!(d < 1.628 / n.sqrt(), "KS {d}");
  }

  #[test]
  fn paths_are_deterministic() {
    let law = JumpLaw::tempered(0.5, 0.01).unwrap();
    let m = ModelSpec::new(0.3, 1.0, 3.0, law).unwrap();
    let a = simulate_path(&m, 700, 42).unwrap();
    let b = simulate_path(&m, 700, 42).unwrap();
    assert_eq!(a, b);
    let c = simulate_path(&m, 700, 43).unwrap();
    assert_ne!(a.observations(), c.observations());
    assert!(simulate_path(&m, 1, 42).is_err());
  }

  #[test]
  fn coarsening_keeps_every_other_point() {
    let p = PathSample::new(vec![0.0, 1.0, 3.0, 6.0, 10.0], None).unwrap();
    let c = p.coarsen(2).unwrap();
    assert_eq!(c.observations(), &[0.0, 3.0, 10.0]);
    assert!(p.coarsen(3).is_err());
  }

  #[test]
  fn csv_round_trip_is_exact() {
    let m = ModelSpec::new(0.1, 1.0, 1.0, JumpLaw::stable(1.7).unwrap()).unwrap();
    let p = simulate_path(&m, 50, 5).unwrap();
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("i,t,x\n0,0,0\n"));
    let q = PathSample::read_csv(buf.as_slice()).unwrap();
    assert_eq!(p.observations(), q.observations());
  }

  #[test]
  fn csv_errors_carry_line_numbers() {
    let bad = "i,t,x\n0,0,0\n2,0.5,1\n";
    match PathSample::read_csv(bad.as_bytes()) {
      Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
      other => panic!("unexpected {other:?}"),
    }
    assert!(PathSample::read_csv("a,b\n".as_bytes()).is_err());
  }
}
