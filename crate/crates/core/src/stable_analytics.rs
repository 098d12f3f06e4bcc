//! Analytics for the symmetric α-stable law: the tail constant `c_α`, the
//! density by Fourier inversion, and the truncated second moment
//! `d(ζ) = E[S² φ(S ζ)]` by Monte Carlo, by quadrature and by its small-ζ
//! leading term.
//!
//! Two normalizations are supported. [`Normalization::TailConstant`] is the
//! law whose density satisfies `|z|^{1+α} f(z) → c_α` (characteristic function
//! `exp(-|t|^α / 2)`, Lévy density `c_α |z|^{-1-α}`); this is the law for
//! which the jump-bias constant `c_α` is exact and it is the default.
//! [`Normalization::UnitLevyDensity`] has Lévy density `|z|^{-1-α}` and
//! characteristic function `exp(-σ_α |t|^α)`, see [`unit_levy_scale`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::kernels::{kernel_moment, phi, Kernel};
use crate::levy_sim::{unit_levy_scale, StandardStable};
use crate::quadrature::{geometric_points, Integrator};
use crate::rng;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
  if alpha > 0.0 && alpha < 2.0 {
    Ok(())
  } else {
    Err(Error::param(format!("alpha must lie in (0, 2), got {alpha}")))
  }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
  /// Lévy density `c_α |z|^{-1-α}`.
  #[default]
  TailConstant,
  /// Lévy density `|z|^{-1-α}`.
  UnitLevyDensity,
}

impl Normalization {
  /// Prefactor of `|z|^{-1-α}` in the Lévy density.
  pub fn levy_scale(&self, alpha: f64) -> Result<f64> {
    match self {
      Normalization::TailConstant => c_alpha(alpha),
      Normalization::UnitLevyDensity => {
        check_alpha(alpha)?;
        Ok(1.0)
      }
    }
  }
}

impl FromStr for Normalization {
  type Err = Error;
  fn from_str(s: &str) -> Result<Self> {
    match s.trim() {
      "tail" => Ok(Normalization::TailConstant),
      "unit" => Ok(Normalization::UnitLevyDensity),
      other => Err(Error::param(format!("unknown normalization `{other}` (expected tail|unit)"))),
    }
  }
}

impl fmt::Display for Normalization {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    f.write_str(match self {
      Normalization::TailConstant => "tail",
      Normalization::UnitLevyDensity => "unit",
    })
  }
}

/// Leading tail constant of the stable density and of the jump bias:
/// `α(1-α) / (4 Γ(2-α) cos(απ/2))`, continuously extended by `1/(2π)` at 1.
pub fn c_alpha(alpha: f64) -> Result<f64> {
  check_alpha(alpha)?;
  if (alpha - 1.0).abs() < 1e-6 {
    return Ok(1.0 / (2.0 * PI));
  }
  Ok(alpha * (1.0 - alpha) / (4.0 * gamma(2.0 - alpha) * (alpha * PI / 2.0).cos()))
}

/// Symmetric stable law with characteristic function `exp(-cf_scale |t|^α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableLaw {
  alpha: f64,
  cf_scale: f64,
  levy_scale: f64,
}

impl StableLaw {
  pub fn new(alpha: f64, normalization: Normalization) -> Result<Self> {
    match normalization {
      Normalization::TailConstant => Self::tail_normalized(alpha),
      Normalization::UnitLevyDensity => Self::unit_levy(alpha),
    }
  }

  /// The law with density tail `c_α |z|^{-1-α}`; `c_α σ_α = 1/2` makes its
  /// characteristic exponent exactly `|t|^α / 2`.
  pub fn tail_normalized(alpha: f64) -> Result<Self> {
    Ok(Self {
      alpha,
      cf_scale: 0.5,
      levy_scale: c_alpha(alpha)?,
    })
  }

  pub fn unit_levy(alpha: f64) -> Result<Self> {
    Ok(Self {
      alpha,
      cf_scale: unit_levy_scale(alpha)?,
      levy_scale: 1.0,
    })
  }

  pub fn with_cf_scale(alpha: f64, cf_scale: f64) -> Result<Self> {
    if !(cf_scale > 0.0 && cf_scale.is_finite()) {
      return Err(Error::param("characteristic scale must be positive"));
    }
    Ok(Self {
      alpha,
      cf_scale,
      levy_scale: cf_scale / unit_levy_scale(alpha)?,
    })
  }

  pub fn alpha(&self) -> f64 {
    self.alpha
  }

  pub fn cf_scale(&self) -> f64 {
    self.cf_scale
  }

  /// Limit of `|z|^{1+α} f(z)`; equals the Lévy density prefactor.
  pub fn tail_constant(&self) -> f64 {
    self.levy_scale
  }

  pub fn characteristic_function(&self, t: f64) -> f64 {
    (-self.cf_scale * t.abs().powf(self.alpha)).exp()
  }

  /// One draw of `S_1`.
  pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
    let std = StandardStable::new(self.alpha).expect("alpha validated at construction");
    self.cf_scale.powf(1.0 / self.alpha) * std.sample(rng)
  }
}

const DECAY_CUTOFF: f64 = 45.0;

/// Density of `law` at `z`.
///
/// The inversion integral `(1/π) Re ∫_0^∞ e^{itz} e^{-s t^α} dt` is evaluated
/// along the ray `t = r e^{iθ}`, `θ = min(π/2, π/(3α))`, where both factors
/// decay exponentially; the real-axis integrand would oscillate `O(|z|)`
/// times before the damping sets in.
pub fn stable_density(z: f64, law: &StableLaw) -> Result<f64> {
  let alpha = law.alpha;
  let s = law.cf_scale;
  let z = z.abs();
  let theta = (PI / 2.0).min(PI / (3.0 * alpha));
  let (sin_t, cos_t) = theta.sin_cos();
  let (sin_at, cos_at) = (alpha * theta).sin_cos();

  let r_damp = (DECAY_CUTOFF / (s * cos_at)).powf(1.0 / alpha);
  let r_max = if z > 0.0 {
    r_damp.min(DECAY_CUTOFF / (z * sin_t))
  } else {
    r_damp
  };
  let integrand = |r: f64| {
    let ra = r.powf(alpha);
    let re = -z * r * sin_t - s * ra * cos_at;
    let im = z * r * cos_t - s * ra * sin_at;
    re.exp() * (im + theta).cos()
  };
  let mut pts = vec![0.0];
  pts.extend(geometric_points(r_max * 1e-6, r_max, 4.0));
  let q = Integrator {
    abs_tol: 1e-300,
    rel_tol: 1e-11,
    max_intervals: 4000,
  }
  .integrate(integrand, &pts)?;
  Ok((q.value / PI).max(0.0))
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
  pub mean: f64,
  pub stderr: f64,
}

fn check_zeta(zeta: f64) -> Result<()> {
  if zeta == 0.0 || !zeta.is_finite() {
    Err(Error::param("d(zeta) is defined for finite nonzero zeta only"))
  } else {
    Ok(())
  }
}

/// `d(ζ)` as the sample mean of `S² φ(S ζ)` over `n_draws` draws of `law`.
pub fn d_zeta_mc(zeta: f64, law: &StableLaw, n_draws: usize, seed: u64) -> Result<McEstimate> {
  check_zeta(zeta)?;
  if n_draws < 2 {
    return Err(Error::param("need at least two draws"));
  }
  let mut rng = rng::stream(seed, u64::MAX, 0);
  // Welford
  let mut mean = 0.0;
  let mut m2 = 0.0;
  for i in 0..n_draws {
    let x = law.sample(&mut rng);
    let v = x * x * phi(x * zeta);
    let d = v - mean;
    mean += d / (i + 1) as f64;
    m2 += d * (v - mean);
  }
  let var = m2 / (n_draws - 1) as f64;
  Ok(McEstimate {
    mean,
    stderr: (var / n_draws as f64).sqrt(),
  })
}

/// `d(ζ) = ∫ z² φ(z ζ) f(z) dz` by quadrature over the kernel support.
pub fn d_zeta_quadrature(zeta: f64, law: &StableLaw) -> Result<f64> {
  check_zeta(zeta)?;
  let inner = 1.0 / zeta.abs();
  let mut pts = vec![0.0];
  if inner > 1.0 {
    pts.extend(geometric_points(1.0, inner, 2.0));
  } else {
    pts.push(inner);
  }
  pts.push(1.5 * inner);
  pts.push(2.0 * inner);
  let mut failure = None;
  let q = Integrator {
    abs_tol: 1e-300,
    rel_tol: 1e-9,
    max_intervals: 4000,
  }
  .integrate(
    |z| match stable_density(z, law) {
      Ok(f) => z * z * phi(z * zeta) * f,
      Err(e) => {
        failure.get_or_insert(e);
        0.0
      }
    },
    &pts,
  )?;
  if let Some(e) = failure {
    return Err(e);
  }
  Ok(2.0 * q.value)
}

/// Small-ζ leading term `|ζ|^{α-2} c_α ∫ kernel(u) |u|^{1-α} du`.
pub fn d_zeta_asymptotic(zeta: f64, alpha: f64, kernel: &Kernel) -> Result<f64> {
  check_zeta(zeta)?;
  Ok(zeta.abs().powf(alpha - 2.0) * c_alpha(alpha)? * kernel_moment(kernel, alpha)?)
}
