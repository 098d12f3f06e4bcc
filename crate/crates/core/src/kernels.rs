//! Smooth truncation kernels and their singular-weight moments.
//!
//! `phi` is a C^∞ version of the indicator of `[-1, 1]` supported on
//! `[-2, 2]`; `psi` is a bump supported on `1 < |x| < M`. Adding `c̃ · psi` to
//! `phi`, with `c̃` chosen so that `∫ (phi + c̃ psi)(u) |u|^{1-α} du = 0`,
//! removes the leading jump bias of the truncated quadratic variation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::Integrator;

/// Default right end of the `psi` support.
pub const DEFAULT_M: f64 = 4.0;

/// Absolute tolerance used for kernel moments.
pub const MOMENT_TOL: f64 = 1e-12;

pub fn phi(x: f64) -> f64 {
  let a = x.abs();
  if a < 1.0 {
    1.0
  } else if a < 2.0 {
    (1.0 / 3.0 + 1.0 / (a * a - 4.0)).exp()
  } else {
    0.0
  }
}

fn psi_unchecked(x: f64, m: f64) -> f64 {
  let a = x.abs();
  if a <= 1.0 || a >= m {
    0.0
  } else if a <= 1.5 {
    let s = 3.0 - a;
    (1.0 / 3.0 + 1.0 / (s * s - 4.0)).exp()
  } else {
    (1.0 / (a * a - m * m) - 5.0 / 21.0 + 4.0 / (4.0 * m * m - 9.0)).exp()
  }
}

fn check_m(m: f64) -> Result<()> {
  if m.is_finite() && m > 1.5 {
    Ok(())
  } else {
    Err(Error::param(format!("psi needs M > 3/2, got {m}")))
  }
}

/// The bump `psi_M`; zero on `|x| <= 1` and `|x| >= M`.
pub fn psi(x: f64, m: f64) -> Result<f64> {
  check_m(m)?;
  Ok(psi_unchecked(x, m))
}

/// `phi(x) + c * psi_M(x)`.
pub fn composite(x: f64, c: f64, m: f64) -> Result<f64> {
  check_m(m)?;
  Ok(phi(x) + c * psi_unchecked(x, m))
}

/// A validated truncation kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
  Phi,
  Psi { m: f64 },
  Composite { c: f64, m: f64 },
}

impl Kernel {
  pub fn psi(m: f64) -> Result<Self> {
    check_m(m)?;
    Ok(Kernel::Psi { m })
  }

  pub fn composite(c: f64, m: f64) -> Result<Self> {
    check_m(m)?;
    if !c.is_finite() {
      return Err(Error::param("composite kernel coefficient must be finite"));
    }
    Ok(Kernel::Composite { c, m })
  }

  /// The kernel `phi + c̃ psi_M` whose `|u|^{1-α}` moment vanishes.
  pub fn cancelling(alpha: f64, m: f64) -> Result<Self> {
    Kernel::composite(c_tilde(alpha, m)?, m)
  }

  #[inline]
  pub fn eval(&self, x: f64) -> f64 {
    match *self {
      Kernel::Phi => phi(x),
      Kernel::Psi { m } => psi_unchecked(x, m),
      Kernel::Composite { c, m } => phi(x) + c * psi_unchecked(x, m),
    }
  }

  pub fn support_radius(&self) -> f64 {
    match *self {
      Kernel::Phi => 2.0,
      Kernel::Psi { m } => m,
      Kernel::Composite { m, .. } => m.max(2.0),
    }
  }

  /// Value on `|x| <= 1`, where every kernel here is constant.
  pub fn inner_value(&self) -> f64 {
    match self {
      Kernel::Psi { .. } => 0.0,
      _ => 1.0,
    }
  }

  /// Points on `[0, support]` where a branch of the definition changes.
  pub fn breakpoints(&self) -> Vec<f64> {
    let mut pts = vec![0.0, 1.0, 1.5, 2.0];
    let r = self.support_radius();
    pts.push(r);
    pts.retain(|&p| p <= r);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
  }
}

/// Kernel selection as written in config files and on the command line:
/// `phi`, `psi:M=<real>` or `composite:M=<real>`. The composite coefficient is
/// resolved against the jump index at use time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
  Phi,
  Psi { m: f64 },
  Composite { m: f64 },
}

impl KernelSpec {
  pub fn resolve(&self, alpha: f64) -> Result<Kernel> {
    match *self {
      KernelSpec::Phi => Ok(Kernel::Phi),
      KernelSpec::Psi { m } => Kernel::psi(m),
      KernelSpec::Composite { m } => Kernel::cancelling(alpha, m),
    }
  }
}

impl FromStr for KernelSpec {
  type Err = Error;

  fn from_str(s: &str) -> Result<Self> {
    let s = s.trim();
    let (name, rest) = match s.split_once(':') {
      Some((n, r)) => (n.trim(), Some(r.trim())),
      None => (s, None),
    };
    let parse_m = |rest: Option<&str>| -> Result<f64> {
      let Some(rest) = rest else {
        return Ok(DEFAULT_M);
      };
      let value = rest
        .strip_prefix("M=")
        .or_else(|| rest.strip_prefix("m="))
        .ok_or_else(|| Error::param(format!("expected `M=<real>` in kernel spec `{s}`")))?;
      let m: f64 = value
        .trim()
        .parse()
        .map_err(|_| Error::param(format!("bad M in kernel spec `{s}`")))?;
      check_m(m)?;
      Ok(m)
    };
    match name {
      "phi" if rest.is_none() => Ok(KernelSpec::Phi),
      "psi" => Ok(KernelSpec::Psi { m: parse_m(rest)? }),
      "composite" => Ok(KernelSpec::Composite { m: parse_m(rest)? }),
      _ => Err(Error::param(format!("unknown kernel `{s}`"))),
    }
  }
}

impl fmt::Display for KernelSpec {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match self {
      KernelSpec::Phi => write!(f, "phi"),
      KernelSpec::Psi { m } => write!(f, "psi:M={m}"),
      KernelSpec::Composite { m } => write!(f, "composite:M={m}"),
    }
  }
}

fn check_alpha(alpha: f64) -> Result<()> {
  if alpha > 0.0 && alpha < 2.0 {
    Ok(())
  } else {
    Err(Error::param(format!("alpha must lie in (0, 2), got {alpha}")))
  }
}

/// `∫_R kernel(u) |u|^{1-α} du`.
pub fn kernel_moment(kernel: &Kernel, alpha: f64) -> Result<f64> {
  kernel_moment_split(kernel, alpha, 1.0, MOMENT_TOL)
}

/// Moment with the analytic inner cell `[-delta, delta]` (`0 < delta <= 1`,
/// where the kernel is constant) and quadrature tolerance `tol` outside it.
pub fn kernel_moment_split(kernel: &Kernel, alpha: f64, delta: f64, tol: f64) -> Result<f64> {
  check_alpha(alpha)?;
  if !(delta > 0.0 && delta <= 1.0) {
    return Err(Error::param("inner radius must lie in (0, 1]"));
  }
  let p = 2.0 - alpha;
  let inner = kernel.inner_value() * delta.powf(p) / p;
  let mut pts = kernel.breakpoints();
  pts.retain(|&x| x > delta);
  pts.insert(0, delta);
  let q = Integrator::with_tol(tol / 2.0, 0.0).integrate(|u| kernel.eval(u) * u.powf(1.0 - alpha), &pts)?;
  Ok(2.0 * (inner + q.value))
}

/// `c̃ = -∫ phi |u|^{1-α} / ∫ psi_M |u|^{1-α}`.
pub fn c_tilde(alpha: f64, m: f64) -> Result<f64> {
  c_tilde_with_tol(alpha, m, MOMENT_TOL)
}

pub fn c_tilde_with_tol(alpha: f64, m: f64, tol: f64) -> Result<f64> {
  let num = kernel_moment_split(&Kernel::Phi, alpha, 1.0, tol)?;
  let den = kernel_moment_split(&Kernel::psi(m)?, alpha, 1.0, tol)?;
  if den.abs() < 1e-300 {
    return Err(Error::Numerical {
      message: "psi moment vanishes; cancelling kernel is degenerate".into(),
      achieved: den,
    });
  }
  Ok(-num / den)
}
