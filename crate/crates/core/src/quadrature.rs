//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! The integration range is first split at caller-supplied breakpoints; the
//! interval with the largest error estimate is then bisected until the summed
//! estimate meets `max(abs_tol, rel_tol * |I|)`.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
  0.991_455_371_120_812_6,
  0.949_107_912_342_758_5,
  0.864_864_423_359_769_1,
  0.741_531_185_599_394_4,
  0.586_087_235_467_691_1,
  0.405_845_151_377_397_2,
  0.207_784_955_007_898_5,
  0.0,
];

const WGK: [f64; 8] = [
  0.022_935_322_010_529_22,
  0.063_092_092_629_978_55,
  0.104_790_010_322_250_2,
  0.140_653_259_715_525_9,
  0.169_004_726_639_267_9,
  0.190_350_578_064_785_4,
  0.204_432_940_075_298_9,
  0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
  0.129_484_966_168_869_7,
  0.279_705_391_489_276_7,
  0.381_830_050_505_118_9,
  0.417_959_183_673_469_4,
];

/// Result of an integration: value, error estimate and integrand evaluations.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
  pub value: f64,
  pub error: f64,
  pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Integrator {
  pub abs_tol: f64,
  pub rel_tol: f64,
  pub max_intervals: usize,
}

impl Default for Integrator {
  fn default() -> Self {
    Self {
      abs_tol: 1e-10,
      rel_tol: 1e-12,
      max_intervals: 4000,
    }
  }
}

struct Piece {
  a: f64,
  b: f64,
  value: f64,
  error: f64,
}

impl PartialEq for Piece {
  fn eq(&self, other: &Self) -> bool {
    self.error == other.error
  }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
  fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
    Some(self.cmp(other))
  }
}
impl Ord for Piece {
  fn cmp(&self, other: &Self) -> std::cmp::Ordering {
    self.error.total_cmp(&other.error)
  }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
  let center = 0.5 * (a + b);
  let half = 0.5 * (b - a);
  let fc = f(center);
  let mut kronrod = fc * WGK[7];
  let mut gauss = fc * WG[3];
  for j in 0..7 {
    let dx = half * XGK[j];
    let s = f(center - dx) + f(center + dx);
    kronrod += WGK[j] * s;
    if j % 2 == 1 {
      gauss += WG[j / 2] * s;
    }
  }
  let value = kronrod * half;
  let error = ((kronrod - gauss) * half).abs();
  (value, error)
}

impl Integrator {
  pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
    Self {
      abs_tol,
      rel_tol,
      ..Self::default()
    }
  }

  /// Integrates `f` over `[points[0], points[last]]`, splitting at every
  /// interior point. `points` must be sorted and hold at least two entries.
  pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, points: &[f64]) -> Result<Quad> {
    if points.len() < 2 {
      return Err(Error::param("quadrature needs at least two points"));
    }
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evals = 0;
    for w in points.windows(2) {
      let (a, b) = (w[0], w[1]);
      if !(b > a) {
        if b == a {
          continue;
        }
        return Err(Error::param("quadrature breakpoints must be increasing"));
      }
      let (value, error) = gk15(&mut f, a, b);
      evals += 15;
      total += value;
      total_err += error;
      heap.push(Piece { a, b, value, error });
    }
    loop {
      if !total.is_finite() || !total_err.is_finite() {
        return Err(Error::Numerical {
          message: "non-finite integrand value".into(),
          achieved: total_err,
        });
      }
      let target = self.abs_tol.max(self.rel_tol * total.abs());
      if total_err <= target {
        break;
      }
      if heap.len() >= self.max_intervals {
        return Err(Error::Numerical {
          message: format!("adaptive quadrature exceeded {} intervals", self.max_intervals),
          achieved: total_err,
        });
      }
      let worst = heap.pop().expect("heap is non-empty");
      let mid = 0.5 * (worst.a + worst.b);
      if mid <= worst.a || mid >= worst.b {
        // Interval collapsed to machine resolution; accept what we have.
        heap.push(worst);
        break;
      }
      let (v1, e1) = gk15(&mut f, worst.a, mid);
      let (v2, e2) = gk15(&mut f, mid, worst.b);
      evals += 30;
      total += v1 + v2 - worst.value;
      total_err += e1 + e2 - worst.error;
      heap.push(Piece {
        a: worst.a,
        b: mid,
        value: v1,
        error: e1,
      });
      heap.push(Piece {
        a: mid,
        b: worst.b,
        value: v2,
        error: e2,
      });
    }
    // Re-sum to shed the drift of the running totals.
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    Ok(Quad { value, error, evals })
  }
}

/// Geometric breakpoints `lo, lo*r, lo*r^2, ..., hi` with `r` close to `ratio`.
pub(crate) fn geometric_points(lo: f64, hi: f64, ratio: f64) -> Vec<f64> {
  let mut pts = vec![lo];
  let steps = ((hi / lo).ln() / ratio.ln()).ceil().max(1.0) as usize;
  let r = (hi / lo).powf(1.0 / steps as f64);
  let mut x = lo;
  for _ in 1..steps {
    x *= r;
    pts.push(x);
  }
  pts.push(hi);
  pts
}
