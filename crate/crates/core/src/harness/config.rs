//! Experiment configuration: flat `key = value` lines, global keys first,
//! then one `[cell]` section per experiment cell. `#` starts a comment.
//! Cell keys `k` and `M` accept comma-separated lists, which expand into one
//! cell per combination.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, JumpInfo, Weight};
use crate::kernels::{KernelSpec, DEFAULT_M};
use crate::levy_sim::{JumpLaw, ModelSpec, DEFAULT_CUTOFF};
use crate::stable_analytics::Normalization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
  Stable,
  Tempered,
}

impl FromStr for LawKind {
  type Err = Error;

  fn from_str(s: &str) -> Result<Self> {
    match s.trim() {
      "stable" => Ok(LawKind::Stable),
      "tempered" => Ok(LawKind::Tempered),
      other => Err(Error::param(format!("unknown law `{other}` (expected stable or tempered)"))),
    }
  }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
  pub alpha: f64,
  pub gamma: f64,
  pub beta: f64,
  pub k: f64,
  pub kernel: KernelSpec,
  /// Right end of the `psi` support used by the cancelling kernel.
  pub m: f64,
  pub law: LawKind,
  pub cutoff: f64,
  pub drift: f64,
  pub weight: Weight,
}

impl CellConfig {
  /// A cell with the default kernel, law and weight.
  pub fn new(alpha: f64, gamma: f64, beta: f64, k: f64) -> Self {
    Self {
      alpha,
      gamma,
      beta,
      k,
      kernel: KernelSpec::Phi,
      m: DEFAULT_M,
      law: LawKind::Stable,
      cutoff: DEFAULT_CUTOFF,
      drift: 0.0,
      weight: Weight::Unit,
    }
  }

  pub fn tempered(mut self, cutoff: f64) -> Self {
    self.law = LawKind::Tempered;
    self.cutoff = cutoff;
    self
  }

  pub fn with_m(mut self, m: f64) -> Self {
    self.m = m;
    self
  }

  pub fn jump_law(&self, normalization: Normalization) -> Result<JumpLaw> {
    let law = match self.law {
      LawKind::Stable => JumpLaw::stable(self.alpha)?,
      LawKind::Tempered => JumpLaw::tempered(self.alpha, self.cutoff)?,
    };
    Ok(law.with_normalization(normalization))
  }

  pub fn model(&self, sigma: f64, normalization: Normalization) -> Result<ModelSpec> {
    ModelSpec::new(self.drift, sigma, self.gamma, self.jump_law(normalization)?)
  }

  pub fn estimator(&self) -> Result<EstimatorConfig> {
    Ok(
      EstimatorConfig::new(self.beta, self.k)?
        .with_kernel(self.kernel.resolve(self.alpha)?)
        .with_weight(self.weight),
    )
  }

  pub fn jump_info(&self, normalization: Normalization) -> Result<JumpInfo> {
    JumpInfo::with_levy_scale(self.alpha, self.gamma, normalization.levy_scale(self.alpha)?)
  }

  pub fn validate(&self, sigma: f64, normalization: Normalization) -> Result<()> {
    self.model(sigma, normalization)?;
    self.estimator()?;
    crate::kernels::Kernel::psi(self.m)?;
    Ok(())
  }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
  pub csv: Option<PathBuf>,
  pub json: Option<PathBuf>,
  /// Per-replicate errors, one row per replicate.
  pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
  pub n: usize,
  pub replicates: usize,
  pub sigma: f64,
  pub seed: u64,
  pub normalization: Normalization,
  pub n_grid: Vec<usize>,
  pub outputs: Outputs,
  pub cells: Vec<CellConfig>,
}

impl Default for ExperimentConfig {
  fn default() -> Self {
    Self {
      n: 700,
      replicates: 500,
      sigma: 1.0,
      seed: 0,
      normalization: Normalization::default(),
      n_grid: Vec::new(),
      outputs: Outputs::default(),
      cells: Vec::new(),
    }
  }
}

fn parse_value<T: FromStr>(value: &str, key: &str, line: usize) -> Result<T> {
  value.parse().map_err(|_| Error::Parse {
    line,
    message: format!("invalid value `{value}` for `{key}`"),
  })
}

fn parse_list<T: FromStr>(value: &str, key: &str, line: usize) -> Result<Vec<T>> {
  let items: Vec<T> = value
    .split(',')
    .map(|v| parse_value(v.trim(), key, line))
    .collect::<Result<_>>()?;
  if items.is_empty() {
    return Err(Error::Parse {
      line,
      message: format!("`{key}` needs at least one value"),
    });
  }
  Ok(items)
}

fn to_parse_error(e: Error, line: usize) -> Error {
  match e {
    Error::Parameter(message) => Error::Parse { line, message },
    other => other,
  }
}

#[derive(Default)]
struct CellDraft {
  line: usize,
  alpha: Option<f64>,
  gamma: Option<f64>,
  beta: Option<f64>,
  k: Option<Vec<f64>>,
  kernel: Option<KernelSpec>,
  m: Option<Vec<f64>>,
  law: Option<LawKind>,
  cutoff: Option<f64>,
  drift: Option<f64>,
  weight: Option<Weight>,
  seen: HashSet<String>,
}

impl CellDraft {
  fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
    match key {
      "alpha" => self.alpha = Some(parse_value(value, key, line)?),
      "gamma" => self.gamma = Some(parse_value(value, key, line)?),
      "beta" => self.beta = Some(parse_value(value, key, line)?),
      "k" => self.k = Some(parse_list(value, key, line)?),
      "kernel" => self.kernel = Some(value.parse().map_err(|e| to_parse_error(e, line))?),
      "M" | "m" => self.m = Some(parse_list(value, key, line)?),
      "law" => self.law = Some(value.parse().map_err(|e| to_parse_error(e, line))?),
      "cutoff" => self.cutoff = Some(parse_value(value, key, line)?),
      "drift" => self.drift = Some(parse_value(value, key, line)?),
      "weight" => self.weight = Some(value.parse().map_err(|e| to_parse_error(e, line))?),
      _ => {
        return Err(Error::Parse {
          line,
          message: format!("unknown cell key `{key}`"),
        })
      }
    }
    Ok(())
  }

  fn finish(self) -> Result<Vec<CellConfig>> {
    let line = self.line;
    let need = |v: Option<f64>, key: &str| {
      v.ok_or_else(|| Error::Parse {
        line,
        message: format!("cell is missing required key `{key}`"),
      })
    };
    let alpha = need(self.alpha, "alpha")?;
    let gamma = need(self.gamma, "gamma")?;
    let beta = need(self.beta, "beta")?;
    let ks = self.k.ok_or_else(|| Error::Parse {
      line,
      message: "cell is missing required key `k`".into(),
    })?;
    let ms = self.m.unwrap_or_else(|| vec![DEFAULT_M]);
    let mut cells = Vec::with_capacity(ks.len() * ms.len());
    for &k in &ks {
      for &m in &ms {
        cells.push(CellConfig {
          alpha,
          gamma,
          beta,
          k,
          kernel: self.kernel.unwrap_or(KernelSpec::Phi),
          m,
          law: self.law.unwrap_or(LawKind::Stable),
          cutoff: self.cutoff.unwrap_or(DEFAULT_CUTOFF),
          drift: self.drift.unwrap_or(0.0),
          weight: self.weight.unwrap_or_default(),
        });
      }
    }
    Ok(cells)
  }
}

impl ExperimentConfig {
  pub fn parse(text: &str) -> Result<Self> {
    let mut cfg = ExperimentConfig::default();
    let mut globals_seen = HashSet::new();
    let mut drafts: Vec<CellDraft> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
      let line = idx + 1;
      let content = raw.split('#').next().unwrap_or("").trim();
      if content.is_empty() {
        continue;
      }
      if content.starts_with('[') {
        if content != "[cell]" {
          return Err(Error::Parse {
            line,
            message: format!("unknown section `{content}`"),
          });
        }
        drafts.push(CellDraft {
          line,
          ..CellDraft::default()
        });
        continue;
      }
      let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
        line,
        message: format!("expected `key = value`, found `{content}`"),
      })?;
      let (key, value) = (key.trim(), value.trim());
      if let Some(cell) = drafts.last_mut() {
        if !cell.seen.insert(key.to_string()) {
          return Err(Error::Parse {
            line,
            message: format!("duplicate key `{key}` in cell"),
          });
        }
        cell.set(key, value, line)?;
        continue;
      }
      if !globals_seen.insert(key.to_string()) {
        return Err(Error::Parse {
          line,
          message: format!("duplicate key `{key}`"),
        });
      }
      match key {
        "n" => cfg.n = parse_value(value, key, line)?,
        "replicates" => cfg.replicates = parse_value(value, key, line)?,
        "sigma" => cfg.sigma = parse_value(value, key, line)?,
        "seed" => cfg.seed = parse_value(value, key, line)?,
        "normalization" => cfg.normalization = value.parse().map_err(|e| to_parse_error(e, line))?,
        "n_grid" => cfg.n_grid = parse_list(value, key, line)?,
        "csv" => cfg.outputs.csv = Some(PathBuf::from(value)),
        "json" => cfg.outputs.json = Some(PathBuf::from(value)),
        "plot_data" => cfg.outputs.plot_data = Some(PathBuf::from(value)),
        _ => {
          return Err(Error::Parse {
            line,
            message: format!("unknown key `{key}`"),
          })
        }
      }
    }
    for d in drafts {
      let line = d.line;
      for cell in d.finish()? {
        cell
          .validate(cfg.sigma, cfg.normalization)
          .map_err(|e| to_parse_error(e, line))?;
        cfg.cells.push(cell);
      }
    }
    cfg.validate()?;
    Ok(cfg)
  }

  pub fn load(path: &Path) -> Result<Self> {
    Self::parse(&std::fs::read_to_string(path)?)
  }

  pub fn validate(&self) -> Result<()> {
    if self.n < 2 {
      return Err(Error::param(format!("n must be at least 2, got {}", self.n)));
    }
    if self.replicates < 1 {
      return Err(Error::param("replicates must be at least 1"));
    }
    if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
      return Err(Error::param(format!("sigma must be finite and nonnegative, got {}", self.sigma)));
    }
    if self.n_grid.iter().any(|&n| n < 2) {
      return Err(Error::param("every n_grid entry must be at least 2"));
    }
    for cell in &self.cells {
      cell.validate(self.sigma, self.normalization)?;
    }
    Ok(())
  }

  pub fn integrated_variance(&self) -> f64 {
    self.sigma * self.sigma
  }
}

#[cfg(test)]
mod tests {
  use super::*;

  const SAMPLE: &str = "
# two cells
n = 700
replicates = 20
seed = 9
csv = out.csv

[cell]
alpha = 1.2
gamma = 1
beta = 0.2
k = 2

[cell]
alpha = 0.5   # tempered
gamma = 3
beta = 0.2
k = 3, 4
M = 2
law = tempered
cutoff = 0.05
kernel = psi:M=3
";

  #[test]
  fn parses_globals_and_cells() {
    let c = ExperimentConfig::parse(SAMPLE).unwrap();
    assert_eq!((c.n, c.replicates, c.seed, c.sigma), (700, 20, 9, 1.0));
    assert_eq!(c.outputs.csv, Some(PathBuf::from("out.csv")));
    assert_eq!(c.cells.len(), 3);
    assert_eq!(c.cells[0], CellConfig::new(1.2, 1.0, 0.2, 2.0));
    let t = c.cells[2];
    assert_eq!((t.k, t.m, t.law, t.cutoff), (4.0, 2.0, LawKind::Tempered, 0.05));
    assert_eq!(t.kernel, KernelSpec::Psi { m: 3.0 });
  }

  #[test]
  fn reports_line_numbers() {
    let err = ExperimentConfig::parse("n = 700\nfoo = 1\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    let err = ExperimentConfig::parse("[cell]\nalpha = 1.2\ngamma = 1\nbeta = 0.7\nk = 2\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
    let err = ExperimentConfig::parse("[cell]\nalpha = x\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }));
    let err = ExperimentConfig::parse("[cell]\nalpha = 1\nalpha = 1\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }));
    assert!(ExperimentConfig::parse("[cells]\n").is_err());
  }

  #[test]
  fn threshold_multiplier_is_required() {
    let err = ExperimentConfig::parse("[cell]\nalpha = 1.2\ngamma = 1\nbeta = 0.2\n").unwrap_err();
    assert!(err.to_string().contains("`k`"));
  }

  #[test]
  fn rejects_invalid_globals() {
    assert!(ExperimentConfig::parse("replicates = 0\n").is_err());
    assert!(ExperimentConfig::parse("sigma = -1\n").is_err());
    assert!(ExperimentConfig::parse("n = 1\n").is_err());
    assert!(ExperimentConfig::parse("normalization = half\n").is_err());
    assert!(ExperimentConfig::parse("[cell]\nalpha=1.5\ngamma=1\nbeta=0.2\nk=2\nM=1.2\n").is_err());
  }

  #[test]
  fn empty_config_has_defaults() {
    let c = ExperimentConfig::parse("").unwrap();
    assert_eq!(c, ExperimentConfig::default());
  }
}
