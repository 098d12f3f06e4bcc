//! CSV and JSON emission. Numbers use Rust's shortest round-trip formatting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CellSamples, McReport, Outputs, RateReport, RichardsonReport};
use crate::error::{Error, Result};

pub const REPORT_CSV_HEADER: &str =
  "alpha,gamma,beta,k,n,replicates,mean_e1,rms_e1,mean_e2,mean_e3,stderr_e1,stderr_e2,stderr_e3";
pub const RATE_CSV_HEADER: &str = "alpha,beta,expected_slope,fitted_slope,stderr";
pub const RICHARDSON_CSV_HEADER: &str =
  "alpha,gamma,beta,k,n,replicates,mean_e1,stderr_e1,mean_richardson,stderr_richardson";
pub const DZETA_CSV_HEADER: &str = "zeta,alpha,mc,quadrature,asymptotic,stderr";
const PLOT_CSV_HEADER: &str = "cell,alpha,gamma,beta,k,replicate,e1,e2,e3";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
  Csv,
  Json,
}

impl FromStr for ReportFormat {
  type Err = Error;

  fn from_str(s: &str) -> Result<Self> {
    match s {
      "csv" => Ok(ReportFormat::Csv),
      "json" => Ok(ReportFormat::Json),
      other => Err(Error::param(format!("unknown report format `{other}`"))),
    }
  }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DzetaRow {
  pub zeta: f64,
  pub alpha: f64,
  pub mc: f64,
  pub quadrature: f64,
  pub asymptotic: f64,
  pub stderr: f64,
}

/// Writes `report` as the per-cell CSV table or as JSON with the embedded config.
pub fn emit_report<W: Write>(report: &McReport, format: ReportFormat, mut w: W) -> Result<()> {
  match format {
    ReportFormat::Json => {
      serde_json::to_writer_pretty(&mut w, report)?;
      writeln!(w)?;
    }
    ReportFormat::Csv => {
      writeln!(w, "{REPORT_CSV_HEADER}")?;
      for c in &report.cells {
        let p = &c.cell;
        writeln!(
          w,
          "{},{},{},{},{},{},{},{},{},{},{},{},{}",
          p.alpha,
          p.gamma,
          p.beta,
          p.k,
          c.n,
          c.succeeded,
          c.e1.mean,
          c.e1.rms,
          c.e2.mean,
          c.e3.mean,
          c.e1.stderr,
          c.e2.stderr,
          c.e3.stderr
        )?;
      }
    }
  }
  w.flush()?;
  Ok(())
}

/// Per-replicate errors, one row per kept replicate.
pub fn emit_plot_data<W: Write>(report: &McReport, samples: &[CellSamples], mut w: W) -> Result<()> {
  writeln!(w, "{PLOT_CSV_HEADER}")?;
  for (ci, (c, s)) in report.cells.iter().zip(samples).enumerate() {
    let p = &c.cell;
    for (r, e) in s.replicates.iter().zip(&s.errors) {
      writeln!(
        w,
        "{ci},{},{},{},{},{r},{},{},{}",
        p.alpha, p.gamma, p.beta, p.k, e[0], e[1], e[2]
      )?;
    }
  }
  w.flush()?;
  Ok(())
}

pub fn emit_rate_csv<W: Write>(report: &RateReport, mut w: W) -> Result<()> {
  writeln!(w, "{RATE_CSV_HEADER}")?;
  for r in &report.rows {
    writeln!(
      w,
      "{},{},{},{},{}",
      r.alpha, r.beta, r.expected_slope, r.fitted_slope, r.stderr
    )?;
  }
  w.flush()?;
  Ok(())
}

pub fn emit_richardson_csv<W: Write>(report: &RichardsonReport, mut w: W) -> Result<()> {
  writeln!(w, "{RICHARDSON_CSV_HEADER}")?;
  for r in &report.rows {
    let p = &r.cell;
    writeln!(
      w,
      "{},{},{},{},{},{},{},{},{},{}",
      p.alpha,
      p.gamma,
      p.beta,
      p.k,
      r.n,
      r.succeeded,
      r.e1.mean,
      r.e1.stderr,
      r.richardson.mean,
      r.richardson.stderr
    )?;
  }
  w.flush()?;
  Ok(())
}

pub fn emit_dzeta_csv<W: Write>(rows: &[DzetaRow], mut w: W) -> Result<()> {
  writeln!(w, "{DZETA_CSV_HEADER}")?;
  for r in rows {
    writeln!(
      w,
      "{},{},{},{},{},{}",
      r.zeta, r.alpha, r.mc, r.quadrature, r.asymptotic, r.stderr
    )?;
  }
  w.flush()?;
  Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
  Ok(BufWriter::new(File::create(path)?))
}

/// Writes every output named in `outputs`.
pub fn write_outputs(report: &McReport, samples: &[CellSamples], outputs: &Outputs) -> Result<()> {
  if let Some(p) = &outputs.csv {
    emit_report(report, ReportFormat::Csv, create(p)?)?;
  }
  if let Some(p) = &outputs.json {
    emit_report(report, ReportFormat::Json, create(p)?)?;
  }
  if let Some(p) = &outputs.plot_data {
    emit_plot_data(report, samples, create(p)?)?;
  }
  Ok(())
}

#[cfg(test)]
mod tests {
  use super::super::{run_mc, run_mc_with_samples, CellConfig, ExperimentConfig};
  use super::*;

  fn report(cells: Vec<CellConfig>) -> McReport {
    run_mc(&ExperimentConfig {
      n: 100,
      replicates: 25,
      cells,
      ..ExperimentConfig::default()
    })
    .unwrap()
  }

  fn csv(r: &McReport) -> String {
    let mut buf = Vec::new();
    emit_report(r, ReportFormat::Csv, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
  }

  #[test]
  fn empty_report_is_header_only() {
    assert_eq!(csv(&report(vec![])), format!("{REPORT_CSV_HEADER}\n"));
  }

  #[test]
  fn one_cell_gives_two_lines() {
    let text = csv(&report(vec![CellConfig::new(1.2, 1.0, 0.2, 2.0)]));
    assert_eq!(text.lines().count(), 2);
  }

  #[test]
  fn csv_and_json_agree() {
    let r = report(vec![CellConfig::new(1.2, 1.0, 0.2, 2.0), CellConfig::new(1.9, 3.0, 0.2, 2.0)]);
    let mut buf = Vec::new();
    emit_report(&r, ReportFormat::Json, &mut buf).unwrap();
    let back: McReport = serde_json::from_slice(&buf).unwrap();
    assert_eq!(back, r);
    for (line, c) in csv(&r).lines().skip(1).zip(&back.cells) {
      let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
      let expected = [
        c.cell.alpha,
        c.cell.gamma,
        c.cell.beta,
        c.cell.k,
        c.n as f64,
        c.succeeded as f64,
        c.e1.mean,
        c.e1.rms,
        c.e2.mean,
        c.e3.mean,
        c.e1.stderr,
        c.e2.stderr,
        c.e3.stderr,
      ];
      assert_eq!(v, expected);
    }
  }

  #[test]
  fn plot_data_has_a_row_per_replicate() {
    let cfg = ExperimentConfig {
      n: 100,
      replicates: 7,
      cells: vec![CellConfig::new(1.2, 1.0, 0.2, 2.0)],
      ..ExperimentConfig::default()
    };
    let (r, s) = run_mc_with_samples(&cfg).unwrap();
    let mut buf = Vec::new();
    emit_plot_data(&r, &s, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 8);
  }

  #[test]
  fn unwritable_path_is_an_io_error() {
    let r = report(vec![]);
    let outputs = Outputs {
      csv: Some("/nonexistent-dir/x/report.csv".into()),
      ..Outputs::default()
    };
    assert!(matches!(write_outputs(&r, &[], &outputs), Err(Error::Io(_))));
  }
}
