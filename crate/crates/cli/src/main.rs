use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use jumpvol::estimators::{
  cancelled_kernel_tqv, corrected_tqv, normalized_error, richardson_tqv, tqv, EstimatorConfig, Weight,
};
use jumpvol::harness::{
  self, emit_dzeta_csv, emit_rate_csv, emit_report, emit_richardson_csv, write_outputs, CellConfig,
  ExperimentConfig, LawKind, ReportFormat,
};
use jumpvol::kernels::{KernelSpec, DEFAULT_M};
use jumpvol::levy_sim::{simulate_path, PathSample};
use jumpvol::stable_analytics::Normalization;
use jumpvol::Error;

#[derive(Parser)]
#[command(name = "jumpvol", version, about = "Truncated realized variance under stable-like jumps")]
struct Cli {
  #[command(flatten)]
  global: GlobalArgs,
  #[command(subcommand)]
  command: Command,
}

#[derive(Args)]
struct GlobalArgs {
  /// Experiment configuration file
  #[arg(long, global = true)]
  config: Option<PathBuf>,
  /// Master seed; overrides the configuration
  #[arg(long, global = true)]
  seed: Option<u64>,
  /// Worker threads (falls back to JUMPVOL_THREADS, then all cores)
  #[arg(long, global = true)]
  threads: Option<usize>,
  /// Output file (stdout when absent)
  #[arg(long, global = true)]
  out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
  /// Simulate one path and write it as `i,t,x` CSV
  Simulate(SimulateArgs),
  /// Run the estimators on a path CSV
  Estimate(EstimateArgs),
  /// Monte Carlo table of E1/E2/E3 for every configured cell
  McTable(McTableArgs),
  /// Log-log fit of the mean bias against 1/n over the configured n_grid
  RateCheck,
  /// Paired-path Richardson extrapolation for every configured cell
  Richardson,
  /// d(zeta) by Monte Carlo, quadrature and its small-zeta leading term
  Dzeta(DzetaArgs),
}

#[derive(Args)]
struct ModelArgs {
  #[arg(long)]
  alpha: Option<f64>,
  #[arg(long)]
  gamma: Option<f64>,
  #[arg(long)]
  sigma: Option<f64>,
  #[arg(long)]
  drift: Option<f64>,
  /// stable or tempered
  #[arg(long)]
  law: Option<String>,
  /// Small-jump cutoff of the tempered sampler
  #[arg(long)]
  cutoff: Option<f64>,
  /// tail or unit
  #[arg(long)]
  normalization: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
  #[arg(long)]
  n: Option<usize>,
  #[command(flatten)]
  model: ModelArgs,
}

#[derive(Args)]
struct EstimateArgs {
  /// Path CSV with header `i,t,x`
  #[arg(long = "in")]
  input: PathBuf,
  #[arg(long)]
  beta: f64,
  #[arg(long)]
  k: f64,
  #[arg(long)]
  alpha: f64,
  #[arg(long)]
  gamma: f64,
  /// phi, psi:M=<real> or composite:M=<real>
  #[arg(long, default_value = "phi")]
  kernel: String,
  /// Support end of psi in the cancelling kernel
  #[arg(long = "M", default_value_t = DEFAULT_M)]
  m: f64,
  /// unit, one_plus_abs or one_plus_square
  #[arg(long, default_value = "unit")]
  weight: String,
  /// tail or unit
  #[arg(long, default_value = "tail")]
  normalization: String,
  /// True integrated variance; enables normalized errors
  #[arg(long)]
  sigma2: Option<f64>,
}

#[derive(Args)]
struct McTableArgs {
  /// Also write the JSON report here
  #[arg(long)]
  json: Option<PathBuf>,
}

#[derive(Args)]
struct DzetaArgs {
  #[arg(long)]
  alpha: f64,
  /// Comma-separated list of nonzero zeta values
  #[arg(long, value_delimiter = ',', required = true)]
  zeta: Vec<f64>,
  #[arg(long, default_value_t = 1_000_000)]
  draws: usize,
  /// tail or unit
  #[arg(long, default_value = "tail")]
  normalization: String,
}

fn output(path: Option<&Path>) -> jumpvol::Result<Box<dyn Write>> {
  Ok(match path {
    Some(p) => Box::new(BufWriter::new(File::create(p)?)),
    None => Box::new(BufWriter::new(io::stdout().lock())),
  })
}

fn load_config(global: &GlobalArgs) -> jumpvol::Result<ExperimentConfig> {
  let path = global
    .config
    .as_deref()
    .ok_or_else(|| Error::Parameter("this command needs --config <path>".into()))?;
  let mut cfg = ExperimentConfig::load(path)?;
  if let Some(seed) = global.seed {
    cfg.seed = seed;
  }
  Ok(cfg)
}

fn simulate(global: &GlobalArgs, args: &SimulateArgs) -> jumpvol::Result<()> {
  // Start from the first configured cell when a config is given.
  let base = match &global.config {
    Some(_) => Some(load_config(global)?),
    None => None,
  };
  let first = base.as_ref().and_then(|c| c.cells.first().copied());
  let m = &args.model;
  let alpha = m
    .alpha
    .or(first.map(|c| c.alpha))
    .ok_or_else(|| Error::Parameter("--alpha is required".into()))?;
  let gamma = m
    .gamma
    .or(first.map(|c| c.gamma))
    .ok_or_else(|| Error::Parameter("--gamma is required".into()))?;
  let mut cell = first.unwrap_or_else(|| CellConfig::new(alpha, gamma, 0.2, 1.0));
  cell.alpha = alpha;
  cell.gamma = gamma;
  if let Some(d) = m.drift {
    cell.drift = d;
  }
  if let Some(l) = &m.law {
    cell.law = l.parse::<LawKind>()?;
  }
  if let Some(c) = m.cutoff {
    cell.cutoff = c;
  }
  let sigma = m.sigma.or(base.as_ref().map(|c| c.sigma)).unwrap_or(1.0);
  let normalization = match &m.normalization {
    Some(s) => s.parse()?,
    None => base.as_ref().map(|c| c.normalization).unwrap_or_default(),
  };
  let n = args.n.or(base.as_ref().map(|c| c.n)).unwrap_or(700);
  let seed = global.seed.or(base.as_ref().map(|c| c.seed)).unwrap_or(0);
  let path = simulate_path(&cell.model(sigma, normalization)?, n, seed)?;
  path.write_csv(output(global.out.as_deref())?)
}

fn estimate(global: &GlobalArgs, args: &EstimateArgs) -> jumpvol::Result<()> {
  let path = PathSample::read_csv(BufReader::new(File::open(&args.input)?))?;
  let normalization: Normalization = args.normalization.parse()?;
  let mut cell = CellConfig::new(args.alpha, args.gamma, args.beta, args.k).with_m(args.m);
  cell.kernel = args.kernel.parse::<KernelSpec>()?;
  cell.weight = args.weight.parse::<Weight>()?;
  let config: EstimatorConfig = cell.estimator()?;
  let jump = cell.jump_info(normalization)?;
  let q = tqv(&path, &config);
  let mut rows = vec![
    ("q_n", q, args.sigma2.map(|s| normalized_error(q, s, path.n()))),
    {
      let r = corrected_tqv(&path, &config, &jump, args.sigma2)?;
      ("q_n_corrected", r.final_estimate, r.normalized_error)
    },
    {
      let r = cancelled_kernel_tqv(&path, &config, args.alpha, args.m, args.sigma2)?;
      ("q_n_cancelled", r.final_estimate, r.normalized_error)
    },
  ];
  if path.n() % 2 == 0 {
    let r = richardson_tqv(&path, &config, args.alpha, args.sigma2)?;
    rows.push(("richardson", r.final_estimate, r.normalized_error));
  }
  let mut w = output(global.out.as_deref())?;
  writeln!(w, "estimator,value,normalized_error")?;
  for (name, v, e) in rows {
    match e {
      Some(e) => writeln!(w, "{name},{v},{e}")?,
      None => writeln!(w, "{name},{v},")?,
    }
  }
  w.flush()?;
  Ok(())
}

fn mc_table(global: &GlobalArgs, args: &McTableArgs) -> jumpvol::Result<()> {
  let mut cfg = load_config(global)?;
  if let Some(out) = &global.out {
    cfg.outputs.csv = Some(out.clone());
  }
  if let Some(json) = &args.json {
    cfg.outputs.json = Some(json.clone());
  }
  let (report, samples) = harness::run_mc_observed(&cfg, |i, c, elapsed| {
    let p = &c.cell;
    eprintln!(
      "cell {i} (alpha={}, gamma={}, beta={}, k={}): {} replicates in {elapsed:.2?}",
      p.alpha, p.gamma, p.beta, p.k, c.attempted
    );
    if !c.valid {
      eprintln!("warning: cell {i} excluded {} of {} replicates", c.excluded, c.attempted);
    }
  })?;
  write_outputs(&report, &samples, &cfg.outputs)?;
  if cfg.outputs.csv.is_none() {
    emit_report(&report, ReportFormat::Csv, output(None)?)?;
  }
  Ok(())
}

fn rate_check(global: &GlobalArgs) -> jumpvol::Result<()> {
  let report = harness::run_rate_experiment(&load_config(global)?)?;
  emit_rate_csv(&report, output(global.out.as_deref())?)
}

fn richardson(global: &GlobalArgs) -> jumpvol::Result<()> {
  let report = harness::run_richardson(&load_config(global)?)?;
  emit_richardson_csv(&report, output(global.out.as_deref())?)
}

fn dzeta(global: &GlobalArgs, args: &DzetaArgs) -> jumpvol::Result<()> {
  let rows = harness::dzeta_table(
    args.alpha,
    &args.zeta,
    args.draws,
    global.seed.unwrap_or(0),
    args.normalization.parse()?,
  )?;
  emit_dzeta_csv(&rows, output(global.out.as_deref())?)
}

fn thread_count(flag: Option<usize>) -> jumpvol::Result<Option<usize>> {
  if flag.is_some() {
    return Ok(flag);
  }
  match std::env::var("JUMPVOL_THREADS") {
    Ok(v) => v
      .trim()
      .parse()
      .map(Some)
      .map_err(|_| Error::Parameter(format!("JUMPVOL_THREADS must be a positive integer, got `{v}`"))),
    Err(_) => Ok(None),
  }
}

fn run(cli: &Cli) -> jumpvol::Result<()> {
  let mut pool = rayon::ThreadPoolBuilder::new();
  if let Some(t) = thread_count(cli.global.threads)? {
    if t == 0 {
      return Err(Error::Parameter("thread count must be positive".into()));
    }
    pool = pool.num_threads(t);
  }
  let pool = pool
    .build()
    .map_err(|e| Error::Parameter(format!("cannot start thread pool: {e}")))?;
  let g = &cli.global;
  pool.install(|| match &cli.command {
    Command::Simulate(a) => simulate(g, a),
    Command::Estimate(a) => estimate(g, a),
    Command::McTable(a) => mc_table(g, a),
    Command::RateCheck => rate_check(g),
    Command::Richardson => richardson(g),
    Command::Dzeta(a) => dzeta(g, a),
  })
}

fn main() -> ExitCode {
  let cli = match Cli::try_parse() {
    Ok(c) => c,
    Err(e) => {
      let _ = e.print();
      return match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
        _ => ExitCode::from(1),
      };
    }
  };
  match run(&cli) {
    Ok(()) => ExitCode::SUCCESS,
    Err(e) => {
      eprintln!("error: {e}");
      match e {
        Error::Numerical { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
      }
    }
  }
}
