//! `ntgof` command line.
//!
//! ```text
//! ntgof test      --kind uniformity --input u.csv --penalty schwarz --alpha 0.05 --mc-reps 2000 --seed 42
//! ntgof calibrate --kind uniformity --n 500 --mc-reps 5000 --seed 1 --out cal.json
//! ntgof power     --kind uniformity --alternative contamination:2:0.3 --n-grid 200,800,3200
//! ntgof probe     --probe tail-rate --y 0.5 --n-grid 16,32,64
//! ```
//!
//! Exit status: 0 for a completed run whatever the decision, 2 for input
//! errors, 3 for numeric failures.

pub mod input;
pub mod output;

use crate::catalog::{AlternativeSpec, DeconvolutionModel, TestKind, TestSpec};
use crate::montecarlo::{
    consistency_probe, null_distribution, power_curve, tail_rate_probe, BoundedSampler,
    MonteCarloConfig, ProbeThresholds,
};
use crate::selection::{DimensionBudget, PenaltySchedule};
use clap::{Args, Parser, Subcommand, ValueEnum};
use input::{read_dataset, read_penalty_table, ModelConfig};
use output::{
    to_json, CalibrationReport, ConsistencyProbeReport, Decision, PowerReport, SeriesRow,
    TailProbeReport, TestReport,
};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable capping the worker count, 0 meaning automatic.
pub const THREADS_ENV: &str = "NTGOF_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ntgof",
    version,
    about = "Data-driven Neyman-type goodness-of-fit tests"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a test on CSV data and calibrate it by simulation.
    Test(TestArgs),
    /// Simulate the null distribution of T_S at one sample size.
    Calibrate(CalibrateArgs),
    /// Rejection rates under an alternative along a grid of sample sizes.
    Power(PowerArgs),
    /// Empirical consistency or tail-rate probe.
    Probe(ProbeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, default_value = "uniformity")]
    pub kind: String,
    /// schwarz, linear2k or table:<path>
    #[arg(long, default_value = "schwarz")]
    pub penalty: String,
    /// auto or a fixed dimension
    #[arg(long, default_value = "auto")]
    pub dmax: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long = "mc-reps", default_value_t = 2000)]
    pub mc_reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with deconvolution / composite model parameters
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    /// contamination:<j>:<a>, noisy-linear:<sd> or null[:<K>]
    #[arg(long)]
    pub alternative: String,
    #[arg(long = "n-grid", value_delimiter = ',', default_value = "200,800,3200")]
    pub n_grid: Vec<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProbeKind {
    Consistency,
    TailRate,
}

#[derive(Debug, Clone, Args)]
pub struct ProbeArgs {
    #[arg(long, value_enum)]
    pub probe: ProbeKind,
    #[arg(long)]
    pub alternative: Option<String>,
    #[arg(long = "n-grid", value_delimiter = ',', default_value = "200,800,3200")]
    pub n_grid: Vec<usize>,
    /// Deviation for the tail-rate probe.
    #[arg(long, default_value_t = 0.5)]
    pub y: f64,
    /// Required P(S >= K) at the largest n.
    #[arg(long, default_value_t = 0.8)]
    pub min_probability: f64,
    #[command(flatten)]
    pub common: Common,
}

/// Parsed and validated settings shared by all commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: TestSpec,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

fn parse_penalty(s: &str) -> Result<PenaltySchedule, CliError> {
    match s {
        "schwarz" => Ok(PenaltySchedule::Schwarz),
        "linear2k" => Ok(PenaltySchedule::Linear2k),
        _ => match s.strip_prefix("table:") {
            Some(path) => Ok(PenaltySchedule::Table(read_penalty_table(Path::new(path))?)),
            None => Err(CliError::Input(format!(
                "unknown penalty `{s}`; expected schwarz, linear2k or table:<path>"
            ))),
        },
    }
}

fn parse_budget(s: &str) -> Result<DimensionBudget, CliError> {
    if s == "auto" {
        return Ok(DimensionBudget::default());
    }
    match s.parse::<usize>() {
        Ok(d) if d >= 1 => Ok(DimensionBudget::fixed(d)),
        _ => Err(CliError::Input(format!(
            "--dmax must be `auto` or a positive integer, got `{s}`"
        ))),
    }
}

fn parse_alternative(s: &str) -> Result<AlternativeSpec, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<f64, CliError> {
        parts
            .get(i)
            .and_then(|p| p.parse::<f64>().ok())
            .ok_or_else(|| CliError::Input(format!("malformed alternative `{s}`")))
    };
    let alt = match parts[0] {
        "contamination" if parts.len() == 3 => {
            let j = num(1)?;
            if j < 1.0 || j.fract() != 0.0 {
                return Err(CliError::Input(format!(
                    "component index must be a positive integer in `{s}`"
                )));
            }
            AlternativeSpec::contamination(j as usize, num(2)?)?
        }
        "noisy-linear" if parts.len() == 2 => AlternativeSpec::noisy_linear(num(1)?)?,
        // placeholder for size studies; the declared K and C_P are not real
        "null" if parts.len() <= 2 => {
            let k = if parts.len() == 2 {
                num(1)? as usize
            } else {
                1
            };
            return Ok(AlternativeSpec::new(k, 1.0, Arc::new(NullPlaceholder))?);
        }
        _ => return Err(CliError::Input(format!("unknown alternative `{s}`"))),
    };
    Ok(alt)
}

/// Marks an alternative whose data come from the test's own null sampler.
struct NullPlaceholder;

impl crate::catalog::DataSampler for NullPlaceholder {
    fn sample(&self, _: usize, _: &mut crate::rng::McRng) -> crate::catalog::Dataset {
        unreachable!("replaced by the null sampler before use")
    }
}

fn resolve_alternative(s: &str, spec: &TestSpec) -> Result<AlternativeSpec, CliError> {
    let mut alt = parse_alternative(s)?;
    if s.starts_with("null") {
        alt.sampler = spec.null_sampler();
    }
    Ok(alt)
}

fn build_spec(common: &Common) -> Result<TestSpec, CliError> {
    let kind: TestKind = common.kind.parse()?;
    let models = match &common.config {
        Some(path) => ModelConfig::load(path)?,
        None => ModelConfig::default(),
    };
    let spec = match kind {
        TestKind::Uniformity => TestSpec::uniformity(),
        TestKind::IndependenceRank => TestSpec::independence(),
        TestKind::DeconvolutionSimple => {
            let c = models.deconvolution.unwrap_or_default();
            let mut model = DeconvolutionModel::new(c.null, c.noise)?;
            if c.moment_draws.is_some() || c.moment_seed.is_some() {
                model = model.with_moment_draws(
                    c.moment_draws
                        .unwrap_or(crate::catalog::DEFAULT_MOMENT_DRAWS),
                    c.moment_seed.unwrap_or(crate::catalog::DEFAULT_MOMENT_SEED),
                );
            }
            TestSpec::deconvolution(model)
        }
        TestKind::CompositeParametric => TestSpec::composite(models.composite_model()?),
    };
    Ok(spec
        .with_penalty(parse_penalty(&common.penalty)?)
        .with_budget(parse_budget(&common.dmax)?)?)
}

impl RunConfig {
    pub fn from_common(common: &Common) -> Result<Self, CliError> {
        if !(common.alpha > 0.0 && common.alpha < 1.0) {
            return Err(CliError::Input(format!(
                "--alpha must lie in (0, 1), got {}",
                common.alpha
            )));
        }
        if common.mc_reps < crate::montecarlo::MIN_REPLICATIONS {
            return Err(CliError::Input(format!(
                "--mc-reps must be at least {}, got {}",
                crate::montecarlo::MIN_REPLICATIONS,
                common.mc_reps
            )));
        }
        Ok(Self {
            spec: build_spec(common)?,
            alpha: common.alpha,
            replications: common.mc_reps,
            seed: common.seed,
            out: common.out.clone(),
        })
    }

    fn mc(&self, n_grid: Vec<usize>) -> Result<MonteCarloConfig, CliError> {
        Ok(MonteCarloConfig::new(
            self.replications,
            self.seed,
            n_grid,
            self.alpha,
        )?)
    }

    fn emit<T: serde::Serialize>(&self, value: &T) -> Result<(), CliError> {
        let bytes =
            to_json(value).map_err(|e| CliError::Numeric(format!("serializing report: {e}")))?;
        match &self.out {
            Some(path) => std::fs::write(path, bytes)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
            None => {
                use std::io::Write;
                std::io::stdout()
                    .write_all(&bytes)
                    .map_err(|e| CliError::Input(format!("stdout: {e}")))
            }
        }
    }
}

fn run_test(args: &TestArgs) -> Result<(), CliError> {
    let rc = RunConfig::from_common(&args.common)?;
    let data = read_dataset(&args.input, rc.spec.kind())?;
    let outcome = rc.spec.evaluate(&data)?;
    let n = outcome.n;
    // composite nulls are calibrated at the fitted parameter
    let (calib_spec, beta_hat) = match rc.spec.composite_model() {
        Some(m) => {
            let beta = m.family.fit(data.as_univariate()?)?;
            (rc.spec.with_sampling_beta(beta.clone())?, Some(beta))
        }
        None => (rc.spec.clone(), None),
    };
    let cal = null_distribution(&calib_spec, n, &rc.mc(vec![n])?)?;
    let p = cal.p_value(outcome.statistic());
    let sel = &outcome.selection;
    let report = TestReport {
        kind: rc.spec.kind().to_string(),
        n,
        selected: sel.selected,
        statistic: sel.statistic,
        p_value: p,
        critical_value: cal.critical_value,
        alpha: rc.alpha,
        decision: if p <= rc.alpha {
            Decision::Reject
        } else {
            Decision::Accept
        },
        penalty: rc.spec.penalty().to_string(),
        dimension: outcome.dimension,
        seed: rc.seed,
        replications: rc.replications,
        beta_hat,
        warnings: outcome.warnings.clone(),
        series: (0..sel.series.len())
            .map(|i| SeriesRow {
                k: i + 1,
                statistic: sel.series[i],
                penalty: sel.penalties[i],
                penalized: sel.penalized[i],
            })
            .collect(),
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    rc.emit(&report)
}

fn run_calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let rc = RunConfig::from_common(&args.common)?;
    let calibration = null_distribution(&rc.spec, args.n, &rc.mc(vec![args.n])?)?;
    rc.emit(&CalibrationReport {
        kind: rc.spec.kind().to_string(),
        penalty: rc.spec.penalty().to_string(),
        calibration,
    })
}

fn run_power(args: &PowerArgs) -> Result<(), CliError> {
    let rc = RunConfig::from_common(&args.common)?;
    let alt = resolve_alternative(&args.alternative, &rc.spec)?;
    let curve = power_curve(&rc.spec, &alt, &rc.mc(args.n_grid.clone())?)?;
    rc.emit(&PowerReport {
        kind: rc.spec.kind().to_string(),
        penalty: rc.spec.penalty().to_string(),
        alternative: args.alternative.clone(),
        curve,
    })
}

fn run_probe(args: &ProbeArgs) -> Result<(), CliError> {
    let rc = RunConfig::from_common(&args.common)?;
    match args.probe {
        ProbeKind::Consistency => {
            let name = args.alternative.as_deref().ok_or_else(|| {
                CliError::Input("--alternative is required for the consistency probe".into())
            })?;
            let alt = resolve_alternative(name, &rc.spec)?;
            let thresholds = ProbeThresholds {
                min_final_probability: args.min_probability,
            };
            let report =
                consistency_probe(&rc.spec, &alt, &rc.mc(args.n_grid.clone())?, thresholds)?;
            rc.emit(&ConsistencyProbeReport {
                kind: rc.spec.kind().to_string(),
                penalty: rc.spec.penalty().to_string(),
                alternative: name.to_string(),
                report,
            })
        }
        ProbeKind::TailRate => {
            rc.mc(args.n_grid.clone())?;
            let report = tail_rate_probe(
                &BoundedSampler::rademacher(),
                args.y,
                &args.n_grid,
                rc.replications,
                rc.seed,
            )?;
            rc.emit(&TailProbeReport {
                sampler: "rademacher".into(),
                report,
            })
        }
    }
}

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            CliError::Input(format!(
                "{THREADS_ENV} must be a non-negative integer, got `{v}`"
            ))
        }),
        Err(_) => Ok(0),
    }
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let threads = threads_from_env()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Test(a) => run_test(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Power(a) => run_power(a),
        Command::Probe(a) => run_probe(a),
    })
}

/// Parse `args`, run, report errors on stderr and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("ntgof: {e}");
            e.exit_code()
        }
    }
}
