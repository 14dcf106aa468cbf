//! `rloss`: estimators, loss tables, sample sizes and the Monte-Carlo
//! studies from the command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 domain or
//! numerical error.

mod config;
mod experiment;
mod oneshot;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use restricted_loss::sim::Study;

use config::ConfigFile;
use experiment::Experiment;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] restricted_loss::Error),

    #[error("i/o: {0}")]
    Io(String),

    #[error("{0} check families failed")]
    VerifyFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Usage(_) | CliError::Core(restricted_loss::Error::Config(_)) => 2,
            CliError::Core(_) | CliError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rloss",
    version,
    about = "Bayes estimators under losses for restricted parameter spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Point estimate and achieved risk for one posterior and loss.
    Estimate(EstimateArgs),
    /// Tabulate a loss over decisions at fixed θ.
    Losses(LossesArgs),
    /// Probability study: MSE and interval coverage for x ~ Bin(n, θ).
    Binomial(ExperimentArgs),
    /// Normal mean restricted to (−a, a).
    Normal(ExperimentArgs),
    /// Both parameters of a Gamma distribution.
    Gamma(ExperimentArgs),
    /// Both parameters of a Weibull distribution.
    Weibull(ExperimentArgs),
    /// Interval coverage of the probability study on θ = 0.05, 0.10, …, 0.95.
    Coverage(ExperimentArgs),
    /// Per-arm sample size from historical placebo data.
    Samplesize(SampleSizeArgs),
    /// Run the oracle cross-check families.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Settings file of `key=value` lines (keys are flag names); flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    /// Beta posterior from x successes in n trials under a uniform prior.
    #[arg(long, num_args = 2, value_names = ["X", "N"], allow_hyphen_values = true)]
    beta: Option<Vec<String>>,
    /// Normal posterior N(center, sd²) truncated to (a, b).
    #[arg(long, num_args = 4, value_names = ["CENTER", "SD", "A", "B"], allow_hyphen_values = true)]
    truncnorm: Option<Vec<String>>,
    /// File of whitespace-separated posterior draws.
    #[arg(long, value_name = "FILE")]
    mc: Option<String>,
    /// sq, prec, scale or iq.
    #[arg(long)]
    loss: Option<String>,
    /// Order of the scale loss.
    #[arg(long)]
    k: Option<String>,
    /// Interval (a, b) of the iq loss.
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_hyphen_values = true)]
    interval: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct LossesArgs {
    #[command(flatten)]
    common: Common,
    /// sq, prec, scale, sip, nsq, stein, brown, iq or iq-brown.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_hyphen_values = true)]
    interval: Option<Vec<String>>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    /// First decision of the table.
    #[arg(long, allow_hyphen_values = true)]
    from: Option<String>,
    /// Last decision of the table.
    #[arg(long, allow_hyphen_values = true)]
    to: Option<String>,
    #[arg(long)]
    points: Option<String>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    common: Common,
    /// CSV destination; the standard stream when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Observations per replication.
    #[arg(long)]
    n: Option<String>,
    /// Replications per grid point.
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads, or `auto`.
    #[arg(long)]
    workers: Option<String>,
    /// Comma-separated estimator tags.
    #[arg(long)]
    estimators: Option<String>,
    /// Comma-separated true values of the first parameter.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Comma-separated true values of the second parameter (lattice with --grid).
    #[arg(long)]
    grid2: Option<String>,
    /// Interval kinds: normal, wilson_ac, delta_iq.
    #[arg(long)]
    ci_kinds: Option<String>,
    /// Level of the normal-approximation interval.
    #[arg(long)]
    level: Option<String>,
    /// Sampling variance of the normal study.
    #[arg(long)]
    sigma2: Option<String>,
    /// Half-width of the normal study's restriction.
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    prior_shape: Option<String>,
    #[arg(long)]
    prior_rate: Option<String>,
    /// Quadrature nodes per posterior axis.
    #[arg(long)]
    grid_nodes: Option<String>,
    /// Reported parameters, or `all`.
    #[arg(long)]
    params: Option<String>,
    /// Comma-separated orders of the Weibull scale means.
    #[arg(long)]
    k_list: Option<String>,
}

#[derive(Debug, Args)]
struct SampleSizeArgs {
    #[command(flatten)]
    common: Common,
    /// Historical placebo responders.
    #[arg(long)]
    x: Option<String>,
    /// Historical placebo patients.
    #[arg(long)]
    n: Option<String>,
    /// Plausible range of the placebo rate.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    interval: Option<Vec<String>>,
    /// Response rate under treatment.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    power: Option<String>,
    /// Use this placebo rate directly.
    #[arg(long)]
    p_placebo: Option<String>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated families (symmetry, moments, estimators, limits, intervals) or `all`.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

/// Collects the flags that were given, keyed by flag name.
#[derive(Default)]
struct FlagMap(BTreeMap<String, String>);

impl FlagMap {
    fn one(mut self, key: &str, v: &Option<String>) -> Self {
        if let Some(v) = v {
            self.0.insert(key.to_string(), v.clone());
        }
        self
    }

    fn many(mut self, key: &str, v: &Option<Vec<String>>) -> Self {
        if let Some(v) = v {
            self.0.insert(key.to_string(), v.join(","));
        }
        self
    }
}

fn load(common: &Common) -> Result<ConfigFile, CliError> {
    match &common.config {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn experiment_flags(a: &ExperimentArgs) -> BTreeMap<String, String> {
    FlagMap::default()
        .one("n", &a.n)
        .one("reps", &a.reps)
        .one("seed", &a.seed)
        .one("workers", &a.workers)
        .one("estimators", &a.estimators)
        .one("grid", &a.grid)
        .one("grid2", &a.grid2)
        .one("ci-kinds", &a.ci_kinds)
        .one("level", &a.level)
        .one("sigma2", &a.sigma2)
        .one("a", &a.a)
        .one("prior-shape", &a.prior_shape)
        .one("prior-rate", &a.prior_rate)
        .one("grid-nodes", &a.grid_nodes)
        .one("params", &a.params)
        .one("k-list", &a.k_list)
        .0
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (exp, args) = match &cli.command {
        Command::Estimate(a) => {
            let flags = FlagMap::default()
                .many("beta", &a.beta)
                .many("truncnorm", &a.truncnorm)
                .one("mc", &a.mc)
                .one("loss", &a.loss)
                .one("k", &a.k)
                .many("interval", &a.interval)
                .0;
            return oneshot::estimate(&flags, &load(&a.common)?);
        }
        Command::Losses(a) => {
            let flags = FlagMap::default()
                .one("loss", &a.loss)
                .one("k", &a.k)
                .many("interval", &a.interval)
                .one("theta", &a.theta)
                .one("from", &a.from)
                .one("to", &a.to)
                .one("points", &a.points)
                .0;
            return oneshot::losses(&flags, &load(&a.common)?);
        }
        Command::Samplesize(a) => {
            let flags = FlagMap::default()
                .one("x", &a.x)
                .one("n", &a.n)
                .many("interval", &a.interval)
                .one("target", &a.target)
                .one("alpha", &a.alpha)
                .one("power", &a.power)
                .one("p-placebo", &a.p_placebo)
                .0;
            return oneshot::samplesize(&flags, &load(&a.common)?);
        }
        Command::Verify(a) => {
            let flags = FlagMap::default().one("family", &a.family).one("seed", &a.seed).0;
            return oneshot::verify(&flags, &load(&a.common)?);
        }
        Command::Binomial(a) => (Experiment::Study(Study::BinomialProbability), a),
        Command::Normal(a) => (Experiment::Study(Study::RestrictedNormalMean), a),
        Command::Gamma(a) => (Experiment::Study(Study::GammaParams), a),
        Command::Weibull(a) => (Experiment::Study(Study::WeibullParams), a),
        Command::Coverage(a) => (Experiment::Coverage, a),
    };
    let settings = experiment::settings(exp, &experiment_flags(args), &load(&args.common)?)?;
    experiment::run(exp, &settings, args.output.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rloss: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
