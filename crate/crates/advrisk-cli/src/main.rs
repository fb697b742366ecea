//! Command-line front end: example reproduction, bound-verification
//! campaigns, lower-bound tabulation, loss diagnostics, and ad-hoc risk
//! or dual evaluations.

mod commands;
mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use advrisk::error::Result;
use advrisk::risk::SLACK_KAPPA;
use clap::{Args, Parser, Subcommand};

use config::CampaignConfig;

#[derive(Parser)]
#[command(
    name = "advrisk",
    version,
    about = "Adversarial surrogate-risk toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce a named example end to end and write its report bundle
    Example(ExampleArgs),
    /// Sample classifiers and verify the selected bounds against them
    Verify(VerifyArgs),
    /// Tabulate the witness-sequence excess ratio against its index
    Lowerbound(LowerboundArgs),
    /// Emit the conditional-risk curves and consistency report of a loss
    Losscurves(LosscurvesArgs),
    /// Evaluate the four risks of one classifier
    Risk(RiskArgs),
    /// Evaluate dual attack objectives, optionally by brute force
    Dual(DualArgs),
}

/// Flags shared by the distribution-driven subcommands; every flag
/// overrides the config file, which overrides the defaults.
#[derive(Args)]
struct CommonArgs {
    /// Config file of key = value lines ('#' starts a comment)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named example: realizable, massart, or gaussian
    #[arg(long)]
    example: Option<String>,
    /// Distribution CSV overriding the named example
    #[arg(long)]
    distribution: Option<PathBuf>,
    /// Half-gap of the two-interval examples
    #[arg(long)]
    delta: Option<f64>,
    /// Class-0 mean of the gaussian example
    #[arg(long)]
    mu0: Option<f64>,
    /// Class-1 mean of the gaussian example
    #[arg(long)]
    mu1: Option<f64>,
    /// Standard deviation of the gaussian example
    #[arg(long)]
    sigma: Option<f64>,
    /// Perturbation radius
    #[arg(long)]
    eps: Option<f64>,
    /// Grid spacing
    #[arg(long)]
    spacing: Option<f64>,
    /// Loss spec, e.g. hinge, exponential, rho-margin=1
    #[arg(long)]
    loss: Option<String>,
    /// Posterior margin used by the linear bounds
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of sampled classifiers
    #[arg(long)]
    samples: Option<usize>,
    /// Classifier sampler: random-threshold, random-piecewise,
    /// perturbed-witness, or fn-sequence
    #[arg(long)]
    sampler: Option<String>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated bounds: massart-linear, massart-slack, concave,
    /// concave-atom, proto-r=R
    #[arg(long)]
    bounds: Option<String>,
    /// Slack multiplier on one grid cell of transported mass
    #[arg(long)]
    kappa: Option<f64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<CampaignConfig> {
        let mut cfg = match &self.config {
            Some(path) => CampaignConfig::parse(&fs::read_to_string(path)?)?,
            None => CampaignConfig::default(),
        };
        if let Some(v) = &self.example {
            cfg.example = v.clone();
        }
        if let Some(v) = &self.distribution {
            cfg.distribution = Some(v.clone());
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.mu0 {
            cfg.mu0 = v;
        }
        if let Some(v) = self.mu1 {
            cfg.mu1 = v;
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.spacing {
            cfg.spacing = v;
        }
        if let Some(v) = &self.loss {
            cfg.loss = v.clone();
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.samples {
            cfg.samples = v;
        }
        if let Some(v) = &self.sampler {
            cfg.apply("sampler", v, "flag --sampler")?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.bounds {
            cfg.apply("bounds", v, "flag --bounds")?;
        }
        if let Some(v) = self.kappa {
            cfg.kappa = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct ExampleArgs {
    /// Example name; overrides --example and the config file
    name: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct LowerboundArgs {
    /// Loss whose optimal balanced conditional risk sits at zero
    #[arg(long, default_value = "hinge")]
    loss: String,
    /// Posterior margin of the witness node
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    /// Comma-separated sequence indexes
    #[arg(long = "n-list", default_value = "10,100,1000,10000,100000,1000000")]
    n_list: String,
    /// Perturbation radius
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    /// Grid spacing
    #[arg(long, default_value_t = 0.05)]
    spacing: f64,
    /// Slack multiplier recorded in the report
    #[arg(long, default_value_t = SLACK_KAPPA)]
    kappa: f64,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct LosscurvesArgs {
    /// Loss spec to profile
    #[arg(long, default_value = "hinge")]
    loss: String,
    /// Slack multiplier recorded in the report
    #[arg(long, default_value_t = SLACK_KAPPA)]
    kappa: f64,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RiskArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Score the threshold classifier x - t
    #[arg(long)]
    threshold: Option<f64>,
    /// Score function CSV covering the padded support
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Args)]
struct DualArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also maximize both duals exhaustively over per-atom lattice moves
    #[arg(long)]
    brute: bool,
}

fn run() -> Result<u64> {
    let cli = Cli::parse();
    match cli.command {
        Command::Example(args) => {
            let mut cfg = args.common.resolve()?;
            if let Some(name) = args.name {
                cfg.example = name;
            }
            commands::cmd_example(&cfg)?;
            Ok(0)
        }
        Command::Verify(args) => commands::cmd_verify(&args.common.resolve()?),
        Command::Lowerbound(args) => {
            commands::cmd_lowerbound(
                &args.loss,
                args.alpha,
                &args.n_list,
                args.eps,
                args.spacing,
                args.kappa,
                &args.out,
            )?;
            Ok(0)
        }
        Command::Losscurves(args) => {
            commands::cmd_losscurves(&args.loss, args.kappa, &args.out)?;
            Ok(0)
        }
        Command::Risk(args) => {
            let cfg = args.common.resolve()?;
            commands::cmd_risk(&cfg, args.threshold, args.scores.as_deref())?;
            Ok(0)
        }
        Command::Dual(args) => {
            let cfg = args.common.resolve()?;
            commands::cmd_dual(&cfg, args.brute)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(0) => ExitCode::SUCCESS,
        Ok(violations) => {
            eprintln!("{violations} bound violations beyond slack");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
