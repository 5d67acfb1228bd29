//! Reproducible front end for the Hardy-reduction toolkit: parse norm and
//! operator specs, run experiments, and emit machine-readable artifacts.
//!
//! Exit codes: 0 success; 2 usage or admissibility errors, with a one-line
//! diagnostic naming the violated rule; 3 when `--strict` is set and a run
//! completed but flagged numerical divergence.

mod commands;
mod config;
mod report;

use clap::{Args, Parser, Subcommand};
use commands::Outcome;
use config::FileConfig;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "hardy-reduce", version, about)]
struct Cli {
    /// Config file with key=value lines; flags win on conflict.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Exit with code 3 when a completed run flags numerical divergence.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Non-increasing rearrangement of a step-function CSV.
    Rearrange(RearrangeArgs),
    /// Evaluate a norm spec on a step-function CSV.
    Norm(NormArgs),
    /// Apply a Hardy-type operator and emit the sampled image.
    Hardy(HardyArgs),
    /// Sample K-functional curves for a compatible couple.
    Kfunctional(KFunctionalArgs),
    /// Multi-start search for the best constant of an operator between norms.
    BestConstant(BestConstantArgs),
    /// Estimate the growth norm of a measure and report the search witness.
    Frostman(FrostmanArgs),
    /// Print the optimal trace target for Lebesgue domains.
    Target(TargetArgs),
    /// Run the end-to-end embedding checks and write a JSON report.
    VerifyEmbedding(VerifyEmbeddingArgs),
}

#[derive(Args)]
pub struct RearrangeArgs {
    /// Input step-function CSV (header `t_right,value`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
pub struct NormArgs {
    /// Norm spec, e.g. `lorentz:p=4,q=2` or `assoc(lebesgue:p=2)`.
    #[arg(long)]
    spec: Option<String>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Write a JSON report here instead of printing the bare value.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct HardyArgs {
    /// Operator id: T, Tdual, S1, S2, P, product, H:R=0.5, kernel, dilate:s=0.5.
    #[arg(long)]
    op: Option<String>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Sampling grid size for the image.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
pub struct KFunctionalArgs {
    /// Left endpoint norm spec of the couple.
    #[arg(long)]
    left: Option<String>,
    /// Right endpoint norm spec of the couple.
    #[arg(long)]
    right: Option<String>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Dyadic depth of the truncation search.
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long = "t-lo")]
    t_lo: Option<f64>,
    #[arg(long = "t-hi")]
    t_hi: Option<f64>,
    #[arg(long = "per-decade")]
    per_decade: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
pub struct BestConstantArgs {
    #[arg(long)]
    op: Option<String>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    d: Option<f64>,
    /// Domain norm spec.
    #[arg(long)]
    domain: Option<String>,
    /// Target norm spec.
    #[arg(long)]
    target: Option<String>,
    /// Grid size (power of two) for a single estimate.
    #[arg(long)]
    grid: Option<usize>,
    /// Comma-separated increasing grids for a refinement study.
    #[arg(long)]
    grids: Option<String>,
    /// Ascent budget per restart.
    #[arg(long)]
    budget: Option<usize>,
    /// RNG seed (required: the search is stochastic).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct FrostmanArgs {
    /// Measure builder, e.g. `mu1:d=1`, `hyperplane:d=1`, `lebesgue`,
    /// `cantor:depth=8`.
    #[arg(long)]
    measure: Option<String>,
    /// Point-cloud CSV (`x1,...,xn,weight`) as an alternative to --measure.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Ambient dimension for builder measures.
    #[arg(long)]
    n: Option<u32>,
    /// Growth exponent to test.
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    centers: Option<usize>,
    #[arg(long)]
    radii: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TargetArgs {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    d: Option<f64>,
    /// Lebesgue domain exponent.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyEmbeddingArgs {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    d: Option<f64>,
    /// RNG seed for the extremal corpus (required).
    #[arg(long)]
    seed: Option<u64>,
    /// Supporting ball radius for the radial families.
    #[arg(long)]
    radius: Option<f64>,
    /// Sampling grid for the family profiles.
    #[arg(long)]
    grid: Option<usize>,
    /// Number of random corpus members.
    #[arg(long)]
    corpus: Option<usize>,
    /// Lebesgue exponent for the classical prediction (fast regime).
    #[arg(long)]
    p: Option<f64>,
    /// Domain norm spec override.
    #[arg(long)]
    x: Option<String>,
    /// Target norm spec override.
    #[arg(long)]
    y: Option<String>,
    /// Measure builder for the radial check.
    #[arg(long)]
    measure: Option<String>,
    /// Candidate trace norm for the slow-regime diagnostic.
    #[arg(long)]
    z: Option<String>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Enrichment levels for the slow-regime diagnostic.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_thread_pool() {
    let Ok(raw) = std::env::var("HARDY_REDUCE_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(0) | Err(_) => {}
        Ok(threads) => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Rearrange(args) => commands::rearrange(args, &cfg),
        Command::Norm(args) => commands::norm(args, &cfg),
        Command::Hardy(args) => commands::hardy(args, &cfg),
        Command::Kfunctional(args) => commands::kfunctional(args, &cfg),
        Command::BestConstant(args) => commands::best_constant_cmd(args, &cfg),
        Command::Frostman(args) => commands::frostman(args, &cfg),
        Command::Target(args) => commands::target(args, &cfg),
        Command::VerifyEmbedding(args) => commands::verify_embedding(args, &cfg),
    }
}

fn main() {
    init_thread_pool();
    let cli = Cli::parse();
    let strict = cli.strict;
    match run(cli) {
        Ok(Outcome::Clean) => {}
        Ok(Outcome::Divergent(note)) => {
            eprintln!("divergence: {note}");
            if strict {
                std::process::exit(3);
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
