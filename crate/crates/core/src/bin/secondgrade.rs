use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use secondgrade::harness::{run, RunConfig, SeedSpec, Study};

/// Default output root when neither `--out` nor `[output].dir` is given.
const OUT_ENV: &str = "SECONDGRADE_OUT";

#[derive(Parser)]
#[command(
    name = "secondgrade",
    version,
    about = "Stochastic second grade fluid simulator and Malliavin checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenbasis relation and orthonormality.
    BasisCheck(Common),
    /// Identities of the transport operator and transform-vs-direct agreement.
    OperatorCheck(Common),
    /// Energy identity residual and a-priori bound.
    Energy(Common),
    /// Spatial convergence in the cutoff.
    ConvergeGalerkin(Common),
    /// Noise-shift finite difference against the Malliavin derivative.
    MalliavinFd(Common),
    /// Same check with anticipating initial data.
    ChainRule(Common),
    /// Discrete product rule for the catalog pairs.
    ProductRule(Common),
    /// Residual of the defining equation for u = Q v.
    TheoremResidual(Common),
    /// Single run writing path, trajectory, energy and field snapshots.
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; omitted keys use the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root; the study writes into `<out>/<subcommand>/`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds as `a..b`, `a..=b`, `n` or `a,b,c`.
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated step counts (cutoffs for converge-galerkin).
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

impl Command {
    fn split(&self) -> (Study, &Common) {
        match self {
            Command::BasisCheck(c) => (Study::BasisCheck, c),
            Command::OperatorCheck(c) => (Study::OperatorCheck, c),
            Command::Energy(c) => (Study::Energy, c),
            Command::ConvergeGalerkin(c) => (Study::ConvergeGalerkin, c),
            Command::MalliavinFd(c) => (Study::MalliavinFd, c),
            Command::ChainRule(c) => (Study::ChainRule, c),
            Command::ProductRule(c) => (Study::ProductRule, c),
            Command::TheoremResidual(c) => (Study::TheoremResidual, c),
            Command::Simulate(c) => (Study::Simulate, c),
        }
    }
}

fn execute(study: Study, args: &Common) -> secondgrade::Result<bool> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &args.seeds {
        cfg.seeds = SeedSpec::parse(s)?;
    }
    if let Some(levels) = &args.levels {
        if study == Study::ConvergeGalerkin {
            cfg.discretization.cutoffs = levels.clone();
        } else {
            cfg.discretization.levels = levels.clone();
        }
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| secondgrade::Error::Config(format!("thread pool: {e}")))?;
    }
    let root = args
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let dir = root.join(study.name());

    let start = Instant::now();
    let report = run(study, &cfg)?;
    report.write(&dir, cfg.output.plots)?;
    print!("{}", report.to_text().split("\n# config").next().unwrap_or_default());
    eprintln!("wrote {} in {:.1?}", dir.display(), start.elapsed());
    for c in report.failures() {
        eprintln!("failed: {} = {:e} (required {})", c.name, c.value, c.condition);
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (study, args) = cli.command.split();
    match execute(study, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
