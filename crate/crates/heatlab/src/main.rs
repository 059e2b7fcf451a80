use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use heatlab::{load_config, run_experiment, write_bundle, Kind, Overrides};

/// Numerical experiments on the supercritical semilinear heat equation.
#[derive(Debug, Parser)]
#[command(name = "heatlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the radial problem and check positivity and sign symmetry.
    Solve(Common),
    /// Estimate a Morrey norm of the initial profile.
    Morrey(Common),
    /// Heat-semigroup smoothing and contraction in Morrey scales.
    Smoothing(Common),
    /// Similarity-variable energy, mass and the mass identity.
    Energy(Common),
    /// Picard iteration of the Duhamel formula.
    Picard(Common),
    /// Bisection for the global/blowup threshold along a ray.
    Threshold(Common),
    /// Morrey-norm continuous dependence on the initial data.
    Dependence(Common),
    /// Check the decay and integrability conditions on the initial data.
    Hypotheses(Common),
}

impl Command {
    fn split(self) -> (Kind, Common) {
        match self {
            Command::Solve(c) => (Kind::Solve, c),
            Command::Morrey(c) => (Kind::Morrey, c),
            Command::Smoothing(c) => (Kind::Smoothing, c),
            Command::Energy(c) => (Kind::Energy, c),
            Command::Picard(c) => (Kind::Picard, c),
            Command::Threshold(c) => (Kind::Threshold, c),
            Command::Dependence(c) => (Kind::Dependence, c),
            Command::Hypotheses(c) => (Kind::Hypotheses, c),
        }
    }
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output`, default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    rmax: Option<f64>,
    /// Number of grid intervals M.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    tend: Option<f64>,
}

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_PIPELINE: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_PIPELINE)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let (kind, c) = cli.command.split();
    if let Some(jobs) = c.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    let text = std::fs::read_to_string(&c.config).with_context(|| format!("reading {}", c.config.display()))?;
    let overrides = Overrides {
        n: c.n,
        p: c.p,
        r_max: c.rmax,
        nodes: c.nodes,
        t_end: c.tend,
        output: c.out,
    };
    let config = match load_config(&text, Some(kind), &overrides) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_CONFIG));
        }
    };
    let start = Instant::now();
    let bundle = run_experiment(&config)?;
    let dir = config.output.clone().unwrap_or_else(|| PathBuf::from("out"));
    let manifest = write_bundle(
        &bundle,
        &dir,
        kind.name(),
        &config.hash(),
        start.elapsed().as_secs_f64(),
    )
    .with_context(|| format!("writing artifacts to {}", dir.display()))?;
    for inv in &bundle.invariants {
        println!(
            "{} {} (measured {}, limit {})",
            if inv.pass { "PASS" } else { "FAIL" },
            inv.name,
            inv.measured,
            inv.limit
        );
    }
    println!("manifest: {}", manifest.display());
    Ok(if bundle.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INVARIANT)
    })
}
