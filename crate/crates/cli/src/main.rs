use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use epispline_cli::{execute, CommandKind, RunConfig};

/// Nonparametric infection-rate estimation for stochastic SIR data.
///
/// Settings come from flags, then an optional `--config` file, then
/// built-in defaults. EPISPLINE_WORKERS sets the default worker count.
#[derive(Parser)]
#[command(name = "epispline", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a daily-observed epidemic from a built-in scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Moving-average rate estimates and the knot-placement feature curve.
    Rates {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Select knots by forward BIC and fit the spline infection rate.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Fit, then build parametric bootstrap confidence bands.
    Bootstrap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        boot: BootArgs,
    },
    /// Repeated simulate-fit-bootstrap study with IMSE and coverage tables.
    Simstudy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        boot: BootArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        study: StudyArgs,
    },
}

type Pairs = Vec<(&'static str, String)>;

fn push<T: ToString>(pairs: &mut Pairs, key: &'static str, value: &Option<T>) {
    if let Some(v) = value {
        pairs.push((key, v.to_string()));
    }
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<String>,
    /// Data CSV: `time,S,I,N` or `date,cumulative_cases,active_cases`.
    #[arg(long)]
    data: Option<String>,
    /// Population size N.
    #[arg(long)]
    population: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: EPISPLINE_WORKERS, else all cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn pairs(&self, p: &mut Pairs) {
        push(p, "output", &self.output);
        push(p, "data", &self.data);
        push(p, "population", &self.population);
        push(p, "seed", &self.seed);
        push(p, "workers", &self.workers);
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Spline degree.
    #[arg(long)]
    degree: Option<usize>,
    /// Observations per moving-average window.
    #[arg(long)]
    window: Option<usize>,
    /// Likelihood family: tau-leap or diffusion.
    #[arg(long)]
    family: Option<String>,
    /// Sub-steps per observation interval (1 = closed form).
    #[arg(long)]
    steps: Option<usize>,
    /// Monte-Carlo paths per transition when steps > 1.
    #[arg(long)]
    mc_paths: Option<usize>,
    /// Largest number of interior knots tried.
    #[arg(long)]
    max_knots: Option<usize>,
}

impl ModelArgs {
    fn pairs(&self, p: &mut Pairs) {
        push(p, "degree", &self.degree);
        push(p, "window", &self.window);
        push(p, "family", &self.family);
        push(p, "steps", &self.steps);
        push(p, "mc_paths", &self.mc_paths);
        push(p, "max_knots", &self.max_knots);
    }
}

#[derive(Args)]
struct BootArgs {
    /// Bootstrap replicates.
    #[arg(long)]
    bootstrap: Option<usize>,
    /// One minus the confidence level.
    #[arg(long)]
    alpha: Option<f64>,
    /// pivotal, normal or percentile.
    #[arg(long)]
    interval: Option<String>,
    /// Apply the bootstrap bias correction (true/false).
    #[arg(long)]
    bias_corrected: Option<bool>,
    /// none, weighted, sample or minmax.
    #[arg(long)]
    smoothing: Option<String>,
    /// exact or tau-leap (default: tau-leap for bootstrap, exact for simstudy).
    #[arg(long)]
    bootstrap_simulator: Option<String>,
    /// Tau-leap steps per observation interval for bootstrap data.
    #[arg(long)]
    substeps: Option<usize>,
}

impl BootArgs {
    fn pairs(&self, p: &mut Pairs) {
        push(p, "bootstrap", &self.bootstrap);
        push(p, "alpha", &self.alpha);
        push(p, "interval", &self.interval);
        push(p, "bias_corrected", &self.bias_corrected);
        push(p, "smoothing", &self.smoothing);
        push(p, "bootstrap_simulator", &self.bootstrap_simulator);
        push(p, "substeps", &self.substeps);
    }
}

#[derive(Args)]
struct SimArgs {
    /// Built-in infection-rate scenario, 1 to 5.
    #[arg(long)]
    scenario: Option<u8>,
    /// Recovery rate.
    #[arg(long)]
    gamma: Option<f64>,
    /// Initially infected fraction of the population.
    #[arg(long)]
    initial_infected: Option<f64>,
    /// Last observation day.
    #[arg(long)]
    horizon: Option<f64>,
    /// exact or tau-leap.
    #[arg(long)]
    simulator: Option<String>,
}

impl SimArgs {
    fn pairs(&self, p: &mut Pairs) {
        push(p, "scenario", &self.scenario);
        push(p, "gamma", &self.gamma);
        push(p, "initial_infected", &self.initial_infected);
        push(p, "horizon", &self.horizon);
        push(p, "simulator", &self.simulator);
    }
}

#[derive(Args)]
struct StudyArgs {
    /// Simulated data sets.
    #[arg(long)]
    replicates: Option<usize>,
    /// Comma-separated spline degrees.
    #[arg(long)]
    degrees: Option<String>,
    /// Comma-separated likelihood families.
    #[arg(long)]
    families: Option<String>,
}

impl StudyArgs {
    fn pairs(&self, p: &mut Pairs) {
        push(p, "replicates", &self.replicates);
        push(p, "degrees", &self.degrees);
        push(p, "families", &self.families);
    }
}

fn configure(cli: &Cli) -> Result<(CommandKind, RunConfig)> {
    let mut pairs = Pairs::new();
    let (kind, common) = match &cli.command {
        Command::Simulate { common, sim } => {
            sim.pairs(&mut pairs);
            (CommandKind::Simulate, common)
        }
        Command::Rates { common, model } => {
            model.pairs(&mut pairs);
            (CommandKind::Rates, common)
        }
        Command::Fit { common, model } => {
            model.pairs(&mut pairs);
            (CommandKind::Fit, common)
        }
        Command::Bootstrap { common, model, boot } => {
            model.pairs(&mut pairs);
            boot.pairs(&mut pairs);
            (CommandKind::Bootstrap, common)
        }
        Command::Simstudy {
            common,
            model,
            boot,
            sim,
            study,
        } => {
            model.pairs(&mut pairs);
            boot.pairs(&mut pairs);
            sim.pairs(&mut pairs);
            study.pairs(&mut pairs);
            (CommandKind::Simstudy, common)
        }
    };
    common.pairs(&mut pairs);
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    for (k, v) in pairs {
        cfg.set(k, &v).with_context(|| format!("--{}", k.replace('_', "-")))?;
    }
    if cfg.workers.is_none() {
        if let Ok(v) = std::env::var("EPISPLINE_WORKERS") {
            cfg.set("workers", &v).context("EPISPLINE_WORKERS")?;
        }
    }
    Ok((kind, cfg))
}

fn run(cli: &Cli) -> Result<()> {
    let (kind, cfg) = configure(cli)?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting worker pool")?;
    }
    execute(kind, &cfg)?;
    log::info!("{} finished; outputs in {}", kind.name(), cfg.output.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
