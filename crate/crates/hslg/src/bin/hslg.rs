//! Reproducible experiment runner. `hslg verify <experiment>` runs one
//! registered check with its default (acceptance) parameters; `hslg run
//! --config FILE` replays a saved flat key=value configuration. Flags
//! and `HSLG_*` environment variables override individual keys. Exit
//! status: 0 all checks pass, 1 a check failed, 3 inconclusive, 2 usage
//! or I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hslg::experiments::{self, ExperimentConfig, EXPERIMENTS};
use hslg::stats::Verdict;

#[derive(Parser)]
#[command(name = "hslg", version, about = "Half-space log-gamma polymer verification lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a registered experiment by name.
    Verify {
        /// Experiment name (see `hslg list`).
        experiment: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run an experiment described by a flat key=value config file.
    Run {
        /// Path to the configuration file.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// List the registered experiments.
    List,
    /// Print the resolved configuration of an experiment and exit.
    ShowConfig {
        experiment: String,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Per-key overrides mirroring the configuration fields.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    envs: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n_scale: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    a_left: Option<f64>,
    /// Comma-separated starting heights, top curve first.
    #[arg(long)]
    starts: Option<String>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    limit_grid: Option<usize>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    proposals: Option<usize>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Comma-separated ladder of diffusive scales.
    #[arg(long)]
    l_list: Option<String>,
    #[arg(long)]
    ks_final: Option<f64>,
    #[arg(long)]
    window_left: Option<i64>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    max_rejects: Option<u64>,
    #[arg(long)]
    gap_threshold: Option<f64>,
    #[arg(long)]
    ess_floor: Option<f64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> hslg::Result<()> {
        macro_rules! put {
            ($field:ident, $key:literal) => {
                if let Some(v) = &self.$field {
                    cfg.set($key, &v.to_string())?;
                }
            };
        }
        put!(seed, "seed");
        put!(workers, "workers");
        if let Some(v) = &self.out {
            cfg.set("out", &v.display().to_string())?;
        }
        put!(envs, "envs");
        put!(n, "n");
        put!(m, "m");
        put!(n_scale, "n_scale");
        put!(t, "t");
        put!(theta, "theta");
        put!(alpha, "alpha");
        put!(mu, "mu");
        put!(a_left, "a_left");
        if let Some(v) = &self.starts {
            cfg.set("starts", v)?;
        }
        put!(grid, "grid");
        put!(limit_grid, "limit_grid");
        put!(replicas, "replicas");
        put!(samples, "samples");
        put!(proposals, "proposals");
        put!(steps, "steps");
        put!(level, "level");
        put!(tol, "tol");
        if let Some(v) = &self.l_list {
            cfg.set("l_list", v)?;
        }
        put!(ks_final, "ks_final");
        put!(window_left, "window_left");
        put!(thin, "thin");
        put!(burn_in, "burn_in");
        put!(max_rejects, "max_rejects");
        put!(gap_threshold, "gap_threshold");
        put!(ess_floor, "ess_floor");
        Ok(())
    }
}

fn resolve(base: hslg::Result<ExperimentConfig>, overrides: &Overrides) -> hslg::Result<ExperimentConfig> {
    let mut cfg = base?;
    cfg.apply_env_overrides()?;
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn execute(cfg: ExperimentConfig) -> ExitCode {
    println!("experiment: {}", cfg.experiment);
    println!("output dir: {}", cfg.out.display());
    match experiments::run(&cfg) {
        Ok(report) => {
            for c in &report.checks {
                let tag = match c.verdict {
                    Verdict::Pass => "PASS",
                    Verdict::Fail => "FAIL",
                    Verdict::Inconclusive => "INCONCLUSIVE",
                };
                println!(
                    "{tag} {} (statistic {:.6e}, threshold {:.6e})",
                    c.check, c.statistic, c.threshold
                );
            }
            println!("verdict: {:?}", report.verdict);
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for name in EXPERIMENTS {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Verify {
            experiment,
            overrides,
        } => match resolve(ExperimentConfig::for_experiment(&experiment), &overrides) {
            Ok(cfg) => execute(cfg),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run { config, overrides } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read config {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            match resolve(ExperimentConfig::from_kv(&text), &overrides) {
                Ok(cfg) => execute(cfg),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::ShowConfig {
            experiment,
            overrides,
        } => match resolve(ExperimentConfig::for_experiment(&experiment), &overrides) {
            Ok(cfg) => {
                print!("{}", cfg.to_kv());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
