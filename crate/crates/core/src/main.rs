use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lsm_surrogate::cli::{self, RunConfig, RunOptions};

#[derive(Parser)]
#[command(version, about = "Surrogate-accelerated calibration of a toy land surface model")]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Run configuration file (key=value); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for ensemble runs. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Calibrate on the first 3 years and evaluate on the remaining ones.
    #[arg(long, global = true)]
    split: bool,

    /// Also write the timing breakdown to this file (it always goes to stderr).
    #[arg(long, global = true)]
    timing: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Synthetic twin experiment: every stage plus a summary report.
    Twin,
    /// Truth run, observations and the scored LHS ensemble.
    Ensemble,
    /// Fit the surrogate to the ensemble.
    Fit,
    /// Sample the posterior on the surrogate.
    Sample,
    /// Posterior histograms, sensitivity and correlations.
    Diagnose,
    /// Prior versus posterior ensemble skill.
    Evaluate,
}

fn run(args: &Args) -> lsm_surrogate::Result<()> {
    let mut cfg = match &args.config {
        Some(p) => cli::parse_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    let opts = RunOptions {
        workers: args.workers.max(1),
        split: args.split,
    };
    match args.command {
        Command::Twin => {
            let report = cli::cmd_twin(&cfg, &opts)?;
            print!("{}", report.summary());
            let timing = report.timing.report(cfg.iterations);
            eprint!("{timing}");
            if let Some(p) = &args.timing {
                std::fs::write(p, timing).map_err(|e| lsm_surrogate::Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
            }
        }
        Command::Ensemble => {
            let d = cli::cmd_ensemble(&cfg, &opts)?;
            let (lo, hi) = d.rmse_range();
            println!("members={} failed={} rmse_range={lo:.4}..{hi:.4}", d.len(), d.failures.len());
        }
        Command::Fit => {
            let gp = cli::cmd_fit(&cfg)?;
            println!("length_scales={:.4?} noise_variance={:.3e}", gp.hyper.length_scales, gp.hyper.noise_variance);
        }
        Command::Sample => {
            let c = cli::cmd_sample(&cfg)?;
            println!("iterations={} acceptance_rate={:.4}", c.states.len(), c.acceptance_rate());
        }
        Command::Diagnose => {
            let d = cli::cmd_diagnose(&cfg, &opts)?;
            for (k, m) in d.marginals.iter().enumerate() {
                println!("theta{}: median={:.4} mode={:.4} sensitivity={:.4}", k + 1, m.median, m.mode, d.sensitivity[k]);
            }
        }
        Command::Evaluate => {
            let e = cli::cmd_evaluate(&cfg, &opts)?;
            println!(
                "tb_rmse_median prior={:.4} posterior={:.4}",
                e.prior.median_tb_rmse(),
                e.posterior.median_tb_rmse()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
