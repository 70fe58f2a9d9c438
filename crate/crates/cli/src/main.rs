use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod artifacts;
mod commands;
mod config;
mod verify;

use config::ExperimentConfig;

/// Experiments on the posterior-sampling lower-bound instance.
#[derive(Debug, Parser)]
#[command(name = "dpslab", version)]
struct Cli {
    /// TOML config (or .json); every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent trials.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Unconditional samples, direct or by reverse diffusion.
    Sample {
        #[arg(long, default_value = "direct", value_parser = ["direct", "diffusion"])]
        method: String,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Posterior samples for a given or freshly measured y.
    Posterior {
        #[arg(long, value_parser = ["brute-force", "rejection", "heuristic"])]
        sampler: Option<String>,
        /// File with one comma-separated row of measured values.
        #[arg(long)]
        y_file: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        max_rounds: Option<u64>,
    },
    /// Inversion experiment; writes an InversionReport.
    Invert {
        /// Gate-list circuit file.
        #[arg(long)]
        candidate: Option<PathBuf>,
        #[arg(long, value_parser = ["brute-force", "rejection", "heuristic"])]
        sampler: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Build piecewise score approximations, compile them, and tabulate errors.
    ApproxScore {
        #[arg(long, value_parser = ["mixture", "gaussian", "discretized"])]
        family: Option<String>,
        #[arg(long = "sigma")]
        sigmas: Vec<f64>,
        #[arg(long = "kappa")]
        kappas: Vec<f64>,
    },
    /// Compile a circuit to a ReLU network; optionally assemble a score-network bank.
    CompileCircuit {
        /// Gate-list circuit file; defaults to the configured candidate.
        #[arg(long)]
        circuit: Option<PathBuf>,
        /// Also assemble score networks for the instance at approx.sigmas.
        #[arg(long)]
        score_bank: bool,
    },
    /// Rejection-sampling acceptance table over (beta, m).
    BenchAcceptance {
        /// Add the sampler comparison on inversion.
        #[arg(long)]
        hardness: bool,
    },
    /// Two-component planar mixture observed through its second coordinate.
    Demo2d {
        #[arg(long)]
        y: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the invariant suite; with --artifacts also check a finished run.
    Verify {
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    let out = cli.out;
    match cli.cmd {
        Command::Sample { method, n } => {
            if let Some(n) = n {
                cfg.samples = n;
            }
            cfg.validate()?;
            commands::sample(&cfg, &out, &method)?;
        }
        Command::Posterior {
            sampler,
            y_file,
            n,
            max_rounds,
        } => {
            if let Some(s) = sampler {
                cfg.sampler.kind = s;
            }
            if let Some(n) = n {
                cfg.samples = n;
            }
            if let Some(m) = max_rounds {
                cfg.sampler.max_rounds = m;
            }
            cfg.validate()?;
            commands::posterior(&cfg, &out, y_file.as_deref())?;
        }
        Command::Invert {
            candidate,
            sampler,
            trials,
        } => {
            if let Some(path) = candidate {
                cfg.candidate.kind = "file".into();
                cfg.candidate.path = Some(path);
            }
            if let Some(s) = sampler {
                cfg.sampler.kind = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.validate()?;
            commands::invert(&cfg, &out)?;
        }
        Command::ApproxScore { family, sigmas, kappas } => {
            if let Some(f) = family {
                cfg.approx.family = f;
            }
            if !sigmas.is_empty() {
                cfg.approx.sigmas = sigmas;
            }
            if !kappas.is_empty() {
                cfg.approx.kappas = kappas;
            }
            cfg.validate()?;
            commands::approx_score(&cfg, &out)?;
        }
        Command::CompileCircuit { circuit, score_bank } => {
            if let Some(path) = circuit {
                cfg.candidate.kind = "file".into();
                cfg.candidate.path = Some(path);
            }
            cfg.validate()?;
            commands::compile_circuit(&cfg, &out, score_bank)?;
        }
        Command::BenchAcceptance { hardness } => {
            cfg.bench.hardness |= hardness;
            cfg.validate()?;
            commands::bench_acceptance(&cfg, &out)?;
        }
        Command::Demo2d { y, n } => {
            if let Some(y) = y {
                cfg.demo2d.y = y;
            }
            if let Some(n) = n {
                cfg.samples = n;
            }
            cfg.validate()?;
            commands::demo2d(&cfg, &out)?;
        }
        Command::Verify { artifacts } => {
            cfg.validate()?;
            return verify::verify(&cfg, &out, artifacts.as_deref());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
