//! `pnpgl`: experiment drivers for plug-and-play denoisers as graph-Laplacian
//! priors.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use pnpgl::ExperimentKind;

use commands::{execute, thread_cap, Failure, Task, THREADS_VAR};
use config::Settings;

#[derive(Parser)]
#[command(
    name = "pnpgl",
    version,
    about = "PnP denoisers as graph-Laplacian priors",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Base seed for signals, noise and masks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Signal length (1D) or image side (inpainting).
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Settings file with `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Kernel bandwidth.
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Patch side length (odd).
    #[arg(long, global = true)]
    patch: Option<usize>,
    /// Regularization weight.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Measurement noise level.
    #[arg(long = "sigma-eta", global = true)]
    sigma_eta: Option<f64>,
    /// ADMM penalty.
    #[arg(long, global = true)]
    rho: Option<f64>,
    /// Use a PGM image as the clean signal.
    #[arg(long, global = true, value_name = "PGM")]
    image: Option<PathBuf>,
    /// Override any setting, e.g. `--set rates=0.8,0.4`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// MSE of both estimators over a regularization grid.
    RhoSweep,
    /// Spectral coefficients of the clean and noisy signal.
    Projection,
    /// Per-eigenvalue gains of both estimators.
    Eigvals,
    /// Per-mode bias and variance.
    BiasVar,
    /// Sensitivity to filters built from perturbed pilots.
    Prefilter,
    /// Multi-prior consensus equilibrium against individual priors.
    MultiPrior,
    /// Inpainting at several sampling rates.
    Inpaint,
    /// Run PnP ADMM and compare with the closed-form equilibrium.
    AdmmRun {
        /// Sampling rate; 1 means pure denoising.
        #[arg(long)]
        rate: Option<f64>,
        /// Stopping tolerance on the relative iterate change.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long = "max-iters")]
        max_iters: Option<usize>,
    },
    /// Build a filter and write its entries and spectrum.
    BuildFilter {
        /// `oracle` or `prefiltered`.
        #[arg(long)]
        provenance: Option<String>,
    },
}

impl Command {
    fn task(&self) -> Task {
        match self {
            Command::RhoSweep => Task::Experiment(ExperimentKind::RhoSweep),
            Command::Projection => Task::Experiment(ExperimentKind::Projection),
            Command::Eigvals => Task::Experiment(ExperimentKind::Eigvals),
            Command::BiasVar => Task::Experiment(ExperimentKind::BiasVar),
            Command::Prefilter => Task::Experiment(ExperimentKind::Prefilter),
            Command::MultiPrior => Task::Experiment(ExperimentKind::MultiPrior),
            Command::Inpaint => Task::Experiment(ExperimentKind::Inpaint),
            Command::AdmmRun { .. } => Task::AdmmRun,
            Command::BuildFilter { .. } => Task::BuildFilter,
        }
    }
}

fn settings(cli: &Cli) -> pnpgl::Result<(Settings, String)> {
    let c = &cli.common;
    let (mut s, source) = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                pnpgl::Error::InvalidConfig(format!("cannot read {}: {e}", path.display()))
            })?;
            (
                Settings::parse(&text)?,
                format!("config:{}", path.display()),
            )
        }
        None => (Settings::default(), "flags".to_string()),
    };
    for pair in &c.set {
        s.set_pair(pair)?;
    }
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    s.set_opt("seed", c.seed)?;
    s.set_opt("n", c.n)?;
    s.set_opt("out", path(&c.out))?;
    s.set_opt("h", c.h)?;
    s.set_opt("patch", c.patch)?;
    s.set_opt("alpha", c.alpha)?;
    s.set_opt("sigma_eta", c.sigma_eta)?;
    s.set_opt("rho", c.rho)?;
    s.set_opt("image", path(&c.image))?;
    match &cli.command {
        Command::AdmmRun {
            rate,
            tol,
            max_iters,
        } => {
            s.set_opt("rate", *rate)?;
            s.set_opt("tol", *tol)?;
            s.set_opt("max_iters", *max_iters)?;
        }
        Command::BuildFilter { provenance } => s.set_opt("provenance", provenance.clone())?,
        _ => {}
    }
    Ok((s, source))
}

fn fail(f: &Failure) -> ExitCode {
    if f.usage {
        eprintln!("error: {}", f.message);
        eprintln!("run 'pnpgl --help' for usage");
        ExitCode::from(1)
    } else {
        eprintln!("error: {}: {}", f.invariant, f.message);
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let run = || -> Result<commands::Report, Failure> {
        let (s, source) = settings(&cli)?;
        let threads = thread_cap(std::env::var(THREADS_VAR).ok())?;
        commands::check_image(&s)?;
        execute(cli.command.task(), &s, &source, threads)
    };
    match run() {
        Ok(report) => {
            for line in report.lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(f) => fail(&f),
    }
}
