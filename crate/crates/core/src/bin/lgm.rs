use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lgm::commands::{cmd_batch, cmd_eval, cmd_fit, cmd_synth, default_out_dir};
use lgm::evaluation::Bins;
use lgm::report::PipelineOptions;
use lgm::{EmConfig, LgmParams};

#[derive(Parser)]
#[command(
    name = "lgm",
    version,
    about = "Fit Laplacian-Gaussian mixtures to signal amplitudes and compare them with single-component models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FitFlags {
    /// Histogram bins for the KL divergence: `auto` or a count
    #[arg(long, default_value = "auto")]
    bins: Bins,
    /// EM restart chains
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    /// Convergence threshold on the normalized squared parameter change
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip one header line in every input file
    #[arg(long)]
    header: bool,
}

impl FitFlags {
    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            bins: self.bins,
            em: EmConfig {
                tol: self.tol,
                max_iter: self.max_iter,
                n_restarts: self.restarts,
                ..EmConfig::default()
            },
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit and evaluate all three models on one trial file
    Fit {
        input: PathBuf,
        #[command(flatten)]
        flags: FitFlags,
        /// Also write pdf curves and Q-Q tables
        #[arg(long)]
        curves: bool,
        /// Write report.json (and curves) here instead of printing the report
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run every trial in a manifest and build heatmaps
    Batch {
        manifest: PathBuf,
        #[command(flatten)]
        flags: FitFlags,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write synthetic mixture samples as a one-column file
    Synth {
        #[arg(long)]
        lambda1: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        mu1: f64,
        #[arg(long)]
        sigma1: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        mu2: f64,
        #[arg(long)]
        sigma2_sq: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate given mixture parameters on one trial file without refitting
    Eval {
        input: PathBuf,
        /// JSON with LGM parameters, or a report from `fit`
        params: PathBuf,
        #[arg(long, default_value = "auto")]
        bins: Bins,
        #[arg(long)]
        header: bool,
        #[arg(long)]
        curves: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> lgm::Result<()> {
    match cli.command {
        Command::Fit {
            input,
            flags,
            curves,
            out_dir,
        } => {
            let dir = out_dir.clone().or_else(|| curves.then(default_out_dir));
            let json = cmd_fit(&input, flags.header, &flags.options(), dir.as_deref(), curves)?;
            if out_dir.is_none() {
                print!("{json}");
            }
        }
        Command::Batch {
            manifest,
            flags,
            out_dir,
        } => {
            let outcome = cmd_batch(&manifest, flags.header, &flags.options(), &out_dir)?;
            for f in &outcome.failures {
                eprintln!(
                    "skipped subject={} activity={} trial={}: {}",
                    f.entry.subject, f.entry.activity, f.entry.trial, f.message
                );
            }
            eprintln!(
                "{} trials evaluated, {} failed; results in {}",
                outcome.reports.len(),
                outcome.failures.len(),
                out_dir.display()
            );
        }
        Command::Synth {
            lambda1,
            mu1,
            sigma1,
            mu2,
            sigma2_sq,
            n,
            seed,
            out,
        } => {
            let params = LgmParams::from_parts(lambda1, mu1, sigma1, mu2, sigma2_sq)?;
            cmd_synth(&params, n, seed, &out)?;
            println!("{}", serde_json::to_string(&params).expect("params serialize"));
        }
        Command::Eval {
            input,
            params,
            bins,
            header,
            curves,
            out_dir,
        } => {
            let dir = out_dir.clone().or_else(|| curves.then(default_out_dir));
            let json = cmd_eval(&input, &params, header, bins, dir.as_deref(), curves)?;
            if out_dir.is_none() {
                print!("{json}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
