use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use cmsr::metrics::format_db;
use cmsr_cli::{cmd_eval, cmd_sr, cmd_warp_debug, default_eval_path, eval_record, resolve_config, write_eval, Inputs, Overrides};

/// Super-resolve a low-resolution modality image with a high-resolution
/// RGB guide of the same scene, training on the pair alone.
#[derive(Parser)]
#[command(name = "cmsr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PairArgs {
    /// Low-resolution single-channel image.
    #[arg(long)]
    modality: PathBuf,
    /// RGB guide, at least `scale` times larger.
    #[arg(long)]
    guide: PathBuf,
    /// Blur kernel: plain-text rows of floats, replacing bicubic downsampling.
    #[arg(long)]
    kernel: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value file; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scale: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Probability of an up-scale training step.
    #[arg(long)]
    p_alt: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> Result<cmsr::config::RunConfig> {
        let flags = Overrides {
            scale: self.scale,
            seed: self.seed,
            p_alt: self.p_alt,
            max_iters: self.max_iters,
        };
        resolve_config(self.config.as_deref(), &flags)
    }
}

impl PairArgs {
    fn inputs(&self) -> Inputs {
        Inputs {
            modality: self.modality.clone(),
            guide: self.guide.clone(),
            kernel: self.kernel.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train on the pair and write the super-resolved modality.
    Sr {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-stage outputs, warped guides, overlays, residuals and checkpoints.
        #[arg(long)]
        debug: bool,
    },
    /// PSNR and SSIM of an output against ground truth (files or directories).
    Eval {
        sr: PathBuf,
        gt: PathBuf,
        /// Report path; defaults to `<sr>_eval.txt` or `<dir>/eval.txt`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train, then write the deformed guide and before/after overlays.
    WarpDebug {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sr { pair, run, out, debug } => {
            let cfg = run.resolve()?;
            for p in cmd_sr(&pair.inputs(), &out, &cfg, debug)?.0 {
                println!("wrote {}", p.display());
            }
        }
        Command::Eval { sr, gt, out } => {
            let (rows, mean) = cmd_eval(&sr, &gt)?;
            println!("{:<32} {:>10} {:>8}", "image", "psnr", "ssim");
            for row in &rows {
                println!("{:<32} {:>10} {:>8.4}", row.name, format_db(row.report.psnr), row.report.ssim);
            }
            if rows.len() > 1 {
                println!("{:<32} {:>10} {:>8.4}", "mean", format_db(mean.psnr), mean.ssim);
            }
            let path = out.unwrap_or_else(|| default_eval_path(&sr));
            write_eval(&eval_record(&sr, &gt, &rows, &mean), &path)?;
        }
        Command::WarpDebug { pair, run, out } => {
            let cfg = run.resolve()?;
            for p in cmd_warp_debug(&pair.inputs(), &out, &cfg)?.0 {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cmsr: {e:#}");
            ExitCode::FAILURE
        }
    }
}
