use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tgan_cli::{
    cmd_dataset, cmd_eval, cmd_sample, cmd_train, default_dataset, exit_code, latest_checkpoint, Distances,
    RunConfig, GENERATED_FILE,
};
use tgan_core::{Error, Result};

/// Transformer-based conditional GAN for multipath channel generation.
#[derive(Parser)]
#[command(name = "tgan", version)]
struct Cli {
    /// `key = value` run configuration; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `paths.out_dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with its 80/20 split and scaler.
    Dataset,
    /// Train the generator and critic on a dataset file.
    Train {
        /// Dataset file (default: `paths.dataset`, then `<out-dir>/dataset.txt`).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Checkpoint to continue from.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Draw channels from a trained generator.
    Sample {
        /// Checkpoint (default: `paths.checkpoint`, then the newest in the out dir).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        count: usize,
        /// Fixed link distance in meters.
        #[arg(long, conflicts_with = "distance_range")]
        distance: Option<f64>,
        /// Uniform distances between MIN and MAX meters (default: the trained range).
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
        distance_range: Option<Vec<f64>>,
    },
    /// Compare generated channels against a reference set.
    Eval {
        /// Reference file (default: the run's dataset); its test split is used when present.
        #[arg(long)]
        real: Option<PathBuf>,
        /// Generated file (default: `<out-dir>/generated.txt`).
        #[arg(long)]
        generated: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = cli.out_dir {
        cfg.out_dir = d;
    }
    let cfg = cfg.resolve()?;
    match cli.command {
        Command::Dataset => println!("{}", cmd_dataset(&cfg)?),
        Command::Train { dataset, resume } => {
            let r = cmd_train(&cfg, dataset.as_deref(), resume.as_deref())?;
            println!("trained to epoch {} ({} critic updates)", r.epochs, r.iterations);
            for p in r.checkpoints {
                println!("wrote {}", p.display());
            }
        }
        Command::Sample { checkpoint, count, distance, distance_range } => {
            let ck = checkpoint
                .or_else(|| cfg.checkpoint_path.clone())
                .or_else(|| latest_checkpoint(&cfg.out_dir))
                .ok_or_else(|| Error::Config("no checkpoint given and none found in the out dir".into()))?;
            let distances = match (distance, distance_range) {
                (Some(d), _) => Distances::Fixed(d),
                (None, Some(r)) => Distances::Range(r[0], r[1]),
                (None, None) => Distances::Trained,
            };
            println!("wrote {}", cmd_sample(&cfg, &ck, count, distances)?.display());
        }
        Command::Eval { real, generated } => {
            let real = real.unwrap_or_else(|| default_dataset(&cfg));
            let generated = generated.unwrap_or_else(|| cfg.out_dir.join(GENERATED_FILE));
            let s = cmd_eval(&cfg, &real, &generated)?;
            println!(
                "delay spread {:.3} ns vs {:.3} ns, angular spread {:.3} deg vs {:.3} deg, PDAP RMSE {:.3} dB",
                s.mean_delay_spread_real_ns,
                s.mean_delay_spread_gen_ns,
                s.mean_angular_spread_real_deg,
                s.mean_angular_spread_gen_deg,
                s.pdap_rmse_db
            );
            if let Some(q) = s.ssim {
                println!("SSIM median {:.4} over {} pairs", q.median, q.pairs);
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
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
