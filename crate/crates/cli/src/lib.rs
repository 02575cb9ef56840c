//! Subcommands of the `tgan` binary as library functions, so tests can
//! drive them without spawning processes.

pub mod config;

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use tgan_core::channel::io::{load_samples, save_samples, save_scaler, SampleList};
use tgan_core::channel::{ChannelSample, Scaler};
use tgan_core::dataset::{generate_dataset, Dataset};
use tgan_core::metrics::{angular_spread, delay_spread, evaluate, mean_of, EvalSummary};
use tgan_core::training::{
    sample_channels, train, EvalRecord, TrainRecord, TrainSink, EVAL_HEADER, RECORD_HEADER,
};
use tgan_core::{rng, Checkpoint64, Error, Result};

pub use config::{RunConfig, RESOLVED_NAME};

/// Exit status for ordinary failures (bad input, I/O, configuration).
pub const EXIT_FAILURE: i32 = 1;
/// Exit status when training stopped because the objectives blew up.
pub const EXIT_DIVERGED: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } => EXIT_DIVERGED,
        _ => EXIT_FAILURE,
    }
}

pub const DATASET_FILE: &str = "dataset.txt";
pub const SCALER_FILE: &str = "scaler.txt";
pub const GENERATED_FILE: &str = "generated.txt";
pub const TRAINLOG_FILE: &str = "trainlog.csv";
pub const EVALLOG_FILE: &str = "evallog.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DIVERGED_CHECKPOINT: &str = "checkpoint_diverged.bin";

/// RNG stream ids under the master seed for the sampling command.
const SAMPLE_DISTANCE_STREAM: u64 = 1 << 40;
const SAMPLE_NOISE_STREAM: u64 = (1 << 40) + 1;

pub fn checkpoint_name(epoch: u64) -> String {
    format!("checkpoint_{epoch:06}.bin")
}

fn prepare_out_dir(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join(RESOLVED_NAME), cfg.to_text())?;
    Ok(())
}

fn split_list(ds: &Dataset) -> SampleList {
    let mut samples = ds.train.clone();
    samples.extend(ds.test.iter().cloned());
    SampleList {
        samples,
        train_count: Some(ds.train.len()),
    }
}

pub fn cmd_dataset(cfg: &RunConfig) -> Result<String> {
    let ds = generate_dataset(&cfg.dataset)?;
    prepare_out_dir(cfg)?;
    save_samples(&cfg.out_dir.join(DATASET_FILE), &split_list(&ds))?;
    save_scaler(&cfg.out_dir.join(SCALER_FILE), &ds.scaler)?;
    let all: Vec<ChannelSample> = ds.train.iter().chain(&ds.test).cloned().collect();
    Ok(format!(
        "samples: {} (train {}, test {})\nmean delay spread: {:.4} ns\nmean angular spread: {:.4} deg",
        all.len(),
        ds.train.len(),
        ds.test.len(),
        mean_of(&all, delay_spread)? * 1e9,
        mean_of(&all, angular_spread)?
    ))
}

fn dataset_path(cfg: &RunConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.dataset_path.clone())
        .unwrap_or_else(|| cfg.out_dir.join(DATASET_FILE))
}

/// A stored list as a training set; an unsplit list trains on everything.
fn load_dataset(path: &Path) -> Result<Dataset> {
    let list = load_samples(path)?;
    let train = list.train().to_vec();
    if train.is_empty() {
        return Err(Error::Config(format!("{}: no training records", path.display())));
    }
    Ok(Dataset {
        scaler: Scaler::fit(&train)?,
        test: list.test().to_vec(),
        train,
    })
}

/// Writes checkpoints and CSV logs into the output directory as training
/// progresses.
struct FileSink {
    dir: PathBuf,
    records: BufWriter<File>,
    evals: BufWriter<File>,
    written: Vec<PathBuf>,
}

fn csv_log(path: &Path, header: &str, append: bool) -> Result<BufWriter<File>> {
    let exists = append && path.exists();
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(exists)
        .truncate(!exists)
        .open(path)?;
    let mut w = BufWriter::new(file);
    if !exists {
        writeln!(w, "{header}")?;
    }
    Ok(w)
}

impl FileSink {
    fn new(dir: &Path, resuming: bool) -> Result<Self> {
        Ok(Self {
            dir: dir.to_path_buf(),
            records: csv_log(&dir.join(TRAINLOG_FILE), RECORD_HEADER, resuming)?,
            evals: csv_log(&dir.join(EVALLOG_FILE), EVAL_HEADER, resuming)?,
            written: Vec::new(),
        })
    }

    fn flush(&mut self) -> Result<()> {
        self.records.flush()?;
        self.evals.flush()?;
        Ok(())
    }
}

impl TrainSink<f64> for FileSink {
    fn record(&mut self, r: &TrainRecord) -> Result<()> {
        writeln!(self.records, "{}", r.csv_row())?;
        Ok(())
    }

    fn eval(&mut self, r: &EvalRecord) -> Result<()> {
        writeln!(self.evals, "{}", r.csv_row())?;
        eprintln!(
            "epoch {}: delay spread {:.3} ns (real {:.3}), angular spread {:.3} deg (real {:.3})",
            r.epoch, r.delay_spread_gen_ns, r.delay_spread_real_ns, r.angular_spread_gen_deg, r.angular_spread_real_deg
        );
        Ok(())
    }

    fn checkpoint(&mut self, ck: &Checkpoint64) -> Result<()> {
        let path = self.dir.join(checkpoint_name(ck.epoch));
        ck.save(&path)?;
        self.written.push(path);
        self.flush()
    }

    fn diverged(&mut self, ck: &Checkpoint64) -> Result<()> {
        ck.save(&self.dir.join(DIVERGED_CHECKPOINT))?;
        self.flush()
    }
}

pub struct TrainReport {
    /// Checkpoints written by this run, in order.
    pub checkpoints: Vec<PathBuf>,
    pub epochs: u64,
    pub iterations: u64,
}

/// Trains on the dataset file, optionally continuing from a checkpoint.
/// A resumed run keeps the checkpoint's model configuration and appends
/// to existing logs.
pub fn cmd_train(cfg: &RunConfig, dataset: Option<&Path>, resume: Option<&Path>) -> Result<TrainReport> {
    let ds = load_dataset(&dataset_path(cfg, dataset))?;
    let resume = resume.map(Checkpoint64::load).transpose()?;
    if let Some(ck) = &resume {
        if ck.scaler != ds.scaler {
            return Err(Error::Config(
                "checkpoint was trained on a different dataset (scalers differ)".into(),
            ));
        }
    }
    prepare_out_dir(cfg)?;
    let mut sink = FileSink::new(&cfg.out_dir, resume.is_some())?;
    let result = train(&ds, &cfg.model, &cfg.train, resume, &mut sink);
    sink.flush()?;
    let outcome = result?;
    Ok(TrainReport {
        checkpoints: sink.written,
        epochs: outcome.checkpoint.epoch,
        iterations: outcome.checkpoint.iteration,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Distances {
    Fixed(f64),
    /// Uniform over `[min, max]` meters.
    Range(f64, f64),
    /// Uniform over the distance range the checkpoint was trained on.
    Trained,
}

/// Draws `count` channels from a checkpoint's generator into
/// `generated.txt`.
pub fn cmd_sample(cfg: &RunConfig, checkpoint: &Path, count: usize, distances: Distances) -> Result<PathBuf> {
    let ck = Checkpoint64::load(checkpoint)?;
    let (lo, hi) = match distances {
        Distances::Fixed(d) => (d, d),
        Distances::Range(lo, hi) => (lo, hi),
        Distances::Trained => (ck.scaler.distance.min, ck.scaler.distance.max),
    };
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
        return Err(Error::Config(format!("invalid distance range [{lo}, {hi}]")));
    }
    let mut dr = rng::stream(cfg.seed, SAMPLE_DISTANCE_STREAM);
    let ds: Vec<f64> = (0..count).map(|_| lo + (hi - lo) * dr.random::<f64>()).collect();
    let samples = sample_channels(&ck.model, &ck.scaler, &ds, &mut rng::stream(cfg.seed, SAMPLE_NOISE_STREAM))?;
    prepare_out_dir(cfg)?;
    let path = cfg.out_dir.join(GENERATED_FILE);
    save_samples(&path, &SampleList::unsplit(samples))?;
    Ok(path)
}

/// The records a file contributes to an evaluation: its test split if it
/// has a non-empty one, otherwise all records.
fn evaluation_set(path: &Path) -> Result<Vec<ChannelSample>> {
    let list = load_samples(path)?;
    let set = if list.train_count.is_some() && !list.test().is_empty() {
        list.test().to_vec()
    } else {
        list.samples
    };
    if set.is_empty() {
        return Err(Error::Config(format!("{}: no records to evaluate", path.display())));
    }
    Ok(set)
}

/// Compares a generated file against a reference file and writes the
/// CDF tables, average PDAPs, SSIM CDF and `summary.json`.
pub fn cmd_eval(cfg: &RunConfig, real: &Path, generated: &Path) -> Result<EvalSummary> {
    let r = evaluation_set(real)?;
    let g = evaluation_set(generated)?;
    let report = evaluate(&r, &g, &cfg.eval)?;
    prepare_out_dir(cfg)?;
    let out = |name: &str| cfg.out_dir.join(name);
    fs::write(out("cdf_delay_real.csv"), report.delay_real.to_csv())?;
    fs::write(out("cdf_delay_gen.csv"), report.delay_gen.to_csv())?;
    fs::write(out("cdf_angle_real.csv"), report.angle_real.to_csv())?;
    fs::write(out("cdf_angle_gen.csv"), report.angle_gen.to_csv())?;
    fs::write(out("pdap_real.csv"), report.pdap_real.to_csv())?;
    fs::write(out("pdap_gen.csv"), report.pdap_gen.to_csv())?;
    fs::write(out("ssim_cdf.csv"), report.ssim_cdf.to_csv())?;
    let json = serde_json::to_string_pretty(&report.summary)
        .map_err(|e| Error::Config(format!("summary serialization: {e}")))?;
    fs::write(out(SUMMARY_FILE), json + "\n")?;
    Ok(report.summary)
}

/// Default locations shared by the binary: the run's dataset and its
/// latest checkpoint.
pub fn default_dataset(cfg: &RunConfig) -> PathBuf {
    dataset_path(cfg, None)
}

/// Newest `checkpoint_*.bin` in the output directory by epoch number.
pub fn latest_checkpoint(dir: &Path) -> Option<PathBuf> {
    let mut found: Vec<(u64, PathBuf)> = fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let epoch = name.strip_prefix("checkpoint_")?.strip_suffix(".bin")?.parse().ok()?;
            Some((epoch, e.path()))
        })
        .collect();
    found.sort();
    found.pop().map(|(_, p)| p)
}

