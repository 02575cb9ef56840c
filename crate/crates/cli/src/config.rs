//! Run configuration: every tunable of the pipeline behind one flat
//! `key = value` namespace.
//!
//! ```text
//! # comments and blank lines are ignored
//! seed = 7
//! dataset.sample_count = 5000
//! model.num_layers = 2
//! train.critic_mode = wgan
//! ```
//!
//! Keys not listed by [`RunConfig::entries`] are rejected, so typos fail
//! loudly instead of silently running with a default.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tgan_core::dataset::GeneratorConfig;
use tgan_core::metrics::EvalConfig;
use tgan_core::model::{ModelConfig, OutputActivation};
use tgan_core::training::{ConditionPairing, CriticMode, TrainConfig};
use tgan_core::{Error, Result};

/// Name of the resolved configuration written beside every output.
pub const RESOLVED_NAME: &str = "run_config.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Master seed; drives dataset generation, training and sampling.
    pub seed: u64,
    pub dataset: GeneratorConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub dataset_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let dataset = GeneratorConfig::default();
        Self {
            seed: dataset.seed,
            dataset,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            dataset_path: None,
            checkpoint_path: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let d = &mut self.dataset;
        let m = &mut self.model;
        let e = &mut m.encoder;
        let t = &mut self.train;
        let g = &mut self.eval.grid;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "dataset.sample_count" => d.sample_count = parse(key, value)?,
            "dataset.distance_min" => d.distance_range.0 = parse(key, value)?,
            "dataset.distance_max" => d.distance_range.1 = parse(key, value)?,
            "dataset.carrier_frequency" => d.carrier_frequency = parse(key, value)?,
            "dataset.delay_decay" => d.delay_decay = parse(key, value)?,
            "dataset.angle_scale" => d.angle_scale = parse(key, value)?,
            "dataset.shadowing_db" => d.shadowing_db = parse(key, value)?,
            "model.num_layers" => e.num_layers = parse(key, value)?,
            "model.num_heads" => e.num_heads = parse(key, value)?,
            "model.model_dim" => e.model_dim = parse(key, value)?,
            "model.key_dim" => e.key_dim = parse(key, value)?,
            "model.value_dim" => e.value_dim = parse(key, value)?,
            "model.ffn_dim" => e.ffn_dim = parse(key, value)?,
            "model.leaky_slope" => e.leaky_slope = parse(key, value)?,
            "model.norm_eps" => e.norm_eps = parse(key, value)?,
            "model.noise_dim" => m.noise_dim = parse(key, value)?,
            "model.generator_hidden" => m.generator_hidden = parse(key, value)?,
            "model.generator_output_activation" => m.generator_output = OutputActivation::parse(value)?,
            "train.epochs" => t.epochs = parse(key, value)?,
            "train.batch_size" => t.batch_size = parse(key, value)?,
            "train.penalty_weight" => t.penalty_weight = parse(key, value)?,
            "train.critic_steps" => t.critic_steps = parse(key, value)?,
            "train.generator_lr" => t.generator_lr = parse(key, value)?,
            "train.critic_lr" => t.critic_lr = parse(key, value)?,
            "train.checkpoint_interval" => t.checkpoint_interval = parse(key, value)?,
            "train.eval_interval" => t.eval_interval = parse(key, value)?,
            "train.eval_samples" => t.eval_samples = parse(key, value)?,
            "train.critic_mode" => t.critic_mode = CriticMode::parse(value)?,
            "train.condition_pairing" => t.condition_pairing = ConditionPairing::parse(value)?,
            "eval.pair_tolerance" => self.eval.pair_tolerance = parse(key, value)?,
            "grid.delay_start" => g.delay_start = parse(key, value)?,
            "grid.delay_bin" => g.delay_bin = parse(key, value)?,
            "grid.delay_bins" => g.delay_bins = parse(key, value)?,
            "grid.angle_start" => g.angle_start = parse(key, value)?,
            "grid.angle_bin" => g.angle_bin = parse(key, value)?,
            "grid.angle_bins" => g.angle_bins = parse(key, value)?,
            "grid.floor_db" => g.floor_db = parse(key, value)?,
            "paths.dataset" => self.dataset_path = opt_path(value),
            "paths.checkpoint" => self.checkpoint_path = opt_path(value),
            "paths.out_dir" => self.out_dir = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let d = &self.dataset;
        let m = &self.model;
        let e = &m.encoder;
        let t = &self.train;
        let g = &self.eval.grid;
        vec![
            ("seed", self.seed.to_string()),
            ("dataset.sample_count", d.sample_count.to_string()),
            ("dataset.distance_min", d.distance_range.0.to_string()),
            ("dataset.distance_max", d.distance_range.1.to_string()),
            ("dataset.carrier_frequency", d.carrier_frequency.to_string()),
            ("dataset.delay_decay", d.delay_decay.to_string()),
            ("dataset.angle_scale", d.angle_scale.to_string()),
            ("dataset.shadowing_db", d.shadowing_db.to_string()),
            ("model.num_layers", e.num_layers.to_string()),
            ("model.num_heads", e.num_heads.to_string()),
            ("model.model_dim", e.model_dim.to_string()),
            ("model.key_dim", e.key_dim.to_string()),
            ("model.value_dim", e.value_dim.to_string()),
            ("model.ffn_dim", e.ffn_dim.to_string()),
            ("model.leaky_slope", e.leaky_slope.to_string()),
            ("model.norm_eps", e.norm_eps.to_string()),
            ("model.noise_dim", m.noise_dim.to_string()),
            ("model.generator_hidden", m.generator_hidden.to_string()),
            ("model.generator_output_activation", m.generator_output.name().to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.penalty_weight", t.penalty_weight.to_string()),
            ("train.critic_steps", t.critic_steps.to_string()),
            ("train.generator_lr", t.generator_lr.to_string()),
            ("train.critic_lr", t.critic_lr.to_string()),
            ("train.checkpoint_interval", t.checkpoint_interval.to_string()),
            ("train.eval_interval", t.eval_interval.to_string()),
            ("train.eval_samples", t.eval_samples.to_string()),
            ("train.critic_mode", t.critic_mode.name().to_string()),
            ("train.condition_pairing", t.condition_pairing.name().to_string()),
            ("eval.pair_tolerance", self.eval.pair_tolerance.to_string()),
            ("grid.delay_start", g.delay_start.to_string()),
            ("grid.delay_bin", g.delay_bin.to_string()),
            ("grid.delay_bins", g.delay_bins.to_string()),
            ("grid.angle_start", g.angle_start.to_string()),
            ("grid.angle_bin", g.angle_bin.to_string()),
            ("grid.angle_bins", g.angle_bins.to_string()),
            ("grid.floor_db", g.floor_db.to_string()),
            ("paths.dataset", path_text(&self.dataset_path)),
            ("paths.checkpoint", path_text(&self.checkpoint_path)),
            ("paths.out_dir", self.out_dir.display().to_string()),
        ]
    }

    /// Applies `key = value` lines on top of `self`. Errors name the line.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`", n + 1)));
            };
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(c)
    }

    /// Copies the master seed into the component configs and validates
    /// them.
    pub fn resolve(mut self) -> Result<Self> {
        self.dataset.seed = self.seed;
        self.train.seed = self.seed;
        self.dataset.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.eval.grid.validate()?;
        if self.eval.pair_tolerance.is_nan() || self.eval.pair_tolerance < 0.0 {
            return Err(Error::Config("eval.pair_tolerance must be non-negative".into()));
        }
        Ok(self)
    }

    /// The resolved configuration as parseable text.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# resolved run configuration\n");
        for (k, v) in self.entries() {
            out.push_str(format!("{k} = {v}").trim_end());
            out.push('\n');
        }
        out
    }
}
