//! Adversarial training: minibatch schedule, logging, checkpoints and
//! divergence detection.
//!
//! Every minibatch gets one critic update; after every `critic_steps`-th
//! critic update (counted over the whole run) the generator is updated
//! once. Randomness comes from the named streams of [`TrainStreams`], and
//! checkpoints are taken only at epoch boundaries, so resuming from one
//! replays the uninterrupted run bit for bit.

mod config;
mod log;
mod steps;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{ChannelSample, Scaler, FLAT_LEN};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{angular_spread, delay_spread, mean_of};
use crate::model::checkpoint::Checkpoint;
use crate::model::{Model, ModelConfig};
use crate::numerics::{OptimizerState, Tensor};
use crate::rng::{standard_normal, StreamState, TrainStreams};
use crate::scalar::Scalar;

pub use config::{ConditionPairing, CriticMode, TrainConfig};
pub use log::{EvalRecord, TrainLog, TrainRecord, EVAL_HEADER, RECORD_HEADER};
pub use steps::{
    critic_gradients, discriminator_step, generator_gradients, generator_step, grad_norm,
    gradient_penalty, CriticStats, GeneratorStats,
};

/// Objective magnitude beyond which training is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Receives progress while training runs.
pub trait TrainSink<T> {
    fn record(&mut self, _record: &TrainRecord) -> Result<()> {
        Ok(())
    }
    fn eval(&mut self, _record: &EvalRecord) -> Result<()> {
        Ok(())
    }
    fn checkpoint(&mut self, _checkpoint: &Checkpoint<T>) -> Result<()> {
        Ok(())
    }
    /// Called with the state reached when divergence was detected, before
    /// the error is returned.
    fn diverged(&mut self, _checkpoint: &Checkpoint<T>) -> Result<()> {
        Ok(())
    }
}

/// A sink that ignores everything.
pub struct NullSink;

impl<T> TrainSink<T> for NullSink {}

pub struct TrainOutcome<T> {
    pub checkpoint: Checkpoint<T>,
    pub log: TrainLog,
}

/// The normalized training split.
struct Prepared<T> {
    rows: Vec<Vec<T>>,
    conditions: Vec<T>,
}

impl<T: Scalar> Prepared<T> {
    fn new(samples: &[ChannelSample], scaler: &Scaler) -> Result<Self> {
        let mut rows = Vec::with_capacity(samples.len());
        let mut conditions = Vec::with_capacity(samples.len());
        for s in samples {
            let (flat, c) = scaler.normalize(s)?;
            rows.push(flat.into_iter().map(T::of).collect());
            conditions.push(T::of(c));
        }
        Ok(Self { rows, conditions })
    }

    fn batch(&self, idx: &[usize]) -> (Tensor<T>, Tensor<T>) {
        let x: Vec<T> = idx.iter().flat_map(|&i| self.rows[i].iter().copied()).collect();
        let c: Vec<T> = idx.iter().map(|&i| self.conditions[i]).collect();
        (
            Tensor::from_parts(vec![idx.len(), FLAT_LEN], x),
            Tensor::from_parts(vec![idx.len(), 1], c),
        )
    }

    fn resampled_conditions(&self, n: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
        let c: Vec<T> = (0..n)
            .map(|_| self.conditions[rng.random_range(0..self.conditions.len())])
            .collect();
        Tensor::from_parts(vec![n, 1], c)
    }
}

fn noise<T: Scalar>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let data = (0..rows * cols).map(|_| T::of(standard_normal(rng))).collect();
    Tensor::from_parts(vec![rows, cols], data)
}

/// Rows generated per forward pass when sampling.
const SAMPLE_CHUNK: usize = 256;

/// Draws one channel per entry of `distances` (meters) from the generator,
/// mapped back to physical units with `scaler`.
pub fn sample_channels<T: Scalar>(
    model: &Model<T>,
    scaler: &Scaler,
    distances: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ChannelSample>> {
    let range = scaler.distance;
    let mut out = Vec::with_capacity(distances.len());
    for chunk in distances.chunks(SAMPLE_CHUNK) {
        let z = noise::<T>(chunk.len(), model.config.noise_dim, rng);
        let c: Vec<T> = chunk.iter().map(|&d| T::of(range.forward(d))).collect();
        let x = model.generate(&z, &Tensor::from_parts(vec![chunk.len(), 1], c))?;
        for (i, &d) in chunk.iter().enumerate() {
            let row: Vec<f64> = x.data()[i * FLAT_LEN..(i + 1) * FLAT_LEN]
                .iter()
                .map(|v| v.as_f64())
                .collect();
            // keep the requested distance exactly rather than its
            // normalized round trip
            let s = scaler.denormalize(&row, range.forward(d))?;
            out.push(ChannelSample::new(s.mpcs().to_vec(), d)?);
        }
    }
    Ok(out)
}

fn check_finite(iteration: u64, what: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
        return Err(Error::Divergence {
            iteration,
            message: format!("{what} = {v}"),
        });
    }
    Ok(())
}

/// Training state between epochs.
pub struct TrainState<T> {
    pub model: Model<T>,
    pub generator_opt: OptimizerState<T>,
    pub critic_opt: OptimizerState<T>,
    pub streams: TrainStreams,
    pub epoch: u64,
    pub iteration: u64,
    pub seed: u64,
}

impl<T: Scalar> TrainState<T> {
    /// Fresh parameters for `config` seeded by `train.seed`; the critic's
    /// output layer follows the critic mode.
    pub fn init(config: &ModelConfig, train: &TrainConfig) -> Result<Self> {
        let mut config = config.clone();
        config.critic_sigmoid = train.critic_mode.uses_sigmoid();
        let mut streams = TrainStreams::new(train.seed);
        let model = Model::init(&config, &mut streams.init)?;
        Ok(Self {
            model,
            generator_opt: OptimizerState::sgd(train.generator_lr),
            critic_opt: OptimizerState::adam(train.critic_lr),
            streams,
            epoch: 0,
            iteration: 0,
            seed: train.seed,
        })
    }

    pub fn from_checkpoint(ck: Checkpoint<T>) -> Result<Self> {
        let states: [StreamState; TrainStreams::COUNT] = ck
            .streams
            .as_slice()
            .try_into()
            .map_err(|_| Error::Checkpoint(format!("expected {} rng streams", TrainStreams::COUNT)))?;
        Ok(Self {
            model: ck.model,
            generator_opt: ck.generator_opt,
            critic_opt: ck.critic_opt,
            streams: TrainStreams::restore(&states),
            epoch: ck.epoch,
            iteration: ck.iteration,
            seed: ck.seed,
        })
    }

    pub fn checkpoint(&self, scaler: &Scaler) -> Checkpoint<T> {
        Checkpoint {
            model: self.model.clone(),
            scaler: *scaler,
            epoch: self.epoch,
            iteration: self.iteration,
            seed: self.seed,
            streams: self.streams.capture().to_vec(),
            generator_opt: self.generator_opt.clone(),
            critic_opt: self.critic_opt.clone(),
        }
    }
}

/// Runs epochs `state.epoch .. train.epochs` over the training split.
pub fn run<T: Scalar>(
    state: &mut TrainState<T>,
    dataset: &Dataset,
    train: &TrainConfig,
    sink: &mut dyn TrainSink<T>,
) -> Result<TrainLog> {
    train.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let mode = train.critic_mode;
    if state.model.config.critic_sigmoid != mode.uses_sigmoid() {
        return Err(Error::Config(format!(
            "critic mode {} does not match the model's critic output",
            mode.name()
        )));
    }
    let data = Prepared::<T>::new(&dataset.train, &dataset.scaler)?;
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..data.rows.len()).collect();
    let steps = train.critic_steps as u64;
    let noise_dim = state.model.config.noise_dim;

    while state.epoch < train.epochs as u64 {
        let epoch = state.epoch + 1;
        // reshuffle from the identity so an epoch depends only on the stream
        order.sort_unstable();
        order.shuffle(&mut state.streams.shuffle);
        for idx in order.chunks(train.batch_size) {
            let n = idx.len();
            let (x_real, c_real) = data.batch(idx);
            let c_fake = match train.condition_pairing {
                ConditionPairing::Resample => data.resampled_conditions(n, &mut state.streams.condition),
                ConditionPairing::Paired => c_real.clone(),
            };
            let z = noise::<T>(n, noise_dim, &mut state.streams.noise);
            let x_fake = state.model.generate(&z, &c_fake)?;
            let eps: Vec<f64> = (0..n).map(|_| state.streams.epsilon.random::<f64>()).collect();
            let iteration = state.iteration + 1;
            let d = discriminator_step(
                &mut state.model,
                &mut state.critic_opt,
                mode,
                train.penalty_weight,
                &x_real,
                &c_real,
                &x_fake,
                &c_fake,
                &eps,
            );
            state.iteration = iteration;
            let d = match d.and_then(|d| check_finite(iteration, "critic objective", d.loss).map(|_| d)) {
                Ok(d) => d,
                Err(e) => return diverge(state, dataset, sink, e),
            };

            let mut g = None;
            if iteration.is_multiple_of(steps) {
                let c = match train.condition_pairing {
                    ConditionPairing::Resample => data.resampled_conditions(n, &mut state.streams.condition),
                    ConditionPairing::Paired => c_real.clone(),
                };
                let z = noise::<T>(n, noise_dim, &mut state.streams.noise);
                let r = generator_step(&mut state.model, &mut state.generator_opt, mode, &z, &c)
                    .and_then(|s| check_finite(iteration, "generator objective", s.loss).map(|_| s));
                match r {
                    Ok(s) => g = Some(s),
                    Err(e) => return diverge(state, dataset, sink, e),
                }
            }
            let record = TrainRecord {
                iteration,
                epoch,
                d_loss: d.loss,
                g_loss: g.map(|s| s.loss),
                penalty: d.penalty,
                d_grad_norm: d.grad_norm,
                g_grad_norm: g.map(|s| s.grad_norm),
            };
            sink.record(&record)?;
            log.records.push(record);
        }
        state.epoch = epoch;

        if train.eval_interval > 0 && epoch.is_multiple_of(train.eval_interval as u64) {
            let record = evaluate_progress(state, dataset, train)?;
            sink.eval(&record)?;
            log.evals.push(record);
        }
        let last = epoch == train.epochs as u64;
        if last || (train.checkpoint_interval > 0 && epoch.is_multiple_of(train.checkpoint_interval as u64)) {
            sink.checkpoint(&state.checkpoint(&dataset.scaler))?;
        }
    }
    Ok(log)
}

fn diverge<T: Scalar>(
    state: &TrainState<T>,
    dataset: &Dataset,
    sink: &mut dyn TrainSink<T>,
    err: Error,
) -> Result<TrainLog> {
    if matches!(err, Error::Divergence { .. }) {
        sink.diverged(&state.checkpoint(&dataset.scaler))?;
    }
    Err(err)
}

/// Mean spreads of a generated set against the held-out split (or the
/// training split when there is none).
fn evaluate_progress<T: Scalar>(
    state: &mut TrainState<T>,
    dataset: &Dataset,
    train: &TrainConfig,
) -> Result<EvalRecord> {
    let reference = if dataset.test.is_empty() { &dataset.train } else { &dataset.test };
    let distances: Vec<f64> = reference
        .iter()
        .cycle()
        .take(train.eval_samples.max(1))
        .map(|s| s.distance())
        .collect();
    let generated = sample_channels(&state.model, &dataset.scaler, &distances, &mut state.streams.eval)?;
    let real_delay = mean_of(reference, delay_spread)?;
    let real_angle = mean_of(reference, angular_spread)?;
    let gen_delay = mean_of(&generated, delay_spread)?;
    let gen_angle = mean_of(&generated, angular_spread)?;
    Ok(EvalRecord {
        epoch: state.epoch,
        iteration: state.iteration,
        delay_spread_real_ns: real_delay * 1e9,
        delay_spread_gen_ns: gen_delay * 1e9,
        delay_spread_rel_gap: (gen_delay - real_delay).abs() / real_delay,
        angular_spread_real_deg: real_angle,
        angular_spread_gen_deg: gen_angle,
        angular_spread_rel_gap: (gen_angle - real_angle).abs() / real_angle,
    })
}

/// Trains from scratch, or continues from `resume`, up to `train.epochs`.
pub fn train<T: Scalar>(
    dataset: &Dataset,
    model: &ModelConfig,
    train: &TrainConfig,
    resume: Option<Checkpoint<T>>,
    sink: &mut dyn TrainSink<T>,
) -> Result<TrainOutcome<T>> {
    let mut state = match resume {
        Some(ck) => TrainState::from_checkpoint(ck)?,
        None => TrainState::init(model, train)?,
    };
    let log = run(&mut state, dataset, train, sink)?;
    Ok(TrainOutcome {
        checkpoint: state.checkpoint(&dataset.scaler),
        log,
    })
}
