//! Seeded synthetic ground truth: an exponential-decay stochastic channel
//! model with a deterministic line-of-sight path.
//!
//! Per sample at distance `d`:
//! - LoS: delay `d / c`, azimuth 0, free-space amplitude `λ / (4π d)`;
//! - 14 scattered paths with exponential excess delays (mean
//!   `delay_decay`), amplitude `LoS · exp(-excess / delay_decay)` times
//!   log-normal shadowing, wrapped-Laplacian azimuths of scale
//!   `angle_scale`;
//! - all phases uniform on `[0, 2π)`.

use std::f64::consts::{PI, TAU};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::channel::{ChannelSample, Mpc, Scaler, NUM_MPCS};
use crate::error::{Error, Result};
use crate::rng;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Fraction of samples in the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub sample_count: usize,
    /// Link distance range in meters, `[min, max]`.
    pub distance_range: (f64, f64),
    pub carrier_frequency: f64,
    /// Mean excess delay of scattered paths, seconds.
    pub delay_decay: f64,
    /// Laplacian scale of scattered azimuths, degrees.
    pub angle_scale: f64,
    /// Standard deviation of amplitude shadowing, dB.
    pub shadowing_db: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            sample_count: 2000,
            distance_range: (1.0, 30.0),
            carrier_frequency: 3.0e11,
            delay_decay: 20e-9,
            angle_scale: 35.0,
            shadowing_db: 3.0,
            seed: 1,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.distance_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Config(format!(
                "distance range [{lo}, {hi}] must satisfy 0 < min < max"
            )));
        }
        for (name, v) in [
            ("carrier_frequency", self.carrier_frequency),
            ("delay_decay", self.delay_decay),
            ("angle_scale", self.angle_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.shadowing_db >= 0.0 && self.shadowing_db.is_finite()) {
            return Err(Error::Config("shadowing_db must be non-negative".into()));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// Free-space amplitude gain at distance `d`.
    pub fn free_space_gain(&self, distance: f64) -> f64 {
        self.wavelength() / (4.0 * PI * distance)
    }
}

/// Zero-mean Laplacian sample by inverse transform.
fn laplacian<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Wraps degrees into `[-180, 180)`.
pub fn wrap_degrees(a: f64) -> f64 {
    if (-180.0..180.0).contains(&a) {
        return a;
    }
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        -180.0
    } else {
        w
    }
}

/// Draws one channel at `distance`.
pub fn generate_sample<R: Rng + ?Sized>(
    config: &GeneratorConfig,
    distance: f64,
    rng: &mut R,
) -> Result<ChannelSample> {
    let (lo, hi) = config.distance_range;
    if !(lo..=hi).contains(&distance) {
        return Err(Error::Domain(format!(
            "distance {distance} m outside [{lo}, {hi}]"
        )));
    }
    let los_gain = config.free_space_gain(distance);
    let los_delay = distance / SPEED_OF_LIGHT;
    let mut mpcs = Vec::with_capacity(NUM_MPCS);
    mpcs.push(Mpc {
        gain: los_gain,
        phase: rng.random::<f64>() * TAU,
        delay: los_delay,
        aoa: 0.0,
    });
    let excess_law = Exp::new(1.0 / config.delay_decay)
        .map_err(|e| Error::Config(format!("delay_decay: {e}")))?;
    let mut excess: Vec<f64> = (1..NUM_MPCS).map(|_| excess_law.sample(rng)).collect();
    excess.sort_by(f64::total_cmp);
    for tau in excess {
        let shadow_db = config.shadowing_db * rng::standard_normal(rng);
        mpcs.push(Mpc {
            gain: los_gain * (-tau / config.delay_decay).exp() * 10f64.powf(shadow_db / 20.0),
            phase: rng.random::<f64>() * TAU,
            delay: los_delay + tau,
            aoa: wrap_degrees(laplacian(rng, config.angle_scale)),
        });
    }
    ChannelSample::new(mpcs, distance)
}

/// Generated samples split for training, with the scaler fit on the
/// training part only.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Vec<ChannelSample>,
    pub test: Vec<ChannelSample>,
    pub scaler: Scaler,
}

/// Sample `index` of the dataset seeded by `seed`, with its own stream so
/// any subset can be regenerated independently.
pub fn indexed_sample(config: &GeneratorConfig, index: usize) -> Result<ChannelSample> {
    let mut r = rng::stream(config.seed, index as u64);
    let (lo, hi) = config.distance_range;
    let d = lo + (hi - lo) * r.random::<f64>();
    generate_sample(config, d, &mut r)
}

pub fn generate_samples(config: &GeneratorConfig) -> Result<Vec<ChannelSample>> {
    config.validate()?;
    (0..config.sample_count)
        .map(|i| indexed_sample(config, i))
        .collect()
}

pub fn generate_dataset(config: &GeneratorConfig) -> Result<Dataset> {
    if config.sample_count < 10 {
        return Err(Error::Config(format!(
            "sample_count {} too small to split (need >= 10)",
            config.sample_count
        )));
    }
    let mut samples = generate_samples(config)?;
    let mut shuffler = rng::stream(config.seed, u64::MAX);
    samples.shuffle(&mut shuffler);
    let n_train = (config.sample_count as f64 * TRAIN_FRACTION).round() as usize;
    let test = samples.split_off(n_train);
    let scaler = Scaler::fit(&samples)?;
    Ok(Dataset {
        train: samples,
        test,
        scaler,
    })
}
