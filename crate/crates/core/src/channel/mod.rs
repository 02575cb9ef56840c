//! Multipath channel samples and their mapping to the flat normalized
//! vectors the networks consume.
//!
//! A sample is a list of [`NUM_MPCS`] multipath components sorted by delay,
//! the first being the line-of-sight path at azimuth zero, plus the link
//! distance it was observed at. Flattened, every component contributes
//! `(gain, phase, delay, aoa)` in that order, giving [`FLAT_LEN`] values.

pub mod io;
mod scaler;

use std::f64::consts::TAU;

use crate::error::{Error, Result};

pub use scaler::{Feature, Range, Scaler};

/// Multipath components per sample.
pub const NUM_MPCS: usize = 15;
/// Parameters per component.
pub const MPC_FEATURES: usize = 4;
/// Length of the flattened parameter vector.
pub const FLAT_LEN: usize = NUM_MPCS * MPC_FEATURES;

/// One propagation path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mpc {
    /// Linear amplitude gain, strictly positive.
    pub gain: f64,
    /// Phase in radians, `[0, 2π)`.
    pub phase: f64,
    /// Absolute delay in seconds.
    pub delay: f64,
    /// Azimuth angle of arrival in degrees, `[-180, 180)`.
    pub aoa: f64,
}

impl Mpc {
    pub fn gain_db(&self) -> f64 {
        20.0 * self.gain.log10()
    }

    pub fn power(&self) -> f64 {
        self.gain * self.gain
    }

    fn validate(&self, index: usize) -> Result<()> {
        let fields = [self.gain, self.phase, self.delay, self.aoa];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("mpc {index}: non-finite field")));
        }
        if self.gain <= 0.0 {
            return Err(Error::Validation(format!(
                "mpc {index}: gain {} must be positive",
                self.gain
            )));
        }
        if self.delay < 0.0 {
            return Err(Error::Validation(format!(
                "mpc {index}: negative delay {}",
                self.delay
            )));
        }
        if !(0.0..TAU).contains(&self.phase) {
            return Err(Error::Validation(format!(
                "mpc {index}: phase {} outside [0, 2pi)",
                self.phase
            )));
        }
        if !(-180.0..180.0).contains(&self.aoa) {
            return Err(Error::Validation(format!(
                "mpc {index}: aoa {} outside [-180, 180)",
                self.aoa
            )));
        }
        Ok(())
    }
}

/// A validated channel realization.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSample {
    mpcs: Vec<Mpc>,
    distance: f64,
}

impl ChannelSample {
    /// Validates count, field ranges, delay ordering and the zero-degree
    /// line-of-sight reference.
    pub fn new(mpcs: Vec<Mpc>, distance: f64) -> Result<Self> {
        if mpcs.len() != NUM_MPCS {
            return Err(Error::Validation(format!(
                "expected {NUM_MPCS} mpcs, got {}",
                mpcs.len()
            )));
        }
        if !(distance.is_finite() && distance > 0.0) {
            return Err(Error::Validation(format!("distance {distance} must be positive")));
        }
        for (i, m) in mpcs.iter().enumerate() {
            m.validate(i)?;
        }
        if mpcs.windows(2).any(|w| w[1].delay < w[0].delay) {
            return Err(Error::Validation("mpcs not sorted by delay".into()));
        }
        if mpcs[0].aoa != 0.0 {
            return Err(Error::Validation(format!(
                "line-of-sight aoa is {}, expected 0",
                mpcs[0].aoa
            )));
        }
        Ok(Self { mpcs, distance })
    }

    pub fn mpcs(&self) -> &[Mpc] {
        &self.mpcs
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn line_of_sight(&self) -> &Mpc {
        &self.mpcs[0]
    }
}

impl Scaler {
    /// Maps a sample to its MPC-major normalized vector and the normalized
    /// distance. Gains are scaled in dB; out-of-range values clip to the
    /// unit interval.
    pub fn normalize(&self, sample: &ChannelSample) -> Result<(Vec<f64>, f64)> {
        self.check()?;
        let mut flat = Vec::with_capacity(FLAT_LEN);
        for m in sample.mpcs() {
            flat.push(self.gain_db.forward(m.gain_db()));
            flat.push(self.phase.forward(m.phase));
            flat.push(self.delay.forward(m.delay));
            flat.push(self.aoa.forward(m.aoa));
        }
        Ok((flat, self.distance.forward(sample.distance())))
    }

    /// Inverse of [`Scaler::normalize`]. Entries are clamped to `[0, 1]`,
    /// components are re-sorted by delay and the earliest one is pinned to
    /// the zero-degree line-of-sight reference.
    pub fn denormalize(&self, flat: &[f64], condition: f64) -> Result<ChannelSample> {
        self.check()?;
        if flat.len() != FLAT_LEN {
            return Err(Error::Shape {
                op: "denormalize",
                lhs: vec![flat.len()],
                rhs: vec![FLAT_LEN],
            });
        }
        if flat.iter().any(|v| !v.is_finite()) || !condition.is_finite() {
            return Err(Error::Validation("non-finite normalized value".into()));
        }
        let mut mpcs: Vec<Mpc> = flat
            .chunks(MPC_FEATURES)
            .map(|f| {
                let phase = self.phase.inverse(f[1]);
                let mut aoa = self.aoa.inverse(f[3]);
                if aoa >= 180.0 {
                    aoa -= 360.0;
                }
                Mpc {
                    gain: 10f64.powf(self.gain_db.inverse(f[0]) / 20.0),
                    phase: if phase >= TAU { phase - TAU } else { phase.max(0.0) },
                    delay: self.delay.inverse(f[2]).max(0.0),
                    aoa: aoa.max(-180.0),
                }
            })
            .collect();
        mpcs.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        mpcs[0].aoa = 0.0;
        ChannelSample::new(mpcs, self.distance.inverse(condition))
    }
}
